import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdsig import owf
from qdsig.owf import CodeSpec, FamilyError


def brute_force_distance(rows, length):
    """Minimum Hamming distance over all pairs of distinct codewords."""
    words = set()
    for coeffs in itertools.product((0, 1), repeat=len(rows)):
        w = [0] * length
        for c, row in zip(coeffs, rows):
            if c:
                w = [x ^ int(y) for x, y in zip(w, row)]
        words.add(tuple(w))
    words = list(words)
    return min(sum(a != b for a, b in zip(u, v)) for u, v in itertools.combinations(words, 2))


def test_bit_helpers():
    assert owf.int_to_bits(5, 4) == "0101"
    assert owf.xor_bits("0110", "0011") == "0101"
    assert owf.array_to_bits(owf.bits_to_array("1001")) == "1001"
    with pytest.raises(FamilyError):
        owf.check_bits("012", 3)
    with pytest.raises(FamilyError):
        owf.check_bits("01", 3)


def test_gf2_rank():
    assert owf.gf2_rank(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])) == 2
    assert owf.gf2_rank(np.eye(4, dtype=np.uint8)) == 4


def test_rotation_family_parameters():
    fam = owf.rotation_family(3)
    assert fam.n == 1
    assert fam.delta == math.cos(math.pi / 8)
    with pytest.raises(FamilyError):
        owf.FamilyParams(owf.ROTATION, 3, 1, 0.5)


def test_rotation_states():
    fam = owf.rotation_family(2)
    # key j -> cos(j pi/4)|0> + sin(j pi/4)|1>
    for j in range(4):
        v = owf.state_vector(fam, None, owf.int_to_bits(j, 2))
        assert np.allclose(v, [math.cos(j * math.pi / 4), math.sin(j * math.pi / 4)])


def test_rotation_delta_exhaustive_matches_pairwise():
    fam = owf.rotation_family(4)
    worst = max(
        owf.pairwise_overlap(fam, None, owf.int_to_bits(a, 4), owf.int_to_bits(b, 4))
        for a, b in itertools.combinations(range(16), 2)
    )
    delta, certainty = owf.certify_delta(fam, None)
    assert certainty == owf.EXACT
    assert delta == pytest.approx(worst, abs=1e-12)
    assert delta == pytest.approx(fam.delta, abs=1e-12)


def test_repetition_code():
    code = owf.repetition_code(5)
    assert code.min_distance == 5
    assert owf.encode_codeword(code, "1") == "11111"


def test_code_rejects_dependent_rows():
    with pytest.raises(FamilyError):
        CodeSpec(4, 2, ("1100", "1100"))


def test_minimum_distance_matches_brute_force(rng):
    for _ in range(5):
        code = owf.random_code(10, 4, rng)
        assert code.min_distance == brute_force_distance(code.generator_rows, 10)


def test_fingerprint_qubits():
    assert owf.fingerprint_qubits(32) == 6
    assert owf.fingerprint_qubits(33) == 7
    assert owf.fingerprint_qubits(2) == 2
    with pytest.raises(FamilyError):
        owf.fingerprint_qubits(1)


def test_fingerprint_state_layout():
    code = CodeSpec(4, 2, ("1100", "0110"))
    fam = owf.fingerprint_family(code)
    v = owf.state_vector(fam, code, "10")
    # codeword 1100: basis index 2i + bit
    expected = np.zeros(8)
    expected[[1, 3, 4, 6]] = 0.5
    assert np.allclose(v, expected)


def test_fingerprint_delta_is_max_overlap(rng):
    code = owf.random_code(12, 4, rng)
    fam = owf.fingerprint_family(code)
    states = owf.all_state_vectors(fam, code)
    gram = np.abs(states @ states.conj().T)
    np.fill_diagonal(gram, 0)
    assert fam.delta == pytest.approx(gram.max(), abs=1e-12)
    assert fam.delta == pytest.approx(1 - code.min_distance / 12, abs=1e-12)


def test_all_state_vectors_rows_match(rng):
    code = owf.random_code(8, 3, rng)
    fam = owf.fingerprint_family(code)
    table = owf.all_state_vectors(fam, code)
    for j in range(8):
        assert np.allclose(table[j], owf.state_vector(fam, code, owf.int_to_bits(j, 3)))


def test_sampled_certification_flagged(rng):
    code = owf.random_code(16, 5, rng)
    with pytest.warns(UserWarning):
        fam = owf.fingerprint_family(code, "sampled", pairs=300, rng=rng)
    assert fam.delta_certainty == owf.SAMPLED
    assert fam.delta <= 1 - code.min_distance / 16 + 1e-12


def test_family_code_mismatch(rng):
    code = owf.random_code(8, 3, rng)
    fam = owf.fingerprint_family(code)
    other = owf.random_code(16, 3, rng)
    with pytest.raises(FamilyError):
        owf.state_vector(fam, other, "000")
    with pytest.raises(FamilyError):
        owf.state_vector(fam, None, "000")


def test_eval_family_register():
    st_ = owf.eval_family(owf.rotation_family(1), None, "1", label="k")
    assert st_.labels == ("k",)
    assert np.allclose(st_.amplitudes, [0, 1], atol=1e-15)


def test_code_and_family_files(rng):
    code = owf.random_code(10, 4, rng)
    back = owf.load_code(owf.dump_code(code))
    assert back.generator_rows == code.generator_rows
    assert back.min_distance == code.min_distance
    fam = owf.fingerprint_family(code)
    assert owf.load_family(owf.dump_family(fam)) == fam
    with pytest.raises(FamilyError):
        owf.load_code("code 4 2\n1100\n")


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.data())
def test_rotation_states_normalized(L, data):
    fam = owf.rotation_family(L)
    j = data.draw(st.integers(0, 2**L - 1))
    v = owf.state_vector(fam, None, owf.int_to_bits(j, L))
    assert np.linalg.norm(v) == pytest.approx(1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_encoding_is_linear(seed):
    rng = np.random.default_rng(seed)
    code = owf.random_code(9, 3, rng)
    a, b = (owf.int_to_bits(int(x), 3) for x in rng.integers(0, 8, size=2))
    lhs = owf.encode_codeword(code, owf.xor_bits(a, b))
    rhs = owf.xor_bits(owf.encode_codeword(code, a), owf.encode_codeword(code, b))
    assert lhs == rhs
