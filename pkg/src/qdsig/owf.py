"""Quantum one-way function families ``k -> |f_k>`` and binary linear codes.

Keys, messages and codewords are bit strings (``str`` of ``'0'``/``'1'``).

Two families are provided:

``rotation``
    One qubit, ``|f_k> = cos(j*theta)|0> + sin(j*theta)|1>`` with
    ``j = int(k, 2)`` and ``theta = pi / 2**L``.
``fingerprint``
    ``|f_k> = N_c**-1/2 * sum_i |i>|E(k)_i>`` for a binary linear code ``E``
    of length ``N_c``; index register on the high qubits, codeword bit on
    the lowest qubit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np

from . import statevec
from .statevec import PureState

ROTATION = "rotation"
FINGERPRINT = "fingerprint"
EXACT = "exact"
SAMPLED = "sampled"

EXHAUSTIVE_MAX_BITS = 16


class FamilyError(ValueError):
    pass


# ---------------------------------------------------------------- bit strings


def check_bits(bits: str, length: int, what: str = "key") -> str:
    if len(bits) != length or any(c not in "01" for c in bits):
        raise FamilyError(f"{what} must be a {length}-bit string, got {bits!r}")
    return bits


def bits_to_array(bits: str) -> np.ndarray:
    return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")


def array_to_bits(arr) -> str:
    return "".join("1" if int(b) else "0" for b in arr)


def int_to_bits(value: int, length: int) -> str:
    return format(value, f"0{length}b")


def xor_bits(a: str, b: str) -> str:
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


# ---------------------------------------------------------------------- codes


def gf2_rank(rows: np.ndarray) -> int:
    m = (np.array(rows, dtype=np.uint8) & 1).copy()
    rank = 0
    n_rows, n_cols = m.shape
    for col in range(n_cols):
        pivot = next((r for r in range(rank, n_rows) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(n_rows):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
        if rank == n_rows:
            break
    return rank


@dataclass(frozen=True)
class CodeSpec:
    length: int
    dimension: int
    generator_rows: tuple[str, ...]
    min_distance: Optional[int] = None

    def __post_init__(self):
        if len(self.generator_rows) != self.dimension:
            raise FamilyError("need exactly K generator rows")
        for row in self.generator_rows:
            check_bits(row, self.length, "generator row")
        if gf2_rank(self.generator_matrix) != self.dimension:
            raise FamilyError("generator rows are linearly dependent over GF(2)")

    @cached_property
    def generator_matrix(self) -> np.ndarray:
        g = np.array([bits_to_array(r) for r in self.generator_rows], dtype=np.uint8)
        g.flags.writeable = False
        return g

    def with_distance(self) -> "CodeSpec":
        return CodeSpec(self.length, self.dimension, self.generator_rows, minimum_distance(self))


def repetition_code(length: int) -> CodeSpec:
    return CodeSpec(length, 1, ("1" * length,), length)


def random_code(length: int, dimension: int, rng: np.random.Generator) -> CodeSpec:
    """Uniform generator rows, resampled until full rank.

    The minimum distance is filled in by exhaustive scan when ``dimension``
    is at most 16.
    """
    if not 1 <= dimension <= length:
        raise FamilyError("need 1 <= K <= N_c")
    while True:
        g = rng.integers(0, 2, size=(dimension, length), dtype=np.uint8)
        if gf2_rank(g) == dimension:
            break
    code = CodeSpec(length, dimension, tuple(array_to_bits(r) for r in g))
    if dimension <= EXHAUSTIVE_MAX_BITS:
        code = code.with_distance()
    return code


def encode_codeword(code: CodeSpec, message: str) -> str:
    check_bits(message, code.dimension, "message")
    word = (bits_to_array(message) @ code.generator_matrix) & 1
    return array_to_bits(word)


def all_codewords(code: CodeSpec) -> np.ndarray:
    """Codeword of every message, row ``m`` for the message ``int_to_bits(m, K)``."""
    if code.dimension > EXHAUSTIVE_MAX_BITS:
        raise FamilyError(f"exhaustive enumeration limited to K <= {EXHAUSTIVE_MAX_BITS}")
    k = code.dimension
    msgs = (np.arange(2**k)[:, None] >> np.arange(k - 1, -1, -1)) & 1
    return (msgs.astype(np.int64) @ code.generator_matrix.astype(np.int64)) & 1


def minimum_distance(code: CodeSpec) -> int:
    weights = all_codewords(code)[1:].sum(axis=1)
    return int(weights.min())


# ------------------------------------------------------------------- families


@dataclass(frozen=True)
class FamilyParams:
    kind: str
    L: int
    n: int
    delta: float
    delta_certainty: str = EXACT

    def __post_init__(self):
        if self.kind not in (ROTATION, FINGERPRINT):
            raise FamilyError(f"unknown family kind {self.kind!r}")
        if self.L < 1:
            raise FamilyError("L must be >= 1")
        if not 0 <= self.delta < 1:
            raise FamilyError("delta must lie in [0, 1)")
        if self.delta_certainty not in (EXACT, SAMPLED):
            raise FamilyError(f"unknown certainty {self.delta_certainty!r}")
        if self.kind == ROTATION:
            if self.n != 1 or self.delta_certainty != EXACT:
                raise FamilyError("rotation family has n = 1 and an exact delta")
            if self.delta != math.cos(math.pi / 2**self.L):
                raise FamilyError("rotation family delta must equal cos(pi / 2**L)")


def rotation_family(L: int) -> FamilyParams:
    return FamilyParams(ROTATION, L, 1, math.cos(math.pi / 2**L), EXACT)


def fingerprint_qubits(code_length: int) -> int:
    if code_length < 2:
        raise FamilyError("fingerprint codes need N_c >= 2")
    return math.ceil(math.log2(code_length)) + 1


def fingerprint_family(
    code: CodeSpec, mode: str = "exhaustive", pairs: int = 2000, rng=None
) -> FamilyParams:
    """Family descriptor for ``code`` with a certified overlap bound."""
    draft = FamilyParams(FINGERPRINT, code.dimension, fingerprint_qubits(code.length), 0.0)
    delta, certainty = certify_delta(draft, code, mode, pairs=pairs, rng=rng)
    if delta >= 1:
        raise FamilyError("code has distance 0 between distinct keys; delta = 1")
    return FamilyParams(FINGERPRINT, code.dimension, draft.n, delta, certainty)


def _check_code(family: FamilyParams, code: Optional[CodeSpec]) -> None:
    if family.kind == FINGERPRINT:
        if code is None:
            raise FamilyError("fingerprint family needs a code")
        if code.dimension != family.L:
            raise FamilyError("code dimension must equal L")
        if fingerprint_qubits(code.length) != family.n:
            raise FamilyError("family n does not match the code length")


def state_vector(family: FamilyParams, code: Optional[CodeSpec], k: str) -> np.ndarray:
    check_bits(k, family.L)
    _check_code(family, code)
    if family.kind == ROTATION:
        angle = int(k, 2) * math.pi / 2**family.L
        return np.array([math.cos(angle), math.sin(angle)], dtype=complex)
    if family.L <= 12:
        return _all_state_vectors(family, code)[int(k, 2)].copy()
    word = bits_to_array(encode_codeword(code, k))
    vec = np.zeros(2**family.n, dtype=complex)
    vec[2 * np.arange(code.length) + word] = 1 / math.sqrt(code.length)
    return vec


def eval_family(
    family: FamilyParams, code: Optional[CodeSpec], k: str, label: str = "key"
) -> PureState:
    return statevec.from_vector(label, state_vector(family, code, k))


@lru_cache(maxsize=8)
def _all_state_vectors(family: FamilyParams, code: Optional[CodeSpec]) -> np.ndarray:
    if family.L > EXHAUSTIVE_MAX_BITS:
        raise FamilyError(f"key enumeration limited to L <= {EXHAUSTIVE_MAX_BITS}")
    if family.kind == ROTATION:
        angles = np.arange(2**family.L) * math.pi / 2**family.L
        out = np.stack([np.cos(angles), np.sin(angles)], axis=1).astype(complex)
    else:
        words = all_codewords(code)
        out = np.zeros((2**family.L, 2**family.n), dtype=complex)
        rows = np.arange(2**family.L)[:, None]
        out[rows, 2 * np.arange(code.length)[None, :] + words] = 1 / math.sqrt(code.length)
    out.flags.writeable = False
    return out


def all_state_vectors(family: FamilyParams, code: Optional[CodeSpec]) -> np.ndarray:
    """Row ``j`` is ``|f_k>`` for ``k = int_to_bits(j, L)``."""
    _check_code(family, code)
    return _all_state_vectors(family, code)


def pairwise_overlap(family: FamilyParams, code: Optional[CodeSpec], k: str, k2: str) -> float:
    return abs(np.vdot(state_vector(family, code, k), state_vector(family, code, k2)))


def certify_delta(
    family: FamilyParams,
    code: Optional[CodeSpec],
    mode: str = "exhaustive",
    pairs: int = 2000,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, str]:
    """Maximum overlap between distinct keys.

    ``mode="exhaustive"`` is exact (for linear codes via a scan of every
    nonzero codeword).  ``mode="sampled"`` takes the maximum over ``pairs``
    random distinct pairs and is flagged as such.
    """
    _check_code(family, code)
    if mode == "exhaustive":
        if family.L > EXHAUSTIVE_MAX_BITS:
            raise FamilyError(f"exhaustive certification limited to L <= {EXHAUSTIVE_MAX_BITS}")
        if family.kind == ROTATION:
            # overlap depends only on the index difference d
            d = np.arange(1, 2**family.L)
            return float(np.max(np.abs(np.cos(d * math.pi / 2**family.L)))), EXACT
        dmin = code.min_distance if code.min_distance is not None else minimum_distance(code)
        return 1.0 - dmin / code.length, EXACT
    if mode != "sampled":
        raise FamilyError(f"unknown certification mode {mode!r}")
    if rng is None:
        raise FamilyError("sampled certification needs a generator")
    best = 0.0
    for _ in range(pairs):
        a = int(rng.integers(0, 2**family.L))
        b = int(rng.integers(0, 2**family.L - 1))
        b = b + 1 if b >= a else b
        best = max(
            best,
            pairwise_overlap(family, code, int_to_bits(a, family.L), int_to_bits(b, family.L)),
        )
    warnings.warn("delta certified by sampling only; security figures may be optimistic")
    return best, SAMPLED


# ------------------------------------------------------------- file formats


def dump_code(code: CodeSpec) -> str:
    return "\n".join([f"code {code.length} {code.dimension}", *code.generator_rows]) + "\n"


def load_code(text: str) -> CodeSpec:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    head = lines[0].split() if lines else []
    if len(head) != 3 or head[0] != "code":
        raise FamilyError("code file must start with 'code N_c K'")
    length, dim = int(head[1]), int(head[2])
    rows = tuple(lines[1:])
    if len(rows) != dim:
        raise FamilyError(f"code file lists {len(rows)} rows, header says {dim}")
    code = CodeSpec(length, dim, rows)
    return code.with_distance() if dim <= EXHAUSTIVE_MAX_BITS else code


def dump_family(family: FamilyParams) -> str:
    return (
        f"family {family.kind} {family.L} {family.n} {family.delta!r} {family.delta_certainty}\n"
    )


def load_family(text: str) -> FamilyParams:
    parts = text.split()
    if len(parts) != 6 or parts[0] != "family":
        raise FamilyError("family file must read 'family kind L n delta certainty'")
    return FamilyParams(parts[1], int(parts[2]), int(parts[3]), float(parts[4]), parts[5])
