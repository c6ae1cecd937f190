import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdsig import adversary as A
from qdsig import owf, protocol as P
from qdsig import statevec as sv
from qdsig.protocol import ProtocolConfig, slot_label

from conftest import random_vector, symmetrizer


def rot_config(M, T=4, ladder=(0.0, 0.25), L=1):
    return ProtocolConfig(owf.rotation_family(L), M, T, ladder, holevo_override=True)


def swap_plan():
    return P.distributed_swap_plan()


# ------------------------------------------------------------------ frames


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_key_frame_is_unitary_with_f_first(n, seed):
    f = random_vector(np.random.default_rng(seed), 2**n)
    u = A.key_frame(f)
    assert np.allclose(u.conj().T @ u, np.eye(2**n), atol=1e-12)
    assert np.allclose(u[:, 0], f, atol=1e-12)


# ------------------------------------------------------------------ reports


def test_attack_report_invariants():
    with pytest.raises(ValueError):
        A.AttackReport("forge", 10, 11, 1.1, (0, 1))
    with pytest.raises(ValueError):
        A.AttackReport("forge", 10, 5, 0.5, (0.6, 0.7))
    rep = A.AttackReport("forge", 100, 0, 0.0, (0.0, 0.037))
    assert rep.line() == "attack=forge trials=100 successes=0 estimate=0 ci95=0,0.037 bound=none"


# ------------------------------------------------------------------ forging


def test_eve_cannot_touch_other_registers(rng):
    cfg = rot_config(2, T=1, L=2)
    keys = P.keygen(2, 2, rng)
    glob = P.make_public_keys(keys, cfg, copies=1, eve_copies=1)
    view = A.EveView(glob)
    assert view.copies(0, 1) == ["k0.1.e0"]
    with pytest.raises(A.AccessError):
        view.measure(slot_label(0, 0, 0), np.eye(2), rng)
    view.measure("k0.0.e0", np.eye(2), rng)


def test_eve_guess_needs_other_bit(rng):
    keys = P.keygen(2, 3, rng)
    cfg = rot_config(2, T=1, L=3)
    glob = P.make_public_keys(keys, cfg, copies=1, eve_copies=1)
    with pytest.raises(A.StrategyError):
        A.eve_guess(A.EveView(glob), P.sign(0, keys), 0, A.ForgerStrategy(), cfg.family, None, rng)


def test_random_guess_rate(rng):
    L, M, runs = 3, 50, 80
    cfg = rot_config(M, T=1, L=L)
    hits = 0
    for _ in range(runs):
        keys = P.keygen(M, L, rng)
        glob = P.make_public_keys(keys, cfg, copies=1, eve_copies=0)
        forged = A.eve_guess(A.EveView(glob), P.sign(0, keys), 1, A.ForgerStrategy(), cfg.family, None, rng)
        hits += sum(g == keys.key(1, i) for i, g in enumerate(forged.revealed))
    n = runs * M
    p = 2.0**-L
    assert abs(hits / n - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_measure_without_copies_is_random_guess(rng):
    cfg = rot_config(4, T=1, L=4)
    keys = P.keygen(4, 4, rng)
    glob = P.make_public_keys(keys, cfg, copies=1, eve_copies=0)
    strat = A.ForgerStrategy("measure-then-guess", ("Z",))
    forged = A.eve_guess(A.EveView(glob), P.sign(1, keys), 0, strat, cfg.family, None, rng)
    assert len(forged.revealed) == 4 and forged.bits == (0,)


def test_measure_then_guess_matches_bayes_oracle(rng):
    L = 4
    fam = owf.rotation_family(L)
    # posterior oracle: P(outcome | j) from cos^2 / sin^2, uniform prior
    like = np.array([[math.cos(j * math.pi / 16) ** 2, math.sin(j * math.pi / 16) ** 2] for j in range(16)])
    oracle = like.max(axis=0).sum() / 16
    cfg = rot_config(1, T=1, L=L)
    strat = A.ForgerStrategy("measure-then-guess", ("Z",))
    trials, hits = 10_000, 0
    for _ in range(trials):
        keys = P.keygen(1, L, rng)
        glob = P.make_public_keys(keys, cfg, copies=1, eve_copies=1)
        forged = A.eve_guess(A.EveView(glob), P.sign(0, keys), 1, strat, fam, None, rng)
        hits += forged.revealed[0] == keys.key(1, 0)
    sd = math.sqrt(oracle * (1 - oracle) / trials)
    assert abs(hits / trials - oracle) < 4 * sd


def test_full_information_forgery_succeeds(rng):
    # L = T n = 1: |0> and |1> are perfectly distinguishable
    cfg = ProtocolConfig(owf.rotation_family(1), 8, 1, (0.0, 0.5), holevo_override=True)
    rep = A.forge_experiment(cfg, A.ForgerStrategy("measure-then-guess", ("Z",)), 200, rng)
    assert rep.estimate == 1.0
    assert rep.extras["holevo_budget_bits"] == 1


def test_forge_plan_longer_than_copies(rng):
    cfg = rot_config(2, T=1, L=4)
    with pytest.raises(A.StrategyError):
        A.forge_experiment(cfg, A.ForgerStrategy("measure-then-guess", ("Z", "X")), 10, rng)


def test_forge_bound_formula():
    cfg = ProtocolConfig(owf.rotation_family(4), 10, 1, (0.0, 0.3))
    G = 2.0 ** -(4 - 1) * 20
    wrong = math.floor(10 - G)
    p_fail = 1 - cfg.family.delta**2
    expected = sum(math.comb(wrong, k) * p_fail**k * (1 - p_fail) ** (wrong - k) for k in range(3))
    assert A.forge_bound(cfg) == pytest.approx(expected)


# ------------------------------------------------------------ cheat states


def test_honest_spec_is_product(rng):
    cfg = rot_config(2, L=3)
    keys = P.keygen(2, 3, rng)
    glob = A.build_cheat_state(A.AliceStrategy(), cfg.family, None, keys, 0)
    honest = P.make_public_keys(keys, cfg)
    for label in honest.labels:
        a = glob.state_of([label])
        b = honest.state_of([label])
        pa = sv.pass_probability(a, sv.RankOneProjector(label, b.amplitudes))
        assert pa == pytest.approx(1, abs=1e-12)


def _index_block(spec, L=2, key="01", plan=None):
    plan = plan or swap_plan()
    fam = owf.rotation_family(L)
    f = owf.state_vector(fam, None, key)
    return A.index_state(spec, plan, f, 0, 0), f, plan


def dense_outcome_table(block, f, plan):
    """Independent oracle: dense projector matrices on the whole index block."""
    n = block.layout[0][1]
    N = plan.copies
    d = 2**n
    eye = np.eye(d)

    def embed(op, slots):
        # build the operator on all N slots by permuting a kron product
        rest = [s for s in range(N) if s not in slots]
        order = list(slots) + rest
        big = np.kron(op, np.eye(d ** len(rest)))
        perm = np.argsort(order)
        shape = (d,) * N
        big = big.reshape(shape + shape)
        big = big.transpose(list(perm) + [N + p for p in perm])
        return big.reshape(d**N, d**N)

    v = block.amplitudes
    for group in plan.tests:
        v = embed(symmetrizer(n, len(group)), group) @ v
    table = np.zeros((2,) * len(plan.kept))
    proj_f = np.outer(f, f.conj())
    for pattern in itertools.product((0, 1), repeat=len(plan.kept)):
        w = v
        for (_, j), fail in zip(plan.kept, pattern):
            op = eye - proj_f if fail else proj_f
            w = embed(op, (j,)) @ w
        table[pattern] = np.vdot(w, w).real
    return table


@pytest.mark.parametrize(
    "spec",
    [
        A.Honest(),
        A.SymmetricPair(),
        A.MinusTest(),
        A.Type2Pair(),
        A.Type1Combination(((1.0, "ff", "ff"), (0.7, ("perp", 1, 1), ("plus", 1)))),
    ],
)
def test_outcome_table_matches_dense_oracle(spec):
    block, f, plan = _index_block(spec)
    got = A.outcome_table(block, plan, f, 0, 0)
    assert np.allclose(got, dense_outcome_table(block, f, plan), atol=1e-12)


def test_outcome_table_two_group_matches_oracle():
    block, f, plan = _index_block(A.SymmetricPair(), L=2, plan=A.two_group_plan())
    got = A.outcome_table(block, plan, f, 0, 0)
    assert np.allclose(got, dense_outcome_table(block, f, plan), atol=1e-12)


def test_symmetric_pair_passes_every_swap():
    block, f, plan = _index_block(A.SymmetricPair())
    for a, b in itertools.combinations(range(4), 2):
        proj = sv.swap_projector(slot_label(0, 0, a), slot_label(0, 0, b))
        assert sv.pass_probability(block, proj) == pytest.approx(1, abs=1e-12)
    table = A.outcome_table(block, plan, f, 0, 0)
    # each recipient's kept key fails with probability 1/2
    assert table[1, :].sum() == pytest.approx(0.5, abs=1e-12)
    assert table[:, 1].sum() == pytest.approx(0.5, abs=1e-12)


def test_symmetric_pair_two_copy_norm():
    # |f>|g> + |g>|f> with g orthogonal has norm sqrt(2) before normalizing
    plan = P.trusted_center_plan(2, ["B", "C"])
    x, _ = A.frame_tensor(A.SymmetricPair(), plan, 2)
    assert np.allclose(x, np.array([[0, 1], [1, 0]]) / math.sqrt(2))


def test_minus_test_aborts_at_least_half():
    block, f, plan = _index_block(A.MinusTest())
    assert A.outcome_table(block, plan, f, 0, 0).sum() <= 0.5 + 1e-12


@pytest.mark.parametrize(
    "terms",
    [
        ((1.0, "ff", "ff"), (1.0, ("perp", 1, 1), ("plus", 1))),
        ((0.3, ("plus", 1), ("plus", 1)), (1.0, ("perp", 1, 1), "ff")),
        ((1.0, ("perp", 1, 1), ("perp", 1, 1)), (0.5j, "ff", ("plus", 1))),
    ],
)
def test_type1_equal_amplitudes(terms):
    block, f, plan = _index_block(A.Type1Combination(terms))
    table = A.outcome_table(block, plan, f, 0, 0)
    assert table.sum() == pytest.approx(1, abs=1e-12)
    assert table[0, 1] == pytest.approx(table[1, 0], abs=1e-12)


def test_type1_rejects_minus_terms():
    with pytest.raises(A.StrategyError):
        _index_block(A.Type1Combination(((1.0, ("minus", 1), "ff"),)))


def test_bad_specs():
    with pytest.raises(A.StrategyError):
        _index_block(A.ExplicitState((1.0, 0.0)))
    with pytest.raises(A.StrategyError):
        _index_block(A.ExplicitState(tuple([0.0] * 16)))
    with pytest.raises(A.StrategyError):
        _index_block(A.MinusTest(), plan=P.trusted_center_plan(2, ["B", "C"]))


def test_explicit_state_with_ancilla(rng):
    amps = random_vector(rng, 32)
    block, f, plan = _index_block(A.ExplicitState(tuple(amps), ancilla_width=1))
    assert block.labels[-1] == "anc.0.0"
    table = A.outcome_table(block, plan, f, 0, 0)
    assert 0 <= table.sum() <= 1 + 1e-12


def test_joint_product_equals_independent(rng):
    cfg = rot_config(2, L=2)
    keys = P.keygen(2, 2, rng)
    x, _ = A.frame_tensor(A.SymmetricPair(), swap_plan(), 2)
    joint = np.multiply.outer(x, x).reshape(-1)
    glob_j = A.build_cheat_state(A.AliceStrategy(joint=tuple(joint)), cfg.family, None, keys, 0)
    glob_i = A.build_cheat_state(A.AliceStrategy(A.SymmetricPair()), cfg.family, None, keys, 0)
    labels = [slot_label(0, i, j) for i in range(2) for j in range(4)]
    a = glob_j.state_of(labels)
    b = glob_i.state_of(labels)
    b = sv.PureState(a.layout, b.tensor_view().transpose([b.axis(lb) for lb in a.labels]).reshape(-1))
    assert abs(sv.inner_product(a, b)) == pytest.approx(1, abs=1e-12)


def test_joint_too_large(rng):
    keys = P.keygen(4, 2, rng)
    fam = owf.rotation_family(2)
    with pytest.raises(A.StrategyError):
        A.build_cheat_state(A.AliceStrategy(joint=(1.0,), ancilla_width=10), fam, None, keys, 0)


# ------------------------------------------------------------- convolution


def test_convolution_matches_enumeration(rng):
    tables = []
    for _ in range(3):
        t = rng.random((2, 2))
        tables.append(t / t.sum() * 0.9)
    dist = A.convolve_tables(tables)
    brute = np.zeros((4, 4))
    for patterns in itertools.product(itertools.product((0, 1), repeat=2), repeat=3):
        w = np.prod([t[p] for t, p in zip(tables, patterns)])
        brute[sum(p[0] for p in patterns), sum(p[1] for p in patterns)] += w
    assert np.allclose(dist, brute, atol=1e-14)


def test_cheat_mask():
    mask = A.cheat_mask(4, (0.0, 0.5), 2)
    assert mask[0, 2] and mask[4, 0] and not mask[0, 1] and not mask[1, 3]


# --------------------------------------------------------------- repudiation


def test_honest_alice_never_repudiates(rng):
    rep = A.repudiate_experiment(rot_config(8), A.AliceStrategy(), "exact", rng)
    assert rep.estimate == 0 and rep.exact
    assert rep.extras["pass_all"] == pytest.approx(1)


def test_symmetric_pair_exact_value(rng):
    # per index: B fails / C fails jointly with (1/6, 1/3, 1/3, 1/6); cheat needs
    # one tally at 0 and the other >= M/4
    M = 8
    rep = A.repudiate_experiment(rot_config(M), A.AliceStrategy(A.SymmetricPair()), "exact", rng)
    from scipy.stats import binom

    one_side = 0.5**M * binom.sf(math.ceil(M / 4) - 1, M, 2 / 3)
    assert rep.estimate == pytest.approx(2 * one_side, rel=1e-10)


def test_symmetric_pair_decreasing(rng):
    vals = [
        A.repudiate_experiment(rot_config(M), A.AliceStrategy(A.SymmetricPair()), "exact", rng).estimate
        for M in (4, 8, 16, 32)
    ]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_exact_and_monte_carlo_agree(rng):
    cfg = rot_config(4)
    strat = A.AliceStrategy(A.SymmetricPair())
    exact = A.repudiate_experiment(cfg, strat, "exact", rng).estimate
    mc = A.repudiate_experiment(cfg, strat, "mc", rng, trials=20_000)
    sd = math.sqrt(exact * (1 - exact) / 20_000)
    assert abs(mc.estimate - exact) < 4 * sd


def test_type2_pass_rate_monte_carlo(rng):
    M, r = 4, 2
    specs = tuple(A.MinusTest() if i < r else A.Honest() for i in range(M))
    rep = A.repudiate_experiment(rot_config(M), A.AliceStrategy(specs), "mc", rng, trials=4000)
    assert rep.extras["pass_all"] <= 2.0**-r + 3 * math.sqrt(0.25 * 0.75 / 4000)


def test_exact_mode_requires_independence(rng):
    strat = A.AliceStrategy(joint=tuple([1.0] + [0.0] * 255))
    with pytest.raises(A.StrategyError):
        A.repudiate_experiment(rot_config(2), strat, "exact", rng)


def test_mode_errors(rng):
    with pytest.raises(P.ConfigError):
        A.repudiate_experiment(rot_config(2), A.AliceStrategy(), "nope", rng)
    with pytest.raises(P.ConfigError):
        A.repudiate_experiment(rot_config(2), A.AliceStrategy(), "mc", rng, trials=0)
    with pytest.raises(P.ConfigError):
        A.repudiate_experiment(rot_config(2, T=3), A.AliceStrategy(), "exact", rng)


def test_joint_strategy_monte_carlo(rng):
    # entangled across two indices: both symmetric pairs share an ancilla-free
    # superposition; only MC can evaluate it
    x, _ = A.frame_tensor(A.SymmetricPair(), swap_plan(), 2)
    h, _ = A.frame_tensor(A.Honest(), swap_plan(), 2)
    joint = (np.multiply.outer(x, x) + np.multiply.outer(h, h)).reshape(-1)
    rep = A.repudiate_experiment(rot_config(2), A.AliceStrategy(joint=tuple(joint)), "mc", rng, trials=500)
    assert 0 <= rep.estimate <= 1 and rep.trials == 500


# ----------------------------------------------------------------- two groups


def test_two_group_plan_shape():
    plan = A.two_group_plan()
    assert plan.copies == 7
    assert plan.tests[0] == (0, 1, 2)
    assert [r for r, _ in plan.kept] == ["B", "C", "D"]


def test_two_group_honest_zero(rng):
    rep = A.two_group_experiment(rot_config(6, T=7), A.AliceStrategy(), rng)
    assert rep.estimate == 0


def test_two_group_symmetric_pair_bound(rng):
    rep = A.two_group_experiment(rot_config(8, T=7), A.AliceStrategy(A.SymmetricPair()), rng, Delta=0.25)
    single = max(rep.extras["single_BC"], rep.extras["single_BD"])
    assert rep.estimate <= 2 * single


def test_two_group_minus_aborts(rng):
    M, r = 6, 3
    specs = tuple(A.MinusTest() if i < r else A.Honest() for i in range(M))
    rep = A.two_group_experiment(rot_config(M, T=7), A.AliceStrategy(specs), rng)
    assert rep.extras["pass_all"] <= 2.0**-r + 1e-12


def test_two_group_needs_seven_copies(rng):
    with pytest.raises(P.ConfigError):
        A.two_group_experiment(rot_config(4, T=4), A.AliceStrategy(), rng)


def test_two_group_mc_matches_exact(rng):
    cfg = rot_config(4, T=7)
    strat = A.AliceStrategy(A.SymmetricPair())
    exact = A.two_group_experiment(cfg, strat, rng, Delta=0.25)
    mc = A.two_group_experiment(cfg, strat, rng, Delta=0.25, mode="mc", trials=4000)
    sd = math.sqrt(exact.estimate * (1 - exact.estimate) / 4000)
    assert abs(mc.estimate - exact.estimate) < 4 * sd + 1e-12
