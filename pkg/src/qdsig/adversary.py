"""Forging and repudiation attacks with exact or Monte Carlo evaluation.

Cheating key states are described in the *key frame* of each index: basis
vector 0 is ``|f>`` (the public key of the revealed private key) and vectors
``a >= 1`` are an orthonormal completion ``|f_perp^a>``.  Swap, symmetry and
verification statistics are invariant under a common change of frame, so a
strategy means the same thing for every key.

On the four-copy distributed swap layout, copies are ordered
``(Bob kept, Bob test, Charlie kept, Charlie test)``; "kept pair" and "test
pair" list Bob's register first.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import binom

from . import analysis, owf, statevec
from .protocol import (
    ConfigError,
    DistributionPlan,
    GlobalKeyState,
    PrivateKeySet,
    ProtocolConfig,
    SignedMessage,
    distributed_swap_plan,
    keygen,
    make_public_keys,
    sign,
    slot_label,
    verdict_from_tally,
    verify,
)
from .statevec import PureState, RankOneProjector, SymmetricProjector
from .streams import child_seed, stream


NOISE_FLOOR = 1e-24


class AccessError(PermissionError):
    pass


class StrategyError(ValueError):
    pass


# -------------------------------------------------------------------- reports


@dataclass
class AttackReport:
    attack: str
    trials: Optional[int]
    successes: Union[int, float]
    estimate: float
    ci95: tuple[float, float]
    comparison_bound: Optional[float] = None
    bound_ref: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.estimate <= 1 + 1e-12:
            raise ValueError("estimate outside [0, 1]")
        lo, hi = self.ci95
        if not lo - 1e-15 <= self.estimate <= hi + 1e-15:
            raise ValueError("ci95 does not contain the estimate")

    @property
    def exact(self) -> bool:
        return self.trials is None

    def line(self) -> str:
        fmt = analysis.fmt
        trials = "exact" if self.exact else str(self.trials)
        successes = fmt(float(self.successes)) if self.exact else str(self.successes)
        bound = "none" if self.comparison_bound is None else fmt(float(self.comparison_bound))
        return (
            f"attack={self.attack} trials={trials} successes={successes} "
            f"estimate={fmt(float(self.estimate))} "
            f"ci95={fmt(float(self.ci95[0]))},{fmt(float(self.ci95[1]))} bound={bound}"
        )


def _mc_report(attack, successes, trials, **kw) -> AttackReport:
    return AttackReport(
        attack, trials, int(successes), successes / trials,
        analysis.binomial_ci95(int(successes), trials), **kw,
    )


def _exact_report(attack, p, **kw) -> AttackReport:
    p = float(min(max(p, 0.0), 1.0))
    return AttackReport(attack, None, p, p, (p, p), **kw)


# ================================================================== forging


BASES = ("Z", "X")


@dataclass(frozen=True)
class ForgerStrategy:
    """``random-guess`` or ``measure-then-guess`` with per-copy bases (cycled)."""

    kind: str = "random-guess"
    bases: tuple[str, ...] = ("Z",)

    def __post_init__(self):
        if self.kind not in ("random-guess", "measure-then-guess"):
            raise StrategyError(f"unknown forger strategy {self.kind!r}")
        if any(b not in BASES for b in self.bases) or not self.bases:
            raise StrategyError(f"bases must be drawn from {BASES}")


def basis_unitary(name: str, n: int) -> Optional[np.ndarray]:
    """Rotation applied before a computational measurement; ``None`` for Z."""
    if name == "Z":
        return None
    if name == "X":
        return statevec.hadamard(n)
    raise StrategyError(f"unknown basis {name!r}")


class EveView:
    """The forger's handle on the global state: her own copies only."""

    def __init__(self, glob: GlobalKeyState):
        self._glob = glob
        self._allowed = {
            lb for lb in glob.labels if lb.split(".")[-1].startswith("e")
        }

    def copies(self, b: int, i: int) -> list[str]:
        return [slot_label(b, i, j, "e") for j in range(self._glob.eve_copies)]

    def measure(self, label: str, unitary: np.ndarray, rng) -> str:
        if label not in self._allowed:
            raise AccessError(f"forger may not touch register {label!r}")
        return self._glob.measure_in_basis(label, unitary, rng)


@lru_cache(maxsize=16)
def _likelihoods(family, code, basis: str) -> np.ndarray:
    """``P(outcome | key)``: row per key, column per outcome."""
    states = owf.all_state_vectors(family, code)
    u = basis_unitary(basis, family.n)
    return np.abs(states if u is None else states @ u.T) ** 2


def _uniform_key(L: int, rng) -> str:
    return owf.array_to_bits(rng.integers(0, 2, size=L))


def eve_guess(
    view: EveView,
    observed: SignedMessage,
    target_bit: int,
    strategy: ForgerStrategy,
    family: owf.FamilyParams,
    code: Optional[owf.CodeSpec],
    rng: np.random.Generator,
) -> SignedMessage:
    """Forge a signature for ``target_bit`` from Eve's copies.

    ``measure-then-guess`` measures each copy in its planned basis and
    reports the maximum-likelihood key (lowest key among ties).  With no
    copies it falls back to uniform guessing.
    """
    if len(observed.bits) != 1 or target_bit == observed.b or target_bit not in (0, 1):
        raise StrategyError("target bit must differ from the observed single bit")
    M = len(observed.revealed)
    guesses = []
    table = None
    for i in range(M):
        labels = view.copies(target_bit, i)
        if strategy.kind == "random-guess" or not labels:
            guesses.append(_uniform_key(family.L, rng))
            continue
        if table is None:
            table = {name: _likelihoods(family, code, name) for name in set(strategy.bases)}
        likelihood = np.ones(2**family.L)
        for j, label in enumerate(labels):
            name = strategy.bases[j % len(strategy.bases)]
            outcome = int(view.measure(label, basis_unitary(name, family.n), rng), 2)
            likelihood = likelihood * table[name][:, outcome]
        best = likelihood.max()
        idx = int(np.flatnonzero(likelihood >= best * (1 - 1e-9))[0])
        guesses.append(owf.int_to_bits(idx, family.L))
    return SignedMessage((target_bit,), tuple(guesses))


def forge_bound(config: ProtocolConfig) -> float:
    """Acceptance probability if ``M - G`` wrong keys each fail w.p. ``1 - delta**2``."""
    wrong = max(0, math.floor(config.M - config.guessed_keys))
    if wrong == 0:
        return 1.0
    threshold = config.ladder[-1] * config.M
    # accepted iff s < c_q M
    k_max = math.ceil(threshold - 1e-9) - 1
    if k_max < 0:
        return 0.0
    return float(binom.cdf(k_max, wrong, 1 - config.family.delta**2))


def forge_trial(
    config: ProtocolConfig, strategy: ForgerStrategy, rng: np.random.Generator
) -> tuple[bool, int]:
    """One forgery attempt; returns ``(accepted, s)``.

    Eve holds ``T`` copies of every public key; Bob holds one further copy
    for verification.
    """
    keys = keygen(config.M, config.family.L, rng)
    glob = make_public_keys(keys, config, copies=1, eve_copies=config.T)
    b = int(rng.integers(0, 2))
    msg = sign(b, keys)
    forged = eve_guess(EveView(glob), msg, 1 - b, strategy, config.family, config.code, rng)
    kept = {(bb, i): slot_label(bb, i, 0) for i in range(config.M) for bb in (0, 1)}
    tally, verdict = verify(forged, kept, glob, config, rng)
    return verdict.accepts, tally.s


def forge_experiment(
    config: ProtocolConfig,
    strategy: ForgerStrategy,
    trials: int,
    rng: np.random.Generator,
) -> AttackReport:
    if strategy.kind == "measure-then-guess" and len(strategy.bases) > config.T:
        raise StrategyError("measurement plan lists more copies than Eve holds")
    seed = child_seed(rng)
    successes = 0
    for trial in range(trials):
        accepted, _ = forge_trial(config, strategy, stream(seed, trial))
        successes += accepted
    extras = {
        "strategy": strategy.kind,
        "M": config.M,
        "holevo_budget_bits": config.T * config.family.n,
        "L": config.family.L,
        "G": config.guessed_keys,
        "delta": config.family.delta,
        "c2": config.ladder[-1],
        "optimal": False,
    }
    if config.family.delta_certainty == owf.SAMPLED:
        extras["warning"] = "delta-sampled"
    return _mc_report(
        "forge", successes, trials,
        comparison_bound=forge_bound(config),
        bound_ref="binomial tail: M-G unguessed keys each failing w.p. 1-delta^2",
        extras=extras,
    )


# ============================================================ cheating Alice


def key_frame(f: np.ndarray) -> np.ndarray:
    """Unitary whose column 0 is ``f``; the other columns complete a basis."""
    f = np.asarray(f, dtype=complex)
    d = f.size
    q, r = np.linalg.qr(np.column_stack([f, np.eye(d, dtype=complex)]))
    q = q[:, :d].copy()
    q[:, 0] *= r[0, 0] / abs(r[0, 0])
    return q


def _e(a: int, d: int) -> np.ndarray:
    if not 0 <= a < d:
        raise StrategyError(f"frame index {a} outside 0..{d - 1}")
    v = np.zeros(d, dtype=complex)
    v[a] = 1
    return v


def _pair(kind, d: int) -> np.ndarray:
    """Two-slot frame tensor (Bob, Charlie) for ``"ff"``, ``("perp", a, a2)``,
    ``("plus", a)`` or ``("minus", a)``.  ``plus``/``minus`` are unnormalized."""
    if kind == "ff":
        return np.outer(_e(0, d), _e(0, d))
    tag = kind[0]
    if tag == "perp":
        if kind[1] < 1 or kind[2] < 1:
            raise StrategyError("perp terms use frame indices >= 1")
        return np.outer(_e(kind[1], d), _e(kind[2], d))
    if tag in ("plus", "minus"):
        a = kind[1]
        if a < 1:
            raise StrategyError("plus/minus terms use frame indices >= 1")
        sign = 1 if tag == "plus" else -1
        return np.outer(_e(0, d), _e(a, d)) + sign * np.outer(_e(a, d), _e(0, d))
    raise StrategyError(f"unknown pair term {kind!r}")


def _kt_to_slots(kept: np.ndarray, test: np.ndarray) -> np.ndarray:
    # axes (K_B, K_C, T_B, T_C) -> copies (B kept, B test, C kept, C test)
    return np.einsum("ab,cd->acbd", kept, test)


def _symmetrize(x: np.ndarray) -> np.ndarray:
    k = x.ndim
    perms = list(itertools.permutations(range(k)))
    return sum(x.transpose(p) for p in perms) / len(perms)


@dataclass(frozen=True)
class Honest:
    pass


@dataclass(frozen=True)
class SymmetricPair:
    """Uniform superposition over placements of ``psi`` and ``phi`` on the copies.

    With ``N`` copies, ``ceil(N/2)`` carry ``psi`` and the rest ``phi``;
    ``psi``/``phi`` are frame indices or frame vectors.  Two copies give
    ``(|psi>|phi> + |phi>|psi>)`` normalized.
    """

    psi: Union[int, tuple] = 0
    phi: Union[int, tuple] = 1


@dataclass(frozen=True)
class Type1Combination:
    """Sum of ``coeff * |kept pair>|test pair>`` over type-1 pair terms
    (``"ff"``, ``("perp", a, a2)``, ``("plus", a)``), then restricted to the
    states that pass all three distribution swap tests with certainty."""

    terms: tuple


@dataclass(frozen=True)
class Type2Pair:
    """``(|+^a>_K |-^a2>_T + |-^a>_K |+^a2>_T)``, normalized."""

    a: int = 1
    a2: int = 1


@dataclass(frozen=True)
class MinusTest:
    """``|f>`` everywhere except ``|-^a>`` on the plan's cross-test pair."""

    a: int = 1


@dataclass(frozen=True)
class ExplicitState:
    """Frame amplitudes over the copies, plus ``ancilla_width`` trailing qubits."""

    amplitudes: tuple
    ancilla_width: int = 0


IndexSpec = Union[Honest, SymmetricPair, Type1Combination, Type2Pair, MinusTest, ExplicitState]


@dataclass(frozen=True)
class AliceStrategy:
    """Per-index key states for the signed bit (the other bit's keys are honest).

    ``per_index`` is one spec for every index or a tuple of ``M`` specs.
    ``joint`` (frame amplitudes over all copies of all indices, index-major,
    followed by ``ancilla_width`` qubits) entangles the indices instead.
    """

    per_index: Union[IndexSpec, tuple] = Honest()
    joint: Optional[tuple] = None
    ancilla_width: int = 0

    @property
    def independent_across_indices(self) -> bool:
        return self.joint is None

    def spec(self, i: int) -> IndexSpec:
        if isinstance(self.per_index, tuple):
            return self.per_index[i]
        return self.per_index


def _frame_vec(v, d: int) -> np.ndarray:
    if isinstance(v, (int, np.integer)):
        return _e(int(v), d)
    arr = np.asarray(v, dtype=complex)
    if arr.size != d:
        raise StrategyError("frame vector has the wrong dimension")
    return arr / np.linalg.norm(arr)


def frame_tensor(spec: IndexSpec, plan: DistributionPlan, d: int) -> tuple[np.ndarray, int]:
    """Normalized frame amplitudes for one index, shape ``(d,)*copies (+ (2**w,))``."""
    N = plan.copies
    anc = 0
    if isinstance(spec, Honest):
        x = _e(0, d)
        for _ in range(N - 1):
            x = np.multiply.outer(x, _e(0, d))
    elif isinstance(spec, SymmetricPair):
        psi, phi = _frame_vec(spec.psi, d), _frame_vec(spec.phi, d)
        factors = [psi] * ((N + 1) // 2) + [phi] * (N // 2)
        x = factors[0]
        for v in factors[1:]:
            x = np.multiply.outer(x, v)
        x = _symmetrize(x)
    elif isinstance(spec, (Type1Combination, Type2Pair)):
        if N != 4:
            raise StrategyError("type-1/type-2 specs need the four-copy layout")
        if isinstance(spec, Type1Combination):
            if not spec.terms:
                raise StrategyError("empty type-1 combination")
            x = np.zeros((d,) * 4, dtype=complex)
            for coeff, kept, test in spec.terms:
                for term in (kept, test):
                    if term != "ff" and term[0] not in ("perp", "plus"):
                        raise StrategyError(f"{term!r} is not a type-1 term")
                x = x + coeff * _kt_to_slots(_pair(kept, d), _pair(test, d))
            # passing all three swap tests with certainty = complete symmetry
            x = _symmetrize(x)
        else:
            plus_k, minus_k = _pair(("plus", spec.a), d), _pair(("minus", spec.a), d)
            plus_t, minus_t = _pair(("plus", spec.a2), d), _pair(("minus", spec.a2), d)
            x = _kt_to_slots(plus_k, minus_t) + _kt_to_slots(minus_k, plus_t)
    elif isinstance(spec, MinusTest):
        if plan.cross_pair is None:
            raise StrategyError(f"plan {plan.name} has no cross-test pair")
        p, q = plan.cross_pair
        factors = [_e(0, d)] * N
        x = factors[0]
        for v in factors[1:]:
            x = np.multiply.outer(x, v)
        x = np.zeros_like(x)
        minus = _pair(("minus", spec.a), d)
        idx: list = [0] * N
        for u in range(d):
            for v in range(d):
                if minus[u, v] != 0:
                    idx[p], idx[q] = u, v
                    x[tuple(idx)] += minus[u, v]
    elif isinstance(spec, ExplicitState):
        anc = spec.ancilla_width
        x = np.asarray(spec.amplitudes, dtype=complex)
        shape = (d,) * N + ((2**anc,) if anc else ())
        if x.size != math.prod(shape):
            raise StrategyError(f"explicit state needs {math.prod(shape)} amplitudes")
        x = x.reshape(shape)
    else:
        raise StrategyError(f"unknown index spec {spec!r}")
    norm = np.linalg.norm(x)
    if norm < 1e-12:
        raise StrategyError("index spec does not normalize (zero vector)")
    return x / norm, anc


def _to_key_basis(x: np.ndarray, frames: Sequence[np.ndarray]) -> np.ndarray:
    for axis, u in enumerate(frames):
        x = np.moveaxis(np.tensordot(u, x, axes=([1], [axis])), 0, axis)
    return x


def index_state(
    spec: IndexSpec, plan: DistributionPlan, f: np.ndarray, b: int, i: int
) -> PureState:
    d = f.size
    n = int(round(math.log2(d)))
    x, anc = frame_tensor(spec, plan, d)
    x = _to_key_basis(x, [key_frame(f)] * plan.copies)
    layout = [(slot_label(b, i, j), n) for j in range(plan.copies)]
    if anc:
        layout.append((f"anc.{b}.{i}", anc))
    return PureState(tuple(layout), x.reshape(-1))


def build_cheat_state(
    strategy: AliceStrategy,
    family: owf.FamilyParams,
    code: Optional[owf.CodeSpec],
    keys: PrivateKeySet,
    b: int,
    plan: DistributionPlan = distributed_swap_plan(),
) -> GlobalKeyState:
    """Global key state with the signed bit's keys prepared per ``strategy``."""
    M = keys.M
    vecs = [owf.state_vector(family, code, keys.key(b, i)) for i in range(M)]
    blocks = []
    if strategy.independent_across_indices:
        for i in range(M):
            blocks.append(index_state(strategy.spec(i), plan, vecs[i], b, i))
    else:
        d, N = vecs[0].size, plan.copies
        anc = strategy.ancilla_width
        qubits = M * N * family.n + anc
        if qubits > statevec.MAX_QUBITS:
            raise StrategyError(f"joint strategy needs {qubits} qubits (limit {statevec.MAX_QUBITS})")
        shape = (d,) * (M * N) + ((2**anc,) if anc else ())
        x = np.asarray(strategy.joint, dtype=complex)
        if x.size != math.prod(shape):
            raise StrategyError(f"joint state needs {math.prod(shape)} amplitudes")
        x = x.reshape(shape) / np.linalg.norm(x)
        frames = [key_frame(vecs[i]) for i in range(M) for _ in range(N)]
        x = _to_key_basis(x, frames)
        layout = [(slot_label(b, i, j), family.n) for i in range(M) for j in range(N)]
        if anc:
            layout.append(("anc", anc))
        blocks.append(PureState(tuple(layout), x.reshape(-1)))
    for i in range(M):
        vec = owf.state_vector(family, code, keys.key(1 - b, i))
        blocks.append(
            statevec.tensor_all(
                statevec.from_vector(slot_label(1 - b, i, j), vec) for j in range(plan.copies)
            )
        )
    return GlobalKeyState(blocks, M, plan.copies)


# ------------------------------------------------------- exact per-index law


def outcome_table(
    block: PureState, plan: DistributionPlan, f: np.ndarray, b: int, i: int
) -> np.ndarray:
    """Joint probabilities of (all tests pass, recipient r fails verification).

    Returns an array of shape ``(2,)*R`` indexed by fail indicators in the
    order of ``plan.recipients``; its sum is the pass probability.
    """
    layout = block.layout
    amps = block.amplitudes[None, :]
    for group in plan.tests:
        amps = statevec.apply_projector(
            amps, layout, SymmetricProjector([slot_label(b, i, j) for j in group])
        )
    R = len(plan.kept)
    table = np.zeros((2,) * R)
    for pattern in itertools.product((0, 1), repeat=R):
        v = amps
        for (_, j), fail in zip(plan.kept, pattern):
            pv = statevec.apply_projector(v, layout, RankOneProjector(slot_label(b, i, j), f))
            v = v - pv if fail else pv
        table[pattern] = float(np.vdot(v[0], v[0]).real)
    # squared round-off from the frame change sits near 1e-32
    table[table < NOISE_FLOOR] = 0.0
    return table


def convolve_tables(tables: Sequence[np.ndarray]) -> np.ndarray:
    """Joint law of the recipients' failure counts (mass = pass probability)."""
    M = len(tables)
    R = tables[0].ndim
    dist = np.zeros((M + 1,) * R)
    dist[(0,) * R] = 1.0
    for q in tables:
        new = np.zeros_like(dist)
        for pattern in itertools.product((0, 1), repeat=R):
            w = q[pattern]
            if w == 0:
                continue
            src = tuple(slice(0, M + 1 - x) for x in pattern)
            dst = tuple(slice(x, M + 1) for x in pattern)
            new[dst] += w * dist[src]
        dist = new
    return dist


def tally_law(
    strategy: AliceStrategy,
    config: ProtocolConfig,
    plan: DistributionPlan,
    keys: PrivateKeySet,
    b: int = 0,
) -> np.ndarray:
    if not strategy.independent_across_indices:
        raise StrategyError("exact convolution needs independent indices")
    tables = []
    for i in range(keys.M):
        f = owf.state_vector(config.family, config.code, keys.key(b, i))
        block = index_state(strategy.spec(i), plan, f, b, i)
        tables.append(outcome_table(block, plan, f, b, i))
    return convolve_tables(tables)


def _levels(M: int, ladder) -> np.ndarray:
    return np.array([verdict_from_tally(s, M, ladder).level for s in range(M + 1)])


def cheat_mask(M: int, ladder, R: int) -> np.ndarray:
    """Tally grid cells where one recipient is at top acceptance and another rejects."""
    lev = _levels(M, ladder)
    top = len(ladder) - 1
    grids = np.meshgrid(*([lev] * R), indexing="ij")
    any_top = np.zeros(grids[0].shape, dtype=bool)
    any_rej = np.zeros_like(any_top)
    for g in grids:
        any_top |= g == top
        any_rej |= g < 0
    return any_top & any_rej


# ------------------------------------------------------ batched Monte Carlo


def simulate_batch(
    glob: GlobalKeyState,
    plan: DistributionPlan,
    msg: SignedMessage,
    config: ProtocolConfig,
    trials: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Run distribution and verification on ``trials`` copies of ``glob``.

    Returns ``(passed_all, fails)`` with ``fails`` of shape ``(trials, R)``.
    Blocks are independent, so each is simulated on its own.
    """
    alive = np.ones(trials, dtype=bool)
    fails = np.zeros((trials, len(plan.kept)), dtype=np.int64)
    entries = msg.entries()
    for block in list(glob.blocks.values()):
        labels = set(block.labels)
        amps = np.tile(block.amplitudes, (trials, 1))
        for b, i in [(b, i) for i in range(glob.M) for b in (0, 1)]:
            if slot_label(b, i, 0) not in labels:
                continue
            for group in plan.tests:
                proj = SymmetricProjector([slot_label(b, i, j) for j in group])
                passed, _, amps = statevec.sample_projector_batch(amps, block.layout, proj, rng)
                alive &= passed
        for bit, i, k in entries:
            for r, (_, j) in enumerate(plan.kept):
                label = slot_label(bit, i, j)
                if label not in labels:
                    continue
                proj = RankOneProjector(label, owf.state_vector(config.family, config.code, k))
                passed, _, amps = statevec.sample_projector_batch(amps, block.layout, proj, rng)
                fails[:, r] += ~passed
    return alive, fails


def _chunks(trials: int, qubits: int):
    size = max(1, min(trials, 2**22 // 2**qubits, 5000))
    done = 0
    while done < trials:
        yield min(size, trials - done)
        done += size


# ---------------------------------------------------------- repudiation


def repudiate_experiment(
    config: ProtocolConfig,
    strategy: AliceStrategy,
    mode: str,
    rng: np.random.Generator,
    trials: int = 0,
    plan: DistributionPlan = distributed_swap_plan(),
    b: int = 0,
) -> AttackReport:
    """Probability that every distribution test passes yet one recipient
    reaches top-level acceptance while another rejects.

    ``mode="exact"`` convolves exact per-index outcome tables;
    ``mode="mc"`` simulates ``trials`` protocol runs.
    """
    _check_copies(config, plan)
    M, ladder, R = config.M, config.ladder, len(plan.kept)
    mask = cheat_mask(M, ladder, R)
    extras = {"M": M, "plan": plan.name, "gap": ladder[-1] - ladder[0]}
    bound = repudiation_comparison(config)
    ref = "2^-[1-H((1-c2+c1)/2)-H(c)]M with c=0 (type-1 separation)"
    if mode == "exact":
        keys = keygen(M, config.family.L, rng)
        law = tally_law(strategy, config, plan, keys, b)
        extras["pass_all"] = float(law.sum())
        return _exact_report(
            "repudiate", float(law[mask].sum()), comparison_bound=bound, bound_ref=ref,
            extras=extras,
        )
    if mode != "mc":
        raise ConfigError(f"unknown mode {mode!r}")
    if trials < 1:
        raise ConfigError("monte carlo mode needs trials >= 1")
    seed = child_seed(rng)
    successes = passes = 0
    qubits = _max_block_qubits(strategy, config, plan)
    for chunk_id, size in enumerate(_chunks(trials, qubits)):
        crng = stream(seed, chunk_id)
        keys = keygen(M, config.family.L, crng)
        glob = build_cheat_state(strategy, config.family, config.code, keys, b, plan)
        alive, fails = simulate_batch(glob, plan, sign(b, keys), config, size, crng)
        hit = alive & mask[tuple(fails.T)]
        successes += int(hit.sum())
        passes += int(alive.sum())
    extras["pass_all"] = passes / trials
    return _mc_report(
        "repudiate", successes, trials, comparison_bound=bound, bound_ref=ref, extras=extras
    )


def _check_copies(config: ProtocolConfig, plan: DistributionPlan) -> None:
    if config.T != plan.copies:
        raise ConfigError(f"{plan.name} distribution needs T = {plan.copies}, config has {config.T}")


def _max_block_qubits(strategy, config, plan) -> int:
    per_index = plan.copies * config.family.n
    if strategy.independent_across_indices:
        return per_index + max(
            (getattr(strategy.spec(i), "ancilla_width", 0) for i in range(config.M)), default=0
        )
    return config.M * per_index + strategy.ancilla_width


def repudiation_comparison(config: ProtocolConfig) -> float:
    return analysis.repudiation_bound(config.M, config.ladder[0], config.ladder[-1], 0.0)


# ------------------------------------------------------------ two groups


def two_group_plan() -> DistributionPlan:
    """Bob keeps copy 0 and runs a three-copy symmetry test; copy 1 meets
    Charlie's test copy 4 and copy 2 meets Diane's test copy 6."""
    return DistributionPlan(
        "two-group",
        7,
        ((0, 1, 2), (3, 4), (5, 6), (1, 4), (2, 6)),
        (("B", 0), ("C", 3), ("D", 5)),
        (1, 4),
    )


def two_group_experiment(
    config: ProtocolConfig,
    strategy: AliceStrategy,
    rng: np.random.Generator,
    Delta: Optional[float] = None,
    mode: str = "exact",
    trials: int = 0,
    b: int = 0,
) -> AttackReport:
    """Probability that all tests pass and ``|s_C - s_D| >= 2 Delta M``.

    Extras carry the single-group probabilities for ``|s_B - s_C|`` and
    ``|s_B - s_D| >= Delta M``.
    """
    plan = two_group_plan()
    _check_copies(config, plan)
    M = config.M
    Delta = config.ladder[-1] - config.ladder[0] if Delta is None else Delta
    s = np.arange(M + 1)
    sB, sC, sD = np.meshgrid(s, s, s, indexing="ij")
    cd = np.abs(sC - sD) >= 2 * Delta * M - 1e-9
    bc = np.abs(sB - sC) >= Delta * M - 1e-9
    bd = np.abs(sB - sD) >= Delta * M - 1e-9
    extras = {"M": M, "Delta": Delta}
    if mode == "exact":
        keys = keygen(M, config.family.L, rng)
        law = tally_law(strategy, config, plan, keys, b)
        extras.update(
            pass_all=float(law.sum()),
            single_BC=float(law[bc].sum()),
            single_BD=float(law[bd].sum()),
        )
        return _exact_report("two-group", float(law[cd].sum()), extras=extras)
    if mode != "mc":
        raise ConfigError(f"unknown mode {mode!r}")
    seed = child_seed(rng)
    counts = {"cd": 0, "bc": 0, "bd": 0, "pass": 0}
    for chunk_id, size in enumerate(_chunks(trials, _max_block_qubits(strategy, config, plan))):
        crng = stream(seed, chunk_id)
        keys = keygen(M, config.family.L, crng)
        glob = build_cheat_state(strategy, config.family, config.code, keys, b, plan)
        alive, fails = simulate_batch(glob, plan, sign(b, keys), config, size, crng)
        idx = tuple(fails.T)
        counts["cd"] += int((alive & cd[idx]).sum())
        counts["bc"] += int((alive & bc[idx]).sum())
        counts["bd"] += int((alive & bd[idx]).sum())
        counts["pass"] += int(alive.sum())
    extras.update(
        pass_all=counts["pass"] / trials,
        single_BC=counts["bc"] / trials,
        single_BD=counts["bd"] / trials,
    )
    return _mc_report("two-group", counts["cd"], trials, extras=extras)
