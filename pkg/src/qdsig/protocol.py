"""Key generation, public-key distribution, signing and verification.

Public-key copies live in registers named ``k{b}.{i}.c{j}`` (copy ``j`` of the
key for bit value ``b`` at index ``i``).  Extra copies handed to a forger use
``e{j}`` in place of ``c{j}``.  The joint state of all copies is held by a
:class:`GlobalKeyState` as a product of independent blocks, merged on demand
when a test touches registers from different blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import analysis, eqtest, owf, statevec
from .owf import CodeSpec, FamilyParams
from .statevec import Projector, PureState, RankOneProjector, SymmetricProjector

TOL = 1e-9


class ProtocolError(Exception):
    pass


class ConfigError(ProtocolError, ValueError):
    pass


class HolevoViolation(ConfigError):
    pass


class SpentKeyError(ProtocolError):
    pass


class DistributionError(ProtocolError, ValueError):
    pass


# ----------------------------------------------------------------------- keys


@dataclass(frozen=True)
class PrivateKeySet:
    M: int
    L: int
    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if len(self.pairs) != self.M:
            raise ValueError("need exactly M key pairs")
        for pair in self.pairs:
            for k in pair:
                owf.check_bits(k, self.L)

    def key(self, b: int, i: int) -> str:
        return self.pairs[i][b]


def keygen(M: int, L: int, rng: np.random.Generator) -> PrivateKeySet:
    if M < 1 or L < 1:
        raise ValueError("need M >= 1 and L >= 1")
    bits = rng.integers(0, 2, size=(M, 2, L))
    pairs = tuple(
        (owf.array_to_bits(bits[i, 0]), owf.array_to_bits(bits[i, 1])) for i in range(M)
    )
    return PrivateKeySet(M, L, pairs)


def dump_keys(keys: PrivateKeySet, family: FamilyParams) -> str:
    width = -(-keys.L // 4)
    lines = [f"keys {keys.M} {keys.L} {family.kind}"]
    for i, (k0, k1) in enumerate(keys.pairs):
        lines.append(f"{i} {int(k0, 2):0{width}x} {int(k1, 2):0{width}x}")
    return "\n".join(lines) + "\n"


def load_keys(text: str) -> PrivateKeySet:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0][0] != "keys":
        raise ValueError("key file must start with 'keys M L family'")
    M, L = int(lines[0][1]), int(lines[0][2])
    pairs = []
    for pos, parts in enumerate(lines[1:]):
        if int(parts[0]) != pos:
            raise ValueError(f"key file index {parts[0]} out of order")
        pairs.append(tuple(owf.int_to_bits(int(h, 16), L) for h in parts[1:3]))
    return PrivateKeySet(M, L, tuple(pairs))


# -------------------------------------------------------------------- verdicts


@dataclass(frozen=True, order=True)
class Verdict:
    """``level >= 0`` means ``level``-ACC; ``level == -1`` means REJ."""

    level: int

    @property
    def accepts(self) -> bool:
        return self.level >= 0

    def __str__(self):
        return "REJ" if self.level < 0 else f"{self.level}-ACC"

    @classmethod
    def parse(cls, text: str) -> "Verdict":
        return cls(-1) if text == "REJ" else cls(int(text.split("-")[0]))


REJ = Verdict(-1)


def check_ladder(ladder: Sequence[float]) -> tuple[float, ...]:
    ladder = tuple(float(c) for c in ladder)
    if len(ladder) < 2:
        raise ConfigError("ladder needs at least c1 and c2")
    if ladder[0] < 0:
        raise ConfigError("c1 must be >= 0")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError(f"ladder {ladder} is not strictly increasing")
    if ladder[-1] >= 1:
        raise ConfigError("top threshold must be < 1")
    return ladder


def verdict_from_tally(s: int, M: int, ladder: Sequence[float]) -> Verdict:
    """Map a failure count to a verdict.

    ``s <= c1 M`` gives the top level ``(q-1)``-ACC, ``s >= c_q M`` gives REJ,
    and ``c_{r-1} M < s < c_r M`` gives ``(q-r)``-ACC.  A tie at an interior
    threshold falls to the lower level.
    """
    ladder = check_ladder(ladder)
    q = len(ladder)
    if s <= ladder[0] * M + TOL:
        return Verdict(q - 1)
    if s >= ladder[-1] * M - TOL:
        return REJ
    for r in range(2, q + 1):
        if s < ladder[r - 1] * M - TOL:
            return Verdict(q - r)
    return REJ


def choose_c2_bound(delta: float, G: float, M: int) -> float:
    """Strict upper bound ``(1 - delta**2)(M - G) / M`` on admissible c2."""
    if not 0 <= G <= M:
        raise ValueError("need 0 <= G <= M")
    return (1 - delta**2) * (M - G) / M


# ---------------------------------------------------------------------- config


@dataclass(frozen=True)
class ProtocolConfig:
    family: FamilyParams
    M: int
    T: int
    ladder: tuple[float, ...]
    code: Optional[CodeSpec] = None
    holevo_override: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ladder", check_ladder(self.ladder))
        if self.M < 1 or self.T < 1:
            raise ConfigError("need M >= 1 and T >= 1")
        if self.family.kind == owf.FINGERPRINT and self.code is None:
            raise ConfigError("fingerprint family needs a code")
        if not self.holevo_override and self.T * self.family.n >= self.family.L:
            raise HolevoViolation(
                f"T*n = {self.T * self.family.n} must be < L = {self.family.L} "
                "(use holevo_override to allow)"
            )

    @property
    def guessed_keys(self) -> float:
        return analysis.expected_guessed_keys(self.family.L, self.family.n, self.T, 2 * self.M)


def default_ladder(family: FamilyParams, M: int, T: int, c1: float = 0.0) -> tuple[float, float]:
    """``(c1, 0.8 * choose_c2_bound(delta, G, M))`` with ``G`` the expected guesses."""
    G = analysis.expected_guessed_keys(family.L, family.n, T, 2 * M)
    if G > M:
        raise ConfigError(f"expected guessed keys G = {G} exceeds M; give c2 explicitly")
    c2 = 0.8 * choose_c2_bound(family.delta, G, M)
    if c2 <= c1:
        raise ConfigError(f"derived c2 = {c2} is not above c1 = {c1}; give c2 explicitly")
    return (c1, c2)


# ---------------------------------------------------------------- global state


def slot_label(b: int, i: int, j: int, prefix: str = "c") -> str:
    return f"k{b}.{i}.{prefix}{j}"


class GlobalKeyState:
    """Joint state of every public-key copy, stored as independent blocks.

    The global state is the tensor product of :attr:`blocks`.  Operations
    touching registers in different blocks merge those blocks first.  Spent
    registers stay in the state so post-states remain inspectable.
    """

    def __init__(self, blocks: Iterable[PureState], M: int, copies: int, eve_copies: int = 0):
        self.M = M
        self.copies = copies
        self.eve_copies = eve_copies
        self.blocks: dict[int, PureState] = {}
        self._owner: dict[str, int] = {}
        self._next = 0
        self.spent: set[str] = set()
        for blk in blocks:
            self._add(blk)

    def _add(self, blk: PureState) -> int:
        bid = self._next
        self._next += 1
        for label in blk.labels:
            if label in self._owner:
                raise statevec.CompositionError(f"register {label!r} appears twice")
            self._owner[label] = bid
        self.blocks[bid] = blk
        return bid

    @property
    def labels(self) -> list[str]:
        return list(self._owner)

    def width(self, label: str) -> int:
        return self.blocks[self._block_id(label)].width(label)

    def _block_id(self, label: str) -> int:
        try:
            return self._owner[label]
        except KeyError:
            raise statevec.LayoutError(f"unknown register {label!r}") from None

    def _merge(self, labels: Iterable[str]) -> int:
        ids = sorted({self._block_id(lb) for lb in labels})
        if len(ids) == 1:
            return ids[0]
        merged = statevec.tensor_all(self.blocks.pop(b) for b in ids)
        for label in merged.labels:
            self._owner[label] = ids[0]
        self.blocks[ids[0]] = merged
        return ids[0]

    def state_of(self, labels: Iterable[str]) -> PureState:
        """Block containing ``labels`` (merging if needed)."""
        return self.blocks[self._merge(list(labels))]

    def full_state(self) -> PureState:
        return statevec.tensor_all(self.blocks[b] for b in sorted(self.blocks))

    def copy(self) -> "GlobalKeyState":
        other = GlobalKeyState([], self.M, self.copies, self.eve_copies)
        other.blocks = dict(self.blocks)
        other._owner = dict(self._owner)
        other._next = self._next
        other.spent = set(self.spent)
        return other

    def _measure(self, labels, fn):
        bid = self._merge(labels)
        outcome = fn(self.blocks[bid])
        self.blocks[bid] = outcome.post_state
        return outcome

    def swap_test(self, a: str, b: str, rng) -> eqtest.TestOutcome:
        return self._measure((a, b), lambda st: eqtest.swap_test(st, a, b, rng))

    def symmetry_test(self, labels: Sequence[str], rng) -> eqtest.TestOutcome:
        if len(labels) == 2:
            return self.swap_test(labels[0], labels[1], rng)
        return self._measure(labels, lambda st: eqtest.symmetry_test(st, labels, rng))

    def verify_key(self, label: str, family, code, k: str, rng) -> eqtest.TestOutcome:
        return self._measure(
            (label,), lambda st: eqtest.verify_key(st, label, family, code, k, rng)
        )

    def measure_in_basis(self, label: str, unitary: Optional[np.ndarray], rng) -> str:
        """Apply ``unitary`` (``None`` for the computational basis) and measure."""
        bid = self._merge((label,))
        rotated = self.blocks[bid]
        if unitary is not None:
            rotated = statevec.apply_unitary(rotated, (label,), unitary)
        bits, post = statevec.sample_computational(rotated, (label,), rng)
        self.blocks[bid] = post
        return bits

    def project(self, projector: Projector) -> float:
        """Keep only the pass branch of ``projector``; returns its probability."""
        bid = self._merge(projector.registers)
        p, post = statevec.project(self.blocks[bid], projector)
        if post is None:
            raise statevec.ImpossibleBranchError("projection has zero norm")
        self.blocks[bid] = post
        return p

    def mark_spent(self, labels: Iterable[str]) -> None:
        self.spent.update(labels)


def make_public_keys(
    keys: PrivateKeySet,
    config: ProtocolConfig,
    copies: Optional[int] = None,
    eve_copies: int = 0,
) -> GlobalKeyState:
    """Honest public keys: ``copies`` (default ``T``) product copies of every ``|f_k>``."""
    if keys.L != config.family.L:
        raise ConfigError("key length does not match the family")
    copies = config.T if copies is None else copies
    blocks = []
    for i in range(keys.M):
        for b in (0, 1):
            vec = owf.state_vector(config.family, config.code, keys.key(b, i))
            for j in range(copies):
                blocks.append(statevec.from_vector(slot_label(b, i, j), vec))
            for j in range(eve_copies):
                blocks.append(statevec.from_vector(slot_label(b, i, j, "e"), vec))
    return GlobalKeyState(blocks, keys.M, copies, eve_copies)


# ---------------------------------------------------------------- distribution


@dataclass(frozen=True)
class DistributionPlan:
    """Per-key test schedule.

    ``tests`` lists copy-index groups in the order they are run; a pair is a
    swap test and a larger group a symmetry test.  ``kept`` maps each
    recipient to the copy kept for verification.
    """

    name: str
    copies: int
    tests: tuple[tuple[int, ...], ...]
    kept: tuple[tuple[str, int], ...]
    cross_pair: Optional[tuple[int, int]] = None

    @property
    def recipients(self) -> tuple[str, ...]:
        return tuple(r for r, _ in self.kept)


def recipient_names(count: int) -> tuple[str, ...]:
    base = ("B", "C", "D")
    return base[:count] + tuple(f"R{j}" for j in range(3, count))


def trusted_center_plan(copies: int, recipients: Sequence[str]) -> DistributionPlan:
    if len(recipients) > copies:
        raise DistributionError(f"{len(recipients)} recipients but only {copies} copies per key")
    tests = tuple((0, j) for j in range(1, copies))
    kept = tuple((r, j) for j, r in enumerate(recipients))
    return DistributionPlan("trusted-center", copies, tests, kept)


def distributed_swap_plan() -> DistributionPlan:
    # Bob: kept 0, test 1; Charlie: kept 2, test 3; the test copies meet at Bob
    return DistributionPlan(
        "distributed-swap", 4, ((0, 1), (2, 3), (1, 3)), (("B", 0), ("C", 2)), (1, 3)
    )


def symmetry_plan(t: int) -> DistributionPlan:
    """``t`` recipients with ``t + 1`` copies each.

    Recipient ``r`` owns copies ``r(t+1) .. r(t+1)+t``; the first is kept and
    copy ``r(t+1) + 1 + d`` goes into the second test run by recipient ``d``.
    """
    if t < 2:
        raise DistributionError("symmetry distribution needs t >= 2")
    names = recipient_names(t)
    own = tuple(tuple(r * (t + 1) + j for j in range(t + 1)) for r in range(t))
    second = tuple(tuple(u * (t + 1) + 1 + d for u in range(t)) for d in range(t))
    kept = tuple((names[r], r * (t + 1)) for r in range(t))
    return DistributionPlan(f"symmetry-{t}", t * (t + 1), own + second, kept, (1, t + 2))


@dataclass
class DistributionResult:
    aborted: bool
    assignments: dict[str, dict[tuple[int, int], str]]
    failed: Optional[tuple[int, int, tuple[int, ...]]] = None
    plan: Optional[DistributionPlan] = None


def key_indices(glob: GlobalKeyState) -> list[tuple[int, int]]:
    return [(b, i) for i in range(glob.M) for b in (0, 1)]


def run_distribution(
    glob: GlobalKeyState, plan: DistributionPlan, rng: np.random.Generator
) -> DistributionResult:
    """Run every test of ``plan`` on every key; stop at the first failure."""
    if glob.copies != plan.copies:
        raise DistributionError(f"plan needs {plan.copies} copies per key, state has {glob.copies}")
    for b, i in key_indices(glob):
        for group in plan.tests:
            labels = [slot_label(b, i, j) for j in group]
            if not glob.symmetry_test(labels, rng).passed:
                return DistributionResult(True, {}, (b, i, group), plan)
    kept_copies = {j for _, j in plan.kept}
    discarded = [
        slot_label(b, i, j)
        for b, i in key_indices(glob)
        for j in range(plan.copies)
        if j not in kept_copies
    ]
    glob.mark_spent(discarded)
    assignments = {
        r: {(b, i): slot_label(b, i, j) for b, i in key_indices(glob)} for r, j in plan.kept
    }
    return DistributionResult(False, assignments, None, plan)


def plan_pass_probability(glob: GlobalKeyState, plan: DistributionPlan) -> float:
    """Exact probability that every test of ``plan`` passes (state untouched)."""
    scratch = glob.copy()
    total = 1.0
    for b, i in key_indices(glob):
        for group in plan.tests:
            proj = SymmetricProjector([slot_label(b, i, j) for j in group])
            bid = scratch._merge(proj.registers)
            p, post = statevec.project(scratch.blocks[bid], proj)
            if post is None:
                return 0.0
            scratch.blocks[bid] = post
            total *= p
    return total


def trusted_center_distribute(
    glob: GlobalKeyState, recipients: Sequence[str], rng
) -> DistributionResult:
    return run_distribution(glob, trusted_center_plan(glob.copies, recipients), rng)


def distributed_swap_distribute(glob: GlobalKeyState, rng) -> DistributionResult:
    if glob.copies != 4:
        raise DistributionError("distributed swap test needs exactly 4 copies per key")
    return run_distribution(glob, distributed_swap_plan(), rng)


def distributed_symmetry_distribute(glob: GlobalKeyState, t: int, rng) -> DistributionResult:
    plan = symmetry_plan(t)
    if glob.copies != plan.copies:
        raise DistributionError(f"t = {t} needs {plan.copies} copies per key")
    return run_distribution(glob, plan, rng)


def plan_for(method: str, copies: int, t: int = 2) -> DistributionPlan:
    if method == "trusted-center":
        return trusted_center_plan(copies, recipient_names(min(copies, t)))
    if method == "distributed-swap":
        return distributed_swap_plan()
    if method == "symmetry":
        return symmetry_plan(t)
    raise ConfigError(f"unknown distribution method {method!r}")


# ------------------------------------------------------------ signing/verify


@dataclass(frozen=True)
class SignedMessage:
    """Message bits and the revealed private keys.

    ``bits`` has one entry for a single-bit message (every revealed key
    belongs to that bit) or one entry per revealed key for an encoded
    multi-bit message.
    """

    bits: tuple[int, ...]
    revealed: tuple[str, ...]

    def __post_init__(self):
        if len(self.bits) not in (1, len(self.revealed)):
            raise ValueError("bits must have length 1 or match the revealed keys")

    @property
    def b(self) -> int:
        return self.bits[0]

    def entries(self) -> list[tuple[int, int, str]]:
        if len(self.bits) == 1:
            return [(self.bits[0], i, k) for i, k in enumerate(self.revealed)]
        return [(bit, i, k) for i, (bit, k) in enumerate(zip(self.bits, self.revealed))]

    @property
    def length_bits(self) -> int:
        return len(self.bits) + sum(len(k) for k in self.revealed)


def sign(b: int, keys: PrivateKeySet) -> SignedMessage:
    if b not in (0, 1):
        raise ValueError("message bit must be 0 or 1")
    return SignedMessage((b,), tuple(keys.key(b, i) for i in range(keys.M)))


def sign_multibit(message: str, code: CodeSpec, keys: PrivateKeySet) -> SignedMessage:
    """Encode ``message`` with ``code`` and sign each codeword bit with its own key pair."""
    if keys.M != code.length:
        raise ValueError(f"need one key pair per codeword bit ({code.length}), got {keys.M}")
    word = owf.encode_codeword(code, message)
    bits = tuple(int(c) for c in word)
    return SignedMessage(bits, tuple(keys.key(bit, j) for j, bit in enumerate(bits)))


def dump_message(msg: SignedMessage) -> str:
    lines = ["signed " + "".join(map(str, msg.bits))]
    lines += [f"{i} {k}" for i, k in enumerate(msg.revealed)]
    return "\n".join(lines) + "\n"


def load_message(text: str) -> SignedMessage:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0][0] != "signed":
        raise ValueError("message file must start with 'signed <bits>'")
    bits = tuple(int(c) for c in lines[0][1])
    return SignedMessage(bits, tuple(parts[1] for parts in lines[1:]))


@dataclass(frozen=True)
class RecipientTally:
    recipient: str
    s: int
    M: int
    pass_probabilities: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not 0 <= self.s <= self.M:
            raise ValueError("need 0 <= s <= M")


def verify(
    msg: SignedMessage,
    kept: Mapping[tuple[int, int], str],
    glob: GlobalKeyState,
    config: ProtocolConfig,
    rng: np.random.Generator,
    recipient: str = "B",
) -> tuple[RecipientTally, Verdict]:
    """Check every revealed key against the recipient's kept copy.

    All of the recipient's kept registers are spent afterwards, whether or
    not they were checked.
    """
    used = [kept[(bit, i)] for bit, i, _ in msg.entries()]
    stale = [lb for lb in list(kept.values()) if lb in glob.spent]
    if stale:
        raise SpentKeyError(f"registers already used: {stale[:3]}")
    fails = 0
    probs = []
    for (bit, i, k), label in zip(msg.entries(), used):
        outcome = glob.verify_key(label, config.family, config.code, k, rng)
        probs.append(outcome.pass_probability)
        fails += not outcome.passed
    glob.mark_spent(kept.values())
    M = len(msg.revealed)
    tally = RecipientTally(recipient, fails, M, tuple(probs))
    return tally, verdict_from_tally(fails, M, config.ladder)


def tally_line(tally: RecipientTally, verdict: Verdict) -> str:
    return f"recipient={tally.recipient} s={tally.s} M={tally.M} verdict={verdict}"


@dataclass
class SessionResult:
    distribution: DistributionResult
    message: Optional[SignedMessage]
    results: list[tuple[RecipientTally, Verdict]]


def honest_session(
    config: ProtocolConfig,
    method: str,
    rng: np.random.Generator,
    b: int = 0,
    t: int = 2,
    keys: Optional[PrivateKeySet] = None,
) -> SessionResult:
    """Key generation, distribution, signing of ``b`` and verification by every recipient."""
    keys = keys or keygen(config.M, config.family.L, rng)
    plan = plan_for(method, config.T, t)
    if plan.copies != config.T:
        raise ConfigError(f"{plan.name} distribution needs T = {plan.copies}, config has {config.T}")
    glob = make_public_keys(keys, config)
    dist = run_distribution(glob, plan, rng)
    if dist.aborted:
        return SessionResult(dist, None, [])
    msg = sign(b, keys)
    results = [
        verify(msg, dist.assignments[r], glob, config, rng, recipient=r) for r in plan.recipients
    ]
    return SessionResult(dist, msg, results)
