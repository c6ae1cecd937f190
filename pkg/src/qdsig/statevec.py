"""Dense pure-state simulation over labeled qubit registers.

A :class:`PureState` carries an ordered register layout and a flat amplitude
vector.  The first register is the most significant; inside a register the
bit string is read big-endian.  States are immutable and every operation
returns a new state.

All sampling takes an explicit :class:`numpy.random.Generator`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

MAX_QUBITS = 24
NORM_TOL = 1e-9
IMPOSSIBLE_BRANCH = 1e-12


class StateError(ValueError):
    """Base class for state-level errors."""


class LayoutError(StateError):
    pass


class CompositionError(StateError):
    pass


class NormalizationError(StateError):
    pass


class ImpossibleBranchError(StateError):
    pass


Layout = tuple  # tuple[tuple[str, int], ...]


def make_layout(registers: Iterable[tuple[str, int]], max_qubits: int = MAX_QUBITS) -> Layout:
    layout = tuple((str(label), int(width)) for label, width in registers)
    labels = [label for label, _ in layout]
    if len(set(labels)) != len(labels):
        raise LayoutError(f"duplicate register labels in {labels}")
    if any(width < 1 for _, width in layout):
        raise LayoutError("register widths must be >= 1")
    total = sum(width for _, width in layout)
    if total > max_qubits:
        raise LayoutError(f"layout needs {total} qubits, limit is {max_qubits}")
    return layout


@dataclass(frozen=True, eq=False)
class PureState:
    layout: Layout
    amplitudes: np.ndarray

    def __post_init__(self):
        layout = make_layout(self.layout)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2 ** sum(w for _, w in layout):
            raise LayoutError(
                f"expected {2 ** sum(w for _, w in layout)} amplitudes, got {amps.size}"
            )
        if not np.all(np.isfinite(amps)):
            raise NormalizationError("non-finite amplitude")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise NormalizationError(f"squared norm {norm2!r} differs from 1")
        amps.flags.writeable = False
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.layout)

    @property
    def num_qubits(self) -> int:
        return sum(w for _, w in self.layout)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(2 ** w for _, w in self.layout)

    def width(self, label: str) -> int:
        return self.layout[self.axis(label)][1]

    def axis(self, label: str) -> int:
        for pos, (name, _) in enumerate(self.layout):
            if name == label:
                return pos
        raise LayoutError(f"unknown register {label!r}")

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def __repr__(self):
        regs = ",".join(f"{label}:{w}" for label, w in self.layout)
        return f"PureState({regs})"


def from_vector(label: str, vector: Sequence[complex]) -> PureState:
    """Single-register state; width inferred from the vector length."""
    vec = np.asarray(vector, dtype=complex).reshape(-1)
    width = int(round(math.log2(vec.size)))
    if 2 ** width != vec.size or width < 1:
        raise LayoutError(f"vector length {vec.size} is not a power of two >= 2")
    return PureState(((label, width),), vec)


def basis_state(label: str, width: int, index: int) -> PureState:
    vec = np.zeros(2 ** width, dtype=complex)
    vec[index] = 1.0
    return PureState(((label, width),), vec)


def relabel(state: PureState, mapping: Mapping[str, str]) -> PureState:
    layout = tuple((mapping.get(label, label), w) for label, w in state.layout)
    return PureState(layout, state.amplitudes)


def tensor(a: PureState, b: PureState) -> PureState:
    clash = set(a.labels) & set(b.labels)
    if clash:
        raise CompositionError(f"register labels collide: {sorted(clash)}")
    return PureState(a.layout + b.layout, np.kron(a.amplitudes, b.amplitudes))


def tensor_all(states: Iterable[PureState]) -> PureState:
    states = list(states)
    out = states[0]
    for st in states[1:]:
        out = tensor(out, st)
    return out


def inner_product(a: PureState, b: PureState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.layout != b.layout:
        raise LayoutError("inner product needs identical layouts")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


# ---------------------------------------------------------------- projectors


class Projector:
    """Orthogonal projector acting on a subset of registers.

    Subclasses implement :meth:`_apply` on an array whose trailing axes are the
    projector's registers, in order (each axis of dimension ``2**width``).
    """

    registers: tuple[str, ...]

    def _apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check(self, layout: Layout) -> None:
        known = dict(layout)
        missing = [r for r in self.registers if r not in known]
        if missing:
            raise LayoutError(f"projector touches unknown registers {missing}")
        if len(set(self.registers)) != len(self.registers):
            raise LayoutError("projector lists a register twice")


class _MatrixOperator(Projector):
    """Any square matrix on the listed registers; no projector checks."""

    def __init__(self, registers: Sequence[str], matrix: np.ndarray):
        self.registers = tuple(registers)
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        self.matrix = m

    def check(self, layout):
        super().check(layout)
        dim = 2 ** sum(dict(layout)[r] for r in self.registers)
        if self.matrix.shape[0] != dim:
            raise LayoutError(f"operator dimension {self.matrix.shape[0]} != {dim}")

    def _apply(self, x):
        k = len(self.registers)
        lead = x.shape[: x.ndim - k]
        flat = x.reshape(lead + (-1,))
        return (flat @ self.matrix.T).reshape(x.shape)


class DenseProjector(_MatrixOperator):
    def __init__(self, registers: Sequence[str], matrix: np.ndarray):
        super().__init__(registers, matrix)
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=NORM_TOL, rtol=0):
            raise ValueError("projector matrix is not self-adjoint")
        if not np.allclose(m @ m, m, atol=NORM_TOL, rtol=0):
            raise ValueError("projector matrix is not idempotent")


class RankOneProjector(Projector):
    """|v><v| on a single register."""

    def __init__(self, register: str, vector: Sequence[complex]):
        self.registers = (register,)
        v = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORM_TOL:
            raise NormalizationError("projector vector must be normalized")
        self.vector = v

    def check(self, layout):
        super().check(layout)
        if 2 ** dict(layout)[self.registers[0]] != self.vector.size:
            raise LayoutError("projector vector does not match register width")

    def _apply(self, x):
        coeff = x @ self.vector.conj()
        return coeff[..., None] * self.vector


class SymmetricProjector(Projector):
    """Projector onto the completely symmetric subspace of equal-width registers."""

    def __init__(self, registers: Sequence[str]):
        self.registers = tuple(registers)
        if len(self.registers) < 2:
            raise ValueError("symmetric projector needs at least two registers")

    def check(self, layout):
        super().check(layout)
        widths = {dict(layout)[r] for r in self.registers}
        if len(widths) != 1:
            raise LayoutError("symmetric projector registers must share one width")

    def _apply(self, x):
        k = len(self.registers)
        base = x.ndim - k
        lead = list(range(base))
        acc = np.zeros_like(x)
        perms = list(itertools.permutations(range(k)))
        for perm in perms:
            acc += x.transpose(lead + [base + p for p in perm])
        return acc / len(perms)


def swap_projector(a: str, b: str) -> SymmetricProjector:
    return SymmetricProjector((a, b))


def apply_projector(amps: np.ndarray, layout: Layout, projector: Projector) -> np.ndarray:
    """Apply ``projector`` to a batch of flat amplitude vectors, shape (B, D)."""
    projector.check(layout)
    labels = [label for label, _ in layout]
    dims = tuple(2 ** w for _, w in layout)
    batch = amps.shape[0]
    x = amps.reshape((batch,) + dims)
    src = [1 + labels.index(r) for r in projector.registers]
    dst = list(range(x.ndim - len(src), x.ndim))
    moved = np.moveaxis(x, src, dst)
    out = np.moveaxis(projector._apply(moved), dst, src)
    return out.reshape(batch, -1)


class Measurement(NamedTuple):
    passed: bool
    pass_probability: float
    post_state: PureState


def sample_projector_batch(
    amps: np.ndarray, layout: Layout, projector: Projector, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Measure ``{P, 1-P}`` on each row of ``amps`` independently.

    Returns ``(passed, pass_probability, post_amplitudes)``.  Rows are
    normalized post-measurement states.
    """
    amps = np.asarray(amps, dtype=complex)
    proj = apply_projector(amps, layout, projector)
    comp = amps - proj
    p_pass = np.einsum("ij,ij->i", proj.conj(), proj).real
    p_fail = np.einsum("ij,ij->i", comp.conj(), comp).real
    if np.any(np.abs(p_pass + p_fail - 1.0) > NORM_TOL):
        raise NormalizationError("projector outcome probabilities do not sum to 1")
    passed = rng.random(amps.shape[0]) < p_pass
    branch_p = np.where(passed, p_pass, p_fail)
    if np.any(branch_p < IMPOSSIBLE_BRANCH):
        raise ImpossibleBranchError("sampled a branch of probability < 1e-12")
    post = np.where(passed[:, None], proj, comp) / np.sqrt(branch_p)[:, None]
    return passed, p_pass, post


def pass_probability(state: PureState, projector: Projector) -> float:
    proj = apply_projector(state.amplitudes[None, :], state.layout, projector)[0]
    return float(np.vdot(proj, proj).real)


def project(state: PureState, projector: Projector) -> tuple[float, PureState | None]:
    """Unsampled pass branch: ``(probability, normalized post-state or None)``."""
    proj = apply_projector(state.amplitudes[None, :], state.layout, projector)[0]
    p = float(np.vdot(proj, proj).real)
    if p < IMPOSSIBLE_BRANCH:
        return p, None
    return p, PureState(state.layout, proj / math.sqrt(p))


def measure_projector(
    state: PureState, projector: Projector, rng: np.random.Generator
) -> Measurement:
    passed, p_pass, post = sample_projector_batch(
        state.amplitudes[None, :], state.layout, projector, rng
    )
    return Measurement(bool(passed[0]), float(p_pass[0]), PureState(state.layout, post[0]))


# ------------------------------------------------------- computational basis


def _marginal(state: PureState, registers: Sequence[str]) -> np.ndarray:
    axes = [state.axis(r) for r in registers]
    probs = np.abs(state.tensor_view()) ** 2
    other = tuple(i for i in range(len(state.layout)) if i not in axes)
    marg = probs.sum(axis=other) if other else probs
    # sum keeps remaining axes in layout order; reorder to the requested order
    kept = [i for i in range(len(state.layout)) if i in axes]
    marg = np.transpose(marg, [kept.index(a) for a in axes])
    return marg.reshape(-1)


def sample_computational(
    state: PureState, registers: Sequence[str], rng: np.random.Generator
) -> tuple[str, PureState]:
    """Measure ``registers`` in the computational basis and collapse."""
    registers = list(registers)
    if len(set(registers)) != len(registers):
        raise LayoutError("register listed twice")
    for r in registers:
        state.axis(r)
    marg = _marginal(state, registers)
    marg = marg / marg.sum()
    outcome = int(rng.choice(marg.size, p=marg))
    widths = [state.width(r) for r in registers]
    bits = format(outcome, f"0{sum(widths)}b")

    x = state.tensor_view().copy()
    mask = np.zeros(x.shape, dtype=bool)
    index: list = [slice(None)] * x.ndim
    offset = 0
    for r, w in zip(registers, widths):
        index[state.axis(r)] = int(bits[offset : offset + w], 2)
        offset += w
    mask[tuple(index)] = True
    x[~mask] = 0
    x = x.reshape(-1)
    x /= np.linalg.norm(x)
    return bits, PureState(state.layout, x)


def apply_unitary(state: PureState, registers: Sequence[str], matrix: np.ndarray) -> PureState:
    u = np.asarray(matrix, dtype=complex)
    dim = 2 ** sum(state.width(r) for r in registers)
    if u.shape != (dim, dim):
        raise LayoutError(f"unitary must be {dim}x{dim}")
    if not np.allclose(u.conj().T @ u, np.eye(dim), atol=NORM_TOL, rtol=0):
        raise ValueError("matrix is not unitary")
    out = apply_projector(state.amplitudes[None, :], state.layout, _MatrixOperator(registers, u))[0]
    return PureState(state.layout, out)


def hadamard(width: int) -> np.ndarray:
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    out = np.array([[1]], dtype=complex)
    for _ in range(width):
        out = np.kron(out, h)
    return out


def permute_registers(state: PureState, permutation: Mapping[str, str]) -> PureState:
    """Move the content of register ``src`` into register ``dst`` for each pair.

    Registers absent from ``permutation`` stay put.  The mapping must be a
    bijection on its labels and may only mix registers of equal width.
    """
    perm = dict(permutation)
    if sorted(perm.keys()) != sorted(perm.values()):
        raise LayoutError("permutation is not a bijection on its registers")
    for src, dst in perm.items():
        if state.width(src) != state.width(dst):
            raise LayoutError(f"cannot move {src!r} into {dst!r}: widths differ")
    inverse = {dst: src for src, dst in perm.items()}
    order = [state.axis(inverse.get(label, label)) for label in state.labels]
    out = state.tensor_view().transpose(order).reshape(-1)
    return PureState(state.layout, out)


# ----------------------------------------------------------------- text dump


def dumps(state: PureState) -> str:
    header = "layout " + ",".join(f"{label}:{w}" for label, w in state.layout)
    n = state.num_qubits
    lines = [header]
    for idx in np.flatnonzero(state.amplitudes):
        amp = state.amplitudes[idx]
        lines.append(f"{format(int(idx), f'0{n}b')} {amp.real:.17g} {amp.imag:.17g}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> PureState:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("layout "):
        raise ValueError("state dump must start with a 'layout' header")
    layout = []
    spec = lines[0][len("layout ") :].strip()
    for item in spec.split(","):
        label, _, width = item.rpartition(":")
        layout.append((label, int(width)))
    layout = make_layout(layout)
    n = sum(w for _, w in layout)
    amps = np.zeros(2**n, dtype=complex)
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3 or len(parts[0]) != n:
            raise ValueError(f"line {lineno}: expected '<bits> <re> <im>'")
        amps[int(parts[0], 2)] = complex(float(parts[1]), float(parts[2]))
    return PureState(layout, amps)
