"""Equality tests on quantum registers: swap, key verification, symmetry.

Each test is the two-outcome projective measurement whose statistics match
the usual ancilla circuit.  The swap test projects onto the symmetric
subspace of two registers, the symmetry test onto the completely symmetric
subspace of ``s`` registers, and key verification onto ``|f_k><f_k|``.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import owf
from .owf import CodeSpec, FamilyParams
from .statevec import (
    LayoutError,
    Measurement,
    PureState,
    RankOneProjector,
    SymmetricProjector,
    measure_projector,
)

TestOutcome = Measurement


def _equal_widths(state: PureState, regs: Sequence[str]) -> None:
    if len({state.width(r) for r in regs}) != 1:
        raise LayoutError(f"registers {list(regs)} differ in width")


def swap_test(state: PureState, reg_a: str, reg_b: str, rng: np.random.Generator) -> TestOutcome:
    """Swap test between two equal-width registers.

    For a product input ``|psi>|phi>`` the pass probability is
    ``(1 + |<psi|phi>|**2) / 2``.
    """
    _equal_widths(state, (reg_a, reg_b))
    return measure_projector(state, SymmetricProjector((reg_a, reg_b)), rng)


def swap_fail_probability(delta: float) -> float:
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    return (1 - delta**2) / 2


def key_projector(reg: str, family: FamilyParams, code: Optional[CodeSpec], k: str):
    return RankOneProjector(reg, owf.state_vector(family, code, k))


def verify_key(
    state: PureState,
    reg: str,
    family: FamilyParams,
    code: Optional[CodeSpec],
    k: str,
    rng: np.random.Generator,
) -> TestOutcome:
    """Check that ``reg`` holds ``|f_k>``; fails with probability ``1 - |<phi|f_k>|**2``."""
    if state.width(reg) != family.n:
        raise LayoutError(f"register {reg!r} has width {state.width(reg)}, family needs {family.n}")
    return measure_projector(state, key_projector(reg, family, code, k), rng)


def symmetry_test(state: PureState, regs: Sequence[str], rng: np.random.Generator) -> TestOutcome:
    regs = tuple(regs)
    if len(regs) < 2:
        raise ValueError("symmetry test needs at least two registers")
    _equal_widths(state, regs)
    return measure_projector(state, SymmetricProjector(regs), rng)
