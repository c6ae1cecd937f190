"""Security-bound formulas, the low-weight tail experiment and report helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from statistics import NormalDist

import numpy as np

Z95 = NormalDist().inv_cdf(0.975)


def hamming_entropy(x: float) -> float:
    """Binary entropy in bits, with ``0 log 0 = 0``."""
    if not 0 <= x <= 1:
        raise ValueError(f"entropy argument {x} outside [0, 1]")
    if x in (0, 1):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def is_vacuous(bound: float) -> bool:
    return bound >= 1


def lemma_bound(M: int, Delta: float, c: float) -> float:
    """``2**(1 + [H(1/2 - Delta) + H(c) - 1] * M)``."""
    if M < 1 or not 0 < Delta < 0.5 or not 0 <= c <= 1:
        raise ValueError("need M >= 1, 0 < Delta < 1/2, 0 <= c <= 1")
    return 2.0 ** (1 + (hamming_entropy(0.5 - Delta) + hamming_entropy(c) - 1) * M)


def lemma_condition(Delta: float, c: float) -> bool:
    """Entropy condition for a decaying bound.

    The count ``2**(M H(c))`` of low-weight words only holds for ``c <= 1/2``,
    so larger ``c`` never qualifies.
    """
    return c <= 0.5 and hamming_entropy(0.5 - Delta) + hamming_entropy(c) < 1


def repudiation_bound(M: int, c1: float, c2: float, c: float) -> float:
    """``2**(-[1 - H((1 - c2 + c1)/2) - H(c)] * M)``; vacuous when the bracket is <= 0.

    ``c = 0`` (no type-2 terms at all) is accepted as the limiting case.
    """
    if not 0 <= c1 < c2 < 1 or not 0 <= c < 1 or M < 1:
        raise ValueError("need 0 <= c1 < c2 < 1, 0 <= c < 1, M >= 1")
    exponent = 1 - hamming_entropy((1 - c2 + c1) / 2) - hamming_entropy(c)
    return 2.0 ** (-exponent * M)


def expected_guessed_keys(L: int, n: int, T: int, key_count: int) -> float:
    """Expected keys a forger guesses exactly: ``2**-(L - T n) * key_count``."""
    return 2.0 ** (-(L - T * n)) * key_count


def binomial_ci95(successes: int, trials: int) -> tuple[float, float]:
    """Wilson score interval at 95%."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need trials >= 1 and 0 <= successes <= trials")
    z2 = Z95**2
    p = successes / trials
    denom = 1 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = Z95 * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials**2)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


# ------------------------------------------------------ low-weight tail lemma


def walsh_hadamard(vec: np.ndarray) -> np.ndarray:
    """Apply ``H`` to every qubit of a ``2**M`` amplitude vector."""
    m = int(round(math.log2(vec.size)))
    x = np.asarray(vec, dtype=complex).reshape((2,) * m)
    for axis in range(m):
        a = x.take(0, axis=axis)
        b = x.take(1, axis=axis)
        x = np.stack([a + b, a - b], axis=axis) / math.sqrt(2)
    return x.reshape(-1)


def low_weight_words(M: int, r: int) -> np.ndarray:
    """Indices of all ``M``-bit words of weight at most ``r``."""
    words = []
    for w in range(r + 1):
        for ones in combinations(range(M), w):
            words.append(sum(1 << (M - 1 - i) for i in ones))
    return np.array(sorted(words), dtype=np.int64)


def popcounts(M: int) -> np.ndarray:
    idx = np.arange(2**M)
    counts = np.zeros(2**M, dtype=np.int64)
    for bit in range(M):
        counts += (idx >> bit) & 1
    return counts


def outside_mask(M: int, Delta: float) -> np.ndarray:
    """Weights strictly outside ``[M(1/2 - Delta), M(1/2 + Delta)]``."""
    w = np.arange(M + 1)
    return (w < M * (0.5 - Delta) - 1e-12) | (w > M * (0.5 + Delta) + 1e-12)


def tail_probability(amplitudes_pm: np.ndarray, M: int, Delta: float) -> float:
    """Exact probability of an out-of-range weight for a state given in the ``|+>/|->`` basis."""
    comp = walsh_hadamard(amplitudes_pm)
    weights = popcounts(M)
    probs = np.abs(comp) ** 2
    per_weight = np.bincount(weights, weights=probs, minlength=M + 1)
    return float(per_weight[outside_mask(M, Delta)].sum())


def binomial_tail(M: int, Delta: float) -> float:
    w = np.arange(M + 1)
    pmf = np.array([math.comb(M, int(k)) for k in w], dtype=float) / 2**M
    return float(pmf[outside_mask(M, Delta)].sum())


@dataclass
class LemmaReport:
    M: int
    r: int
    Delta: float
    samples: int
    max_tail_frequency: float
    bound: float
    satisfied: bool
    vacuous: bool
    condition_holds: bool
    exact_term_count: int
    approx_term_count: float
    empirical_max_tail: float | None = None


def lemma_experiment(
    M: int,
    r: int,
    Delta: float,
    samples: int,
    rng: np.random.Generator,
    trials_per_state: int = 0,
) -> LemmaReport:
    """Largest out-of-range weight probability over random low-weight states.

    Each sample draws complex Gaussian amplitudes on every ``|+>/|->`` word
    with at most ``r`` minus signs, normalizes, and rotates to the
    computational basis.  Tails are summed exactly; ``trials_per_state``
    shots per state give an optional sampled cross-check.
    """
    if not 1 <= M <= 20 or not 0 <= r <= M:
        raise ValueError("need 1 <= M <= 20 and 0 <= r <= M")
    if not 0 < Delta < 0.5:
        raise ValueError("Delta must lie in (0, 1/2)")
    if samples < 1:
        raise ValueError("need samples >= 1")
    words = low_weight_words(M, r)
    weights = popcounts(M)
    out_w = outside_mask(M, Delta)
    worst = 0.0
    worst_emp = 0.0 if trials_per_state else None
    for _ in range(samples):
        amps = np.zeros(2**M, dtype=complex)
        amps[words] = rng.normal(size=words.size) + 1j * rng.normal(size=words.size)
        amps /= np.linalg.norm(amps)
        probs = np.abs(walsh_hadamard(amps)) ** 2
        tail = float(np.bincount(weights, weights=probs, minlength=M + 1)[out_w].sum())
        worst = max(worst, tail)
        if trials_per_state:
            shots = rng.choice(probs.size, size=trials_per_state, p=probs / probs.sum())
            worst_emp = max(worst_emp, float(out_w[weights[shots]].mean()))
    c = r / M
    bound = lemma_bound(M, Delta, c)
    return LemmaReport(
        M=M,
        r=r,
        Delta=Delta,
        samples=samples,
        max_tail_frequency=worst,
        bound=bound,
        satisfied=worst <= bound,
        vacuous=is_vacuous(bound) or c > 0.5,
        condition_holds=lemma_condition(Delta, c),
        exact_term_count=int(words.size),
        approx_term_count=2.0 ** (M * hamming_entropy(c)),
        empirical_max_tail=worst_emp,
    )


# -------------------------------------------------------------------- records


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("report values must be finite")
        return format(value, ".12g")
    if value is None:
        return "none"
    return str(value)


def format_record(record: str, **fields) -> str:
    parts = [f"record={record}"]
    parts += [f"{k}={fmt(v)}" for k, v in fields.items()]
    return " ".join(parts)


def parse_record(line: str) -> dict[str, str]:
    return dict(item.split("=", 1) for item in line.split())
