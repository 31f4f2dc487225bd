"""Interval partitions, Property P, and the explicit iteration bounds.

Positions.  Partitions run over ``[1, M]`` where ``M`` is the number of
dictionary elements; partition position ``j`` is basis position ``j - 1``
(for an initial Haar segment, the coefficient of ``h_{j-1}``).  All
conversions go through :func:`to_basis_position` / :func:`to_partition_position`.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterator, Sequence

import numpy as np

from .haar import HaarCoefficients, HaarDictionary, lp_norm, synthesize
from .lp import minimize_lines

# knife-edge band for the backward-induction comparisons
GUARD_BAND = 1e-9
_INT_CAP = 2**62


def to_basis_position(j: int) -> int:
    return j - 1


def to_partition_position(i: int) -> int:
    return i + 1


@total_ordering
@dataclass(frozen=True)
class IntervalPartition:
    """``(I_1, ..., I_k)`` of ``[1, m]``; ``I_1`` holds ``m``, ``I_k`` holds 1.

    Each interval is an inclusive ``(lo, hi)`` pair.  Ordering is the
    lexicographic order on the cardinalities ``card I_1, card I_2, ...``.
    """

    intervals: tuple[tuple[int, int], ...]

    def __post_init__(self):
        iv = tuple((int(lo), int(hi)) for lo, hi in self.intervals)
        if not iv:
            raise ValueError("empty partition")
        if iv[-1][0] != 1:
            raise ValueError("last interval must start at 1")
        for (lo, hi) in iv:
            if lo > hi:
                raise ValueError(f"bad interval {(lo, hi)}")
        for (lo1, _), (_, hi2) in zip(iv, iv[1:]):
            if lo1 != hi2 + 1:
                raise ValueError("intervals must be consecutive and decreasing")
        object.__setattr__(self, "intervals", iv)

    @classmethod
    def from_lengths(cls, lengths: Sequence[int]) -> IntervalPartition:
        """Build from ``(card I_1, card I_2, ...)``."""
        m = sum(lengths)
        iv, hi = [], m
        for n in lengths:
            if n < 1:
                raise ValueError("interval lengths must be positive")
            iv.append((hi - n + 1, hi))
            hi -= n
        return cls(tuple(iv))

    @property
    def m(self) -> int:
        return self.intervals[0][1]

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in self.intervals)

    @property
    def endpoints(self) -> tuple[int, ...]:
        """``max I_j`` for ``j = 1..k``."""
        return tuple(hi for _, hi in self.intervals)

    def block_of(self, j: int) -> int:
        """1-based number of the interval containing position ``j``."""
        for t, (lo, hi) in enumerate(self.intervals, start=1):
            if lo <= j <= hi:
                return t
        raise ValueError(f"position {j} outside [1, {self.m}]")

    def __len__(self) -> int:
        return len(self.intervals)

    def __eq__(self, other):
        if not isinstance(other, IntervalPartition):
            return NotImplemented
        return self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __lt__(self, other: IntervalPartition) -> bool:
        return lex_compare(self, other) is Order.LESS


class Order(enum.Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def lex_compare(P1: IntervalPartition, P2: IntervalPartition) -> Order:
    if P1.m != P2.m:
        raise ValueError(f"partitions of [1,{P1.m}] and [1,{P2.m}] are not comparable")
    for a, b in zip(P1.lengths, P2.lengths):
        if a != b:
            return Order.LESS if a < b else Order.GREATER
    return Order.EQUAL


def all_partitions(m: int) -> Iterator[IntervalPartition]:
    """Every interval partition of ``[1, m]`` (there are ``2**(m-1)``)."""
    for cuts in itertools.product((False, True), repeat=m - 1):
        lengths, run = [], 1
        for cut in cuts:
            if cut:
                lengths.append(run)
                run = 1
            else:
                run += 1
        lengths.append(run)
        yield IntervalPartition.from_lengths(lengths)


def _partition(a: Sequence[float], zeta: float) -> tuple[IntervalPartition, bool]:
    a = np.abs(np.asarray(a, dtype=float))
    m = len(a)
    if m < 1:
        raise ValueError("need at least one coefficient")
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    knife_edge = False
    lengths = [1]
    s = a[m - 1]  # sum of |a_{max I_r}| over the intervals opened so far
    for j in range(m - 1, 0, -1):  # partition position j = m-1 .. 1
        lhs = a[j - 1]
        rhs = (1.0 + zeta) ** (m - j) * s
        top = max(lhs, rhs)
        if top > 0 and abs(lhs - rhs) <= GUARD_BAND * top:
            knife_edge = True
        if lhs <= rhs:
            lengths[-1] += 1
        else:
            lengths.append(1)
            s += lhs
    return IntervalPartition.from_lengths(lengths), knife_edge


def interval_partition(a: Sequence[float], zeta: float) -> IntervalPartition:
    """Backward-induction partition ``P(y)`` of the coefficient positions.

    Position ``m`` opens ``I_1``; position ``i`` joins the interval of ``i+1``
    when ``|a_i| <= (1+zeta)^(m-i) * sum_{r<=j} |a_{max I_r}|``, otherwise it
    opens the next interval.  ``a[0]`` is position 1.
    """
    return _partition(a, zeta)[0]


def norm_upper_bound_check(a: Sequence[float], zeta: float, p: float) -> tuple[float, float]:
    """``(||y||_p, m (1+zeta)^m / zeta * max_j |a_{max I_j}|)`` for ``y = sum a_i h_{i-1}^{(p)}``."""
    a = np.asarray(a, dtype=float)
    m = len(a)
    P = interval_partition(a, zeta)
    top = max(abs(a[to_basis_position(j)]) for j in P.endpoints)
    norm = lp_norm(synthesize(HaarCoefficients.initial_segment(a), p), p)
    return norm, m * (1.0 + zeta) ** m / zeta * top


def n0_bound(m: int, gamma: float, zeta: float) -> int:
    """``1 + floor(ln(2m(1+zeta)^m / zeta) / ln(1/gamma))``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    if m < 1:
        raise ValueError("m must be at least 1")
    num = math.log(2 * m) + m * math.log1p(zeta) - math.log(zeta)
    ratio = num / -math.log(gamma)
    if not math.isfinite(ratio) or ratio >= _INT_CAP:
        raise OverflowError("n0 bound exceeds 2**62")
    nearest = round(ratio)
    # an exact integer quotient must not floor to one below it
    floor = nearest if abs(ratio - nearest) <= 1e-12 * max(1.0, abs(ratio)) else math.floor(ratio)
    return 1 + floor


def total_bound(m: int, n0: int) -> int:
    """``(2^m - 1) * n0``."""
    if m < 1 or n0 < 1:
        raise ValueError("need m >= 1 and n0 >= 1")
    out = ((1 << m) - 1) * n0
    if out > _INT_CAP:
        raise OverflowError("total bound exceeds 2**62")
    return out


def termination_bound(m: int, gamma: float, zeta: float) -> int:
    """Step bound for a dictionary ``h_0..h_m``: ``(2^m - 1) * n0(m + 1, gamma, zeta)``."""
    return total_bound(m, n0_bound(m + 1, gamma, zeta))


def zeta_formula(p: float) -> float:
    """``max(4, 2^((p-3)/2) sqrt(p(p-1)))``, valid for ``p > 2``."""
    if not 2.0 < p < math.inf:
        raise ValueError("the explicit Property P constant needs 2 < p < inf")
    return max(4.0, 2.0 ** ((p - 3.0) / 2.0) * math.sqrt(p * (p - 1.0)))


@dataclass(frozen=True)
class PropertyPReport:
    i0: int
    t0: float
    tail_sum: float
    ratio: float
    zeta_used: float | None
    anomaly: bool = False

    @property
    def violation(self) -> bool:
        return self.zeta_used is not None and self.ratio > self.zeta_used


def _minimizers(C: np.ndarray, i0: int, d: HaarDictionary) -> np.ndarray:
    """``t0`` minimizing the norm over the coefficient at ``i0`` (others frozen), per row."""
    frozen = np.array(C, dtype=float)
    frozen[:, i0] = 0.0
    Y = d.synthesize_array(frozen)
    Phi = np.broadcast_to(d.synthesis[i0], Y.shape)
    lam, _, _ = minimize_lines(Y, Phi, d.p, d.weight)
    return -lam


def property_p_ratios(C: np.ndarray, d: HaarDictionary) -> np.ndarray:
    """Ratios ``|t0| / sum_{i>i0} |a_i|`` for every row and every ``i0 < size-1``.

    Rows with zero tail get ratio 0 (their minimizer is 0 by strict
    monotonicity).  Shape ``(rows, size-1)``.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    out = np.zeros((C.shape[0], d.size - 1))
    for i0 in range(d.size - 1):
        tail = np.abs(C[:, i0 + 1:]).sum(axis=1)
        live = tail > 0
        if not live.any():
            continue
        t0 = _minimizers(C[live], i0, d)
        out[live, i0] = np.abs(t0) / tail[live]
    return out


def property_p_minimizer(
    a: Sequence[float] | HaarCoefficients,
    i0: int,
    p: float,
    zeta: float | None = None,
) -> PropertyPReport:
    """Minimizer ``t0`` over position ``i0`` with the other coefficients fixed."""
    c = a if isinstance(a, HaarCoefficients) else HaarCoefficients.initial_segment(a)
    d = HaarDictionary(c.indices, p)
    if not 0 <= i0 < d.size - 1:
        raise ValueError(f"i0 must satisfy 0 <= i0 < {d.size - 1}")
    C = np.asarray(c.coeffs)[None]
    t0 = float(_minimizers(C, i0, d)[0])
    tail = float(np.abs(c.coeffs[i0 + 1:]).sum())
    scale = float(np.abs(c.coeffs).max(initial=0.0))
    if tail == 0.0:
        anomaly = abs(t0) > 1e-10 * max(scale, 1.0)
        return PropertyPReport(i0, t0, 0.0, 0.0, zeta, anomaly)
    return PropertyPReport(i0, t0, tail, abs(t0) / tail, zeta)


def property_p_samples(rng: np.random.Generator, count: int, size: int) -> np.ndarray:
    """Gaussian coefficients with log-uniform per-entry magnitudes.

    Half the rows are plain Gaussian; the other half spread magnitudes over
    six decades so small tails next to large heads get sampled too.
    """
    C = rng.standard_normal((count, size))
    half = count // 2
    C[half:] *= 10.0 ** rng.uniform(-4.0, 2.0, size=(count - half, size))
    return C


def estimate_zeta(m: int, p: float, sample_count: int, seed: int, chunk: int = 4096) -> float:
    """Largest sampled Property P ratio for ``h_0..h_m`` (a lower bound on the best constant)."""
    if sample_count < 1:
        raise ValueError("need at least one sample")
    d = HaarDictionary.initial_segment(m, p)
    if m == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    best, todo = 0.0, sample_count
    while todo > 0:
        n = min(chunk, todo)
        best = max(best, float(property_p_ratios(property_p_samples(rng, n, d.size), d).max()))
        todo -= n
    return best


def h1_shift_check(y: Sequence[float] | HaarCoefficients, t: float, p: float, slack: float = 0.0) -> bool:
    """``||1 + t||y||_p h_1 + y||_p >= ||1 + y||_p`` for ``y`` in ``span(h_i, i >= 2)``.

    A bare sequence is read as normalized coefficients of ``h_2, h_3, ...``.
    ``slack`` is a relative tolerance on the right-hand side.
    """
    if isinstance(y, HaarCoefficients):
        c = y
    else:
        c = HaarCoefficients(tuple(range(2, 2 + len(y))), np.asarray(y, dtype=float))
    if any(i < 2 for i in c.indices):
        raise ValueError("y must lie in the span of h_i, i >= 2")
    f = synthesize(c, p)
    ny = lp_norm(f, p)
    one = type(f).constant(1.0, f.level)
    h1 = synthesize(HaarCoefficients((1,), [1.0]), p, f.level)
    lhs = lp_norm(one + h1 * (t * ny) + f, p)
    rhs = lp_norm(one + f, p)
    return lhs >= rhs * (1.0 - slack)


@dataclass
class LexLemmaReport:
    checked: int = 0
    exempt: int = 0
    guard_skipped: int = 0
    violations: list[tuple[int, int, str]] = None

    def __post_init__(self):
        if self.violations is None:
            self.violations = []

    @property
    def steps(self) -> int:
        return self.checked + self.exempt + self.guard_skipped

    def merge(self, other: LexLemmaReport) -> LexLemmaReport:
        return LexLemmaReport(
            self.checked + other.checked,
            self.exempt + other.exempt,
            self.guard_skipped + other.guard_skipped,
            self.violations + other.violations,
        )


def verify_lex_lemma(trace, zeta: float) -> LexLemmaReport:
    """Replay a trace and check the partition case split at every step.

    Selecting ``i0 = max I_j`` with ``j >= 2`` must strictly raise ``P`` in
    the lexicographic order; any other selection below ``m`` must leave it
    unchanged.  Selections of the last position are exempt; steps with a
    knife-edge comparison in either partition are skipped and counted.
    Violations are ``(step, partition_position, message)`` tuples.
    """
    report = LexLemmaReport()
    coeffs = trace.residuals()
    m = len(trace.indices)
    for rec in trace.steps:
        j0 = to_partition_position(rec.position)
        if j0 == m:
            report.exempt += 1
            continue
        before, edge1 = _partition(coeffs[rec.step - 1], zeta)
        after, edge2 = _partition(coeffs[rec.step], zeta)
        if edge1 or edge2:
            report.guard_skipped += 1
            continue
        report.checked += 1
        order = lex_compare(before, after)
        if j0 in before.endpoints[1:]:
            if order is not Order.LESS:
                report.violations.append((rec.step, j0, f"{before.lengths} -> {after.lengths} not increasing"))
        elif order is not Order.EQUAL:
            report.violations.append((rec.step, j0, f"{before.lengths} -> {after.lengths} changed"))
    return report


@dataclass
class N0LemmaReport:
    checked: int = 0
    skipped: int = 0
    violations: list[int] = None
    n0: int = 0

    def __post_init__(self):
        if self.violations is None:
            self.violations = []

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_n0_lemma(trace, zeta: float, gamma_hat: float) -> N0LemmaReport:
    """From every residual, some partition endpoint must be selected within ``n0`` steps.

    Windows that run past the end of a trace count as satisfied only if the
    trace terminated (termination forces every endpoint with a nonzero
    coefficient to be selected); otherwise they are skipped.  Violations are
    the residual numbers ``n`` (``x_n``) whose window failed.
    """
    m = len(trace.indices)
    n0 = n0_bound(m, gamma_hat, zeta)
    report = N0LemmaReport(n0=n0)
    coeffs = trace.residuals()
    selected = [to_partition_position(r.position) for r in trace.steps]
    N = len(selected)
    for n in range(N):
        ends = set(interval_partition(coeffs[n], zeta).endpoints)
        window = selected[n:n + n0]
        if any(j in ends for j in window):
            report.checked += 1
        elif n + n0 > N and not trace.terminated:
            report.skipped += 1
        else:
            report.checked += 1
            report.violations.append(n)
    return report
