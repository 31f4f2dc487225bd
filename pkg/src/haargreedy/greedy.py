"""X-Greedy and Dual Greedy algorithms (and weak variants) over Haar dictionaries.

The residual lives in coefficient space; cell values are materialized per step
for the norming functional and the line searches.  Each step changes exactly
one coefficient, ``a_i <- a_i - lam``, so the greedy approximant is always
``x_0 - x_n`` up to snapped round-off.

Many independent runs can be advanced in lockstep by :func:`run_batch`; it is
the same algorithm as :func:`run`, vectorized over the batch dimension.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .haar import HaarCoefficients, HaarDictionary
from .lp import LineSearchError, minimize_lines, norming_density_array

log = logging.getLogger(__name__)

# Relative slack for "achieves the optimum" comparisons; lowest position wins
# among near-ties so traces do not depend on the last bit of a norm.
TIE_SLACK = 1e-13
# A selected last coefficient must vanish to this (relative) accuracy.
LAST_ZERO_TOL = 1e-8


class Kind(str, enum.Enum):
    XGA = "xga"
    DGA = "dga"
    WXGA = "wxga"
    WDGA = "wdga"

    @property
    def dual(self) -> bool:
        return self in (Kind.DGA, Kind.WDGA)

    @property
    def weak(self) -> bool:
        return self in (Kind.WXGA, Kind.WDGA)


class Status(str, enum.Enum):
    TERMINATED = "terminated"
    STEP_CAP = "step_cap"
    NUMERICAL_FAILURE = "numerical_failure"


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class AlgorithmConfig:
    kind: Kind
    p: float
    tau: float = 1.0
    snap_epsilon: float = 1e-10
    max_steps: int = 100_000
    seed: int | None = None
    # constant used for the partition snapshot in each step record (None: no snapshot)
    zeta: float | None = None
    tie_rule: str = field(default="lowest-index", init=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "tau", float(self.tau))
        if not 1.0 < self.p < np.inf:
            raise ValueError(f"p must satisfy 1 < p < inf, got {self.p}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if not self.kind.weak and self.tau != 1.0:
            raise ValueError(f"{self.kind.value} requires tau = 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not 0.0 < self.snap_epsilon <= 1e-6:
            raise ValueError("snap_epsilon must lie in (0, 1e-6]")
        if self.zeta is not None and not self.zeta > 0:
            raise ValueError("zeta must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "p": self.p,
            "tau": self.tau,
            "snapEpsilon": self.snap_epsilon,
            "maxSteps": self.max_steps,
            "tieRule": self.tie_rule,
            "seed": self.seed,
            "zeta": self.zeta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> AlgorithmConfig:
        return cls(
            kind=d["kind"],
            p=d["p"],
            tau=d["tau"],
            snap_epsilon=d["snapEpsilon"],
            max_steps=d["maxSteps"],
            seed=d.get("seed"),
            zeta=d.get("zeta"),
        )


@dataclass(frozen=True)
class GreedyStepRecord:
    step: int
    position: int
    haar_index: int
    lam: float
    norm_before: float
    norm_after: float
    snapped: tuple[int, ...]
    coefficients_after: np.ndarray = field(repr=False)
    partition_before: tuple[int, ...] | None = None


@dataclass
class GreedyTrace:
    initial: HaarCoefficients
    config: AlgorithmConfig
    steps: list[GreedyStepRecord]
    status: Status
    failure: str | None = None

    @property
    def indices(self) -> tuple[int, ...]:
        return self.initial.indices

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def terminated(self) -> bool:
        return self.status is Status.TERMINATED

    def residual(self, n: int) -> np.ndarray:
        """Coefficients of ``x_n`` (``x_0`` for ``n = 0``)."""
        if not 0 <= n <= len(self.steps):
            raise IndexError(f"step {n} outside 0..{len(self.steps)}")
        if n == 0:
            return np.array(self.initial.coeffs)
        return np.array(self.steps[n - 1].coefficients_after)

    @property
    def final_coefficients(self) -> np.ndarray:
        return self.residual(len(self.steps))

    def residuals(self) -> list[np.ndarray]:
        return [self.residual(n) for n in range(len(self.steps) + 1)]


def _positions_within(values: np.ndarray, threshold: np.ndarray) -> np.ndarray:
    """Lowest column of each row with ``values >= threshold``."""
    return np.argmax(values >= threshold[:, None], axis=1)


def _select_dual(V, norms, d: HaarDictionary, tau):
    g = norming_density_array(V, d.p, d.weight)
    s = np.abs(g @ d.synthesis.T) * d.weight
    smax = s.max(axis=1)
    pos = _positions_within(s, tau * smax - TIE_SLACK * smax)
    return pos, s


def _line_search_all(V, d: HaarDictionary):
    """Optimal steps and residual norms against every dictionary element."""
    B, M = V.shape[0], d.size
    Y = np.repeat(V, M, axis=0)
    Phi = np.tile(d.synthesis, (B, 1))
    lam, _, _ = minimize_lines(Y, Phi, d.p, d.weight)
    res = d.norms_array(Y - lam[:, None] * Phi)
    return lam.reshape(B, M), res.reshape(B, M)


def _select_x(V, norms, d: HaarDictionary, tau):
    lam, res = _line_search_all(V, d)
    best = res.min(axis=1)
    if tau == 1.0:
        pos = _positions_within(-res, -(best + TIE_SLACK * norms))
    else:
        red = norms[:, None] - res
        pos = _positions_within(red, tau * (norms - best) - TIE_SLACK * norms)
    rows = np.arange(V.shape[0])
    return pos, lam[rows, pos], res[rows, pos]


def select_batch(C: np.ndarray, d: HaarDictionary, kind: Kind, tau: float = 1.0):
    """One greedy selection for each row of the coefficient array ``C``.

    Returns ``(positions, lambdas, norms_before)``.  Rows must be nonzero.
    """
    kind = Kind(kind)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    V = d.synthesize_array(C)
    norms = d.norms_array(V)
    if np.any(norms == 0):
        raise ValueError("greedy selection needs a nonzero residual")
    if kind.dual:
        pos, _ = _select_dual(V, norms, d, tau)
        lam, _, _ = minimize_lines(V, d.synthesis[pos], d.p, d.weight)
    else:
        pos, lam, _ = _select_x(V, norms, d, tau)
    return pos, lam, norms


def dual_scores(y: HaarCoefficients, d: HaarDictionary) -> np.ndarray:
    """``|F_y(h_i^{(p)})|`` for every dictionary position."""
    V = d.synthesize_array(np.asarray(y.coeffs)[None])
    if not np.any(V):
        raise ValueError("zero residual has no norming functional")
    g = norming_density_array(V, d.p, d.weight)
    return (np.abs(g @ d.synthesis.T) * d.weight)[0]


def _dictionary_for(c: HaarCoefficients, p: float, d: HaarDictionary | None) -> HaarDictionary:
    if d is None:
        return HaarDictionary(c.indices, p)
    if d.indices != c.indices or d.p != p:
        raise ValueError("coefficients and dictionary disagree on indices or p")
    return d


def select_dual(y: HaarCoefficients, p: float, tau: float = 1.0, dictionary: HaarDictionary | None = None) -> int:
    d = _dictionary_for(y, p, dictionary)
    if y.is_zero():
        raise ValueError("greedy selection needs a nonzero residual")
    s = dual_scores(y, d)
    smax = s.max()
    return int(np.argmax(s >= tau * smax - TIE_SLACK * smax))


def select_x(y: HaarCoefficients, p: float, tau: float = 1.0, dictionary: HaarDictionary | None = None):
    """Returns ``(position, lambda, residual_norm)`` of the X-greedy choice."""
    d = _dictionary_for(y, p, dictionary)
    if y.is_zero():
        raise ValueError("greedy selection needs a nonzero residual")
    V = d.synthesize_array(np.asarray(y.coeffs)[None])
    pos, lam, res = _select_x(V, d.norms_array(V), d, tau)
    return int(pos[0]), float(lam[0]), float(res[0])


def _last_nonzero(C: np.ndarray) -> np.ndarray:
    nz = C != 0
    return C.shape[1] - 1 - np.argmax(nz[:, ::-1], axis=1)


class _BatchState:
    """Lockstep state of several runs sharing one dictionary and config."""

    def __init__(self, X0: np.ndarray, d: HaarDictionary, config: AlgorithmConfig):
        self.d = d
        self.config = config
        self.C = np.array(X0, dtype=float)
        self.scale = np.abs(self.C).max(axis=1)
        self.records: list[list[GreedyStepRecord]] = [[] for _ in range(len(self.C))]
        self.status: list[Status | None] = [None] * len(self.C)
        self.failure: list[str | None] = [None] * len(self.C)
        self.active = np.any(self.C != 0, axis=1)
        for r in np.flatnonzero(~self.active):
            self.status[r] = Status.TERMINATED

    def _fail(self, rows, message):
        for r in rows:
            self.status[r] = Status.NUMERICAL_FAILURE
            self.failure[r] = f"step {len(self.records[r]) + 1}: {message}"
            self.active[r] = False

    def _select(self, act):
        try:
            return act, select_batch(self.C[act], self.d, self.config.kind, self.config.tau)
        except (LineSearchError, FloatingPointError) as exc:
            # isolate the failing rows, keep going with the rest
            good = []
            for r in act:
                try:
                    select_batch(self.C[[r]], self.d, self.config.kind, self.config.tau)
                    good.append(r)
                except (LineSearchError, FloatingPointError) as row_exc:
                    self._fail([r], str(row_exc))
            good = np.array(good, dtype=int)
            if good.size == 0:
                log.warning("all rows failed: %s", exc)
                return good, None
            return good, select_batch(self.C[good], self.d, self.config.kind, self.config.tau)

    def advance(self, step: int) -> None:
        act = np.flatnonzero(self.active)
        act, sel = self._select(act)
        if sel is None:
            return
        pos, lam, norm_before = sel
        Ca = self.C[act]
        partitions = self._partitions(Ca) if self.config.zeta is not None else None
        scale = self.scale[act]
        last = _last_nonzero(Ca)
        rows = np.arange(len(act))
        new = Ca[rows, pos] - lam
        # strict monotonicity: selecting the last nonzero position zeroes it
        missed = (pos == last) & (np.abs(new) > LAST_ZERO_TOL * scale)
        Ca[rows, pos] = new
        small = (Ca != 0) & (np.abs(Ca) < self.config.snap_epsilon * scale[:, None])
        Ca[small] = 0.0
        self.C[act] = Ca
        norm_after = self.d.norms_array(self.d.synthesize_array(Ca))
        for j, r in enumerate(act):
            if missed[j]:
                self._fail([r], f"last coefficient not zeroed (residual {new[j]:.3e})")
                continue
            self.records[r].append(
                GreedyStepRecord(
                    step=step,
                    position=int(pos[j]),
                    haar_index=self.d.indices[pos[j]],
                    lam=float(lam[j]),
                    norm_before=float(norm_before[j]),
                    norm_after=float(norm_after[j]),
                    snapped=tuple(int(i) for i in np.flatnonzero(small[j])),
                    coefficients_after=Ca[j].copy(),
                    partition_before=None if partitions is None else partitions[j],
                )
            )
            if not np.any(Ca[j]):
                self.active[r] = False
                self.status[r] = Status.TERMINATED

    def _partitions(self, Ca):
        from .partitions import interval_partition

        return [interval_partition(row, self.config.zeta).lengths for row in Ca]

    def traces(self, X0) -> list[GreedyTrace]:
        out = []
        for r, x0 in enumerate(X0):
            status = self.status[r] or Status.STEP_CAP
            out.append(
                GreedyTrace(
                    HaarCoefficients(self.d.indices, x0),
                    self.config,
                    self.records[r],
                    status,
                    self.failure[r],
                )
            )
        return out


def run_batch(
    X0: np.ndarray | Sequence[Sequence[float]],
    config: AlgorithmConfig,
    dictionary: HaarDictionary,
) -> list[GreedyTrace]:
    """Run the algorithm from every row of ``X0`` (coefficients over ``dictionary``)."""
    if dictionary.p != config.p:
        raise ValueError("dictionary and config disagree on p")
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    if X0.shape[1] != dictionary.size:
        raise ValueError(f"expected {dictionary.size} coefficients per row")
    state = _BatchState(X0, dictionary, config)
    for step in range(1, config.max_steps + 1):
        if not state.active.any():
            break
        state.advance(step)
    return state.traces(X0)


def run(x0: HaarCoefficients, config: AlgorithmConfig, dictionary: HaarDictionary | None = None) -> GreedyTrace:
    d = _dictionary_for(x0, config.p, dictionary)
    return run_batch(np.asarray(x0.coeffs)[None], config, d)[0]


def greedy_step(
    y: HaarCoefficients,
    config: AlgorithmConfig,
    dictionary: HaarDictionary | None = None,
    scale: float | None = None,
) -> tuple[GreedyStepRecord, HaarCoefficients]:
    """Apply one greedy step to a nonzero residual.

    ``scale`` is the reference magnitude for snapping (the initial max
    coefficient of the run); defaults to the max coefficient of ``y``.
    """
    d = _dictionary_for(y, config.p, dictionary)
    if y.is_zero():
        raise ValueError("greedy step needs a nonzero residual")
    state = _BatchState(np.asarray(y.coeffs)[None], d, config)
    if scale is not None:
        state.scale[0] = scale
    state.advance(1)
    if state.status[0] is Status.NUMERICAL_FAILURE:
        raise NumericalFailure(state.failure[0])
    rec = state.records[0][0]
    return rec, HaarCoefficients(d.indices, rec.coefficients_after)


def greedy_approximant(trace: GreedyTrace, n: int) -> HaarCoefficients:
    """``G_n = sum_{k <= n} lam_k phi_k`` in coefficient space."""
    if not 0 <= n <= trace.n_steps:
        raise IndexError(f"n must lie in 0..{trace.n_steps}")
    g = np.zeros(len(trace.indices))
    for rec in trace.steps[:n]:
        g[rec.position] += rec.lam
    return HaarCoefficients(trace.indices, g)


def random_unit_coefficients(rng: np.random.Generator, count: int, d: HaarDictionary) -> np.ndarray:
    """Gaussian coefficient vectors rescaled to unit L_p norm."""
    C = rng.standard_normal((count, d.size))
    return C / d.norms_array(d.synthesize_array(C))[:, None]


def one_step_ratios(C: np.ndarray, d: HaarDictionary, kind: Kind, tau: float = 1.0) -> np.ndarray:
    """``||y - lam(y) phi(y)|| / ||y||`` for each row of ``C``."""
    pos, lam, norms = select_batch(C, d, kind, tau)
    after = np.array(C, dtype=float)
    after[np.arange(len(after)), pos] -= lam
    return d.norms_array(d.synthesize_array(after)) / norms


def estimate_gamma(
    dictionary: HaarDictionary,
    kind: Kind,
    tau: float = 1.0,
    sample_count: int = 10_000,
    seed: int = 0,
    samples: np.ndarray | None = None,
    refine_rounds: int = 60,
    chunk: int = 2048,
) -> float:
    """Largest one-step contraction ratio found (a lower bound on gamma).

    Seeded Gaussian directions are screened first; the worst ones are then
    pushed uphill by ``refine_rounds`` of random local perturbation, since
    the supremum sits on a thin set that plain sampling rarely hits.
    ``samples`` adds explicit coefficient vectors to the pool.
    """
    if sample_count < 0 or (sample_count == 0 and samples is None):
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    pool, scores = [], []
    todo = sample_count
    while todo > 0:
        n = min(chunk, todo)
        C = random_unit_coefficients(rng, n, dictionary)
        pool.append(C)
        scores.append(one_step_ratios(C, dictionary, kind, tau))
        todo -= n
    if samples is not None:
        S = np.atleast_2d(np.asarray(samples, dtype=float))
        S = S[np.any(S != 0, axis=1)]
        if len(S):
            pool.append(S)
            scores.append(one_step_ratios(S, dictionary, kind, tau))
    pool, scores = np.concatenate(pool), np.concatenate(scores)
    if refine_rounds > 0 and sample_count > 0:
        pool, scores = _climb(pool, scores, dictionary, kind, tau, rng, refine_rounds)
    return float(scores.max())


def _climb(pool, scores, d, kind, tau, rng, rounds, starts=16, tries=16):
    top = np.argsort(scores)[-starts:]
    X = pool[top] / d.norms_array(d.synthesize_array(pool[top]))[:, None]
    best = scores[top]
    for k in range(rounds):
        sigma = 0.3 * 0.93 ** k
        trial = np.repeat(X, tries, axis=0)
        trial += sigma * rng.standard_normal(trial.shape) * np.abs(trial).max(axis=1, keepdims=True)
        ok = np.any(trial != 0, axis=1)
        trial = trial[ok] / d.norms_array(d.synthesize_array(trial[ok]))[:, None]
        owner = np.repeat(np.arange(len(X)), tries)[ok]
        r = one_step_ratios(trial, d, kind, tau)
        for j in range(len(X)):
            mine = np.flatnonzero(owner == j)
            if mine.size and r[mine].max() > best[j]:
                i = mine[np.argmax(r[mine])]
                X[j], best[j] = trial[i], r[i]
    return np.concatenate([pool, X]), np.concatenate([scores, best])
