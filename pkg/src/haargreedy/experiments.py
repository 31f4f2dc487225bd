"""Seeded experiment campaigns, the 2D counterexample, and trace serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .greedy import (
    AlgorithmConfig,
    GreedyStepRecord,
    GreedyTrace,
    Kind,
    Status,
    estimate_gamma,
    random_unit_coefficients,
    run_batch,
)
from .haar import HaarCoefficients, HaarDictionary
from .partitions import (
    LexLemmaReport,
    estimate_zeta,
    n0_bound,
    property_p_ratios,
    property_p_samples,
    total_bound,
    verify_lex_lemma,
    verify_n0_lemma,
    zeta_formula,
)

SCHEMA_VERSION = "1.0"
CSV_COLUMNS = (
    "version",
    "step",
    "selectedIndex",
    "haarIndex",
    "lambda",
    "normBefore",
    "normAfter",
    "partitionBefore",
    "snappedIndices",
    "coefficientsAfter",
)
# zeta is a positive constant by definition; at p = 2 the sampled ratio is 0
ZETA_FLOOR = 0.1
RATIO_TOL = 1e-9

_KIND_CODES = {k: n for n, k in enumerate(Kind)}


def cell_seed(seed: int, role: str, p: float, m: int, kind: Kind | None = None, tau: float = 1.0) -> int:
    """Deterministic per-cell seed from the master seed and the cell coordinates."""
    roles = {"init": 1, "gamma": 2, "zeta": 3, "propp": 4, "h1shift": 5}
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = [
        int(seed),
        roles[role],
        int(round(p * 1_000_000)),
        int(m),
        len(_KIND_CODES) if kind is None else _KIND_CODES[Kind(kind)],
        int(round(tau * 1_000_000)),
    ]
    return int(np.random.SeedSequence(key).generate_state(1, dtype=np.uint64)[0] >> 1)


def adversarial_presets(size: int) -> np.ndarray:
    """Ramps, spikes and alternating signs, one preset per row.

    Ramps ``r^i`` and ``r^-i`` (``r`` in 3, 10) are clipped to eight decades so
    no entry falls under the snapping threshold.
    """
    rows = []
    for r in (3.0, 10.0):
        top = int(8 / math.log10(r))
        exps = np.minimum(np.arange(size), top)
        rows.append(r ** exps)
        rows.append(r ** -exps)
    for i in range(size):
        spike = np.zeros(size)
        spike[i] = 1.0
        rows.append(spike)
    rows.append((-1.0) ** np.arange(size))
    return np.array(rows)


def unit_normalize(C: np.ndarray, d: HaarDictionary) -> np.ndarray:
    return C / d.norms_array(d.synthesize_array(C))[:, None]


def initial_vectors(d: HaarDictionary, runs: int, seed: int, presets: bool = True) -> np.ndarray:
    rng = np.random.default_rng(seed)
    X = random_unit_coefficients(rng, runs, d)
    if presets:
        X = np.vstack([X, unit_normalize(adversarial_presets(d.size), d)])
    return X


def zeta_for(p: float, m: int, samples: int, seed: int) -> tuple[float, str]:
    """Property P constant for ``h_0..h_m``: the explicit one for p > 2, sampled otherwise."""
    if p > 2.0:
        return zeta_formula(p), "formula"
    zhat = estimate_zeta(m, p, samples, cell_seed(seed, "zeta", p, m))
    return max(zhat, ZETA_FLOOR), "estimate"


@dataclass
class CampaignSpec:
    p_grid: Sequence[float]
    m_grid: Sequence[int]
    kinds: Sequence[Kind] = (Kind.XGA, Kind.DGA)
    tau_grid: Sequence[float] = (1.0,)
    runs_per_cell: int = 200
    seed: int = 0
    output_path: str | None = None
    format: str = "json"
    presets: bool = True
    gamma_samples: int = 10_000
    zeta_samples: int = 10_000
    snap_epsilon: float = 1e-10
    max_steps: int | None = None

    def __post_init__(self):
        if not (self.p_grid and self.m_grid and self.kinds and self.tau_grid):
            raise ValueError("campaign grids must be nonempty")
        if self.runs_per_cell < 1:
            raise ValueError("runs_per_cell must be at least 1")
        self.kinds = tuple(Kind(k) for k in self.kinds)

    def cells(self) -> Iterable[tuple[float, int, Kind, float]]:
        for p in self.p_grid:
            for m in self.m_grid:
                for kind in self.kinds:
                    taus = self.tau_grid if kind.weak else (1.0,)
                    for tau in taus:
                        yield float(p), int(m), kind, float(tau)


@dataclass
class CellResult:
    p: float
    m: int
    kind: Kind
    tau: float
    gamma_hat: float
    zeta: float
    zeta_source: str
    n0: int
    bound: int
    traces: list[GreedyTrace] = field(repr=False)

    @property
    def observed_max(self) -> int:
        return max(t.n_steps for t in self.traces)

    @property
    def statuses(self) -> dict[str, int]:
        out = {s.value: 0 for s in Status}
        for t in self.traces:
            out[t.status.value] += 1
        return out

    def row(self) -> dict:
        return {
            "p": self.p,
            "m": self.m,
            "kind": self.kind.value,
            "tau": self.tau,
            "gammaHat": self.gamma_hat,
            "zeta": self.zeta,
            "zetaSource": self.zeta_source,
            "n0": self.n0,
            "N": self.bound,
            "runs": len(self.traces),
            "terminated": self.statuses[Status.TERMINATED.value],
            "observedMax": self.observed_max,
            "withinBound": self.observed_max <= self.bound,
        }


def run_cell(spec: CampaignSpec, p: float, m: int, kind: Kind, tau: float, zeta_cache: dict | None = None) -> CellResult:
    d = HaarDictionary.initial_segment(m, p)
    key = (p, m)
    if zeta_cache is not None and key in zeta_cache:
        zeta, source = zeta_cache[key]
    else:
        zeta, source = zeta_for(p, m, spec.zeta_samples, spec.seed)
        if zeta_cache is not None:
            zeta_cache[key] = (zeta, source)
    gamma = estimate_gamma(d, kind, tau, spec.gamma_samples, cell_seed(spec.seed, "gamma", p, m, kind, tau))
    n0 = n0_bound(m + 1, gamma, zeta)
    bound = total_bound(m, n0)
    max_steps = spec.max_steps or 10 * bound
    config = AlgorithmConfig(kind, p, tau, snap_epsilon=spec.snap_epsilon, max_steps=max_steps, zeta=zeta)
    X = initial_vectors(d, spec.runs_per_cell, cell_seed(spec.seed, "init", p, m, kind, tau), spec.presets)
    traces = run_batch(X, config, d)
    return CellResult(p, m, kind, tau, gamma, zeta, source, n0, bound, traces)


def run_campaign(spec: CampaignSpec) -> list[CellResult]:
    cache: dict = {}
    return [run_cell(spec, p, m, kind, tau, cache) for p, m, kind, tau in spec.cells()]


def lemma_rows(cells: Sequence[CellResult]) -> list[dict]:
    rows = []
    for c in cells:
        lex = LexLemmaReport()
        n0_viol = n0_checked = 0
        for t in c.traces:
            lex = lex.merge(verify_lex_lemma(t, c.zeta))
            rep = verify_n0_lemma(t, c.zeta, c.gamma_hat)
            n0_viol += len(rep.violations)
            n0_checked += rep.checked
        rows.append({
            "p": c.p,
            "m": c.m,
            "kind": c.kind.value,
            "tau": c.tau,
            "zeta": c.zeta,
            "gammaHat": c.gamma_hat,
            "steps": lex.steps,
            "lexChecked": lex.checked,
            "lexExempt": lex.exempt,
            "guardSkipped": lex.guard_skipped,
            "lexViolations": len(lex.violations),
            "n0": c.n0,
            "n0Checked": n0_checked,
            "n0Violations": n0_viol,
        })
    return rows


def propp_rows(p: float, m_grid: Sequence[int], samples: int, seed: int) -> list[dict]:
    formula = zeta_formula(p) if p > 2.0 else None
    rows = []
    for m in m_grid:
        d = HaarDictionary.initial_segment(m, p)
        rng = np.random.default_rng(cell_seed(seed, "propp", p, m))
        ratios = property_p_ratios(property_p_samples(rng, samples, d.size), d)
        rows.append({
            "p": p,
            "m": m,
            "samples": samples,
            "zetaHat": float(ratios.max(initial=0.0)),
            "zetaFormula": formula,
            "violations": None if formula is None else int(np.sum(ratios > formula + RATIO_TOL)),
        })
    return rows


# -- the two-dimensional non-monotone example ---------------------------------

_D2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class EuclideanPairState:
    """Residual in the Euclidean plane with dictionary ``(1,0)``, ``(1,1)/sqrt 2``."""

    x: tuple[float, float]

    @property
    def norm(self) -> float:
        return math.hypot(*self.x)

    def step(self) -> tuple[int, EuclideanPairState]:
        """Project away the better of the two directions (lowest index on ties)."""
        x1, x2 = self.x
        s = x1 + x2
        # |<x,d2>|^2 = s^2/2 against |<x,d1>|^2 = x1^2
        if x1 * x1 >= 0.5 * s * s:
            return 0, EuclideanPairState((0.0, x2))
        h = 0.5 * s
        return 1, EuclideanPairState((x1 - h, x2 - h))


def counterexample(steps: int, x0: tuple[float, float] = (0.0, 1.0), snap: float = 1e-10) -> dict:
    """Run the X-greedy algorithm on the non-monotone 2D basis.

    A coordinate is snapped to zero when it drops below ``snap`` times the
    previous residual norm; the run stops once the residual is exactly zero.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    state = EuclideanPairState((float(x0[0]), float(x0[1])))
    rows = []
    terminated = state.norm == 0.0
    for n in range(1, steps + 1):
        if terminated:
            break
        before = state.norm
        sel, state = state.step()
        x = tuple(0.0 if abs(v) < snap * before else v for v in state.x)
        state = EuclideanPairState(x)
        rows.append({
            "step": n,
            "selected": sel,
            "x": list(state.x),
            "norm": state.norm,
            "ratio": state.norm / before,
        })
        terminated = state.norm == 0.0
    return {
        "x0": [float(x0[0]), float(x0[1])],
        "terminated": terminated,
        "stepsTaken": len(rows),
        "steps": rows,
    }


# -- trace serialization ------------------------------------------------------


def _floats(a) -> list[float]:
    return [float(v) for v in a]


def step_to_dict(rec: GreedyStepRecord) -> dict:
    return {
        "step": rec.step,
        "selectedIndex": rec.position,
        "haarIndex": rec.haar_index,
        "lambda": rec.lam,
        "normBefore": rec.norm_before,
        "normAfter": rec.norm_after,
        "partitionBefore": None if rec.partition_before is None else list(rec.partition_before),
        "snappedIndices": list(rec.snapped),
        "coefficientsAfter": _floats(rec.coefficients_after),
    }


def trace_to_dict(trace: GreedyTrace) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "config": trace.config.to_dict(),
        "indices": list(trace.indices),
        "initialCoefficients": _floats(trace.initial.coeffs),
        "status": trace.status.value,
        "stepsTaken": trace.n_steps,
        "failure": trace.failure,
        "finalCoefficients": _floats(trace.final_coefficients),
        "steps": [step_to_dict(r) for r in trace.steps],
    }


def trace_from_dict(d: dict) -> GreedyTrace:
    if d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported trace version {d.get('version')!r}")
    steps = [
        GreedyStepRecord(
            step=s["step"],
            position=s["selectedIndex"],
            haar_index=s["haarIndex"],
            lam=s["lambda"],
            norm_before=s["normBefore"],
            norm_after=s["normAfter"],
            snapped=tuple(s["snappedIndices"]),
            coefficients_after=np.array(s["coefficientsAfter"], dtype=float),
            partition_before=None if s["partitionBefore"] is None else tuple(s["partitionBefore"]),
        )
        for s in d["steps"]
    ]
    return GreedyTrace(
        HaarCoefficients(tuple(d["indices"]), np.array(d["initialCoefficients"])),
        AlgorithmConfig.from_dict(d["config"]),
        steps,
        Status(d["status"]),
        d.get("failure"),
    )


def trace_csv_rows(trace: GreedyTrace) -> list[dict]:
    rows = []
    for s in map(step_to_dict, trace.steps):
        rows.append({
            "version": SCHEMA_VERSION,
            "step": s["step"],
            "selectedIndex": s["selectedIndex"],
            "haarIndex": s["haarIndex"],
            "lambda": repr(s["lambda"]),
            "normBefore": repr(s["normBefore"]),
            "normAfter": repr(s["normAfter"]),
            "partitionBefore": "" if s["partitionBefore"] is None else "-".join(map(str, s["partitionBefore"])),
            "snappedIndices": " ".join(map(str, s["snappedIndices"])),
            "coefficientsAfter": " ".join(map(repr, s["coefficientsAfter"])),
        })
    return rows


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def dumps_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    buf = io.StringIO()
    if columns is None:
        columns = list(rows[0]) if rows else []
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    return buf.getvalue()


def load_trace(path: str | Path) -> GreedyTrace:
    return trace_from_dict(json.loads(Path(path).read_text()))
