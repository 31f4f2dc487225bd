"""Haar functions as exact piecewise-constant functions on a dyadic grid.

Everything in the span of finitely many Haar functions is constant on the
cells of some dyadic grid ``[c 2^-L, (c+1) 2^-L)``, so integrals and L_p norms
reduce to finite weighted sums.  A :class:`DyadicFunction` stores the cell
values; a :class:`HaarDictionary` stores the normalized synthesis matrix and the
biorthogonal analysis matrix for an ordered set of Haar indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


def _check_exponent(p: float) -> None:
    if not (1.0 < p < math.inf):
        raise ValueError(f"exponent p must satisfy 1 < p < inf, got {p!r}")


def haar_index_decompose(i: int) -> tuple[int, int]:
    """Return ``(n, k)`` with ``i = 2**n + k`` and ``0 <= k < 2**n``."""
    i = int(i)
    if i < 1:
        raise ValueError("the constant function h_0 has no level/offset")
    n = i.bit_length() - 1
    return n, i - (1 << n)


def haar_level(i: int) -> int:
    """Level of ``h_i``; the constant function is treated as level 0."""
    return 0 if i == 0 else haar_index_decompose(i)[0]


def required_level(indices: Sequence[int]) -> int:
    """Smallest grid level on which every ``h_i`` in ``indices`` is exact."""
    return max((haar_level(i) + (1 if i > 0 else 0) for i in indices), default=0)


def haar_norm(i: int, p: float) -> float:
    _check_exponent(p)
    if i < 0:
        raise ValueError("Haar index must be non-negative")
    if i == 0:
        return 1.0
    return 2.0 ** (-haar_level(i) / p)


@dataclass(frozen=True)
class DyadicFunction:
    """Real function on [0, 1) that is constant on the 2**level dyadic cells."""

    level: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.level < 0:
            raise ValueError("level must be non-negative")
        if values.shape != (1 << self.level,):
            raise ValueError(
                f"expected {1 << self.level} cell values at level {self.level}, "
                f"got shape {values.shape}"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, level: int) -> DyadicFunction:
        return cls(level, np.zeros(1 << level))

    @classmethod
    def constant(cls, c: float, level: int = 0) -> DyadicFunction:
        return cls(level, np.full(1 << level, float(c)))

    @property
    def cell_width(self) -> float:
        return 2.0 ** -self.level

    def refine(self, level: int) -> DyadicFunction:
        if level < self.level:
            raise ValueError(f"cannot coarsen level {self.level} to {level}")
        return DyadicFunction(level, np.repeat(self.values, 1 << (level - self.level)))

    def integral(self) -> float:
        return math.fsum(self.values) * self.cell_width

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def __add__(self, other: DyadicFunction) -> DyadicFunction:
        a, b = common_refinement(self, other)
        return DyadicFunction(a.level, a.values + b.values)

    def __sub__(self, other: DyadicFunction) -> DyadicFunction:
        a, b = common_refinement(self, other)
        return DyadicFunction(a.level, a.values - b.values)

    def __mul__(self, c: float) -> DyadicFunction:
        return DyadicFunction(self.level, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> DyadicFunction:
        return DyadicFunction(self.level, -self.values)


def common_refinement(*fs: DyadicFunction) -> tuple[DyadicFunction, ...]:
    level = max(f.level for f in fs)
    return tuple(f.refine(level) for f in fs)


def lp_norm(f: DyadicFunction, p: float) -> float:
    """Exact L_p norm of a piecewise-constant function (up to rounding)."""
    _check_exponent(p)
    a = np.abs(f.values)
    scale = float(a.max(initial=0.0))
    if scale == 0.0:
        return 0.0
    # scaling first keeps |v|**p away from overflow/underflow
    s = math.fsum((a / scale) ** p) * f.cell_width
    return scale * s ** (1.0 / p)


def haar_as_dyadic(i: int, level: int) -> DyadicFunction:
    """The +1/-1/0 pattern of the (unnormalized) Haar function ``h_i``."""
    if i < 0:
        raise ValueError("Haar index must be non-negative")
    if i == 0:
        return DyadicFunction.constant(1.0, level)
    n, k = haar_index_decompose(i)
    if level < n + 1:
        raise ValueError(f"h_{i} needs grid level >= {n + 1}, got {level}")
    values = np.zeros(1 << level)
    width = 1 << (level - n)
    start = k * width
    values[start:start + width // 2] = 1.0
    values[start + width // 2:start + width] = -1.0
    return DyadicFunction(level, values)


class HaarDictionary:
    """Normalized Haar functions ``h_i / ||h_i||_p`` for an ordered index set.

    Positions ``0..size-1`` follow the order of ``indices``, which must be
    strictly increasing (a finite subsequence of the Haar basis in its natural
    order; the basis is strictly monotone in that order).
    """

    def __init__(self, indices: Sequence[int], p: float):
        _check_exponent(p)
        indices = tuple(int(i) for i in indices)
        if not indices:
            raise ValueError("dictionary must contain at least one Haar index")
        if any(i < 0 for i in indices):
            raise ValueError("Haar indices must be non-negative")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("Haar indices must be strictly increasing")
        self.indices = indices
        self.p = float(p)
        self.level = required_level(indices)
        self.cells = 1 << self.level
        self.weight = 2.0 ** -self.level

    @classmethod
    def initial_segment(cls, m: int, p: float) -> HaarDictionary:
        """The dictionary ``(h_i^{(p)})_{i=0..m}`` (``m + 1`` elements)."""
        if m < 0:
            raise ValueError("m must be non-negative")
        return cls(range(m + 1), p)

    @property
    def size(self) -> int:
        return len(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __repr__(self) -> str:
        return f"HaarDictionary(indices={list(self.indices)}, p={self.p})"

    @cached_property
    def levels(self) -> np.ndarray:
        return np.array([haar_level(i) for i in self.indices], dtype=float)

    @cached_property
    def synthesis(self) -> np.ndarray:
        """Rows are the cell values of the normalized elements, shape (size, cells)."""
        rows = [haar_as_dyadic(i, self.level).values / haar_norm(i, self.p) for i in self.indices]
        out = np.array(rows)
        out.flags.writeable = False
        return out

    @cached_property
    def analysis(self) -> np.ndarray:
        """Rows ``g_i`` with ``weight * g_i . synthesis[j] = delta_ij``.

        For ``i >= 1`` this is ``2**(n/q) h_i``, ``q`` the conjugate exponent.
        """
        q = self.p / (self.p - 1.0)
        rows = [haar_as_dyadic(i, self.level).values * 2.0 ** (haar_level(i) / q) for i in self.indices]
        out = np.array(rows)
        out.flags.writeable = False
        return out

    def element(self, position: int) -> DyadicFunction:
        return DyadicFunction(self.level, self.synthesis[position])

    def synthesize_array(self, coeffs: np.ndarray) -> np.ndarray:
        """Cell values for a coefficient array of shape (..., size)."""
        return np.asarray(coeffs, dtype=float) @ self.synthesis

    def analyze_array(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) @ self.analysis.T) * self.weight

    def norms_array(self, values: np.ndarray) -> np.ndarray:
        """Row-wise L_p norms of cell-value arrays of shape (..., cells)."""
        return batch_lp_norm(values, self.p, self.weight)


def batch_lp_norm(values: np.ndarray, p: float, weight: float) -> np.ndarray:
    a = np.abs(values)
    scale = a.max(axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    s = np.sum((a / safe) ** p, axis=-1) * weight
    return np.where(scale[..., 0] > 0, scale[..., 0] * s ** (1.0 / p), 0.0)


@dataclass(frozen=True)
class HaarCoefficients:
    """Coefficients ``a_i`` of ``sum a_i h_i^{(p)}`` over an ordered index set."""

    indices: tuple[int, ...]
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (len(indices),):
            raise ValueError("need exactly one coefficient per index")
        coeffs.flags.writeable = False
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def initial_segment(cls, coeffs: Sequence[float]) -> HaarCoefficients:
        return cls(tuple(range(len(coeffs))), np.asarray(coeffs, dtype=float))

    @classmethod
    def zeros(cls, indices: Sequence[int]) -> HaarCoefficients:
        return cls(tuple(indices), np.zeros(len(indices)))

    @classmethod
    def unit(cls, indices: Sequence[int], position: int) -> HaarCoefficients:
        c = np.zeros(len(indices))
        c[position] = 1.0
        return cls(tuple(indices), c)

    def __len__(self) -> int:
        return len(self.indices)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)


def synthesize(c: HaarCoefficients, p: float, level: int | None = None) -> DyadicFunction:
    """Evaluate ``sum a_i h_i^{(p)}`` exactly on the dyadic grid."""
    _check_exponent(p)
    need = required_level(c.indices)
    if level is None:
        level = need
    if level < need:
        raise ValueError(f"grid level {level} cannot resolve indices up to {max(c.indices)}")
    values = np.zeros(1 << level)
    for i, a in zip(c.indices, c.coeffs):
        if a != 0.0:
            values += (a / haar_norm(i, p)) * haar_as_dyadic(i, level).values
    return DyadicFunction(level, values)


def analyze(f: DyadicFunction, indices: Sequence[int], p: float) -> HaarCoefficients:
    """Biorthogonal coefficients ``a_i = 2**(n/q) * integral(f h_i)``."""
    _check_exponent(p)
    indices = tuple(int(i) for i in indices)
    level = max(f.level, required_level(indices))
    f = f.refine(level)
    q = p / (p - 1.0)
    coeffs = []
    for i in indices:
        h = haar_as_dyadic(i, level).values
        scale = 2.0 ** (haar_level(i) / q) if i > 0 else 1.0
        coeffs.append(scale * math.fsum(f.values * h) * f.cell_width)
    return HaarCoefficients(indices, np.array(coeffs))


def truncation_norm_check(c: HaarCoefficients, i0: int, p: float) -> tuple[float, float]:
    """Norms of the first ``i0`` terms (positions ``< i0``) and of the full sum."""
    if not 1 <= i0 < len(c):
        raise ValueError(f"cut position must satisfy 1 <= i0 < {len(c)}")
    head = np.array(c.coeffs)
    head[i0:] = 0.0
    level = required_level(c.indices)
    truncated = lp_norm(synthesize(HaarCoefficients(c.indices, head), p, level), p)
    return truncated, lp_norm(synthesize(c, p, level), p)
