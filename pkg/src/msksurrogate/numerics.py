"""Dense linear algebra, seeded RNG streams, spline resampling, and
descriptive statistics used by every other module.

Matrices are plain 2-D C-order float64 numpy arrays throughout the package;
`as_matrix` is the single validation gate. All randomness flows through
`RngStream` (PCG64), whose draw sequence is a pure function of the seed on
every platform. Statistics conventions are fixed here once: population SD
(n divisor) and linearly interpolated quantiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DimensionMismatch,
    EmptyInput,
    NonPositiveRate,
    TooFewRows,
    TooFewSamples,
)

RNG_ALGORITHM = "pcg64"


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce `x` to a 2-D C-order float64 array, or raise DimensionMismatch."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got ndim={a.ndim}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with 64-bit accumulation."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def cubic_resample(series, src_hz: float, dst_hz: float) -> np.ndarray:
    """Resample each column of a uniformly sampled series with a cubic spline.

    A not-a-knot cubic spline is fit per column on the uniform source grid
    (t_k = k / src_hz) and evaluated on the uniform destination grid spanning
    the same interval, both grids aligned at t = 0. The output has
    floor((T-1) * dst_hz / src_hz) + 1 rows. A not-a-knot spline reproduces
    cubic polynomials exactly, which is what the tests lean on.
    """
    series = as_matrix(series, "series")
    if src_hz <= 0 or dst_hz <= 0:
        raise NonPositiveRate(f"rates must be positive, got src={src_hz}, dst={dst_hz}")
    n_src = series.shape[0]
    if n_src < 4:
        raise TooFewSamples(f"cubic resampling needs >= 4 samples, got {n_src}")
    if dst_hz == src_hz:
        return series.copy()
    t_src = np.arange(n_src) / src_hz
    n_dst = int(np.floor((n_src - 1) * dst_hz / src_hz)) + 1
    t_dst = np.arange(n_dst) / dst_hz
    spline = CubicSpline(t_src, series, bc_type="not-a-knot", axis=0)
    return np.ascontiguousarray(spline(t_dst))


@dataclass(frozen=True)
class SummaryStats:
    """Mean/SD/Max/Min/IQR block of a pooled sample."""

    mean: float
    sd: float
    max: float
    min: float
    iqr: float


def summary(values) -> SummaryStats:
    """Descriptive statistics with population SD and type-7 (linear) quantiles."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("summary of an empty sequence")
    q1, q3 = np.quantile(v, [0.25, 0.75])
    vmax = float(np.max(v))
    vmin = float(np.min(v))
    # a constant sample has sd exactly 0; np.std would leave ~1e-16 residue
    sd = 0.0 if vmax == vmin else float(np.std(v))
    return SummaryStats(
        mean=float(np.mean(v)),
        sd=sd,
        max=vmax,
        min=vmin,
        iqr=float(q3 - q1),
    )


DEGENERATE_SD = 1e-12


@dataclass(frozen=True)
class Scaler:
    """Per-column standardization statistics, fitted on training rows only.

    Columns whose population SD is below DEGENERATE_SD are flagged and passed
    through centered only (divisor 1).
    """

    mean: np.ndarray
    sd: np.ndarray
    degenerate: np.ndarray

    @property
    def divisor(self) -> np.ndarray:
        return np.where(self.degenerate, 1.0, self.sd)


def standardize_fit(cols) -> Scaler:
    """Fit per-column mean/SD (population) over >= 2 rows."""
    cols = as_matrix(cols, "cols")
    if cols.shape[0] < 2:
        raise TooFewRows(f"standardize_fit needs >= 2 rows, got {cols.shape[0]}")
    mean = cols.mean(axis=0)
    sd = cols.std(axis=0)
    return Scaler(mean=mean, sd=sd, degenerate=sd < DEGENERATE_SD)


def standardize_apply(scaler: Scaler, cols) -> np.ndarray:
    """(x - mean) / sd per column; degenerate columns are centered only."""
    cols = np.asarray(cols, dtype=np.float64)
    if cols.shape[-1] != scaler.mean.shape[0]:
        raise DimensionMismatch(
            f"scaler has {scaler.mean.shape[0]} columns, data has {cols.shape[-1]}"
        )
    return (cols - scaler.mean) / scaler.divisor


def standardize_invert(scaler: Scaler, cols) -> np.ndarray:
    """Inverse of standardize_apply, mapping standardized values to raw units."""
    cols = np.asarray(cols, dtype=np.float64)
    if cols.shape[-1] != scaler.mean.shape[0]:
        raise DimensionMismatch(
            f"scaler has {scaler.mean.shape[0]} columns, data has {cols.shape[-1]}"
        )
    return cols * scaler.divisor + scaler.mean


class RngStream:
    """Seeded PCG64 stream with deterministic child derivation.

    Two streams built from equal seeds produce identical draw sequences on
    every platform. `child(*keys)` derives an independent stream from
    (seed, keys) via numpy's SeedSequence spawn-key mechanism, which is how
    parallel workers get reproducible, non-overlapping randomness.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.algorithm = RNG_ALGORITHM
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def child(self, *keys: int) -> "RngStream":
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in keys))
        derived = int(ss.generate_state(1, dtype=np.uint64)[0])
        return RngStream(derived)

    def normal(self, shape=None, sd: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, sd, size=shape)

    def uniform(self, low: float = 0.0, high: float = 1.0, shape=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, shape=None):
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, seq, size=None, replace: bool = True):
        return self._gen.choice(seq, size=size, replace=replace)
