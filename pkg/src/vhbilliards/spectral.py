"""Observables, quadrature and correlation diagnostics for VH tables.

The invariant measure is the product of normalized area measure on the table
with uniform weight on the four direction labels; quadrature uses midpoints of
an m-per-unit cell grid, with weights normalized to total mass one.  When m is
a multiple of both tiling denominators the grid is *aligned*: every cell lies
in exactly one rectangle tile, which makes the tile-average projector exactly
idempotent and self-adjoint at the discrete level.

Observables are finite trigonometric sums over the table's bounding box;
restriction multiplies by the indicator of the (closed) table.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import __version__ as _version
from .dynamics import MAX_EVENTS, FlowBatch, SideTable, prepare_sides
from .errors import GridMismatch, TooManySingular, UnalignedGrid
from .geometry import TilingCertificate, VHTable, table_hash, tile_anchors

#: abort correlation runs whose dropped (singular) mass exceeds this fraction
MAX_DROPPED_FRACTION = 1e-3

#: points processed per flow batch when sweeping many directions
BATCH_POINT_LIMIT = 4_000_000


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def _eval_trig(coeffs: Sequence[tuple[int, int, complex]],
               xs: np.ndarray, ys: np.ndarray,
               width: float, height: float) -> np.ndarray:
    """Real part of a Hermitian trigonometric sum, via one rep per +/- pair."""
    out = np.zeros_like(np.asarray(xs, dtype=np.float64))
    for kx, ky, c in coeffs:
        if kx == 0 and ky == 0:
            out += c.real
            continue
        if (kx, ky) < (0, 0) or (kx, ky) < (-kx, -ky):
            continue  # handled through its mirror partner
        if kx and ky:
            phase = (2.0 * math.pi * kx / width) * xs \
                + (2.0 * math.pi * ky / height) * ys
        elif kx:
            phase = (2.0 * math.pi * kx / width) * xs
        else:
            phase = (2.0 * math.pi * ky / height) * ys
        if c.real:
            out += (2.0 * c.real) * np.cos(phase)
        if c.imag:
            out += (-2.0 * c.imag) * np.sin(phase)
    return out


@dataclass(frozen=True)
class Observable:
    """Finite Hermitian trigonometric sum over the bounding box.

    ``coeffs`` maps integer frequency pairs to complex amplitudes with
    ``c[-k] == conj(c[k])`` so values are real.
    """

    coeffs: tuple[tuple[int, int, complex], ...]

    def __post_init__(self):
        table = {(kx, ky): c for kx, ky, c in self.coeffs}
        for (kx, ky), c in table.items():
            mirror = table.get((-kx, -ky))
            if mirror is None or abs(mirror - c.conjugate()) > 1e-15 * (1 + abs(c)):
                raise ValueError(
                    f"coefficients are not Hermitian at frequency ({kx}, {ky})")

    @classmethod
    def from_dict(cls, coeffs: dict[tuple[int, int], complex]) -> "Observable":
        items = tuple(sorted((kx, ky, complex(c))
                             for (kx, ky), c in coeffs.items() if c != 0))
        return cls(items)

    @classmethod
    def constant(cls, value: float = 1.0) -> "Observable":
        return cls.from_dict({(0, 0): complex(value)})

    @classmethod
    def cosine(cls, kx: int, ky: int, amplitude: float = 1.0) -> "Observable":
        a = amplitude / 2.0
        return cls.from_dict({(kx, ky): complex(a), (-kx, -ky): complex(a)})

    @classmethod
    def sine(cls, kx: int, ky: int, amplitude: float = 1.0) -> "Observable":
        a = amplitude / 2.0
        return cls.from_dict({(kx, ky): complex(0, -a), (-kx, -ky): complex(0, a)})

    def evaluate(self, xs, ys, width: float, height: float) -> np.ndarray:
        return _eval_trig(self.coeffs, np.asarray(xs, dtype=np.float64),
                          np.asarray(ys, dtype=np.float64), width, height)

    def lipschitz(self, width: float, height: float) -> float:
        """Upper bound for |grad h| from the coefficients."""
        return sum(abs(c) * 2.0 * math.pi * math.hypot(kx / width, ky / height)
                   for kx, ky, c in self.coeffs)

    def descriptor(self) -> dict:
        return {"coeffs": [[kx, ky, c.real, c.imag] for kx, ky, c in self.coeffs]}


def _frequency_reps():
    """(kx, ky) representatives ordered by max(|kx|,|ky|), then lexicographic."""
    ring = 1
    while True:
        members = []
        for kx in range(-ring, ring + 1):
            for ky in range(-ring, ring + 1):
                if max(abs(kx), abs(ky)) != ring:
                    continue
                if (kx, ky) > (-kx, -ky):
                    members.append((kx, ky))
        for rep in sorted(members):
            yield rep
        ring += 1


def basis_function(j: int) -> Observable:
    """j-th element (1-based) of the fixed countable observable basis.

    j = 1 is the constant; each later frequency representative contributes a
    cosine then a sine.
    """
    if j < 1:
        raise ValueError("basis index is 1-based")
    if j == 1:
        return Observable.constant(1.0)
    rep_index, kind = divmod(j - 2, 2)
    for i, rep in enumerate(_frequency_reps()):
        if i == rep_index:
            kx, ky = rep
            return Observable.cosine(kx, ky) if kind == 0 else Observable.sine(kx, ky)
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class RestrictedObservable:
    """An observable multiplied by the indicator of the (closed) table."""

    base: "Observable | RestrictedObservable | Callable"
    table: VHTable

    def restrict(self, table: VHTable) -> "RestrictedObservable":
        # restriction to the same table is idempotent by definition
        if table == self.table:
            return self
        return RestrictedObservable(self, table)

    def evaluate(self, xs, ys, width: float, height: float) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        vals = _evaluate_any(self.base, xs, ys, width, height)
        return vals * _inside_mask(self.table, xs, ys)


def restrict(h, table: VHTable) -> RestrictedObservable:
    """Restriction h -> h * indicator(table); idempotent per table."""
    if isinstance(h, RestrictedObservable):
        return h.restrict(table)
    return RestrictedObservable(h, table)


def _inside_mask(table: VHTable, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized closed-table indicator (boundary counts as inside)."""
    sides = prepare_sides(table)
    vert = sides.axis == 0
    cnt = np.zeros(xs.shape, dtype=np.int64)
    on_edge = np.zeros(xs.shape, dtype=bool)
    for s in np.nonzero(vert)[0]:
        lo, hi, c = sides.lo[s], sides.hi[s], sides.coord[s]
        cnt += ((ys >= lo) & (ys < hi) & (xs < c))
        on_edge |= (xs == c) & (ys >= lo) & (ys <= hi)
    for s in np.nonzero(~vert)[0]:
        lo, hi, c = sides.lo[s], sides.hi[s], sides.coord[s]
        on_edge |= (ys == c) & (xs >= lo) & (xs <= hi)
    return ((cnt % 2 == 1) | on_edge).astype(np.float64)


# ---------------------------------------------------------------------------
# quadrature grids
# ---------------------------------------------------------------------------

@dataclass
class QuadratureGrid:
    """Midpoint quadrature over the table, replicated on four direction labels.

    ``xs``/``ys`` are the interior cell midpoints; each carries weight
    ``1/(4*npts)`` on each of the four labels so the total mass is exactly 1.
    """

    table: VHTable
    m: int
    xs: np.ndarray
    ys: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    width: float
    height: float
    _classes: dict = field(default_factory=dict, repr=False)

    @property
    def npts(self) -> int:
        return self.xs.shape[0]

    @property
    def weight(self) -> float:
        return 1.0 / (4.0 * self.npts)

    def compatible(self, other: "QuadratureGrid") -> bool:
        return self is other or (self.m == other.m and self.table == other.table)

    def aligned_for(self, cert: TilingCertificate) -> bool:
        return self.m % cert.p == 0 and self.m % cert.q == 0

    def evaluate(self, h) -> np.ndarray:
        """Values of an observable-like object at the grid points."""
        return _evaluate_any(h, self.xs, self.ys, self.width, self.height,
                             grid=self)

    def tile_classes(self, cert: TilingCertificate) -> tuple[np.ndarray, int]:
        """Congruence class index per grid point under the (1/p, 1/q) lattice."""
        if not self.aligned_for(cert):
            raise UnalignedGrid(
                f"grid m = {self.m} is not a multiple of p = {cert.p} "
                f"and q = {cert.q}")
        key = (cert.p, cert.q)
        if key not in self._classes:
            mx = self.m // cert.p
            my = self.m // cert.q
            cls = (self.ix % mx) * my + (self.iy % my)
            self._classes[key] = (cls.astype(np.int64), mx * my)
        return self._classes[key]


def _evaluate_any(h, xs, ys, width, height, grid: QuadratureGrid | None = None):
    if isinstance(h, SampledObservable):
        if grid is None or not h.grid.compatible(grid):
            raise GridMismatch("sampled observable belongs to a different grid")
        return h.values
    if isinstance(h, RestrictedObservable):
        if grid is not None and h.table == grid.table:
            # grid points are interior, the indicator is identically 1 there
            return _evaluate_any(h.base, xs, ys, width, height, grid=grid)
        return h.evaluate(xs, ys, width, height)
    if isinstance(h, (Observable, TileAverageObservable)):
        return h.evaluate(xs, ys, width, height)
    if isinstance(h, np.ndarray):
        if grid is None or h.shape != xs.shape:
            raise GridMismatch("raw arrays must match the grid size")
        return h
    if callable(h):
        return np.asarray(h(xs, ys), dtype=np.float64)
    raise TypeError(f"cannot evaluate {type(h).__name__} on a grid")


def build_grid(table: VHTable, m: int) -> QuadratureGrid:
    """Exact scanline rasterization of the interior cell midpoints.

    Cell membership is decided with exact rational comparisons, column by
    column, so aligned grids have exactly ``area * m**2`` points.  When the
    bounding box is not commensurate with 1/m the cover is rounded up and
    boundary-straddling cells keep or lose their midpoint exactly.
    """
    if m < 1:
        raise ValueError("resolution m must be positive")
    (x0, y0), (x1, y1) = table.bbox
    nx = int(math.ceil((x1 - x0) * m))
    ny = int(math.ceil((y1 - y0) * m))

    hsides: list[tuple[Fraction, Fraction, Fraction]] = []
    for verts, letters, _ in table.boundary_loops():
        n = len(verts)
        for i in range(n):
            if letters[i] in ("E", "W"):
                xa, ya = verts[i]
                xb, _ = verts[(i + 1) % n]
                hsides.append((ya, min(xa, xb), max(xa, xb)))

    raster = np.zeros((nx, ny), dtype=bool)
    half = Fraction(1, 2)
    for i in range(nx):
        xc = x0 + Fraction(2 * i + 1, 2 * m)
        crossings = sorted(y for y, lo, hi in hsides if lo <= xc < hi)
        for a, b in zip(crossings[0::2], crossings[1::2]):
            jmin = math.floor((a - y0) * m - half) + 1
            jmax = math.ceil((b - y0) * m - half) - 1
            if jmax >= jmin:
                raster[i, max(jmin, 0):min(jmax, ny - 1) + 1] = True

    ix, iy = np.nonzero(raster)
    if ix.size == 0:
        raise UnalignedGrid(f"resolution m = {m} leaves no interior midpoints")
    xs = float(x0) + (ix + 0.5) / m
    ys = float(y0) + (iy + 0.5) / m
    return QuadratureGrid(table=table, m=m,
                          xs=xs.astype(np.float64), ys=ys.astype(np.float64),
                          ix=ix.astype(np.int64), iy=iy.astype(np.int64),
                          width=float(x1 - x0), height=float(y1 - y0))


def aligned_m(cert: TilingCertificate, target: int) -> int:
    """Smallest multiple of lcm(p, q) that is at least ``target``."""
    base = cert.p * cert.q // math.gcd(cert.p, cert.q)
    return base * max(1, -(-target // base))


@dataclass
class SampledObservable:
    """Observable known through its values at the points of one grid."""

    grid: QuadratureGrid
    values: np.ndarray

    def evaluate(self, xs, ys, width: float, height: float) -> np.ndarray:
        raise GridMismatch("sampled observables can only be used on their grid")


def chi(grid: QuadratureGrid) -> SampledObservable:
    """Indicator of the table, as a sampled observable."""
    return SampledObservable(grid, np.ones(grid.npts))


# ---------------------------------------------------------------------------
# inner products and the tile-average projector
# ---------------------------------------------------------------------------

def inner(h1, h2, grid: QuadratureGrid) -> float:
    """Quadrature of h1*h2 against the normalized measure.

    The sum is a fixed-order pairwise reduction over the grid points, so the
    value is bit-reproducible regardless of any outer parallelism.
    """
    v1 = grid.evaluate(h1)
    v2 = grid.evaluate(h2)
    return float(np.sum(v1 * v2) / grid.npts)


def norm(h, grid: QuadratureGrid) -> float:
    return math.sqrt(max(inner(h, h, grid), 0.0))


def tile_average(h, cert: TilingCertificate, grid: QuadratureGrid) -> SampledObservable:
    """Average the restricted observable over the rectangle tiles.

    Each congruence class of grid points modulo the (1/p, 1/q) lattice is
    replaced by its mean; the result is (1/p, 1/q)-periodic across the table
    by construction and preserves the integral exactly.
    """
    cls, ncls = grid.tile_classes(cert)
    values = grid.evaluate(h)
    counts = np.bincount(cls, minlength=ncls)
    if not np.all(counts == cert.tile_count):
        raise UnalignedGrid(
            "tile classes are not uniformly populated; the certificate does "
            "not describe a tiling of this table")
    sums = np.bincount(cls, weights=values, minlength=ncls)
    means = sums / counts
    return SampledObservable(grid, means[cls])


def continuous_part(h, cert: TilingCertificate,
                    grid: QuadratureGrid) -> SampledObservable:
    """Residual after removing the tile average; integrates to ~0."""
    values = grid.evaluate(h)
    avg = tile_average(h, cert, grid)
    return SampledObservable(grid, values - avg.values)


class TileAverageObservable:
    """Analytic form of the tile average, evaluable at arbitrary points.

    Translation averaging of a trigonometric sum factorizes: each frequency
    picks up the mean phase over the tile anchors (a structure factor), and
    the result is a trigonometric sum in the within-tile offset.  On grid
    points this agrees with :func:`tile_average` to rounding error.
    """

    def __init__(self, h: Observable, table: VHTable, cert: TilingCertificate):
        anchors = tile_anchors(table, cert)
        (x0, y0), (x1, y1) = table.bbox
        self._x0 = float(x0)
        self._y0 = float(y0)
        self._width = float(x1 - x0)
        self._height = float(y1 - y0)
        self._tile_w = 1.0 / cert.p
        self._tile_h = 1.0 / cert.q
        ax = np.array([float(a[0]) for a in anchors])
        ay = np.array([float(a[1]) for a in anchors])
        coeffs = []
        for kx, ky, c in h.coeffs:
            phases = 2.0 * math.pi * (kx * ax / self._width
                                      + ky * ay / self._height)
            factor = complex(np.mean(np.cos(phases)), np.mean(np.sin(phases)))
            coeffs.append((kx, ky, c * factor))
        self._coeffs = tuple(coeffs)

    def evaluate(self, xs, ys, width: float | None = None,
                 height: float | None = None) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        ux = (xs - self._x0) % self._tile_w
        uy = (ys - self._y0) % self._tile_h
        return _eval_trig(self._coeffs, ux, uy, self._width, self._height)


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------

@dataclass
class CorrelationSeries:
    """Time autocorrelation of a restricted observable under the flow."""

    times: np.ndarray
    values: np.ndarray
    level: float            # squared mean against the indicator
    norm_sq: float          # value at t = 0
    dropped_fraction: float
    meta: dict = field(default_factory=dict)

    @property
    def gap(self) -> np.ndarray:
        return np.abs(self.values - self.level)

    def cesaro_squared(self) -> np.ndarray:
        g2 = self.gap ** 2
        return np.cumsum(g2) / np.arange(1, g2.size + 1)

    def cesaro_absolute(self) -> np.ndarray:
        g = self.gap
        return np.cumsum(g) / np.arange(1, g.size + 1)


def cesaro_gap(series: CorrelationSeries) -> np.ndarray:
    """Running averages of the squared correlation gap."""
    if series.times.size == 0:
        raise ValueError("empty correlation series")
    return series.cesaro_squared()


def _label_velocities(theta: float) -> list[tuple[float, float]]:
    c, s = math.cos(theta), math.sin(theta)
    return [(c, s), (c, -s), (-c, s), (-c, -s)]


def sweep_correlations(grid: QuadratureGrid, thetas: Sequence[float], h,
                       t_grid: Sequence[float],
                       budget: int = MAX_EVENTS,
                       box: tuple[float, float] | None = None,
                       sides: SideTable | None = None,
                       max_dropped: float = MAX_DROPPED_FRACTION,
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Correlation values C(theta_i, t_k) for a batch of directions.

    Every direction is advanced through the same increasing time grid; the
    per-direction reduction order is fixed, so the output does not depend on
    how directions are chunked across workers.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.size and (np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0):
        raise ValueError("time grid must be strictly increasing and >= 0")
    if sides is None:
        sides = prepare_sides(grid.table)
    width, height = box if box is not None else (grid.width, grid.height)
    h0 = _evaluate_any(h, grid.xs, grid.ys, width, height, grid=grid)

    n = grid.npts
    block = 4 * n
    chunk = max(1, BATCH_POINT_LIMIT // block)
    c_out = np.empty((thetas.size, t_grid.size))
    dropped = np.empty(thetas.size)
    for start in range(0, thetas.size, chunk):
        sel = thetas[start:start + chunk]
        nb = sel.size
        x = np.tile(grid.xs, 4 * nb)
        y = np.tile(grid.ys, 4 * nb)
        vx = np.empty(nb * block)
        vy = np.empty(nb * block)
        for i, th in enumerate(sel):
            for l, (ux, uy) in enumerate(_label_velocities(th)):
                lo = i * block + l * n
                vx[lo:lo + n] = ux
                vy[lo:lo + n] = uy
        batch = FlowBatch(sides, x, y, vx, vy, max_events=budget)
        h0_tiled = np.tile(h0, 4 * nb)
        for k, t_k in enumerate(t_grid):
            batch.advance_to(float(t_k))
            alive = ~batch.singular
            frac = 1.0 - (alive.reshape(nb, block).sum(axis=1) / block)
            if np.any(frac > max_dropped):
                raise TooManySingular(
                    f"dropped quadrature mass {frac.max():.2e} exceeds "
                    f"{max_dropped:.0e}")
            vals = _evaluate_any(h, batch.x, batch.y, width, height)
            vals = vals * h0_tiled * alive
            sums = vals.reshape(nb, block).sum(axis=1)
            counts = alive.reshape(nb, block).sum(axis=1)
            c_out[start:start + nb, k] = sums / counts
        alive = ~batch.singular
        dropped[start:start + nb] = 1.0 - (
            alive.reshape(nb, block).sum(axis=1) / block)
    return c_out, dropped


def correlation(table: VHTable, theta: float, h, t_grid: Sequence[float],
                grid: QuadratureGrid | None = None, m: int | None = None,
                budget: int = MAX_EVENTS,
                box: tuple[float, float] | None = None) -> CorrelationSeries:
    """Autocorrelation t -> <h o flow_t, h> on the normalized measure.

    Grid points are flowed incrementally through the (increasing) time grid;
    orbits that reach a reflex corner are dropped and the mass renormalized,
    aborting if the dropped fraction passes MAX_DROPPED_FRACTION.
    """
    if grid is None:
        if m is None:
            raise ValueError("pass a QuadratureGrid or a resolution m")
        grid = build_grid(table, m)
    width, height = box if box is not None else (grid.width, grid.height)
    h0 = _evaluate_any(h, grid.xs, grid.ys, width, height, grid=grid)
    level = float(np.sum(h0) / grid.npts) ** 2
    norm_sq = float(np.sum(h0 * h0) / grid.npts)
    values, dropped = sweep_correlations(grid, [theta], h, t_grid,
                                         budget=budget, box=box)
    return CorrelationSeries(
        times=np.asarray(t_grid, dtype=np.float64),
        values=values[0],
        level=level,
        norm_sq=norm_sq,
        dropped_fraction=float(dropped[0]),
        meta={"theta": float(theta), "m": grid.m,
              "table_hash": table_hash(grid.table)},
    )


# ---------------------------------------------------------------------------
# decomposition chain and bounds
# ---------------------------------------------------------------------------

@dataclass
class ChainReport:
    """Numerical audit of the correlation-gap decomposition at one time.

    ``lines`` are the four algebraically equal forms of
    ``<h o flow_t, h> - level``; the last equals the third up to the reported
    cross term between the flowed residual and the tile average.

    Two Cauchy-Schwarz bounds are reported for the flowed tile-average term:
    ``slack`` uses the quadrature norm of the flowed samples (exact discrete
    Cauchy-Schwarz, nonnegative up to rounding), while ``invariant_slack``
    replaces it by the unflowed norm via measure invariance, which at finite
    quadrature is only valid up to a flow-dependent O(1/m) defect.
    """

    t: float
    lines: tuple[float, float, float, float]
    cross_term: float
    cauchy_schwarz_lhs: float
    cauchy_schwarz_rhs: float
    slack: float
    invariant_rhs: float
    invariant_slack: float
    unitarity_defect: float
    dropped_fraction: float

    @property
    def max_consistency_gap(self) -> float:
        l1, l2, l3, _ = self.lines
        return max(abs(l1 - l2), abs(l2 - l3))

    @property
    def decomposition_residual(self) -> float:
        _, _, l3, l4 = self.lines
        return abs((l3 - l4) - self.cross_term)


def correlation_chain_check(table: VHTable, cert: TilingCertificate,
                            theta: float, h: Observable, t: float,
                            grid: QuadratureGrid,
                            budget: int = MAX_EVENTS) -> ChainReport:
    """Evaluate the split of the correlation gap into tile-average and
    residual contributions, plus the Cauchy-Schwarz bound on the first part.

    The flowed factor is always evaluated analytically (trigonometric sums
    and their tile averages), while the unflowed factor uses grid samples.
    """
    if not grid.aligned_for(cert):
        raise UnalignedGrid("chain check needs a tile-aligned grid")
    h_vals = grid.evaluate(h)
    hd = tile_average(h, cert, grid)
    hc_vals = h_vals - hd.values
    level_mean = float(np.sum(h_vals) / grid.npts)      # <h_a, chi>
    level = level_mean ** 2

    hd_fn = TileAverageObservable(h, table, cert)

    sides = prepare_sides(table)
    n = grid.npts
    x = np.tile(grid.xs, 4)
    y = np.tile(grid.ys, 4)
    vx = np.empty(4 * n)
    vy = np.empty(4 * n)
    for l, (ux, uy) in enumerate(_label_velocities(theta)):
        vx[l * n:(l + 1) * n] = ux
        vy[l * n:(l + 1) * n] = uy
    batch = FlowBatch(sides, x, y, vx, vy, max_events=budget)
    batch.advance_to(float(t))
    alive = ~batch.singular
    count = int(alive.sum())
    dropped_fraction = 1.0 - count / (4 * n)
    if dropped_fraction > MAX_DROPPED_FRACTION:
        raise TooManySingular(
            f"dropped fraction {dropped_fraction:.2e} too large")

    f_h = h.evaluate(batch.x, batch.y, grid.width, grid.height)
    f_hd = hd_fn.evaluate(batch.x, batch.y)
    f_hc = f_h - f_hd

    def term(fvals: np.ndarray, gvals: np.ndarray) -> float:
        g = np.tile(gvals, 4)
        return float(np.sum(fvals * g * alive) / count)

    t_hh = term(f_h, h_vals)
    t_shift = term(f_hd - level_mean, h_vals)
    t_chi = term(np.full(4 * n, level_mean), h_vals)
    t_c_h = term(f_hc, h_vals)
    t_c_c = term(f_hc, hc_vals)
    cross = term(f_hc, hd.values)

    line1 = t_hh - level
    line2 = (t_shift + t_chi + t_c_h) - level
    line3 = t_shift + t_c_h
    line4 = t_shift + t_c_c

    hd_centered = hd.values - np.sum(hd.values) / grid.npts
    h_norm = math.sqrt(max(float(np.sum(h_vals ** 2) / grid.npts), 0.0))
    flowed_norm_sq = float(np.sum((f_hd - level_mean) ** 2 * alive) / count)
    unflowed_norm_sq = float(np.sum(hd_centered ** 2) / grid.npts)
    lhs = abs(t_shift)
    rhs = math.sqrt(max(flowed_norm_sq, 0.0)) * h_norm
    invariant_rhs = math.sqrt(max(unflowed_norm_sq, 0.0)) * h_norm

    return ChainReport(
        t=float(t),
        lines=(line1, line2, line3, line4),
        cross_term=cross,
        cauchy_schwarz_lhs=lhs,
        cauchy_schwarz_rhs=rhs,
        slack=rhs - lhs,
        invariant_rhs=invariant_rhs,
        invariant_slack=invariant_rhs - lhs,
        unitarity_defect=abs(flowed_norm_sq - unflowed_norm_sq),
        dropped_fraction=dropped_fraction,
    )


@dataclass
class OscillationReport:
    """Oscillation of the tile average over nearby in-tile offsets."""

    hypothesis_met: bool
    delta: float
    tile_diameter_bound: float
    max_oscillation: float
    bound: float
    passed: bool


def oscillation_bound_check(h: Observable, cert: TilingCertificate,
                            grid: QuadratureGrid, eps: float) -> OscillationReport:
    """Check that the tile average oscillates by at most eps/||h|| across
    offsets closer than the modulus-of-continuity scale delta.

    ``delta`` comes from the analytic Lipschitz constant of ``h``; when the
    tiles are not finer than delta the hypothesis fails and the check reports
    that instead of a violation.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    lip = h.lipschitz(grid.width, grid.height)
    h_norm = norm(h, grid)
    if h_norm == 0.0:
        return OscillationReport(True, math.inf, 0.0, 0.0, math.inf, True)
    bound = eps / h_norm
    delta = bound / lip if lip > 0 else math.inf
    tile_bound = max(1.0 / cert.p, 1.0 / cert.q)
    if not tile_bound < delta:
        return OscillationReport(False, delta, tile_bound, math.nan, bound, False)

    hd = tile_average(h, cert, grid)
    cls, ncls = grid.tile_classes(cert)
    class_vals = np.empty(ncls)
    class_vals[cls] = hd.values
    mx = grid.m // cert.p
    my = grid.m // cert.q
    ux = ((np.arange(ncls) // my) + 0.5) / grid.m
    uy = ((np.arange(ncls) % my) + 0.5) / grid.m
    dist = np.hypot(ux[:, None] - ux[None, :], uy[:, None] - uy[None, :])
    close = (dist < delta) & (dist > 0)
    if np.any(close):
        diffs = np.abs(class_vals[:, None] - class_vals[None, :])
        max_osc = float(diffs[close].max())
    else:
        max_osc = 0.0
    return OscillationReport(
        hypothesis_met=True,
        delta=delta,
        tile_diameter_bound=tile_bound,
        max_oscillation=max_osc,
        bound=bound,
        passed=max_osc <= bound + 1e-12,
    )


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def series_to_csv(series: CorrelationSeries, path) -> None:
    gap = series.gap
    ces_sq = series.cesaro_squared()
    ces_abs = series.cesaro_absolute()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "C", "gap", "cesaro_sq", "cesaro_abs"])
        for k in range(series.times.size):
            w.writerow([repr(float(series.times[k])),
                        repr(float(series.values[k])),
                        repr(float(gap[k])),
                        repr(float(ces_sq[k])),
                        repr(float(ces_abs[k]))])


def series_summary(series: CorrelationSeries, table: VHTable, h,
                   grid: QuadratureGrid) -> dict:
    from .geometry import table_to_dict
    descriptor = h.descriptor() if hasattr(h, "descriptor") else repr(h)
    return {
        "version": _version,
        "table": table_to_dict(table),
        "table_hash": table_hash(table),
        "theta": series.meta.get("theta"),
        "observable": descriptor,
        "grid_m": grid.m,
        "level": series.level,
        "norm_sq": series.norm_sq,
        "dropped_fraction": series.dropped_fraction,
    }


def series_summary_json(series: CorrelationSeries, table: VHTable, h,
                        grid: QuadratureGrid, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(series_summary(series, table, h, grid), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")


def series_to_svg(series: CorrelationSeries, path,
                  width: int = 900, height: int = 300) -> None:
    """Gap-versus-time polyline with the running squared-gap average."""
    t = series.times
    gap = series.gap
    ces = series.cesaro_squared()
    if t.size == 0:
        raise ValueError("empty correlation series")
    t0, t1 = float(t[0]), float(t[-1])
    span = (t1 - t0) or 1.0
    top = max(float(gap.max()), float(ces.max()), 1e-12)
    pad = 30.0

    def px(tv: float) -> float:
        return pad + (tv - t0) / span * (width - 2 * pad)

    def py(v: float) -> float:
        return height - pad - (v / top) * (height - 2 * pad)

    def polyline(vals, color):
        pts = " ".join(f"{px(float(tv)):.2f},{py(float(v)):.2f}"
                       for tv, v in zip(t, vals))
        return (f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="1"/>')

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="#888888"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
        f'stroke="#888888"/>',
        polyline(gap, "#2980b9"),
        polyline(ces, "#c0392b"),
        f'<text x="{pad}" y="{pad - 8}" font-size="12" fill="#333333">'
        f'gap(t) (blue), running squared-gap mean (red); '
        f't in [{t0:g}, {t1:g}], max {top:.3g}</text>',
        "</svg>",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
