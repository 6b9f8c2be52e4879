"""Experiment drivers: direction sweeps, parameter continuity, genericity demo.

A direction sweep estimates, for one observable and a (N, tau) time window,
the fraction of directions whose correlation gap dips below 1/N somewhere in
the window.  The continuity probe measures how the correlation moves when the
table's lengths are perturbed with the combinatorics held fixed.  The
genericity demo chains both over a ladder of lattice refinements, emitting a
ledger of empirical window lengths and stability radii; it demonstrates the
construction, it does not claim convergence.

Sweeps parallelize over direction samples.  Per-direction results are
independent of batching, and output files embed only exact, seeded inputs, so
reruns are byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__ as _version
from .errors import CombinatoricsMismatch, ConfigError
from .geometry import (
    VHTable,
    approximate_pq,
    build_polygon,
    build_table,
    load_table,
    table_hash,
    table_to_dict,
)
from .spectral import (
    basis_function,
    build_grid,
    correlation,
    sweep_correlations,
)

#: default perturbation ladder for stability probes (largest first)
DEFAULT_D_LADDER = (Fraction(1, 25), Fraction(1, 50), Fraction(1, 100))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of a direction sweep.

    ``n_gap`` plays two roles, following the gap criterion: the time window is
    ``(n_gap, tau)`` and a direction counts as a hit when the correlation gap
    drops below ``1/n_gap``.  The time step must not exceed ``1/(4*n_gap)`` so
    a sub-threshold dip of the Lipschitz gap cannot fall between grid points.
    """

    table_path: str
    count: int
    seed: int
    n_gap: int
    tau: float
    h_indices: tuple[int, ...]
    grid_m: int
    step: float | None = None
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.count <= 0:
            raise ConfigError("theta sample count must be positive")
        if self.n_gap <= 0:
            raise ConfigError("n_gap must be a positive integer")
        if not self.n_gap < self.tau:
            raise ConfigError("need n_gap < tau for a nonempty window")
        if self.grid_m <= 0:
            raise ConfigError("grid resolution must be positive")
        if any(j < 1 for j in self.h_indices) or not self.h_indices:
            raise ConfigError("h_indices must be 1-based basis indices")
        if self.effective_step > 1.0 / (4.0 * self.n_gap) + 1e-15:
            raise ConfigError(
                f"step {self.effective_step} exceeds 1/(4*n_gap) = "
                f"{1.0 / (4 * self.n_gap)}; dips below 1/n_gap could be missed")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def effective_step(self) -> float:
        return self.step if self.step is not None else 1.0 / (4.0 * self.n_gap)

    def time_grid(self) -> np.ndarray:
        step = self.effective_step
        k_max = int(math.floor((self.tau - self.n_gap) / step + 1e-9))
        return self.n_gap + step * np.arange(1, k_max + 1)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        raw["h_indices"] = tuple(raw.get("h_indices", [1]))
        return cls(**raw)


def stratified_thetas(count: int, seed: int) -> np.ndarray:
    """One uniform draw per equal stratum of (0, pi/2)."""
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    return (np.arange(count) + u) * (math.pi / 2.0) / count


# ---------------------------------------------------------------------------
# direction sweep
# ---------------------------------------------------------------------------

@dataclass
class ThetaSetEstimate:
    """Hit statistics of the gap criterion over a direction sample.

    ``first_dip_t`` is the earliest grid time with gap < 1/n_gap (NaN when the
    direction never dips), so hits for any window prefix can be read off
    without recomputing.
    """

    h_index: int
    thetas: np.ndarray
    min_gap: np.ndarray
    argmin_t: np.ndarray
    first_dip_t: np.ndarray
    hit: np.ndarray
    measure: float
    half_width: float
    level: float
    n_gap: int
    tau: float
    step: float
    seed: int
    dropped_max: float


def _sweep_job(args) -> tuple[np.ndarray, np.ndarray]:
    table, m, thetas, h, t_grid = args
    grid = build_grid(table, m)
    return sweep_correlations(grid, thetas, h, t_grid)


def theta_sweep(config: ExperimentConfig,
                table: VHTable | None = None) -> list[ThetaSetEstimate]:
    """Run the direction sweep; one estimate per configured basis index.

    Deterministic given the seed: the theta sample, the time grid and every
    reduction order are fixed, independently of ``workers``.
    """
    if table is None:
        table = load_table(config.table_path)
    thetas = stratified_thetas(config.count, config.seed)
    t_grid = config.time_grid()
    grid = build_grid(table, config.grid_m)

    out = []
    for j in config.h_indices:
        h = basis_function(j)
        h0 = grid.evaluate(h)
        level = float(np.sum(h0) / grid.npts) ** 2

        if config.workers == 1 or config.count == 1:
            values, dropped = sweep_correlations(grid, thetas, h, t_grid)
        else:
            blocks = np.array_split(np.arange(config.count),
                                    min(config.workers, config.count))
            jobs = [(table, config.grid_m, thetas[b], h, t_grid)
                    for b in blocks if b.size]
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                parts = list(pool.map(_sweep_job, jobs))
            values = np.concatenate([p[0] for p in parts], axis=0)
            dropped = np.concatenate([p[1] for p in parts])

        gaps = np.abs(values - level)
        min_idx = np.argmin(gaps, axis=1)
        min_gap = gaps[np.arange(config.count), min_idx]
        below = gaps < 1.0 / config.n_gap
        hit = below.any(axis=1)
        first_idx = np.argmax(below, axis=1)
        first_dip = np.where(hit, t_grid[first_idx], np.nan)
        measure = float(np.sum(hit) / config.count)
        half_width = 1.96 * math.sqrt(measure * (1.0 - measure) / config.count)
        out.append(ThetaSetEstimate(
            h_index=j,
            thetas=thetas,
            min_gap=min_gap,
            argmin_t=t_grid[min_idx],
            first_dip_t=first_dip,
            hit=hit,
            measure=measure,
            half_width=half_width,
            level=level,
            n_gap=config.n_gap,
            tau=config.tau,
            step=config.effective_step,
            seed=config.seed,
            dropped_max=float(dropped.max()),
        ))
    return out


def sweep_to_csv(estimates: list[ThetaSetEstimate], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["h_index", "theta_index", "theta", "min_gap",
                    "argmin_t", "first_dip_t", "hit"])
        for est in estimates:
            for i in range(est.thetas.size):
                w.writerow([est.h_index, i, repr(float(est.thetas[i])),
                            repr(float(est.min_gap[i])),
                            repr(float(est.argmin_t[i])),
                            repr(float(est.first_dip_t[i])),
                            int(est.hit[i])])


def sweep_summary(config: ExperimentConfig, table: VHTable,
                  estimates: list[ThetaSetEstimate]) -> dict:
    return {
        "version": _version,
        "table": table_to_dict(table),
        "table_hash": table_hash(table),
        "seed": config.seed,
        "count": config.count,
        "n_gap": config.n_gap,
        "tau": config.tau,
        "step": config.effective_step,
        "grid_m": config.grid_m,
        "estimates": [
            {
                "h_index": est.h_index,
                "measure": est.measure,
                "half_width": est.half_width,
                "level": est.level,
                "dropped_max": est.dropped_max,
            }
            for est in estimates
        ],
    }


# ---------------------------------------------------------------------------
# continuity probe
# ---------------------------------------------------------------------------

@dataclass
class ContinuityReport:
    """Correlation response to a combinatorics-preserving perturbation."""

    distance: float
    times: np.ndarray
    delta_c: np.ndarray
    max_delta: float
    ratio: float     # max_delta / distance (0 when distance is 0)


def _parameter_distance(a: VHTable, b: VHTable) -> Fraction:
    d = max((abs(x - y) for x, y in zip(a.outer.lengths, b.outer.lengths)),
            default=Fraction(0))
    for (pa, aa), (pb, ab) in zip(a.holes, b.holes):
        d = max(d, max(abs(x - y) for x, y in zip(pa.lengths, pb.lengths)))
        d = max(d, abs(aa[0] - ab[0]), abs(aa[1] - ab[1]))
    return d


def _check_same_combinatorics(a: VHTable, b: VHTable) -> None:
    if a.outer.word != b.outer.word or len(a.holes) != len(b.holes):
        raise CombinatoricsMismatch(
            "tables do not share outer word / hole count")
    for (pa, _), (pb, _) in zip(a.holes, b.holes):
        if pa.word != pb.word:
            raise CombinatoricsMismatch("hole words differ")


def continuity_probe(table_a: VHTable, table_b: VHTable, theta: float,
                     h, t_list, m: int) -> ContinuityReport:
    """Compare correlations of two same-combinatorics tables.

    The observable is evaluated against table_a's bounding box on both
    tables, so only the table varies between the two runs.
    """
    _check_same_combinatorics(table_a, table_b)
    d = _parameter_distance(table_a, table_b)
    t_arr = np.asarray(t_list, dtype=np.float64)
    grid_a = build_grid(table_a, m)
    box = (grid_a.width, grid_a.height)
    series_a = correlation(table_a, theta, h, t_arr, grid=grid_a, box=box)
    series_b = correlation(table_b, theta, h, t_arr, m=m, box=box)
    delta = np.abs(series_a.values - series_b.values)
    max_delta = float(delta.max()) if delta.size else 0.0
    ratio = max_delta / float(d) if d > 0 else 0.0
    return ContinuityReport(distance=float(d), times=t_arr, delta_c=delta,
                            max_delta=max_delta, ratio=ratio)


def perturb_length(table: VHTable, index: int, delta) -> VHTable:
    """Add delta to one outer length, rebalancing on the opposite letter class.

    The compensating side is the longest one of the opposite class (earliest
    word index on ties), which keeps the sup-norm distance equal to |delta|.
    """
    delta = Fraction(delta) if not isinstance(delta, Fraction) else delta
    word = table.outer.word
    lengths = list(table.outer.lengths)
    letter = word.letters[index]
    opposite = {"E": "W", "W": "E", "N": "S", "S": "N"}[letter]
    candidates = [i for i, c in enumerate(word.letters) if c == opposite]
    partner = max(candidates, key=lambda i: (lengths[i], -i))
    lengths[index] += delta
    lengths[partner] += delta
    return build_table(build_polygon(word, lengths),
                       [(p, a) for p, a in table.holes])


# ---------------------------------------------------------------------------
# random tables
# ---------------------------------------------------------------------------

#: words whose parameter spaces are easy to hit by rejection sampling
TEMPLATE_WORDS = ("ENWS", "ENWNWS", "ENENWNWSWS")


def _random_lengths(word, rng: np.random.Generator,
                    denominators=(1, 2, 3, 4, 5), max_numerator=6):
    from .geometry import _repair_class_sums, parse_word  # deterministic repair

    w = parse_word(word) if isinstance(word, str) else word
    lens = [Fraction(int(rng.integers(1, max_numerator + 1)),
                     int(rng.choice(denominators)))
            for _ in range(len(w))]
    q = 1
    for v in lens:
        q = q * v.denominator // math.gcd(q, v.denominator)
    return w, _repair_class_sums(w, lens, q)


def random_table(rng: np.random.Generator, word=None,
                 hole_probability: float = 0.3,
                 max_attempts: int = 200) -> VHTable:
    """Rejection-sample a valid table with exact rational lengths.

    Words come from ``TEMPLATE_WORDS`` unless given; self-intersecting draws
    are rejected; a rectangular hole is attempted with the given probability.
    """
    for _ in range(max_attempts):
        chosen = word if word is not None else \
            TEMPLATE_WORDS[int(rng.integers(0, len(TEMPLATE_WORDS)))]
        try:
            w, lens = _random_lengths(chosen, rng)
            outer = build_polygon(w, lens)
        except Exception:
            continue
        table = build_table(outer)
        if word is None and rng.random() < hole_probability:
            with_hole = _try_add_hole(table, rng)
            if with_hole is not None:
                table = with_hole
        return table
    raise ConfigError(f"could not sample a valid table for word {word!r}")


def _try_add_hole(table: VHTable, rng: np.random.Generator,
                  attempts: int = 20) -> VHTable | None:
    from .geometry import TABLE_ANCHOR

    for _ in range(attempts):
        den = int(rng.integers(2, 7))
        hw = Fraction(int(rng.integers(1, 3)), den)
        hh = Fraction(int(rng.integers(1, 3)), den)
        ax = TABLE_ANCHOR[0] + Fraction(int(rng.integers(1, 4 * den)), 2 * den)
        ay = TABLE_ANCHOR[1] + Fraction(int(rng.integers(1, 4 * den)), 2 * den)
        try:
            hole = build_polygon("ENWS", [hw, hh, hw, hh])
            return build_table(table.outer, [(hole, (ax, ay))])
        except Exception:
            continue
    return None


# ---------------------------------------------------------------------------
# genericity demonstration
# ---------------------------------------------------------------------------

@dataclass
class GDeltaRow:
    table_index: int
    q_min: int
    table_hash: str
    h_index: int
    n_gap: int
    tau_emp: float
    measure: float
    measure_target: float
    target_met: bool
    eta_emp: float
    eta_capped: bool
    max_delta_at_eta: float


@dataclass
class GDeltaReport:
    rows: list[GDeltaRow]
    tables: list[VHTable]
    meta: dict = field(default_factory=dict)


def gdelta_demo(word, area_band, q_list, j_max: int, n_list, m: int, *,
                seed: int = 0, theta_count: int = 32,
                tau_factor: int = 8,
                d_ladder=DEFAULT_D_LADDER,
                probe_theta: float = 1.0) -> GDeltaReport:
    """Tabulate empirical window lengths and stability radii over a ladder of
    lattice refinements of one combinatorics class.

    For each requested refinement level a random table with area inside
    ``area_band`` is snapped to the lattice; for every basis index and gap
    level the sweep measure is evaluated on a doubling ladder of window ends
    (reporting the first one reaching 1 - 1/n^2), and the stability radius is
    the largest ladder perturbation keeping the correlation within 1/(2n).
    Demonstration data only: nothing here is a convergence claim.
    """
    q_list = list(q_list)
    if not q_list:
        raise ConfigError("q_list must be nonempty")
    if any(b <= a for a, b in zip(q_list, q_list[1:])):
        raise ConfigError("q_list must be strictly increasing")
    if j_max < 1 or not n_list:
        raise ConfigError("need j_max >= 1 and a nonempty n_list")
    lo, hi = (Fraction(area_band[0]), Fraction(area_band[1]))

    rng = np.random.default_rng(seed)
    rows: list[GDeltaRow] = []
    tables: list[VHTable] = []
    for i, q_min in enumerate(q_list):
        base = None
        for _ in range(1000):
            cand = random_table(rng, word=word)
            if lo <= cand.area <= hi:
                base = cand
                break
        if base is None:
            raise ConfigError(
                f"no random table with area in [{lo}, {hi}] after 1000 draws")
        snapped = approximate_pq(base, q_min, eta=Fraction(1))
        tables.append(snapped)
        thash = table_hash(snapped)

        for j in range(1, j_max + 1):
            for n_gap in n_list:
                tau_ladder = []
                factor = 2
                while factor <= tau_factor:
                    tau_ladder.append(n_gap * factor)
                    factor *= 2
                cfg = ExperimentConfig(
                    table_path="<in-memory>", count=theta_count,
                    seed=seed + 7919 * i + 131 * j + n_gap,
                    n_gap=n_gap, tau=float(tau_ladder[-1]),
                    h_indices=(j,), grid_m=m)
                est = theta_sweep(cfg, table=snapped)[0]
                target = 1.0 - 1.0 / n_gap ** 2
                tau_emp = float(tau_ladder[-1])
                measure = est.measure
                for tau in tau_ladder:
                    hits = est.hit & (est.first_dip_t <= tau)
                    meas = float(np.sum(hits) / est.thetas.size)
                    if meas >= target:
                        tau_emp, measure = float(tau), meas
                        break

                window_t = [n_gap + 0.25 * (tau_emp - n_gap),
                            n_gap + 0.5 * (tau_emp - n_gap),
                            n_gap + 0.75 * (tau_emp - n_gap)]
                eta_emp = 0.0
                eta_capped = False
                max_delta_at_eta = math.nan
                h = basis_function(j)
                for d in sorted(d_ladder):
                    try:
                        perturbed = perturb_length(snapped, 0, d)
                        rep = continuity_probe(snapped, perturbed, probe_theta,
                                               h, window_t, m)
                    except Exception:
                        break
                    if rep.max_delta <= 1.0 / (2.0 * n_gap):
                        eta_emp = float(d)
                        max_delta_at_eta = rep.max_delta
                    else:
                        break
                if eta_emp == float(max(d_ladder)):
                    eta_capped = True

                rows.append(GDeltaRow(
                    table_index=i, q_min=q_min, table_hash=thash,
                    h_index=j, n_gap=n_gap, tau_emp=tau_emp,
                    measure=measure, measure_target=target,
                    target_met=measure >= target,
                    eta_emp=eta_emp, eta_capped=eta_capped,
                    max_delta_at_eta=max_delta_at_eta))
    meta = {
        "version": _version,
        "seed": seed,
        "word": str(word),
        "area_band": [str(lo), str(hi)],
        "q_list": q_list,
        "j_max": j_max,
        "n_list": list(n_list),
        "grid_m": m,
        "theta_count": theta_count,
        "d_ladder": [str(d) for d in d_ladder],
        "probe_theta": probe_theta,
        "note": "empirical surrogates; eta values are finite-probe estimates "
                "capped at the ladder maximum",
    }
    return GDeltaReport(rows=rows, tables=tables, meta=meta)


def gdelta_to_csv(report: GDeltaReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["table_index", "q_min", "table_hash", "h_index", "n_gap",
                    "tau_emp", "measure", "measure_target", "target_met",
                    "eta_emp", "eta_capped", "max_delta_at_eta"])
        for r in report.rows:
            w.writerow([r.table_index, r.q_min, r.table_hash, r.h_index,
                        r.n_gap, repr(r.tau_emp), repr(r.measure),
                        repr(r.measure_target), int(r.target_met),
                        repr(r.eta_emp), int(r.eta_capped),
                        repr(r.max_delta_at_eta)])


def gdelta_summary(report: GDeltaReport) -> dict:
    return {
        "meta": report.meta,
        "tables": [table_to_dict(t) for t in report.tables],
        "rows": len(report.rows),
        "all_targets_met": all(r.target_met for r in report.rows),
    }
