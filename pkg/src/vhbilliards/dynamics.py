"""Directional billiard flow on VH tables.

The billiard moves at unit speed in one of the four directions of the class
``[theta] = {±theta, ±(pi − theta)}``; reflections off vertical sides flip the
horizontal sign, horizontal sides the vertical sign.  Positions evolve in
binary64 while the boundary stays exact-rational: every collision re-projects
the hit point onto the exact side line, so transverse error does not
accumulate.

Corner policy: a vertex with table-interior angle pi/2 reflects by flipping
both signs (the continuity limit); a reflex vertex (3*pi/2) has no continuous
extension and terminates the orbit (``SingularOrbit``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CornerHit,
    DegenerateDirection,
    EventBudgetExceeded,
    SingularOrbit,
    StalledState,
)
from .geometry import VHTable

#: vertex-proximity tolerance (table units)
EPS_CORNER = 1e-12

#: default reflection budget per flow call
MAX_EVENTS = 10**7


# ---------------------------------------------------------------------------
# directions and phase points
# ---------------------------------------------------------------------------

def is_pi_commensurable(theta: float, depth: int = 40, tol: float = 1e-12) -> bool:
    """Heuristic continued-fraction test of theta/pi being rational.

    Used only to label experiment outputs; float noise makes a rigorous test
    impossible.
    """
    x = theta / math.pi
    for _ in range(depth):
        a = math.floor(x)
        frac = x - a
        if frac < tol:
            return True
        x = 1.0 / frac
    return False


@dataclass(frozen=True)
class DirectionState:
    """Base angle in (0, pi/2) plus the sign pair selecting one direction."""

    theta: float
    sx: int = 1
    sy: int = 1

    def __post_init__(self):
        if not (0.0 < self.theta < math.pi / 2):
            raise DegenerateDirection(
                f"theta = {self.theta} outside the open interval (0, pi/2)")
        if self.sx not in (-1, 1) or self.sy not in (-1, 1):
            raise DegenerateDirection("signs must be +1 or -1")

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.sx * math.cos(self.theta), self.sy * math.sin(self.theta))

    def flip_x(self) -> "DirectionState":
        return replace(self, sx=-self.sx)

    def flip_y(self) -> "DirectionState":
        return replace(self, sy=-self.sy)

    def flip_both(self) -> "DirectionState":
        return replace(self, sx=-self.sx, sy=-self.sy)

    def direction_class(self) -> tuple["DirectionState", ...]:
        return tuple(DirectionState(self.theta, sx, sy)
                     for sx in (1, -1) for sy in (1, -1))


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float
    direction: DirectionState


@dataclass(frozen=True)
class UnfoldedFrame:
    """Reflection parities selecting one of the four unfolded table copies."""

    ex: int = 1
    ey: int = 1


# ---------------------------------------------------------------------------
# precomputed boundary data
# ---------------------------------------------------------------------------

@dataclass
class SideTable:
    """Float view of the table boundary for the event loop.

    Sides are enumerated over the outer loop first, then each hole loop.
    Vertices share the same enumeration; ``vertex_convex[v]`` refers to the
    table-interior angle (holes contribute reversed turns).
    """

    table: VHTable
    axis: np.ndarray          # (S,) 0 = vertical, 1 = horizontal
    coord: np.ndarray         # (S,) line coordinate
    lo: np.ndarray            # (S,) span of the cross coordinate
    hi: np.ndarray
    lo_vertex: np.ndarray     # (S,) global vertex index at the low end
    hi_vertex: np.ndarray
    inward_x: np.ndarray      # (S,) unit inward normal (one component zero)
    inward_y: np.ndarray
    vertex_x: np.ndarray      # (V,)
    vertex_y: np.ndarray
    vertex_convex: np.ndarray  # (V,) bool

    def __post_init__(self):
        # axis-split views let the batch engine skip per-side axis dispatch
        self.v_idx = np.nonzero(self.axis == 0)[0]
        self.h_idx = np.nonzero(self.axis == 1)[0]
        self.v_coord = self.coord[self.v_idx]
        self.v_lo = self.lo[self.v_idx]
        self.v_hi = self.hi[self.v_idx]
        self.h_coord = self.coord[self.h_idx]
        self.h_lo = self.lo[self.h_idx]
        self.h_hi = self.hi[self.h_idx]


_INWARD = {
    (False, "E"): (0, 1), (False, "N"): (-1, 0),
    (False, "W"): (0, -1), (False, "S"): (1, 0),
    (True, "E"): (0, -1), (True, "N"): (1, 0),
    (True, "W"): (0, 1), (True, "S"): (-1, 0),
}


def prepare_sides(table: VHTable) -> SideTable:
    axis, coord, lo, hi = [], [], [], []
    lo_v, hi_v, in_x, in_y = [], [], [], []
    vx, vy, convex = [], [], []
    v_offset = 0
    for verts, letters, is_hole in table.boundary_loops():
        n = len(verts)
        for i in range(n):
            x0, y0 = float(verts[i][0]), float(verts[i][1])
            vx.append(x0)
            vy.append(y0)
            prev = letters[i - 1]
            cur = letters[i]
            pdx, pdy = _unit_step(prev)
            cdx, cdy = _unit_step(cur)
            left_turn = (pdx * cdy - pdy * cdx) > 0
            convex.append(left_turn != is_hole)
        for i in range(n):
            a = verts[i]
            b = verts[(i + 1) % n]
            letter = letters[i]
            ix, iy = _INWARD[(is_hole, letter)]
            in_x.append(ix)
            in_y.append(iy)
            if letter in ("N", "S"):
                axis.append(0)
                coord.append(float(a[0]))
                ya, yb = float(a[1]), float(b[1])
                if ya <= yb:
                    lo.append(ya); hi.append(yb)
                    lo_v.append(v_offset + i)
                    hi_v.append(v_offset + (i + 1) % n)
                else:
                    lo.append(yb); hi.append(ya)
                    lo_v.append(v_offset + (i + 1) % n)
                    hi_v.append(v_offset + i)
            else:
                axis.append(1)
                coord.append(float(a[1]))
                xa, xb = float(a[0]), float(b[0])
                if xa <= xb:
                    lo.append(xa); hi.append(xb)
                    lo_v.append(v_offset + i)
                    hi_v.append(v_offset + (i + 1) % n)
                else:
                    lo.append(xb); hi.append(xa)
                    lo_v.append(v_offset + (i + 1) % n)
                    hi_v.append(v_offset + i)
        v_offset += n
    return SideTable(
        table=table,
        axis=np.array(axis, dtype=np.int8),
        coord=np.array(coord, dtype=np.float64),
        lo=np.array(lo, dtype=np.float64),
        hi=np.array(hi, dtype=np.float64),
        lo_vertex=np.array(lo_v, dtype=np.int64),
        hi_vertex=np.array(hi_v, dtype=np.int64),
        inward_x=np.array(in_x, dtype=np.int8),
        inward_y=np.array(in_y, dtype=np.int8),
        vertex_x=np.array(vx, dtype=np.float64),
        vertex_y=np.array(vy, dtype=np.float64),
        vertex_convex=np.array(convex, dtype=bool),
    )


def _unit_step(letter: str) -> tuple[int, int]:
    return {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}[letter]


# ---------------------------------------------------------------------------
# scalar event loop
# ---------------------------------------------------------------------------

def _scan_sides(sides: SideTable, x: float, y: float,
                vx: float, vy: float) -> tuple[float, int, float]:
    """Earliest strictly-positive boundary hit: (time, side, cross coordinate).

    A point sitting exactly on a side line gets t = 0 there and is skipped,
    which is what makes restarting from a collision well defined.
    """
    best_t = math.inf
    best_side = -1
    best_cross = 0.0
    for s in range(len(sides.axis)):
        if sides.axis[s] == 0:
            if vx == 0.0:
                continue
            t = (sides.coord[s] - x) / vx
            if t <= 0.0 or t >= best_t:
                continue
            cross = y + vy * t
        else:
            if vy == 0.0:
                continue
            t = (sides.coord[s] - y) / vy
            if t <= 0.0 or t >= best_t:
                continue
            cross = x + vx * t
        if sides.lo[s] - EPS_CORNER <= cross <= sides.hi[s] + EPS_CORNER:
            best_t = t
            best_side = s
            best_cross = cross
    return best_t, best_side, best_cross


def _check_start(sides: SideTable, x: float, y: float,
                 vx: float, vy: float) -> None:
    """Reject starts on the boundary that point outward (or stalled)."""
    if vx == 0.0 or vy == 0.0:
        raise StalledState("velocity is axis-parallel; direction class "
                           "requires theta strictly inside (0, pi/2)")
    for s in range(len(sides.axis)):
        if sides.axis[s] == 0:
            on = (abs(x - sides.coord[s]) <= EPS_CORNER
                  and sides.lo[s] - EPS_CORNER <= y <= sides.hi[s] + EPS_CORNER)
            outward = vx * sides.inward_x[s] < 0
        else:
            on = (abs(y - sides.coord[s]) <= EPS_CORNER
                  and sides.lo[s] - EPS_CORNER <= x <= sides.hi[s] + EPS_CORNER)
            outward = vy * sides.inward_y[s] < 0
        if on and outward:
            raise StalledState(
                f"start point lies on side {s} with outward velocity")


def next_event(table: VHTable | SideTable,
               state: PhasePoint) -> tuple[tuple[float, float], int, float]:
    """Earliest boundary hit of the ray from ``state``.

    Returns ``((x, y), side_id, time)`` with the hit re-projected onto the
    exact side line.  Raises :class:`CornerHit` when the hit lands within
    ``EPS_CORNER`` of a vertex (the exception carries the vertex and its
    convexity) and :class:`StalledState` for degenerate starts.
    """
    sides = table if isinstance(table, SideTable) else prepare_sides(table)
    vx, vy = state.direction.velocity
    _check_start(sides, state.x, state.y, vx, vy)
    t, s, cross = _scan_sides(sides, state.x, state.y, vx, vy)
    if s < 0:
        raise SingularOrbit("ray found no boundary ahead; state is outside "
                            "the table or numerically lost")
    if sides.axis[s] == 0:
        hit = (float(sides.coord[s]), cross)
    else:
        hit = (cross, float(sides.coord[s]))
    for vert, end in ((sides.lo_vertex[s], sides.lo[s]),
                      (sides.hi_vertex[s], sides.hi[s])):
        if abs(cross - end) <= EPS_CORNER:
            raise CornerHit(vertex=int(vert),
                            point=(float(sides.vertex_x[vert]),
                                   float(sides.vertex_y[vert])),
                            time=t,
                            convex=bool(sides.vertex_convex[vert]))
    return hit, s, t


@dataclass
class OrbitEvent:
    time: float
    x: float
    y: float
    side_id: int                 # -1 for corner events
    vertex_id: int | None = None
    kind: str = "reflect"        # "reflect" | "corner"


@dataclass
class OrbitSegmentList:
    """Straight orbit segments between recorded collisions."""

    table: VHTable
    initial: PhasePoint
    events: list[OrbitEvent] = field(default_factory=list)
    final: PhasePoint | None = None
    total_time: float = 0.0
    terminated: str | None = None   # None | "singular" | "budget"

    @property
    def singular(self) -> bool:
        return self.terminated == "singular"


def flow(table: VHTable | SideTable, state: PhasePoint, t: float,
         max_events: int = MAX_EVENTS) -> PhasePoint:
    """Advance a phase point by total time ``t`` through its reflections."""
    if t < 0:
        raise ValueError("flow time must be nonnegative")
    sides = table if isinstance(table, SideTable) else prepare_sides(table)
    result = _advance(sides, state, t, max_events, record=None)
    return result


def orbit(table: VHTable | SideTable, state: PhasePoint,
          max_time: float, max_events: int = MAX_EVENTS) -> OrbitSegmentList:
    """Record the orbit up to ``max_time`` or ``max_events`` collisions.

    Unlike :func:`flow`, singular terminations are flagged instead of raised.
    """
    if max_time <= 0 and max_events <= 0:
        raise ValueError("need a positive time or event budget")
    sides = table if isinstance(table, SideTable) else prepare_sides(table)
    tab = sides.table
    rec = OrbitSegmentList(table=tab, initial=state)
    if max_events <= 0:
        rec.final = state
        return rec
    try:
        final = _advance(sides, state, max_time, max_events, record=rec)
        rec.final = final
        rec.total_time = max_time
    except SingularOrbit:
        rec.terminated = "singular"
        rec.final = None
        rec.total_time = rec.events[-1].time if rec.events else 0.0
    except EventBudgetExceeded:
        rec.terminated = "budget"
        rec.final = None
        rec.total_time = rec.events[-1].time if rec.events else 0.0
    return rec


def _advance(sides: SideTable, state: PhasePoint, t: float,
             max_events: int, record: OrbitSegmentList | None) -> PhasePoint:
    x, y = state.x, state.y
    d = state.direction
    elapsed = 0.0
    events = 0
    while True:
        vx, vy = d.velocity
        remaining = t - elapsed
        if remaining <= 0:
            break
        try:
            hit, s, dt = next_event(sides, PhasePoint(x, y, d))
        except CornerHit as corner:
            if corner.time > remaining:
                x += vx * remaining
                y += vy * remaining
                elapsed = t
                break
            if not corner.convex:
                raise SingularOrbit(
                    f"orbit reaches reflex vertex {corner.vertex}") from corner
            x, y = corner.point
            d = d.flip_both()
            elapsed += corner.time
            events += 1
            if record is not None:
                record.events.append(OrbitEvent(
                    time=elapsed, x=x, y=y, side_id=-1,
                    vertex_id=corner.vertex, kind="corner"))
            if events > max_events:
                raise EventBudgetExceeded(f"exceeded {max_events} events")
            continue
        if dt > remaining:
            x += vx * remaining
            y += vy * remaining
            elapsed = t
            break
        x, y = hit
        if sides.axis[s] == 0:
            d = d.flip_x()
        else:
            d = d.flip_y()
        elapsed += dt
        events += 1
        if record is not None:
            record.events.append(OrbitEvent(
                time=elapsed, x=x, y=y, side_id=int(s), kind="reflect"))
        if events > max_events:
            raise EventBudgetExceeded(f"exceeded {max_events} events")
    return PhasePoint(x, y, d)


# ---------------------------------------------------------------------------
# unfolding
# ---------------------------------------------------------------------------

def unfold_position(history: OrbitSegmentList) -> list[tuple[tuple[float, float],
                                                             UnfoldedFrame]]:
    """Straighten an orbit by composing reflections across the hit side lines.

    Each reflection toggles one frame parity instead of bending the path, so
    the returned points are collinear (the whole unfolded path is one line).
    Entry k carries the frame in effect when the path arrives at point k.
    """
    sides = prepare_sides(history.table)
    # isometry z -> (sx*z_x + tx, sy*z_y + ty), composed right-to-left
    sx, sy = 1, 1
    tx, ty = 0.0, 0.0

    def apply(px: float, py: float) -> tuple[float, float]:
        return (sx * px + tx, sy * py + ty)

    out = [(apply(history.initial.x, history.initial.y), UnfoldedFrame(sx, sy))]
    for ev in history.events:
        out.append((apply(ev.x, ev.y), UnfoldedFrame(sx, sy)))
        if ev.kind == "corner":
            cx = sides.vertex_x[ev.vertex_id]
            cy = sides.vertex_y[ev.vertex_id]
            tx, sx = tx + 2.0 * sx * cx, -sx
            ty, sy = ty + 2.0 * sy * cy, -sy
        else:
            if sides.axis[ev.side_id] == 0:
                line = sides.coord[ev.side_id]
                tx, sx = tx + 2.0 * sx * line, -sx
            else:
                line = sides.coord[ev.side_id]
                ty, sy = ty + 2.0 * sy * line, -sy
    if history.final is not None:
        out.append((apply(history.final.x, history.final.y),
                    UnfoldedFrame(sx, sy)))
    return out


# ---------------------------------------------------------------------------
# batch engine
# ---------------------------------------------------------------------------

class FlowBatch:
    """Vectorized event-driven flow for many phase points at once.

    Points advance to synchronized absolute times via :meth:`advance_to`.
    Orbits that reach a reflex corner are frozen and flagged in
    ``singular`` rather than raised, so quadrature callers can drop them and
    renormalize.  All operations are elementwise or per-point reductions, so
    results are bitwise independent of how points are grouped into batches.
    """

    def __init__(self, table: VHTable | SideTable,
                 x: np.ndarray, y: np.ndarray,
                 vx: np.ndarray, vy: np.ndarray,
                 max_events: int = MAX_EVENTS):
        self.sides = table if isinstance(table, SideTable) else prepare_sides(table)
        self.x = np.array(x, dtype=np.float64)
        self.y = np.array(y, dtype=np.float64)
        self.vx = np.array(vx, dtype=np.float64)
        self.vy = np.array(vy, dtype=np.float64)
        n = self.x.shape[0]
        self.t = np.zeros(n)
        self.singular = np.zeros(n, dtype=bool)
        self.events = np.zeros(n, dtype=np.int64)
        self.max_events = max_events
        self.next_t = np.empty(n)
        self.next_side = np.empty(n, dtype=np.int64)
        self._recompute(np.arange(n))

    def _recompute(self, idx: np.ndarray) -> None:
        """Refresh the cached next event for the given point indices."""
        if idx.size == 0:
            return
        s = self.sides
        x = self.x[idx, None]
        y = self.y[idx, None]
        vx = self.vx[idx, None]
        vy = self.vy[idx, None]

        tv = (s.v_coord[None, :] - x) / vx
        cross_v = y + vy * tv
        bad = tv <= 0.0
        bad |= cross_v < s.v_lo[None, :] - EPS_CORNER
        bad |= cross_v > s.v_hi[None, :] + EPS_CORNER
        tv[bad] = np.inf

        th = (s.h_coord[None, :] - y) / vy
        cross_h = x + vx * th
        bad = th <= 0.0
        bad |= cross_h < s.h_lo[None, :] - EPS_CORNER
        bad |= cross_h > s.h_hi[None, :] + EPS_CORNER
        th[bad] = np.inf

        av = np.argmin(tv, axis=1)
        ah = np.argmin(th, axis=1)
        rows = np.arange(idx.size)
        tv_min = tv[rows, av]
        th_min = th[rows, ah]
        use_v = tv_min <= th_min
        t_hit = np.where(use_v, tv_min, th_min)
        side = np.where(use_v, s.v_idx[av], s.h_idx[ah])
        if np.any(~np.isfinite(t_hit) & ~self.singular[idx]):
            raise SingularOrbit("a batch point lost containment")
        self.next_t[idx] = self.t[idx] + t_hit
        self.next_side[idx] = side

    def advance_to(self, t_target: float) -> None:
        if np.any(t_target < self.t[~self.singular] - 1e-12):
            raise ValueError("advance_to target precedes current batch time")
        while True:
            pending = (~self.singular) & (self.next_t <= t_target)
            if not pending.any():
                break
            idx = np.where(pending)[0]
            self._process_events(idx)
        live = ~self.singular
        dt = t_target - self.t[live]
        self.x[live] += self.vx[live] * dt
        self.y[live] += self.vy[live] * dt
        self.t[live] = t_target

    def _process_events(self, idx: np.ndarray) -> None:
        s = self.sides
        side = self.next_side[idx]
        dt = self.next_t[idx] - self.t[idx]
        hx = self.x[idx] + self.vx[idx] * dt
        hy = self.y[idx] + self.vy[idx] * dt
        vert = s.axis[side] == 0
        # re-project onto the exact side line
        hx = np.where(vert, s.coord[side], hx)
        hy = np.where(~vert, s.coord[side], hy)
        cross = np.where(vert, hy, hx)

        at_lo = np.abs(cross - s.lo[side]) <= EPS_CORNER
        at_hi = np.abs(cross - s.hi[side]) <= EPS_CORNER
        corner = at_lo | at_hi
        vid = np.where(at_lo, s.lo_vertex[side], s.hi_vertex[side])

        reflex = corner & ~s.vertex_convex[vid]
        plain = ~corner
        convex = corner & ~reflex

        # plain reflections flip one component; convex corners flip both and
        # land exactly on the vertex
        self.x[idx] = np.where(convex, s.vertex_x[vid], hx)
        self.y[idx] = np.where(convex, s.vertex_y[vid], hy)
        flip_x = (plain & vert) | convex
        flip_y = (plain & ~vert) | convex
        self.vx[idx] = np.where(flip_x, -self.vx[idx], self.vx[idx])
        self.vy[idx] = np.where(flip_y, -self.vy[idx], self.vy[idx])
        self.t[idx] = self.next_t[idx]
        self.singular[idx] |= reflex
        self.events[idx] += 1
        if np.any(self.events[idx] > self.max_events):
            raise EventBudgetExceeded(
                f"a batch point exceeded {self.max_events} events")
        active = idx[~self.singular[idx]]
        self._recompute(active)


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def orbit_to_csv(history: OrbitSegmentList, path) -> None:
    """Write t, x, y, sx, sy, side_id rows (initial and final rows use -1)."""
    sides = prepare_sides(history.table)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "sx", "sy", "side_id"])
        d = history.initial.direction
        w.writerow([repr(0.0), repr(history.initial.x), repr(history.initial.y),
                    d.sx, d.sy, -1])
        sx, sy = d.sx, d.sy
        for ev in history.events:
            if ev.kind == "corner":
                sx, sy = -sx, -sy
            elif sides.axis[ev.side_id] == 0:
                sx = -sx
            else:
                sy = -sy
            w.writerow([repr(ev.time), repr(ev.x), repr(ev.y), sx, sy,
                        ev.side_id])
        if history.final is not None:
            fd = history.final.direction
            w.writerow([repr(history.total_time),
                        repr(history.final.x), repr(history.final.y),
                        fd.sx, fd.sy, -1])


def orbit_to_svg(history: OrbitSegmentList, path,
                 scale: float = 200.0) -> None:
    """Table outline plus the orbit polyline, y-axis flipped for SVG."""
    table = history.table
    (x0, y0), (x1, y1) = table.bbox
    pad = 0.1 * float(max(x1 - x0, y1 - y0))
    fx0, fy0 = float(x0) - pad, float(y0) - pad
    fw = float(x1 - x0) + 2 * pad
    fh = float(y1 - y0) + 2 * pad

    def pt(x: float, y: float) -> str:
        sx = (x - fx0) * scale
        sy = (fy0 + fh - y) * scale
        return f"{sx:.3f},{sy:.3f}"

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" '
             f'width="{fw * scale:.0f}" height="{fh * scale:.0f}">']
    for verts, _letters, is_hole in table.boundary_loops():
        pts = " ".join(pt(float(vx), float(vy)) for vx, vy in verts)
        fill = "#ffffff" if is_hole else "#f2f2f2"
        parts.append(f'<polygon points="{pts}" fill="{fill}" '
                     f'stroke="#333333" stroke-width="2"/>')
    path_pts = [pt(history.initial.x, history.initial.y)]
    path_pts += [pt(ev.x, ev.y) for ev in history.events]
    if history.final is not None:
        path_pts.append(pt(history.final.x, history.final.y))
    parts.append(f'<polyline points="{" ".join(path_pts)}" fill="none" '
                 f'stroke="#c0392b" stroke-width="1"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
