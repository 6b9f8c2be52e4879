"""Flow, orbit, unfolding and batch-engine tests.

Derived expectations come from closed forms: 1-D tent-map folding for
rectangles, a parametric ray/segment intersection oracle for first hits, and
straight-line unfolding for mirror compositions.
"""

import math

import numpy as np
import pytest

from vhbilliards.dynamics import (
    EPS_CORNER,
    DirectionState,
    FlowBatch,
    PhasePoint,
    UnfoldedFrame,
    flow,
    is_pi_commensurable,
    next_event,
    orbit,
    orbit_to_csv,
    orbit_to_svg,
    prepare_sides,
    unfold_position,
)
from vhbilliards.errors import (
    CornerHit,
    DegenerateDirection,
    EventBudgetExceeded,
    SingularOrbit,
)
from vhbilliards.geometry import PointLocation, contains_point


def fold_unit(x):
    """Period-2 tent map onto [0, 1]."""
    u = x % 2.0
    return 2.0 - u if u > 1.0 else u


def brute_force_first_hit(table, x, y, vx, vy):
    """Oracle: parametric intersection with every side, smallest t > 0."""
    best = (math.inf, None)
    for verts, letters, _ in table.boundary_loops():
        n = len(verts)
        for i in range(n):
            ax, ay = float(verts[i][0]), float(verts[i][1])
            bx, by = float(verts[(i + 1) % n][0]), float(verts[(i + 1) % n][1])
            if ax == bx:
                if vx == 0:
                    continue
                t = (ax - x) / vx
                hit_y = y + vy * t
                if t > 1e-12 and min(ay, by) <= hit_y <= max(ay, by):
                    best = min(best, (t, (ax, hit_y)))
            else:
                if vy == 0:
                    continue
                t = (ay - y) / vy
                hit_x = x + vx * t
                if t > 1e-12 and min(ax, bx) <= hit_x <= max(ax, bx):
                    best = min(best, (t, (hit_x, ay)))
    return best


class TestDirectionState:
    def test_four_directions(self):
        states = DirectionState(0.7).direction_class()
        vels = {s.velocity for s in states}
        assert len(vels) == 4
        c, s = math.cos(0.7), math.sin(0.7)
        assert (c, s) in vels and (-c, -s) in vels

    def test_rejects_degenerate_angles(self):
        for bad in (0.0, math.pi / 2, -0.3, 2.0):
            with pytest.raises(DegenerateDirection):
                DirectionState(bad)

    def test_pi_commensurability_flag(self):
        assert is_pi_commensurable(math.pi / 4)
        assert is_pi_commensurable(math.pi / 3)
        assert not is_pi_commensurable(1.0)
        assert not is_pi_commensurable(0.7)


class TestNextEvent:
    def test_square_closed_form(self, square):
        theta = math.atan(0.5)
        state = PhasePoint(1.5, 1.5, DirectionState(theta))
        (hx, hy), side, t = next_event(square, state)
        assert hx == 2.0
        assert abs(hy - 1.75) < 1e-12
        assert abs(t - 0.5 / math.cos(theta)) < 1e-12

    def test_diagonal_into_corner(self, square):
        state = PhasePoint(1.5, 1.5, DirectionState(math.pi / 4))
        with pytest.raises(CornerHit) as err:
            next_event(square, state)
        assert err.value.point == (2.0, 2.0)
        assert err.value.convex

    def test_lshape_matches_brute_force(self, lshape_table):
        state = PhasePoint(1.5, 1.5, DirectionState(math.pi / 3))
        (hx, hy), side, t = next_event(lshape_table, state)
        vx, vy = state.direction.velocity
        t_oracle, point = brute_force_first_hit(lshape_table, 1.5, 1.5, vx, vy)
        assert abs(t - t_oracle) < 1e-12
        assert abs(hx - point[0]) < 1e-12 and abs(hy - point[1]) < 1e-12

    def test_random_starts_match_brute_force(self, lshape_table, rng):
        checked = 0
        while checked < 100:
            x = 1.02 + 1.9 * rng.random()
            y = 1.02 + 1.9 * rng.random()
            if contains_point(lshape_table, (x, y)) is not PointLocation.INTERIOR:
                continue
            theta = 0.05 + 1.4 * rng.random()
            sx = 1 if rng.random() < 0.5 else -1
            sy = 1 if rng.random() < 0.5 else -1
            state = PhasePoint(x, y, DirectionState(theta, sx, sy))
            vx, vy = state.direction.velocity
            try:
                (hx, hy), _, t = next_event(lshape_table, state)
            except CornerHit:
                continue
            t_oracle, point = brute_force_first_hit(lshape_table, x, y, vx, vy)
            assert abs(t - t_oracle) < 1e-9
            assert abs(hx - point[0]) < 1e-9 and abs(hy - point[1]) < 1e-9
            checked += 1


class TestFlow:
    def test_zero_time_is_identity(self, lshape_table):
        state = PhasePoint(1.3, 1.7, DirectionState(0.9))
        assert flow(lshape_table, state, 0.0) == state

    def test_folding_oracle(self, square):
        theta = math.acos(3 / 5)
        start = PhasePoint(1.25, 1.25, DirectionState(theta))
        for t in (0.3, 1.9, 7.77, 23.45):
            p = flow(square, start, t)
            assert abs(p.x - (1 + fold_unit(0.25 + 0.6 * t))) < 1e-9
            assert abs(p.y - (1 + fold_unit(0.25 + 0.8 * t))) < 1e-9

    def test_reversibility(self, lshape_table):
        start = PhasePoint(1.37, 1.21, DirectionState(1.1))
        t = 6.3
        fwd = flow(lshape_table, start, t)
        back = flow(lshape_table,
                    PhasePoint(fwd.x, fwd.y, fwd.direction.flip_both()), t)
        assert abs(back.x - start.x) < 1e-9
        assert abs(back.y - start.y) < 1e-9
        assert back.direction == start.direction.flip_both()

    def test_time_additivity(self, lshape_table):
        start = PhasePoint(1.51, 1.43, DirectionState(0.77))
        one = flow(lshape_table, start, 8.5)
        two = flow(lshape_table, flow(lshape_table, start, 3.2), 5.3)
        assert abs(one.x - two.x) < 1e-9
        assert abs(one.y - two.y) < 1e-9
        assert one.direction == two.direction

    def test_convex_corner_double_reflection(self, square):
        # exact diagonal: the corner reflects the ray straight back
        start = PhasePoint(1.5, 1.5, DirectionState(math.pi / 4))
        p = flow(square, start, 2 * math.sqrt(2) * 0.5)
        assert abs(p.x - 1.5) < 1e-9 and abs(p.y - 1.5) < 1e-9
        assert (p.direction.sx, p.direction.sy) == (-1, -1)

    def test_reflex_corner_is_singular(self, lshape_table):
        # aim exactly at the reentrant vertex (2, 2)
        start = PhasePoint(1.5, 1.5, DirectionState(math.pi / 4))
        with pytest.raises(SingularOrbit):
            flow(lshape_table, start, 2.0)

    def test_event_budget(self, square):
        start = PhasePoint(1.5, 1.5, DirectionState(1.0))
        with pytest.raises(EventBudgetExceeded):
            flow(square, start, 100.0, max_events=10)

    def test_direction_class_closure_many_events(self, lshape_table):
        state = PhasePoint(1.2345, 1.5432, DirectionState(0.8765))
        theta0 = state.direction.theta
        for _ in range(5):
            state = flow(lshape_table, state, 11.7)
            assert state.direction.theta == theta0
            assert (state.direction.sx, state.direction.sy) in {
                (1, 1), (1, -1), (-1, 1), (-1, -1)}

    def test_direction_class_closure_ten_thousand_events(self, rng):
        """Speed components stay in the initial class bitwise over 1e4
        reflections on random tables."""
        from vhbilliards.lab import random_table

        for _ in range(3):
            table = random_table(rng, hole_probability=0.0)
            (x0, y0), (x1, y1) = table.bbox
            while True:
                x = float(x0) + float(x1 - x0) * rng.random()
                y = float(y0) + float(y1 - y0) * rng.random()
                if contains_point(table, (x, y)) is PointLocation.INTERIOR:
                    break
            theta = 0.1 + 1.3 * rng.random()
            c, s = math.cos(theta), math.sin(theta)
            batch = FlowBatch(table, np.array([x]), np.array([y]),
                              np.array([c]), np.array([s]),
                              max_events=10**6)
            # advance in bounded chunks until 1e4 reflections accumulate
            t = 0.0
            chunk = 200.0 * float(max(x1 - x0, y1 - y0))
            while batch.events[0] < 10**4 and not batch.singular[0]:
                t += chunk
                batch.advance_to(t)
            if batch.singular[0]:
                continue
            assert batch.events[0] >= 10**4
            assert abs(batch.vx[0]) == c
            assert abs(batch.vy[0]) == s


class TestOrbit:
    def test_square_rational_slope_returns(self, square):
        # tan(theta) = 1/2 gives a periodic orbit of period 2*sqrt(5)
        theta = math.atan(0.5)
        start = PhasePoint(1.3, 1.55, DirectionState(theta))
        period = 2 * math.sqrt(5)
        p = flow(square, start, period)
        assert abs(p.x - start.x) < 1e-9 and abs(p.y - start.y) < 1e-9
        assert p.direction == start.direction

    def test_collisions_lie_on_boundary(self, lshape_table):
        hist = orbit(lshape_table, PhasePoint(1.25, 1.25, DirectionState(1.0)),
                     max_time=12.0)
        assert hist.events
        for ev in hist.events:
            assert contains_point(lshape_table, (ev.x, ev.y)) \
                is PointLocation.BOUNDARY

    def test_zero_event_budget_gives_empty_list(self, square):
        hist = orbit(square, PhasePoint(1.5, 1.5, DirectionState(1.0)),
                     max_time=10.0, max_events=0)
        assert hist.events == []

    def test_singular_orbit_is_flagged(self, lshape_table):
        hist = orbit(lshape_table, PhasePoint(1.5, 1.5,
                                              DirectionState(math.pi / 4)),
                     max_time=5.0)
        assert hist.terminated == "singular"
        assert hist.singular

    def test_times_strictly_increasing(self, lshape_table):
        hist = orbit(lshape_table, PhasePoint(1.21, 1.81, DirectionState(0.6)),
                     max_time=25.0)
        times = [ev.time for ev in hist.events]
        assert all(b > a for a, b in zip(times, times[1:]))


class TestUnfold:
    def test_single_segment_identity_frame(self, square):
        hist = orbit(square, PhasePoint(1.2, 1.3, DirectionState(0.3)),
                     max_time=0.1)
        pts = unfold_position(hist)
        assert pts[0][1] == UnfoldedFrame(1, 1)
        assert pts[0][0] == (1.2, 1.3)

    def test_one_reflection_collinear(self, square):
        theta = math.atan(0.5)
        hist = orbit(square, PhasePoint(1.5, 1.5, DirectionState(theta)),
                     max_time=1.5)
        pts = unfold_position(hist)
        assert len(pts) >= 3
        (x0, y0), _ = pts[0]
        (x1, y1), _ = pts[1]
        (x2, y2), f2 = pts[2]
        cross = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        assert abs(cross) < 1e-9
        assert f2 == UnfoldedFrame(-1, 1)  # first hit is the right wall

    def test_rectangle_unfolds_to_straight_line(self, square):
        theta = 0.9
        start = PhasePoint(1.33, 1.71, DirectionState(theta))
        hist = orbit(square, start, max_time=17.0)
        pts = unfold_position(hist)
        (ux, uy), _ = pts[-1]
        vx, vy = start.direction.velocity
        assert abs(ux - (start.x + vx * 17.0)) < 1e-9
        assert abs(uy - (start.y + vy * 17.0)) < 1e-9

    def test_frame_parity_tracks_sign_flips(self, lshape_table):
        hist = orbit(lshape_table, PhasePoint(1.4, 1.6, DirectionState(0.95)),
                     max_time=9.0)
        sides = prepare_sides(lshape_table)
        ex = ey = 1
        pts = unfold_position(hist)
        for ev, (_, frame_at_arrival) in zip(hist.events, pts[1:]):
            assert (frame_at_arrival.ex, frame_at_arrival.ey) == (ex, ey)
            if ev.kind == "corner":
                ex, ey = -ex, -ey
            elif sides.axis[ev.side_id] == 0:
                ex = -ex
            else:
                ey = -ey


class TestFlowBatch:
    def test_matches_scalar_flow(self, lshape_table, rng):
        n = 60
        xs, ys, vxs, vys, states = [], [], [], [], []
        while len(xs) < n:
            x = 1.05 + 1.9 * rng.random()
            y = 1.05 + 1.9 * rng.random()
            if contains_point(lshape_table, (x, y)) is not PointLocation.INTERIOR:
                continue
            theta = 0.1 + 1.3 * rng.random()
            sx = 1 if rng.random() < 0.5 else -1
            sy = 1 if rng.random() < 0.5 else -1
            d = DirectionState(theta, sx, sy)
            xs.append(x)
            ys.append(y)
            vxs.append(d.velocity[0])
            vys.append(d.velocity[1])
            states.append(PhasePoint(x, y, d))
        batch = FlowBatch(lshape_table, np.array(xs), np.array(ys),
                          np.array(vxs), np.array(vys))
        batch.advance_to(4.0)
        batch.advance_to(11.5)
        for i, st in enumerate(states):
            if batch.singular[i]:
                continue
            p = flow(lshape_table, st, 11.5)
            assert abs(p.x - batch.x[i]) < 1e-10
            assert abs(p.y - batch.y[i]) < 1e-10

    def test_speed_components_preserved_bitwise(self, square):
        theta = 0.777
        c, s = math.cos(theta), math.sin(theta)
        batch = FlowBatch(square, np.array([1.3, 1.6]), np.array([1.2, 1.9]),
                          np.array([c, -c]), np.array([s, s]))
        batch.advance_to(50.0)
        assert set(np.abs(batch.vx)) == {c}
        assert set(np.abs(batch.vy)) == {s}

    def test_reflex_corner_marks_singular(self, lshape_table):
        batch = FlowBatch(lshape_table, np.array([1.5]), np.array([1.5]),
                          np.array([math.cos(math.pi / 4)]),
                          np.array([math.sin(math.pi / 4)]))
        batch.advance_to(3.0)
        assert batch.singular[0]

    def test_budget(self, square):
        batch = FlowBatch(square, np.array([1.5]), np.array([1.5]),
                          np.array([math.cos(1.0)]), np.array([math.sin(1.0)]),
                          max_events=5)
        with pytest.raises(EventBudgetExceeded):
            batch.advance_to(50.0)


class TestMeasurePreservation:
    def test_smooth_observable_means_are_stable(self, lshape_table):
        """Weak numerical invariance: grid mean of h o flow_t vs mean of h.

        The invariant measure weights all four direction labels; single-label
        position marginals are NOT preserved (labels mix under reflections),
        so the mean must be taken across the full label set.
        """
        from vhbilliards.spectral import Observable, build_grid

        m = 40
        grid = build_grid(lshape_table, m)
        sides = prepare_sides(lshape_table)
        observables = [Observable.cosine(1, 0), Observable.sine(0, 1),
                       Observable.cosine(1, 1)]
        theta = 0.83
        c, s = math.cos(theta), math.sin(theta)
        for h in observables:
            h0 = grid.evaluate(h)
            mean0 = float(np.sum(h0) / grid.npts)
            for t in (1.0, 5.0, 20.0):
                total = 0.0
                count = 0
                for sx in (1, -1):
                    for sy in (1, -1):
                        batch = FlowBatch(sides, grid.xs, grid.ys,
                                          np.full(grid.npts, sx * c),
                                          np.full(grid.npts, sy * s))
                        batch.advance_to(t)
                        alive = ~batch.singular
                        vals = h.evaluate(batch.x, batch.y,
                                          grid.width, grid.height)
                        total += float(np.sum(vals * alive))
                        count += int(alive.sum())
                assert abs(total / count - mean0) <= 3.0 / m


class TestExports:
    def test_csv_columns_and_rows(self, square, tmp_path):
        hist = orbit(square, PhasePoint(1.5, 1.25, DirectionState(1.0)),
                     max_time=3.0)
        path = tmp_path / "orbit.csv"
        orbit_to_csv(hist, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,x,y,sx,sy,side_id"
        assert len(lines) == len(hist.events) + 3
        first = lines[1].split(",")
        assert first[-1] == "-1"

    def test_svg_written(self, lshape_table, tmp_path):
        hist = orbit(lshape_table, PhasePoint(1.5, 1.5, DirectionState(1.0)),
                     max_time=6.0)
        path = tmp_path / "orbit.svg"
        orbit_to_svg(hist, path)
        text = path.read_text()
        assert text.startswith("<svg") and "polyline" in text


def test_eps_corner_band(square):
    # aiming within EPS_CORNER of the corner resolves as a corner event
    theta = math.atan2(0.5 - EPS_CORNER / 4, 0.5)
    state = PhasePoint(1.5, 1.5, DirectionState(theta))
    with pytest.raises(CornerHit) as err:
        next_event(square, state)
    assert err.value.point == (2.0, 2.0)
    assert err.value.convex
