"""Exact geometry of axis-parallel (VH) polygons and tables.

Everything here runs on ``fractions.Fraction``: side lengths, vertices, areas
and tiling denominators are exact, so closure constraints and minimal-tiling
certificates never depend on floating-point luck.  Conventions:

* A boundary word is a string over ``E N W S`` (east/north/west/south),
  alternating between horizontal ``{E, W}`` and vertical ``{N, S}`` letters.
  The canonical rotation starts with the ``E`` letter lying on the bottom of
  the bounding box, leftmost first.
* Outer boundaries are traversed counterclockwise (interior on the left).
  Holes are stored as ordinary counterclockwise polygons plus the absolute
  position of their bounding-box lower-left corner; the table interior lies
  outside them.
* The outer bounding box of a table is pinned with its lower-left corner at
  ``(1, 1)``.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

from .errors import (
    BadAlphabet,
    ClosureViolated,
    DegenerateWord,
    EtaTooSmall,
    GeometryError,
    HolePlacement,
    NoAlternation,
    NonPositiveLength,
    OddLength,
    OrientationViolated,
    SelfIntersecting,
)

ALPHABET = "ENWS"
HORIZONTAL = frozenset("EW")
VERTICAL = frozenset("NS")

# Unit step of each letter (dx, dy).
_STEP = {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}

#: Tolerance band for classifying float query points against exact boundaries.
EPS_GEOM = 1e-9

Rational = Fraction
Point = tuple[Fraction, Fraction]


class PointLocation(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


# ---------------------------------------------------------------------------
# combinatorics words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CombinatoricsWord:
    """Canonical letter sequence describing one boundary component."""

    letters: tuple[str, ...]

    def __post_init__(self):
        _validate_letters(self.letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def render(self) -> str:
        return "".join(self.letters)

    def __str__(self) -> str:
        return self.render()


def _validate_letters(letters: Sequence[str]) -> None:
    text = "".join(letters)
    bad = sorted(set(text) - set(ALPHABET))
    if bad:
        raise BadAlphabet(f"letters {bad!r} not in E/N/W/S")
    if len(text) % 2 != 0:
        raise OddLength(f"word length {len(text)} is odd")
    if len(text) < 4:
        raise DegenerateWord(f"word {text!r} has fewer than four letters")
    for i, ch in enumerate(text):
        nxt = text[(i + 1) % len(text)]
        if (ch in HORIZONTAL) == (nxt in HORIZONTAL):
            raise NoAlternation(f"letters {i} and {(i + 1) % len(text)} "
                                f"({ch!r}, {nxt!r}) are both "
                                f"{'horizontal' if ch in HORIZONTAL else 'vertical'}")
    for letter in "ENWS":
        if letter not in text:
            raise DegenerateWord(f"word {text!r} has no {letter!r} side; "
                                 "the boundary cannot close")


def _balanced_trace(letters: Sequence[str]) -> list[Point]:
    """Vertices of the word traced with class-balanced unit steps.

    Each letter class gets step 1/(class count), so the trace always closes
    exactly; this makes the start convention intrinsic to the word even
    though real side lengths are not yet known.
    """
    counts = {c: sum(1 for ch in letters if ch == c) for c in ALPHABET}
    steps = {c: Fraction(1, counts[c]) for c in ALPHABET}
    pos = (Fraction(0), Fraction(0))
    out = [pos]
    for ch in letters:
        dx, dy = _STEP[ch]
        pos = (pos[0] + dx * steps[ch], pos[1] + dy * steps[ch])
        out.append(pos)
    return out


def _canonical_shift(letters: tuple[str, ...]) -> int:
    """Index of the leftmost bottom east-going side in the balanced trace."""
    trace = _balanced_trace(letters)
    best: tuple[Fraction, Fraction, int] | None = None
    for i, ch in enumerate(letters):
        if ch != "E":
            continue
        x, y = trace[i]
        key = (y, x, i)
        if best is None or key < best:
            best = key
    assert best is not None  # _validate_letters guarantees an E
    return best[2]


def parse_word(text: str | Iterable[str]) -> CombinatoricsWord:
    """Parse and canonicalize a combinatorics word.

    The canonical rotation is determined from the word alone via the
    class-balanced trace (see :func:`_balanced_trace`); parsing an already
    canonical word returns it unchanged.
    """
    letters = tuple(text)
    _validate_letters(letters)
    shift = _canonical_shift(letters)
    return CombinatoricsWord(letters[shift:] + letters[:shift])


# ---------------------------------------------------------------------------
# polygons
# ---------------------------------------------------------------------------

def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        # exact binary value; callers wanting decimal semantics pass strings
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


@dataclass(frozen=True)
class VHPolygon:
    """Simple axis-parallel polygon given by word + exact side lengths.

    ``vertices`` are the side start points in the polygon's own frame, with
    the bounding-box lower-left corner at the origin.
    """

    word: CombinatoricsWord
    lengths: tuple[Fraction, ...]
    vertices: tuple[Point, ...] = field(compare=False)
    width: Fraction = field(compare=False)
    height: Fraction = field(compare=False)
    area: Fraction = field(compare=False)

    def sides(self) -> list[tuple[Point, Point, str]]:
        """List of (start, end, letter) in boundary order."""
        n = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % n], self.word.letters[i])
                for i in range(n)]


def build_polygon(word: CombinatoricsWord | str,
                  lengths: Sequence) -> VHPolygon:
    """Construct a polygon, verifying closure, simplicity and orientation.

    A raw letter string is canonicalized together with its lengths (both are
    rotated by the same shift, so sides keep their lengths).  Closure is
    checked exactly; simplicity by exhaustive pairwise segment tests (tables
    are small, quadratic cost is irrelevant).
    """
    lens = tuple(_to_fraction(v) for v in lengths)
    if not isinstance(word, CombinatoricsWord):
        letters = tuple(word)
        _validate_letters(letters)
        shift = _canonical_shift(letters)
        word = CombinatoricsWord(letters[shift:] + letters[:shift])
        if len(lens) == len(letters):
            lens = lens[shift:] + lens[:shift]
    if len(lens) != len(word):
        raise ClosureViolated(
            f"{len(lens)} lengths for a {len(word)}-letter word")
    if any(v <= 0 for v in lens):
        raise NonPositiveLength("all side lengths must be positive")

    sums = {c: Fraction(0) for c in ALPHABET}
    for ch, ln in zip(word.letters, lens):
        sums[ch] += ln
    if sums["E"] != sums["W"] or sums["N"] != sums["S"]:
        raise ClosureViolated(
            f"E sum {sums['E']} vs W sum {sums['W']}; "
            f"N sum {sums['N']} vs S sum {sums['S']}")

    pos = (Fraction(0), Fraction(0))
    verts = [pos]
    for ch, ln in zip(word.letters, lens):
        dx, dy = _STEP[ch]
        pos = (pos[0] + dx * ln, pos[1] + dy * ln)
        verts.append(pos)
    verts.pop()  # closure verified above; drop duplicate start

    _check_simple(verts)

    area2 = _signed_area2(verts)
    if area2 < 0:
        raise OrientationViolated("boundary traced clockwise; "
                                  "words must put the interior on the left")

    minx = min(v[0] for v in verts)
    miny = min(v[1] for v in verts)
    shifted = tuple((v[0] - minx, v[1] - miny) for v in verts)
    width = max(v[0] for v in shifted)
    height = max(v[1] for v in shifted)
    return VHPolygon(word=word, lengths=lens, vertices=shifted,
                     width=width, height=height, area=area2 / 2)


def _signed_area2(verts: Sequence[Point]) -> Fraction:
    total = Fraction(0)
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return total


def _segments_intersect(a: tuple[Point, Point], b: tuple[Point, Point]) -> bool:
    """Exact intersection test for two axis-parallel closed segments."""
    (ax0, ay0), (ax1, ay1) = a
    (bx0, by0), (bx1, by1) = b
    a_vert = ax0 == ax1
    b_vert = bx0 == bx1
    if a_vert and b_vert:
        if ax0 != bx0:
            return False
        lo_a, hi_a = sorted((ay0, ay1))
        lo_b, hi_b = sorted((by0, by1))
        return not (hi_a < lo_b or hi_b < lo_a)
    if (not a_vert) and (not b_vert):
        if ay0 != by0:
            return False
        lo_a, hi_a = sorted((ax0, ax1))
        lo_b, hi_b = sorted((bx0, bx1))
        return not (hi_a < lo_b or hi_b < lo_a)
    if a_vert:
        vx, (vlo, vhi) = ax0, sorted((ay0, ay1))
        hy, (hlo, hhi) = by0, sorted((bx0, bx1))
    else:
        vx, (vlo, vhi) = bx0, sorted((by0, by1))
        hy, (hlo, hhi) = ay0, sorted((ax0, ax1))
    return hlo <= vx <= hhi and vlo <= hy <= vhi


def _check_simple(verts: Sequence[Point]) -> None:
    n = len(verts)
    segs = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = (j - i == 1) or (i == 0 and j == n - 1)
            if adjacent:
                continue  # consecutive perpendicular sides share one vertex only
            if _segments_intersect(segs[i], segs[j]):
                raise SelfIntersecting(
                    f"sides {i} and {j} touch or cross")


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

#: outer bounding-box lower-left corner, by convention
TABLE_ANCHOR: Point = (Fraction(1), Fraction(1))


@dataclass(frozen=True)
class TilingCertificate:
    """Witness that every vertex sits on the (1/p, 1/q) rectangle lattice.

    ``tiling_parameters`` returns the minimal such pair; refined (non-minimal)
    certificates produced by :func:`approximate_pq` still describe a valid
    tiling, just with more, smaller tiles.
    """

    p: int
    q: int
    tile_count: int

    def refined(self, q_min: int) -> "TilingCertificate":
        """Sub-tile so both denominators reach at least ``q_min``."""
        kp = -(-q_min // self.p) if self.p < q_min else 1
        kq = -(-q_min // self.q) if self.q < q_min else 1
        return TilingCertificate(self.p * kp, self.q * kq,
                                 self.tile_count * kp * kq)


@dataclass(frozen=True)
class VHTable:
    """Axis-parallel polygon with axis-parallel holes removed.

    Holes are pairs ``(polygon, anchor)``: the polygon in its own frame plus
    the absolute position of its bounding-box lower-left corner.  A refined
    tiling certificate may be attached by :func:`approximate_pq`; it does not
    participate in equality.
    """

    outer: VHPolygon
    holes: tuple[tuple[VHPolygon, Point], ...] = ()
    certificate: TilingCertificate | None = field(default=None, compare=False)

    def __post_init__(self):
        _validate_holes(self.outer, self.holes)

    # -- derived geometry --------------------------------------------------

    @property
    def bbox(self) -> tuple[Point, Point]:
        x0, y0 = TABLE_ANCHOR
        return (TABLE_ANCHOR, (x0 + self.outer.width, y0 + self.outer.height))

    @property
    def area(self) -> Fraction:
        return self.outer.area - sum((h.area for h, _ in self.holes),
                                     Fraction(0))

    def outer_vertices(self) -> list[Point]:
        ax, ay = TABLE_ANCHOR
        return [(v[0] + ax, v[1] + ay) for v in self.outer.vertices]

    def hole_vertices(self, k: int) -> list[Point]:
        poly, (ax, ay) = self.holes[k]
        return [(v[0] + ax, v[1] + ay) for v in poly.vertices]

    def boundary_loops(self) -> list[tuple[list[Point], list[str], bool]]:
        """All boundary loops as (vertices, letters, is_hole)."""
        loops = [(self.outer_vertices(), list(self.outer.word.letters), False)]
        for k, (poly, _) in enumerate(self.holes):
            loops.append((self.hole_vertices(k), list(poly.word.letters), True))
        return loops

    def all_vertices(self) -> list[Point]:
        verts = self.outer_vertices()
        for k in range(len(self.holes)):
            verts.extend(self.hole_vertices(k))
        return verts

    def with_certificate(self, cert: TilingCertificate | None) -> "VHTable":
        return VHTable(self.outer, self.holes, cert)


def build_table(outer: VHPolygon,
                holes: Sequence[tuple[VHPolygon, tuple]] = ()) -> VHTable:
    """Assemble a table; hole anchors may be any exact-rational pairs."""
    packed = tuple((poly, (_to_fraction(a[0]), _to_fraction(a[1])))
                   for poly, a in holes)
    return VHTable(outer=outer, holes=packed)


def _validate_holes(outer: VHPolygon,
                    holes: Sequence[tuple[VHPolygon, Point]]) -> None:
    ax, ay = TABLE_ANCHOR
    outer_abs = [(v[0] + ax, v[1] + ay) for v in outer.vertices]
    outer_segs = _loop_segments(outer_abs)

    hole_abs: list[list[Point]] = []
    for poly, (hx, hy) in holes:
        verts = [(v[0] + hx, v[1] + hy) for v in poly.vertices]
        for v in verts:
            if _classify_exact(v, [outer_abs]) is not PointLocation.INTERIOR:
                raise HolePlacement(
                    f"hole vertex {v} not strictly inside the outer polygon")
        segs = _loop_segments(verts)
        for s in segs:
            for t in outer_segs:
                if _segments_intersect(s, t):
                    raise HolePlacement("hole boundary touches the outer boundary")
        hole_abs.append(verts)

    for i in range(len(hole_abs)):
        for j in range(i + 1, len(hole_abs)):
            segs_i = _loop_segments(hole_abs[i])
            segs_j = _loop_segments(hole_abs[j])
            for s in segs_i:
                for t in segs_j:
                    if _segments_intersect(s, t):
                        raise HolePlacement(f"holes {i} and {j} touch")
            if (_classify_exact(hole_abs[i][0], [hole_abs[j]])
                    is PointLocation.INTERIOR
                    or _classify_exact(hole_abs[j][0], [hole_abs[i]])
                    is PointLocation.INTERIOR):
                raise HolePlacement(f"holes {i} and {j} are nested")


def _loop_segments(verts: Sequence[Point]) -> list[tuple[Point, Point]]:
    n = len(verts)
    return [(verts[i], verts[(i + 1) % n]) for i in range(n)]


def table_area(table: VHTable) -> Fraction:
    """Exact area: outer minus holes."""
    return table.area


# ---------------------------------------------------------------------------
# point classification
# ---------------------------------------------------------------------------

def _on_any_segment(pt: Point, loops: Sequence[Sequence[Point]]) -> bool:
    x, y = pt
    for verts in loops:
        for (x0, y0), (x1, y1) in _loop_segments(verts):
            if x0 == x1:
                if x == x0 and min(y0, y1) <= y <= max(y0, y1):
                    return True
            else:
                if y == y0 and min(x0, x1) <= x <= max(x0, x1):
                    return True
    return False


def _classify_exact(pt: Point, loops: Sequence[Sequence[Point]]) -> PointLocation:
    """Exact even/odd classification against a set of boundary loops."""
    if _on_any_segment(pt, loops):
        return PointLocation.BOUNDARY
    x, y = pt
    crossings = 0
    for verts in loops:
        for (x0, y0), (x1, y1) in _loop_segments(verts):
            if x0 != x1:
                continue  # horizontal sides never cross a horizontal ray generically
            ylo, yhi = sorted((y0, y1))
            # half-open rule in y avoids double counting at shared vertices
            if ylo <= y < yhi and x < x0:
                crossings += 1
    return PointLocation.INTERIOR if crossings % 2 else PointLocation.EXTERIOR


def contains_point(table: VHTable, point: tuple) -> PointLocation:
    """Classify a point; exact for rationals, banded by EPS_GEOM for floats."""
    px, py = point
    loops = [table.outer_vertices()]
    loops.extend(table.hole_vertices(k) for k in range(len(table.holes)))
    if isinstance(px, float) or isinstance(py, float):
        if _near_boundary(float(px), float(py), loops, EPS_GEOM):
            return PointLocation.BOUNDARY
        pt = (Fraction(float(px)), Fraction(float(py)))
        loc = _classify_exact(pt, loops)
        # exact landing on the boundary already caught by the band
        return loc
    pt = (_to_fraction(px), _to_fraction(py))
    return _classify_exact(pt, loops)


def _near_boundary(px: float, py: float,
                   loops: Sequence[Sequence[Point]], eps: float) -> bool:
    for verts in loops:
        for (x0, y0), (x1, y1) in _loop_segments(verts):
            fx0, fy0, fx1, fy1 = float(x0), float(y0), float(x1), float(y1)
            if fx0 == fx1:
                lo, hi = min(fy0, fy1), max(fy0, fy1)
                dy = 0.0 if lo <= py <= hi else min(abs(py - lo), abs(py - hi))
                if dy == 0.0:
                    d = abs(px - fx0)
                else:
                    d = ((px - fx0) ** 2 + dy ** 2) ** 0.5
            else:
                lo, hi = min(fx0, fx1), max(fx0, fx1)
                dx = 0.0 if lo <= px <= hi else min(abs(px - lo), abs(px - hi))
                if dx == 0.0:
                    d = abs(py - fy0)
                else:
                    d = (dx ** 2 + (py - fy0) ** 2) ** 0.5
            if d <= eps:
                return True
    return False


# ---------------------------------------------------------------------------
# tilings
# ---------------------------------------------------------------------------

def _lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


def tiling_parameters(table: VHTable) -> TilingCertificate:
    """Minimal (p, q) such that all vertices sit on the (1/p, 1/q) lattice.

    All internal geometry is exact-rational, so a certificate always exists;
    minimality is immediate because p and q are least common multiples of the
    coordinate denominators.
    """
    p = 1
    q = 1
    for x, y in table.all_vertices():
        p = _lcm(p, x.denominator)
        q = _lcm(q, y.denominator)
    count = table.area * p * q
    assert count.denominator == 1, "lattice-aligned table must have integral tile count"
    return TilingCertificate(p=p, q=q, tile_count=int(count))


def lattice_fits(table: VHTable, p: int, q: int) -> bool:
    """Whether every vertex lies on the (1/p, 1/q) lattice."""
    return all(x.denominator <= p and p % x.denominator == 0
               and y.denominator <= q and q % y.denominator == 0
               for x, y in table.all_vertices())


def tile_anchors(table: VHTable, cert: TilingCertificate) -> list[Point]:
    """Lower-left corners of the tiles covering the table, row-major order."""
    (x0, y0), (x1, y1) = table.bbox
    nx = (x1 - x0) * cert.p
    ny = (y1 - y0) * cert.q
    assert nx.denominator == 1 and ny.denominator == 1
    anchors = []
    loops = [table.outer_vertices()]
    loops.extend(table.hole_vertices(k) for k in range(len(table.holes)))
    for j in range(int(ny)):
        for i in range(int(nx)):
            cx = x0 + Fraction(2 * i + 1, 2 * cert.p)
            cy = y0 + Fraction(2 * j + 1, 2 * cert.q)
            if _classify_exact((cx, cy), loops) is PointLocation.INTERIOR:
                anchors.append((x0 + Fraction(i, cert.p),
                                y0 + Fraction(j, cert.q)))
    if len(anchors) != cert.tile_count:
        raise GeometryError(
            f"certificate claims {cert.tile_count} tiles, found {len(anchors)}; "
            "table is not tiled by this lattice")
    return anchors


# ---------------------------------------------------------------------------
# lattice snapping / (p,q)-approximation
# ---------------------------------------------------------------------------

def _round_to_lattice(value: Fraction, q: int) -> Fraction:
    """Nearest positive multiple of 1/q, half rounded up."""
    units = (value * q * 2 + 1) // 2  # floor(v*q + 1/2)
    return Fraction(max(int(units), 1), q)


def _repair_class_sums(word: CombinatoricsWord,
                       lengths: list[Fraction], q: int) -> list[Fraction]:
    """Equalize E/W and N/S sums by adding 1/q steps to the deficient class.

    Units go to the longest sides first (ties: earliest word index),
    round-robin, so the repair is deterministic and spreads the perturbation.
    """
    out = list(lengths)
    for plus, minus in (("E", "W"), ("N", "S")):
        s_plus = sum((out[i] for i, c in enumerate(word.letters) if c == plus),
                     Fraction(0))
        s_minus = sum((out[i] for i, c in enumerate(word.letters) if c == minus),
                      Fraction(0))
        deficit = s_plus - s_minus
        if deficit == 0:
            continue
        target = minus if deficit > 0 else plus
        units = abs(deficit) * q
        assert units.denominator == 1
        units = int(units)
        idxs = [i for i, c in enumerate(word.letters) if c == target]
        idxs.sort(key=lambda i: (-out[i], i))
        for k in range(units):
            out[idxs[k % len(idxs)]] += Fraction(1, q)
    return out


def _snap_polygon(poly: VHPolygon, q: int) -> VHPolygon:
    rounded = [_round_to_lattice(v, q) for v in poly.lengths]
    repaired = _repair_class_sums(poly.word, rounded, q)
    return build_polygon(poly.word, repaired)


def approximate_pq(table: VHTable, q_min: int, eta) -> VHTable:
    """Return a nearby table certified to tile with min(p, q) >= q_min.

    If the minimal certificate already satisfies the bound the table is
    returned unchanged (with that certificate attached).  Otherwise every
    length and hole anchor is snapped to the (1/q_min, 1/q_min) lattice,
    class sums are repaired deterministically, and the result must stay
    within ``eta`` (sup-norm over lengths and anchors) of the input.
    """
    if q_min < 1:
        raise ValueError("q_min must be a positive integer")
    eta = _to_fraction(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")

    cert0 = tiling_parameters(table)
    if min(cert0.p, cert0.q) >= q_min:
        return table.with_certificate(cert0)

    new_outer = _snap_polygon(table.outer, q_min)
    new_holes = []
    for poly, (ax, ay) in table.holes:
        new_poly = _snap_polygon(poly, q_min)
        new_anchor = (_round_to_lattice(ax, q_min), _round_to_lattice(ay, q_min))
        new_holes.append((new_poly, new_anchor))

    deviation = max(abs(a - b) for a, b in
                    zip(new_outer.lengths, table.outer.lengths))
    for (np_, na), (op, oa) in zip(new_holes, table.holes):
        deviation = max(deviation,
                        max(abs(a - b) for a, b in zip(np_.lengths, op.lengths)),
                        abs(na[0] - oa[0]), abs(na[1] - oa[1]))
    if deviation > eta:
        raise EtaTooSmall(
            f"snapping to the 1/{q_min} lattice moves a parameter by "
            f"{deviation} > eta = {eta}")

    snapped = VHTable(outer=new_outer, holes=tuple(new_holes))
    cert = tiling_parameters(snapped)
    refined = cert.refined(q_min)
    return snapped.with_certificate(refined)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _frac_str(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


def table_to_dict(table: VHTable) -> dict:
    return {
        "outer": {
            "word": table.outer.word.render(),
            "lengths": [_frac_str(v) for v in table.outer.lengths],
        },
        "holes": [
            {
                "word": poly.word.render(),
                "lengths": [_frac_str(v) for v in poly.lengths],
                "anchor": [_frac_str(a[0]), _frac_str(a[1])],
            }
            for poly, a in table.holes
        ],
    }


def table_from_dict(data: dict) -> VHTable:
    outer = build_polygon(parse_word(data["outer"]["word"]),
                          [_parse_rational(v) for v in data["outer"]["lengths"]])
    holes = []
    for h in data.get("holes", []):
        poly = build_polygon(parse_word(h["word"]),
                             [_parse_rational(v) for v in h["lengths"]])
        anchor = (_parse_rational(h["anchor"][0]), _parse_rational(h["anchor"][1]))
        holes.append((poly, anchor))
    return build_table(outer, holes)


def _parse_rational(v) -> Fraction:
    # strings are authoritative; bare JSON numbers get decimal semantics so
    # that "0.1" means 1/10, not the binary double
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(repr(v))
    raise TypeError(f"cannot read rational from {v!r}")


def save_table(table: VHTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table_to_dict(table), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_table(path) -> VHTable:
    with open(path, "r", encoding="utf-8") as fh:
        return table_from_dict(json.load(fh))


def table_hash(table: VHTable) -> str:
    """Stable short hash of the exact table data."""
    blob = json.dumps(table_to_dict(table), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# stock tables
# ---------------------------------------------------------------------------

def unit_square() -> VHTable:
    return build_table(build_polygon("ENWS", [1, 1, 1, 1]))


def lshape() -> VHTable:
    """The 6-sided L with arm widths 1 and outer extent 2."""
    return build_table(build_polygon("ENWNWS", [2, 1, 1, 1, 1, 2]))
