"""Level-line extraction from height fields via the northeast splitting rule.

A height-h level line puts a dual bond between every adjacent pair x~y with
height(x) < h <= height(y) (pairs with at least one interior site).  The
resulting bond set decomposes into edge-disjoint curves: at a dual vertex
where four bonds meet, the northeast rule pairs the north bond with the west
bond and the south bond with the east bond (the same-side-of-the-slope-1
pairs), which makes the traversal deterministic.

Dual points carry doubled integer coordinates throughout (o* = (1,1)).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import AmbiguityError
from .gibbs import HeightField
from .lattice import DualBond, DualPoint, translate_dual_point

# dual-vertex step table in doubled coordinates: 0=E,1=N,2=W,3=S
_STEPS = ((2, 0), (0, 2), (-2, 0), (0, -2))


@dataclass
class Contour:
    """Ordered dual-bond path; bonds as (vertex, vertex) in doubled coords."""

    vertices: list          # ordered dual points, len = bonds + 1
    closed: bool

    @property
    def open_flag(self) -> bool:
        return not self.closed

    def __len__(self) -> int:
        return len(self.vertices) - 1

    @property
    def bonds(self) -> list:
        return [(self.vertices[i], self.vertices[i + 1]) for i in range(len(self))]

    def translate(self, v) -> "Contour":
        return Contour([translate_dual_point(p, v) for p in self.vertices], self.closed)

    def serialize(self) -> str:
        """One line per bond: 'x1 y1 x2 y2' in doubled-integer dual coordinates."""
        return "\n".join(
            f"{a[0]} {a[1]} {b[0]} {b[1]}" for a, b in self.bonds
        )

    @classmethod
    def deserialize(cls, text: str) -> "Contour":
        verts = []
        for line in text.strip().splitlines():
            x1, y1, x2, y2 = map(int, line.split())
            if not verts:
                verts.append((x1, y1))
            verts.append((x2, y2))
        closed = len(verts) > 1 and verts[0] == verts[-1]
        return cls(verts, closed)


@dataclass
class DisplacementProfile:
    rho_min: dict            # column -> lowest visited primal level
    rho_max: dict

    @property
    def columns(self):
        return sorted(self.rho_min)

    def min_over(self, columns):
        vals = [self.rho_min[x] for x in columns if x in self.rho_min]
        if not vals:
            raise ValueError("contour does not visit the requested columns")
        return min(vals)


def separating_bonds(f: HeightField, h: int) -> set:
    """Dual bonds between adjacent pairs with height < h on one side and
    >= h on the other (pairs with at least one interior site)."""
    if f.floor and h < 1:
        raise ValueError("level must be >= 1 for a floored field")
    g = f.grid
    ox, oy = f.box.origin
    bonds = set()
    ny, nx = f.box.height, f.box.width
    # horizontal primal pairs -> vertical dual bonds
    for j in range(1, ny + 1):
        for i in range(0, nx + 1):
            a, b = g[j, i], g[j, i + 1]
            if (a < h) != (b < h):
                x = ox + i - 1  # primal x of the left site
                y = oy + j - 1
                bonds.add(((2 * x + 1, 2 * y - 1), (2 * x + 1, 2 * y + 1)))
    # vertical primal pairs -> horizontal dual bonds
    for j in range(0, ny + 1):
        for i in range(1, nx + 1):
            a, b = g[j, i], g[j + 1, i]
            if (a < h) != (b < h):
                x = ox + i - 1
                y = oy + j - 1
                bonds.add(((2 * x - 1, 2 * y + 1), (2 * x + 1, 2 * y + 1)))
    return bonds


def _trace(bonds: set) -> list:
    """Decompose a dual-bond set into contours under the NE pairing."""
    incident: dict = {}
    for b in bonds:
        for p in b:
            incident.setdefault(p, set()).add(b)
    remaining = set(bonds)

    def step_dir(frm: DualPoint, to: DualPoint) -> int:
        d = (to[0] - frm[0], to[1] - frm[1])
        return _STEPS.index(d)

    def other_end(b: DualBond, at: DualPoint) -> DualPoint:
        return b[0] if b[1] == at else b[1]

    def next_bond(at: DualPoint, d_in: int):
        """Continuation after arriving at ``at`` from direction slot d_in."""
        alive = [b for b in incident[at] if b in remaining]
        if not alive:
            return None
        if len(alive) == 1:
            return alive[0]
        # intact NE pair or fresh degree-4 vertex: exit slot pairs to 3 - d_in
        want = 3 - d_in
        for b in alive:
            if step_dir(at, other_end(b, at)) == want:
                return b
        raise AssertionError("NE pairing failed at a multiply-used dual vertex")

    def first_bond(at: DualPoint):
        alive = sorted(b for b in incident[at] if b in remaining)
        if len(alive) % 2 == 1:
            # start along the direction whose NE partner is absent
            dirs = {step_dir(at, other_end(b, at)): b for b in alive}
            unpaired = [d for d in dirs if (3 - d) not in dirs]
            if unpaired:
                return dirs[min(unpaired)]
        return alive[0] if alive else None

    def walk(start: DualPoint):
        b = first_bond(start)
        if b is None:
            return None
        verts = [start]
        at = start
        while True:
            remaining.discard(b)
            nxt = other_end(b, at)
            verts.append(nxt)
            d_in = step_dir(nxt, at)
            at = nxt
            if at == start and not any(bb in remaining for bb in incident[at]):
                return Contour(verts, closed=True)
            b = next_bond(at, d_in)
            if b is None:
                closed = verts[0] == verts[-1]
                return Contour(verts, closed=closed)

    out = []
    # open contours first: odd-degree endpoints, deterministically ordered
    deg = {p: len(bs) for p, bs in incident.items()}
    for p in sorted(p for p, d in deg.items() if d % 2 == 1):
        while any(b in remaining for b in incident[p]):
            c = walk(p)
            if c is not None:
                out.append(c)
    # closed loops: start at the lexicographically smallest remaining vertex,
    # which can carry at most two curve bonds (none go south or west from it)
    while remaining:
        start = min(min(b) for b in remaining)
        c = walk(start)
        if c is not None:
            out.append(c)
    return out


def extract_level_lines(f: HeightField, h: int) -> list:
    """All height-h level-line contours of the field (loops and open paths)."""
    return _trace(separating_bonds(f, h))


def open_one_contour(f: HeightField, h: int | None = None) -> Contour:
    """The unique open contour induced by a 0,1,1,1 or legs boundary.

    Starts from its left endpoint.  Raises AmbiguityError when extraction
    does not yield exactly one open contour at the level.
    """
    if h is None:
        if f.bc.kind == "dobrushin_0111":
            h = 1
        elif f.bc.kind == "legs":
            h = f.bc.h_high
        else:
            raise AmbiguityError(f"boundary kind {f.bc.kind!r} fixes no open level")
    contours = extract_level_lines(f, h)
    open_ones = [c for c in contours if not c.closed]
    if len(open_ones) != 1:
        raise AmbiguityError(f"expected 1 open contour, found {len(open_ones)}")
    c = open_ones[0]
    if c.vertices[0][0] > c.vertices[-1][0]:
        c = Contour(list(reversed(c.vertices)), c.closed)
    return c


def displacement_profile(c: Contour) -> DisplacementProfile:
    """Per-column min/max vertical displacement in primal lattice units.

    A dual vertex (a + 1/2, b + 1/2) contributes displacement b to column a.
    """
    rho_min: dict = {}
    rho_max: dict = {}
    for (dx, dy) in c.vertices:
        col = (dx - 1) // 2
        lev = (dy - 1) // 2
        if col not in rho_min or lev < rho_min[col]:
            rho_min[col] = lev
        if col not in rho_max or lev > rho_max[col]:
            rho_max[col] = lev
    if not rho_min:
        raise ValueError("empty contour")
    return DisplacementProfile(rho_min, rho_max)


def enclosed_sites(c: Contour) -> set:
    """Primal sites enclosed by a closed contour (even-odd rule, exact)."""
    if not c.closed:
        raise ValueError("open contour encloses no region")
    vbonds = {}
    for a, b in c.bonds:
        if a[0] == b[0]:  # vertical dual bond at primal column boundary
            y = min(a[1], b[1]) + 1        # doubled coord of the crossed row
            vbonds.setdefault(y, set()).add(a[0])
    out = set()
    for y2, xs in vbonds.items():
        y = (y2 - (y2 % 2)) // 2  # y2 is even: primal row y2/2
        for x2 in sorted(xs):
            pass
        xs_sorted = sorted(xs)
        for i in range(0, len(xs_sorted) - 1, 2):
            left = (xs_sorted[i] - 1) // 2 + 1
            right = (xs_sorted[i + 1] - 1) // 2
            for x in range(left, right + 1):
                out.add((x, y2 // 2))
    return out


def area_below(f: HeightField, c: Contour) -> int:
    """Number of interior sites below an open contour: flood fill from the
    bottom boundary row, moving only across primal edges not cut by the
    contour."""
    cut = set()
    for a, b in c.bonds:
        if a[0] == b[0]:  # vertical dual bond cuts a horizontal primal pair
            x = (a[0] - 1) // 2
            y = (min(a[1], b[1]) + 1) // 2
            cut.add(frozenset((( x, y), (x + 1, y))))
        else:             # horizontal dual bond cuts a vertical primal pair
            x = (min(a[0], b[0]) + 1) // 2
            y = (a[1] - 1) // 2
            cut.add(frozenset(((x, y), (x, y + 1))))
    ox, oy = f.box.origin
    seeds = [(ox + i, oy - 1) for i in range(f.box.width)]
    seen = set(seeds)
    stack = list(seeds)
    reached = set()
    while stack:
        s = stack.pop()
        for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (s[0] + d[0], s[1] + d[1])
            if n in seen or not f.box.contains(n):
                continue
            if frozenset((s, n)) in cut:
                continue
            seen.add(n)
            reached.add(n)
            stack.append(n)
    return len(reached)
