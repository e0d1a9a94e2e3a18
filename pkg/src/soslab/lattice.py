"""Z^2 and dual-lattice geometry: boxes, cones, translations.

Conventions used throughout the package:

- primal sites are ``(x, y)`` tuples of Python ints;
- dual-lattice points are stored in *doubled* integer coordinates, so the
  dual origin ``o* = (1/2, 1/2)`` is stored as ``(1, 1)``.  This keeps all
  splitting-rule geometry exact;
- cone apertures are exact rationals ``(num, den)`` so that membership tests
  never hit float boundary artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

Site = tuple[int, int]
DualPoint = tuple[int, int]  # doubled coordinates, both odd
DualBond = tuple[DualPoint, DualPoint]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box of primal sites: origin + width x height."""

    width: int
    height: int
    origin: Site = (1, 1)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("box must have positive width and height")

    def sites(self):
        ox, oy = self.origin
        return [(ox + i, oy + j) for j in range(self.height) for i in range(self.width)]

    def contains(self, p: Site) -> bool:
        ox, oy = self.origin
        return ox <= p[0] < ox + self.width and oy <= p[1] < oy + self.height

    def boundary_sites(self):
        """Exterior sites 4-adjacent to the box, bottom/top rows then sides."""
        ox, oy = self.origin
        out = []
        for i in range(self.width):
            out.append((ox + i, oy - 1))
            out.append((ox + i, oy + self.height))
        for j in range(self.height):
            out.append((ox - 1, oy + j))
            out.append((ox + self.width, oy + j))
        return out


@dataclass(frozen=True)
class Cone:
    """Forward or backward cone with rational aperture delta in (0, 1]."""

    kind: str = "forward"  # "forward" | "backward"
    delta: Fraction = Fraction(1)

    def __post_init__(self):
        if self.kind not in ("forward", "backward"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if not (0 < self.delta <= 1):
            raise ValueError("aperture must lie in (0, 1]")


FORWARD_CONE = Cone("forward")
BACKWARD_CONE = Cone("backward")


def in_cone(apex: Site, p: Site, cone: Cone = FORWARD_CONE) -> bool:
    """Whether ``p - apex`` lies in the cone ``{(x, y): |y| <= delta * x}``
    (forward) or its negation (backward).  Exact integer arithmetic."""
    dx = p[0] - apex[0]
    dy = p[1] - apex[1]
    if cone.kind == "backward":
        dx, dy = -dx, -dy
    # |dy| <= delta*dx  <=>  |dy|*den <= num*dx
    return abs(dy) * cone.delta.denominator <= cone.delta.numerator * dx


def translate_site(p: Site, v: Site) -> Site:
    return (p[0] + v[0], p[1] + v[1])


def translate_dual_point(p: DualPoint, v: Site) -> DualPoint:
    # v is a primal vector; dual points carry doubled coordinates
    return (p[0] + 2 * v[0], p[1] + 2 * v[1])


def translate_bond(b: DualBond, v: Site) -> DualBond:
    return (translate_dual_point(b[0], v), translate_dual_point(b[1], v))


def translate(obj, v: Site):
    """Translate a site, dual bond, contour, or list thereof by primal vector v."""
    if hasattr(obj, "translate"):
        return obj.translate(v)
    if isinstance(obj, list):
        return [translate(o, v) for o in obj]
    if isinstance(obj, tuple) and len(obj) == 2:
        if isinstance(obj[0], tuple):
            return translate_bond(obj, v)
        return translate_site(obj, v)
    raise TypeError(f"cannot translate object of type {type(obj)!r}")


def dual_origin_map(p: DualPoint) -> Site:
    """Map a dual point to Z^2 by subtracting (1/2, 1/2); o* goes to 0."""
    if p[0] % 2 == 0 or p[1] % 2 == 0:
        raise ValueError(f"{p} is not a dual point in doubled coordinates")
    return ((p[0] - 1) // 2, (p[1] - 1) // 2)


def dual_origin_map_inv(s: Site) -> DualPoint:
    return (2 * s[0] + 1, 2 * s[1] + 1)


def bond_is_valid(b: DualBond) -> bool:
    (ax, ay), (bx, by) = b
    if ax % 2 == 0 or ay % 2 == 0 or bx % 2 == 0 or by % 2 == 0:
        return False
    return abs(ax - bx) + abs(ay - by) == 2


def bond_separating(x: Site, y: Site) -> DualBond:
    """Dual bond separating two 4-adjacent primal sites, endpoint order fixed
    so that the bond is reproducible: lexicographically smaller first."""
    dx, dy = y[0] - x[0], y[1] - x[1]
    if abs(dx) + abs(dy) != 1:
        raise ValueError("sites are not adjacent")
    if dx < 0 or dy < 0:
        x, y = y, x
        dx, dy = -dx, -dy
    cx, cy = 2 * x[0], 2 * x[1]  # doubled coords of site x
    if dx == 1:  # vertical dual bond at x + 1/2
        a = (cx + 1, cy - 1)
        b = (cx + 1, cy + 1)
    else:  # horizontal dual bond at y + 1/2
        a = (cx - 1, cy + 1)
        b = (cx + 1, cy + 1)
    return (a, b)
