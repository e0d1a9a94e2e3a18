"""Cone points, irreducible decomposition, tilted measures, step distribution.

A point u of a contour is a cone point when the whole path lies in the union
of the forward and backward 45-degree cones at u, i.e. |wy - uy| <= |wx - ux|
for every path vertex w.  For an animal the clusters must fit the cones too,
and additionally no cluster may interact with the thickened bond sets of
both sides of the cut; this last condition is exactly what makes the weight
factorization across the cut hold with no remainder.  Doubly-visited points
never qualify (their transit pairs force vertical neighbors on the path).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GuardError
from .polymer import (
    Animal,
    DecorationFunction,
    Path,
    Site,
    ZERO,
    animal_weight,
    cluster_touches,
    concat,
    dual_tilt,
    free_weight,
    iter_paths,
    nabla_bonds,
    path_is_admissible,
)

# ---------------------------------------------------------------------------
# cone points
# ---------------------------------------------------------------------------


def cone_point_indices(path: Path) -> list:
    """Indices i such that path[i] is a cone point of the contour."""
    arr = np.asarray(path)
    dx = np.abs(arr[:, 0][:, None] - arr[:, 0][None, :])
    dy = np.abs(arr[:, 1][:, None] - arr[:, 1][None, :])
    ok = (dy <= dx).all(axis=1)
    return [int(i) for i in np.nonzero(ok)[0]]


def cone_points_contour(path: Path) -> list:
    """Cone points of a bare contour, as sites ordered by x-coordinate."""
    pts = {path[i] for i in cone_point_indices(path)}
    return sorted(pts, key=lambda p: (p[0], p[1]))


def _cluster_bond_span(cluster, path: Path):
    """(first, last) index of path bonds whose thickened triple the cluster
    touches; None if it touches none."""
    cl = set(cluster)
    nb = nabla_bonds(path)  # 3 bonds per path bond, in path order
    first = last = None
    for k, (p, q) in enumerate(nb):
        if p in cl or q in cl:
            i = k // 3
            if first is None:
                first = i
            last = i
    return None if first is None else (first, last)


def cone_points(animal: Animal) -> list:
    """Animal cone points as sites ordered by x (subset of the contour's)."""
    path = animal.path
    arr = np.asarray(path)
    idxs = cone_point_indices(path)
    if animal.clusters:
        spans = []
        sites_arrays = []
        for c in animal.clusters:
            span = _cluster_bond_span(c, path)
            if span is None:
                raise ValueError("cluster does not touch the contour")
            spans.append(span)
            sites_arrays.append(np.asarray(sorted(c)))
        kept = []
        for i in idxs:
            u = arr[i]
            good = True
            for span, cs in zip(spans, sites_arrays):
                if not (np.abs(cs[:, 1] - u[1]) <= np.abs(cs[:, 0] - u[0])).all():
                    good = False
                    break
                lo, hi = span
                if lo < i <= hi:  # interacts with bonds on both sides of the cut
                    good = False
                    break
            if good:
                kept.append(i)
        idxs = kept
    pts = {path[i] for i in idxs}
    return sorted(pts, key=lambda p: (p[0], p[1]))


# ---------------------------------------------------------------------------
# irreducible decomposition
# ---------------------------------------------------------------------------


@dataclass
class ConeDecomposition:
    left: Animal | None
    middle: list
    right: Animal | None
    cone_points: list
    unsplittable: bool
    original: Animal

    def pieces(self):
        out = []
        if self.left is not None:
            out.append(self.left)
        out.extend(self.middle)
        if self.right is not None:
            out.append(self.right)
        return out


def decompose(animal: Animal) -> ConeDecomposition:
    """Cut an animal at its cone points into left/middle/right pieces
    (pieces translated to start at the origin); clusters are assigned to the
    unique piece whose thickened bond set they touch."""
    path = animal.path
    pts = cone_points(animal)
    # cuttable points: unique single-visit indices, endpoints included
    occur = {}
    for i, p in enumerate(path):
        occur.setdefault(p, []).append(i)
    cut_pts = [p for p in pts if len(occur[p]) == 1]
    if len(pts) < 2 or len(cut_pts) < 2:
        return ConeDecomposition(None, [animal], None, pts, True, animal)
    cut_idx = sorted(occur[p][0] for p in cut_pts)
    xs = [path[i][0] for i in cut_idx]
    assert xs == sorted(xs) and len(set(xs)) == len(xs), "cone points not x-ordered"

    bounds = sorted({0, len(path) - 1} | set(cut_idx))
    seg = list(zip(bounds[:-1], bounds[1:]))
    # assign clusters by the bond-index range they touch:
    # bond index k belongs to segment (a, b) iff a <= k < b
    piece_clusters: dict = {s: [] for s in seg}
    for c in animal.clusters:
        lo, hi = _cluster_bond_span(c, path)
        homes = [s for s in seg if s[0] <= lo and hi < s[1]]
        assert len(homes) == 1, "cluster spans pieces despite cone-point cut"
        piece_clusters[homes[0]].append(c)

    def make(a, b):
        base = path[a]
        sub = tuple((x - base[0], y - base[1]) for x, y in path[a:b + 1])
        cls = tuple(frozenset((x - base[0], y - base[1]) for x, y in c)
                    for c in piece_clusters[(a, b)])
        return Animal(sub, cls)

    pieces = [make(a, b) for a, b in seg]
    left = None
    right = None
    if cut_idx[0] != 0:
        left = pieces[0]
        pieces = pieces[1:]
    if cut_idx[-1] != len(path) - 1:
        right = pieces[-1]
        pieces = pieces[:-1]
    return ConeDecomposition(left, pieces, right,
                             [path[i] for i in cut_idx], False, animal)


def reconstruct(d: ConeDecomposition) -> Animal:
    parts = d.pieces()
    if not parts:
        raise ValueError("empty decomposition")
    start = d.original.path[0]
    out = parts[0].translate(start)
    for p in parts[1:]:
        out = concat(out, p)
    return out


# ---------------------------------------------------------------------------
# irreducible enumeration and the tilted step distribution
# ---------------------------------------------------------------------------


@dataclass
class IrreducibleTable:
    """Counts of irreducible contours by (length, displacement), Phi = 0."""

    max_len: int
    counts: np.ndarray       # [length, dx, dy + max_len]
    mode: str = "irreducible"

    def weights(self, beta: float, tilt=(0.0, 0.0)):
        """Dict displacement -> sum over lengths of count * e^{h.v - beta*l}."""
        out = {}
        ml = self.max_len
        for l in range(1, ml + 1):
            el = math.exp(-beta * l)
            nz = np.nonzero(self.counts[l])
            for dx, dyo in zip(*nz):
                v = (int(dx), int(dyo) - ml)
                w = self.counts[l, dx, dyo] * el * math.exp(
                    tilt[0] * v[0] + tilt[1] * v[1])
                out[v] = out.get(v, 0.0) + w
        return out

    def length_weights(self, beta: float, tilt=(0.0, 0.0)):
        """Per-length tilted mass (for mass-gap decay checks)."""
        ml = self.max_len
        out = np.zeros(ml + 1)
        for l in range(1, ml + 1):
            el = math.exp(-beta * l)
            nz = np.nonzero(self.counts[l])
            for dx, dyo in zip(*nz):
                v = (int(dx), int(dyo) - ml)
                out[l] += self.counts[l, dx, dyo] * el * math.exp(
                    tilt[0] * v[0] + tilt[1] * v[1])
        return out


_MODES = {
    "irreducible": kernels.MODE_IRREDUCIBLE,
    "left": kernels.MODE_LEFT_IRR,
    "right": kernels.MODE_RIGHT_IRR,
}
_IRR_CACHE: dict = {}


def irreducible_table(max_len: int, mode: str = "irreducible",
                      node_cap: int = 6_000_000_000) -> IrreducibleTable:
    if max_len > 16:
        raise GuardError("irreducible enumeration guarded at max_len <= 16")
    key = (max_len, mode)
    if key in _IRR_CACHE:
        return _IRR_CACHE[key]
    counts, nodes, ov = kernels.irreducible_enum(_MODES[mode], max_len, node_cap)
    if ov:
        raise GuardError("irreducible enumeration exceeded the node cap")
    t = IrreducibleTable(max_len, counts, mode)
    _IRR_CACHE[key] = t
    return t


def enumerate_irreducible(beta: float, phi: DecorationFunction = ZERO,
                          max_len: int = 12, mode: str = "irreducible",
                          as_list: bool = False):
    """Irreducible animals up to the length cutoff.

    Phi = 0 (the fast path) returns an IrreducibleTable of contour counts;
    ``as_list`` or a nonzero decoration uses the slow reference enumerator
    (guarded at tiny cutoffs) and returns [(Animal, free log-weight)].
    """
    if phi.kind == "zero" and not as_list:
        return irreducible_table(max_len, mode)
    if mode != "irreducible":
        raise GuardError("listing enumeration supports mode='irreducible' only")
    if max_len > 8:
        raise GuardError("listing enumeration guarded at max_len <= 8")
    out = []
    seen = set()
    for tx in range(1, max_len + 1):
        for ty in range(-tx, tx + 1):
            for p in iter_paths((tx, ty), max_len,
                                allowed=lambda s: abs(s[1]) <= s[0]):
                if p in seen:
                    continue
                seen.add(p)
                if _classify(p) == mode:
                    out.append((Animal(p), free_weight(p, phi, beta).log_weight))
    return out


def _classify(path: Path) -> str:
    idxs = cone_point_indices(path)
    pts = {path[i] for i in idxs}
    end = path[-1]
    start = path[0]
    maxx = max(p[0] for p in path)
    interior = pts - {start, end}
    end_cp = end in pts and end[0] == maxx
    start_cp = start in pts and all(p[0] >= start[0] for p in path)
    if interior:
        return "reducible"
    if start_cp and end_cp:
        return "irreducible"
    if end_cp:
        return "left"
    if start_cp:
        return "right"
    return "reducible"


@dataclass
class StepDistribution:
    """Finitely supported increment law of the effective half-space walk."""

    probs: dict
    beta: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def total_mass(self) -> float:
        return float(sum(self.probs.values()))

    @property
    def deficit(self) -> float:
        return 1.0 - self.total_mass

    def arrays(self, renormalize: bool = True):
        vs = sorted(self.probs)
        v = np.array(vs, dtype=np.int64)
        p = np.array([self.probs[t] for t in vs])
        if renormalize:
            p = p / p.sum()
        return v, p

    @property
    def mean(self):
        v, p = self.arrays()
        return tuple(p @ v)

    def variances(self):
        v, p = self.arrays()
        m = p @ v
        return tuple(p @ (v - m) ** 2)

    def y_marginal(self) -> dict:
        out: dict = {}
        v, p = self.arrays()
        for (dx, dy), pr in zip(v, p):
            out[int(dy)] = out.get(int(dy), 0.0) + float(pr)
        return out

    def support_in_forward_cone(self) -> bool:
        return all(dx >= 1 and abs(dy) <= dx for dx, dy in self.probs)

    @classmethod
    def uniform3(cls):
        """Steps (1,-1), (1,0), (1,1) with probability 1/3 each."""
        return cls({(1, -1): 1 / 3, (1, 0): 1 / 3, (1, 1): 1 / 3},
                   meta={"name": "uniform3"})

    def to_csv_rows(self):
        rows = [("vx", "vy", "mass")]
        for (dx, dy) in sorted(self.probs):
            rows.append((dx, dy, repr(self.probs[(dx, dy)])))
        return rows


def step_distribution(beta: float, phi: DecorationFunction = ZERO,
                      direction=(1, 0), max_len: int = 12, tilt=None,
                      mass_tol: float = 5e-3) -> StepDistribution:
    """Increment law P(X = v): tilted mass of irreducible animals with
    displacement v.  The tilt defaults to the dual vector of the direction
    (gradient of the surface tension); a total mass above 1 + mass_tol
    signals a tilt outside the Wulff shape and raises."""
    if tilt is None:
        tilt = dual_tilt(direction, beta, phi)
    if phi.kind != "zero":
        raise GuardError("step distribution requires Phi = 0 (animal-level "
                         "enumeration with decorations is not kernel-backed)")
    table = irreducible_table(max_len)
    probs = table.weights(beta, tilt)
    sd = StepDistribution(probs, beta,
                          meta={"cutoff": max_len, "tilt": tuple(tilt),
                                "direction": tuple(direction)})
    if sd.total_mass > 1.0 + mass_tol:
        raise ValueError(
            f"irreducible mass {sd.total_mass:.6f} exceeds 1: tilt is outside "
            "the Wulff shape")
    return sd


def mass_gap_profile(beta: float, max_len: int = 10, tilt=(0.0, 0.0)):
    """Tilted mass of boundary-irreducible animals (left + right + full) with
    length >= k, for k = 1..max_len; decays geometrically at large beta."""
    per_len = np.zeros(max_len + 1)
    for mode in ("irreducible", "left", "right"):
        per_len += irreducible_table(max_len, mode).length_weights(beta, tilt)
    tail = per_len[::-1].cumsum()[::-1]
    return tail[1:]


# ---------------------------------------------------------------------------
# hitting identity: walk DP vs direct animal-tuple sum
# ---------------------------------------------------------------------------


def _dp_hit(step: StepDistribution, u: Site, v: Site, hmin: int) -> float:
    """P_u(walk hits v before its height drops below hmin): column DP."""
    items = sorted(step.probs.items())
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def f(x: int, y: int) -> float:
        tot = 0.0
        for (dx, dy), p in items:
            nx_, ny_ = x + dx, y + dy
            if (nx_, ny_) == v:
                tot += p
            elif nx_ < v[0] and ny_ >= hmin:
                tot += p * f(nx_, ny_)
        return tot

    if u == v:
        return 0.0  # H_v >= 1 by convention: zero-step hits excluded
    return f(u[0], u[1])


def _tuple_sum(step: StepDistribution, u: Site, v: Site, hmin: int) -> float:
    """The same probability as a literal sum over tuples of irreducible-animal
    displacements with all partial sums (cone points) at height >= hmin.
    No memoization: each tuple contributes one product term."""
    items = sorted(step.probs.items())

    def rec(x: int, y: int) -> float:
        tot = 0.0
        for (dx, dy), p in items:
            nx_, ny_ = x + dx, y + dy
            if (nx_, ny_) == v:
                tot += p
            elif nx_ < v[0] and ny_ >= hmin:
                tot += p * rec(nx_, ny_)
        return tot

    if u == v:
        return 0.0
    return rec(u[0], u[1])


def hitting_identity_check(u: Site, v: Site, step: StepDistribution,
                           hmin: int = 1):
    """Returns (dp_value, tuple_value); they agree to float tolerance.

    Convention: the walk is killed once its height drops below ``hmin``
    (default: surviving heights are >= 1); hitting requires at least one step.
    """
    if v[0] - u[0] > 6:
        raise GuardError("tuple sum guarded at horizontal distance <= 6")
    return _dp_hit(step, u, v, hmin), _tuple_sum(step, u, v, hmin)
