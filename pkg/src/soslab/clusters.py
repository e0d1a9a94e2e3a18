"""Connected site clusters on Z^2 and their bond-connectivity size d(C).

``d_value(C)`` is the cardinality of the smallest *connected* set of Z^2
bonds containing every boundary bond of C (bonds joining C to its
complement).  Two bonds are adjacent when they share an endpoint.  The
minimum is found exactly: the boundary bonds are grouped into components
and the search adds the fewest extra bonds (from a local candidate pool)
that join them.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

Site = tuple[int, int]
Bond = tuple[Site, Site]

_NBRS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def neighbors(s: Site):
    return [(s[0] + d[0], s[1] + d[1]) for d in _NBRS]


def is_connected(sites) -> bool:
    sites = set(sites)
    if not sites:
        return False
    stack = [next(iter(sites))]
    seen = {stack[0]}
    while stack:
        s = stack.pop()
        for n in neighbors(s):
            if n in sites and n not in seen:
                seen.add(n)
                stack.append(n)
    return len(seen) == len(sites)


def _bond(a: Site, b: Site) -> Bond:
    return (a, b) if a <= b else (b, a)


def boundary_bonds(cluster) -> frozenset:
    cl = set(cluster)
    out = set()
    for s in cl:
        for n in neighbors(s):
            if n not in cl:
                out.add(_bond(s, n))
    return frozenset(out)


def _bonds_connected(bonds) -> bool:
    bonds = list(bonds)
    if not bonds:
        return True
    adj = {}
    for b in bonds:
        for e in b:
            adj.setdefault(e, []).append(b)
    seen = {bonds[0]}
    stack = [bonds[0]]
    while stack:
        b = stack.pop()
        for e in b:
            for nb in adj[e]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
    return len(seen) == len(bonds)


def _canonical(cluster) -> frozenset:
    xs = min(x for x, _ in cluster)
    ys = min(y for _, y in cluster)
    return frozenset((x - xs, y - ys) for x, y in cluster)


@lru_cache(maxsize=None)
def _d_value_canonical(cluster: frozenset) -> int:
    terms = boundary_bonds(cluster)
    if _bonds_connected(terms):
        return len(terms)
    # candidate extra bonds: both endpoints within L-inf distance 2 of C
    halo = set()
    for (x, y) in cluster:
        for dx in range(-2, 3):
            for dy in range(-2, 3):
                halo.add((x + dx, y + dy))
    cands = set()
    for s in halo:
        for n in neighbors(s):
            if n in halo:
                b = _bond(s, n)
                if b not in terms:
                    cands.add(b)
    cands = sorted(cands)
    for j in range(1, 9):
        for extra in combinations(cands, j):
            if _bonds_connected(terms | set(extra)):
                return len(terms) + j
    raise RuntimeError(f"d_value search exhausted for cluster {sorted(cluster)}")


def d_value(cluster) -> int:
    """Smallest connected bond set containing all boundary bonds of the cluster."""
    if not cluster:
        raise ValueError("empty cluster")
    return _d_value_canonical(_canonical(cluster))


def enumerate_clusters_touching(seeds, max_size: int, within=None):
    """All connected clusters of size <= max_size containing at least one seed,
    optionally restricted to the site set ``within``.  Deduplicated."""
    seeds = list(seeds)
    found = set()
    out = []

    def grow(cl: frozenset, frontier):
        if cl in found:
            return
        found.add(cl)
        out.append(cl)
        if len(cl) == max_size:
            return
        ext = set()
        for s in cl:
            for n in neighbors(s):
                if n not in cl and (within is None or n in within):
                    ext.add(n)
        for n in sorted(ext):
            grow(cl | {n}, None)

    for s in seeds:
        if within is None or s in within:
            grow(frozenset([s]), None)
    return out


def enumerate_clusters_in(region, max_size: int):
    """All connected clusters of size <= max_size inside a site set."""
    region = set(region)
    return enumerate_clusters_touching(sorted(region), max_size, within=region)
