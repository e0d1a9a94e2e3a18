"""Free and modified polymer weights, partition functions, surface tension.

Contours live on Z^2 after the dual-origin shift: a path is a tuple of
vertices starting at (0, 0), admissible under the northeast splitting rule.
Weights: q(gamma) = exp(-beta*|gamma| + sum_C Phi(C; gamma)) with the sum
over connected clusters meeting the path's Delta set (endpoints of the
lengthwise-thickened bond set nabla).

Decoration functions are pluggable.  The two built-ins are Phi = 0 and the
single-site exponential decoration (value e^{-chi*beta*(d+1)} on singleton
clusters), both of which the fast enumeration kernels understand; anything
else runs through the slow reference enumerator at small cutoffs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .clusters import d_value, enumerate_clusters_touching
from .errors import GuardError

Site = tuple[int, int]
Path = tuple[Site, ...]

_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))
MAX_LEN_GUARD = 24
NODE_CAP = 4_000_000_000
# smallest possible d(C) by cluster size (single site, domino, tromino, ...)
_MIN_D_BY_SIZE = {1: 4, 2: 7, 3: 9, 4: 11, 5: 13}


# ---------------------------------------------------------------------------
# paths and their local geometry
# ---------------------------------------------------------------------------


def path_bonds(path: Path):
    return [frozenset((path[i], path[i + 1])) for i in range(len(path) - 1)]


def path_is_admissible(path: Path) -> bool:
    """Distinct bonds; at every doubly-transited vertex both transit pairs
    are same-side ({N,W} / {S,E}, i.e. direction slots summing to 3)."""
    if len(path) < 2:
        return len(path) == 1
    bonds = path_bonds(path)
    if len(set(bonds)) != len(bonds):
        return False
    transits: dict = {}
    for i in range(1, len(path) - 1):
        v = path[i]
        d_in = _DIRS.index((path[i - 1][0] - v[0], path[i - 1][1] - v[1]))
        d_out = _DIRS.index((path[i + 1][0] - v[0], path[i + 1][1] - v[1]))
        transits.setdefault(v, []).append((d_in, d_out))
    for v, pairs in transits.items():
        if len(pairs) >= 2:
            if len(pairs) > 2:
                return False
            if any(a + b != 3 for a, b in pairs):
                return False
    return True


def nabla_bonds(path: Path):
    """Thickened bond set: each path bond contributes itself and its two
    lengthwise translates (with multiplicity)."""
    out = []
    for i in range(len(path) - 1):
        a, b = path[i], path[i + 1]
        e = (b[0] - a[0], b[1] - a[1])
        for t in (-1, 0, 1):
            p = (a[0] + t * e[0], a[1] + t * e[1])
            q = (p[0] + e[0], p[1] + e[1])
            out.append((p, q))
    return out


def delta_sites(path: Path) -> frozenset:
    """Endpoints of the nabla bonds (the path's interaction support)."""
    out = set()
    for p, q in nabla_bonds(path):
        out.add(p)
        out.add(q)
    return frozenset(out)


def nabla_multiplicity(cluster, path: Path) -> int:
    """Number of nabla bonds (with multiplicity) having an endpoint in the cluster."""
    cl = set(cluster)
    return sum(1 for p, q in nabla_bonds(path) if p in cl or q in cl)


def cluster_touches(cluster, path: Path) -> bool:
    return nabla_multiplicity(cluster, path) > 0


def random_admissible_path(rng, n_steps: int, max_tries: int = 200) -> Path:
    """Uniform-ish random splitting-rule path of exactly n_steps bonds."""
    for _ in range(max_tries):
        path = [(0, 0)]
        used = set()
        ok = True
        for _ in range(n_steps):
            v = path[-1]
            choices = []
            for d, (dx, dy) in enumerate(_DIRS):
                w = (v[0] + dx, v[1] + dy)
                b = frozenset((v, w))
                if b in used:
                    continue
                inc = sum(
                    1
                    for dd in _DIRS
                    if frozenset((v, (v[0] + dd[0], v[1] + dd[1]))) in used
                )
                prior = inc if len(path) == 1 else inc - 1
                if prior == 2:
                    d_in = _DIRS.index((path[-2][0] - v[0], path[-2][1] - v[1]))
                    if d_in + d != 3:
                        continue
                choices.append((d, w, b))
            if not choices:
                ok = False
                break
            _, w, b = choices[rng.integers(len(choices))]
            used.add(b)
            path.append(w)
        if ok:
            return tuple(path)
    raise RuntimeError("could not build a random admissible path")


def iter_paths(target: Site, max_len: int, allowed=None):
    """Reference enumerator: yields every admissible path (0,0) -> target with
    at most max_len bonds, vertices restricted by ``allowed`` if given.
    Slow by design; serves as the independent oracle for the fast kernel."""
    path = [(0, 0)]
    used = set()

    def rec():
        v = path[-1]
        if len(path) > 1 and v == target:
            yield tuple(path)
        rem = max_len - (len(path) - 1) - 1
        if rem < 0:
            return
        for d, (dx, dy) in enumerate(_DIRS):
            w = (v[0] + dx, v[1] + dy)
            if allowed is not None and not allowed(w):
                continue
            if abs(target[0] - w[0]) + abs(target[1] - w[1]) > rem:
                continue
            b = frozenset((v, w))
            if b in used:
                continue
            inc = sum(
                1
                for dd in _DIRS
                if frozenset((v, (v[0] + dd[0], v[1] + dd[1]))) in used
            )
            prior = inc if len(path) == 1 else inc - 1
            if prior == 2:
                d_in = _DIRS.index((path[-2][0] - v[0], path[-2][1] - v[1]))
                if d_in + d != 3:
                    continue
            used.add(b)
            path.append(w)
            yield from rec()
            path.pop()
            used.discard(b)

    yield from rec()


# ---------------------------------------------------------------------------
# decoration functions
# ---------------------------------------------------------------------------


@dataclass
class DecorationFunction:
    """Cluster weight Phi(C; gamma): local, translation covariant, decaying
    like exp(-chi*beta*(d(C)+1)).  ``kind`` tags the fast-kernel cases."""

    fn: object
    chi: float = 1.0
    d_support: int | None = None   # None: unbounded support
    kind: str = "custom"
    site_value: float = 0.0        # per-Delta-site value for kind == "site"
    cache_key: tuple = ()

    def __call__(self, cluster, path) -> float:
        return self.fn(cluster, path)

    @classmethod
    def zero(cls, chi: float = 1.0) -> "DecorationFunction":
        return cls(fn=lambda c, p: 0.0, chi=chi, d_support=0, kind="zero",
                   cache_key=("zero",))

    @classmethod
    def site_exponential(cls, beta: float, chi: float = 1.0) -> "DecorationFunction":
        """Phi(C) = e^{-chi*beta*(d+1)} for singleton clusters touching the
        path's Delta set (d = 4), zero otherwise.  Saturates the decay bound."""
        w1 = math.exp(-chi * beta * 5.0)

        def fn(cluster, path):
            if len(cluster) == 1 and next(iter(cluster)) in delta_sites(path):
                return w1
            return 0.0

        return cls(fn=fn, chi=chi, d_support=4, kind="site", site_value=w1,
                   cache_key=("site", round(w1, 15)))

    def validate_decay(self, cluster, path, beta: float) -> bool:
        v = self(cluster, path)
        return abs(v) <= math.exp(-self.chi * beta * (d_value(cluster) + 1)) + 1e-12


ZERO = DecorationFunction.zero()


def _cluster_size_cap(d_max: int) -> int:
    cap = 0
    for size, dmin in _MIN_D_BY_SIZE.items():
        if dmin <= d_max:
            cap = size
    return cap


def clusters_near(path: Path, d_max: int):
    """Connected clusters meeting the path's Delta set with d(C) <= d_max."""
    cap = _cluster_size_cap(d_max)
    if cap == 0:
        return []
    ds = delta_sites(path)
    out = [c for c in enumerate_clusters_touching(sorted(ds), cap)
           if d_value(c) <= d_max]
    return out


@dataclass
class WeightResult:
    log_weight: float
    cluster_sum: float
    tail_bound: float


def _tail_bound_generic(path: Path, phi: DecorationFunction, beta: float, d_max: int):
    if phi.d_support is not None and phi.d_support <= d_max:
        return 0.0
    # cluster-counting estimate: at most (6e)^m clusters with d = m at a site
    rate = phi.chi * beta - (1.0 + math.log(6.0))
    if rate <= 0:
        return math.inf
    first = math.exp(-(phi.chi * beta) * (d_max + 2) + (1.0 + math.log(6.0)) * (d_max + 1))
    return len(delta_sites(path)) * first / (1.0 - math.exp(-rate))


def free_weight(path: Path, phi: DecorationFunction, beta: float,
                d_max: int = 7, tail_tol: float | None = None) -> WeightResult:
    """log q(gamma) = -beta|gamma| + sum of Phi over clusters with d <= d_max."""
    s = sum(phi(c, path) for c in clusters_near(path, d_max))
    tail = _tail_bound_generic(path, phi, beta, d_max)
    if tail_tol is not None and not (tail <= tail_tol):
        raise GuardError(f"decoration tail bound {tail} exceeds tolerance {tail_tol}")
    return WeightResult(-beta * (len(path) - 1) + s, s, tail)


def modified_weight(path: Path, domain, phi: DecorationFunction, beta: float,
                    d_max: int = 7, rule=None) -> WeightResult:
    """Modified polymer weight: clusters outside the domain reweighted by
    ``rule`` (default: dropped, the indicator 1{C in D})."""
    if rule is None:
        rule = lambda c, p, v: v if all(domain_contains(domain, s) for s in c) else 0.0
    s = sum(rule(c, path, phi(c, path)) for c in clusters_near(path, d_max))
    tail = _tail_bound_generic(path, phi, beta, d_max)
    return WeightResult(-beta * (len(path) - 1) + s, s, tail)


def positive_transform(phi: DecorationFunction, beta: float, d_max: int = 7):
    """Non-negative decoration Phi'(C) = |C ^ nabla| e^{-chi b (d+1)} + Phi(C)
    and the matching inverse-temperature shift beta + 3*c_trunc(beta).

    With cluster sums truncated at the same d_max on both sides, the pair
    (Phi', beta + 3 c_trunc) reproduces free weights exactly.
    """
    chi = phi.chi
    c_trunc = 0.0
    bond = ((0, 0), (1, 0))
    seen = set()
    cap = _cluster_size_cap(d_max)
    for c in enumerate_clusters_touching(bond, max(cap, 1)):
        if c in seen:
            continue
        seen.add(c)
        d = d_value(c)
        if d <= d_max:
            c_trunc += math.exp(-chi * beta * (d + 1))

    def fn(cluster, path):
        m = nabla_multiplicity(cluster, path)
        if m == 0:
            return phi(cluster, path)
        return m * math.exp(-chi * beta * (d_value(cluster) + 1)) + phi(cluster, path)

    phi_p = DecorationFunction(fn=fn, chi=chi, d_support=phi.d_support,
                               kind="custom", cache_key=())
    return phi_p, beta + 3.0 * c_trunc, c_trunc


# ---------------------------------------------------------------------------
# animals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Animal:
    """A contour plus a finite collection of clusters touching its nabla set."""

    path: Path
    clusters: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "clusters",
                           tuple(sorted((frozenset(c) for c in self.clusters),
                                        key=lambda c: sorted(c))))

    def displacement(self) -> Site:
        return (self.path[-1][0] - self.path[0][0],
                self.path[-1][1] - self.path[0][1])

    def length(self) -> int:
        return len(self.path) - 1

    def translate(self, v: Site) -> "Animal":
        return Animal(tuple((x + v[0], y + v[1]) for x, y in self.path),
                      tuple(frozenset((x + v[0], y + v[1]) for x, y in c)
                            for c in self.clusters))

    def validate(self) -> bool:
        return path_is_admissible(self.path) and all(
            cluster_touches(c, self.path) for c in self.clusters
        )


def concat(a: Animal, b: Animal) -> Animal:
    """Concatenation: b is translated so its start continues a's end."""
    dx = a.path[-1][0] - b.path[0][0]
    dy = a.path[-1][1] - b.path[0][1]
    bt = b.translate((dx, dy))
    return Animal(a.path + bt.path[1:], a.clusters + bt.clusters)


def animal_weight(animal: Animal, phi_prime: DecorationFunction, beta: float) -> float:
    """log of q(Gamma) = e^{-beta|gamma|} * prod_C (e^{Phi'(C)} - 1)."""
    logw = -beta * animal.length()
    for c in animal.clusters:
        if not cluster_touches(c, animal.path):
            raise ValueError("cluster does not touch the contour's nabla set")
        val = phi_prime(c, animal.path)
        psi = math.expm1(val)
        if psi <= 0.0:
            return -math.inf
        logw += math.log(psi)
    return logw


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


def domain_contains(domain, s: Site) -> bool:
    if domain is None:
        return True
    if domain == "H":
        return s[1] >= 0
    if isinstance(domain, tuple) and domain[0] == "Q":
        n = domain[1]
        return 0 <= s[0] <= n and 0 <= s[1] <= n
    raise ValueError(f"unknown domain {domain!r}")


def _domain_box(domain, max_len: int):
    big = 10 * max_len + 10
    if domain is None:
        return (-big, big, -big, big)
    if domain == "H":
        return (-big, big, 0, big)
    if isinstance(domain, tuple) and domain[0] == "Q":
        n = domain[1]
        return (0, n, 0, n)
    raise ValueError(f"unknown domain {domain!r}")


# ---------------------------------------------------------------------------
# partition functions
# ---------------------------------------------------------------------------


@dataclass
class PartitionResult:
    log_g: float
    by_length: np.ndarray     # e^{-beta l} * (decorated shell sums)
    tail_estimate: float
    nodes: int
    max_len: int

    @property
    def last_shell_fraction(self) -> float:
        tot = self.by_length.sum()
        return float(self.by_length[-2:].sum() / tot) if tot > 0 else math.inf


def partition_function(x: Site, beta: float, phi: DecorationFunction = ZERO,
                       domain=None, modified: bool = False,
                       max_len: int | None = None,
                       node_cap: int = NODE_CAP) -> PartitionResult:
    """Exact sum of polymer weights over admissible paths (0,0) -> x of
    length <= max_len inside the domain; ``modified`` applies the indicator
    modification to the decorations (clusters outside the domain dropped)."""
    if x == (0, 0):
        raise ValueError("target must differ from the origin")
    if max_len is None:
        max_len = abs(x[0]) + abs(x[1]) + 8
    if max_len > MAX_LEN_GUARD:
        raise GuardError(f"max_len {max_len} exceeds enumeration guard {MAX_LEN_GUARD}")
    if modified and domain is None:
        raise ValueError("modified weights need a domain")

    if phi.kind in ("zero", "site"):
        w1 = phi.site_value if phi.kind == "site" else 0.0
        cxlo, cxhi, cylo, cyhi = _domain_box(domain, max_len)
        fsums, msums, nodes, ov = kernels.polymer_path_sums(
            x[0], x[1], max_len, cxlo, cxhi, cylo, cyhi,
            cxlo, cxhi, cylo, cyhi, w1, node_cap)
        if ov:
            raise GuardError("path enumeration exceeded the node cap")
        sums = msums if modified else fsums
    else:
        if max_len > 14:
            raise GuardError("custom decorations limited to max_len <= 14")
        sums = np.zeros(max_len + 1)
        nodes = 0
        allowed = (lambda s: domain_contains(domain, s)) if domain is not None else None
        for p in iter_paths(x, max_len, allowed):
            nodes += 1
            if modified:
                wr = modified_weight(p, domain, phi, beta)
            else:
                wr = free_weight(p, phi, beta)
            sums[len(p) - 1] += math.exp(wr.log_weight + beta * (len(p) - 1))

    lens = np.arange(max_len + 1)
    shells = sums * np.exp(-beta * lens)
    tot = shells.sum()
    if tot <= 0:
        raise GuardError(f"no admissible paths to {x} within max_len {max_len}")
    # geometric extrapolation of the length tail from the last two occupied shells
    occ = np.nonzero(shells)[0]
    tail = math.inf
    if len(occ) >= 2:
        r = shells[occ[-1]] / shells[occ[-2]]
        tail = float(shells[occ[-1]] * r / (1 - r)) if r < 1 else math.inf
    return PartitionResult(math.log(tot), shells, tail, int(nodes), max_len)


# ---------------------------------------------------------------------------
# surface tension, Wulff shape, dual tilt
# ---------------------------------------------------------------------------


@dataclass
class TensionEntry:
    direction: tuple          # integer vector (coprime)
    unit: tuple               # direction / euclidean norm
    values: dict              # N -> -log G(N*v) / (N*|v|)
    extrapolated: float


@dataclass
class SurfaceTensionTable:
    beta: float
    entries: list
    meta: dict = field(default_factory=dict)

    def value(self, direction) -> float:
        for e in self.entries:
            if e.direction == tuple(direction):
                return e.extrapolated
        raise KeyError(direction)

    def to_rows(self):
        rows = []
        for e in self.entries:
            for n, v in sorted(e.values.items()):
                rows.append((e.direction[0], e.direction[1], n, v, e.extrapolated))
        return rows


_TENSION_CACHE: dict = {}


def default_n_list(v, slack: int = 10, k: int = 4):
    """Multipliers N for the tension fit: prefer points that leave at least
    12 spare bonds inside the length guard (length-tail control), keep a wide
    spread in N (the prefactor fit needs leverage), at most k points."""
    l1 = abs(v[0]) + abs(v[1])
    ns = [n for n in range(1, MAX_LEN_GUARD) if n * l1 + 6 <= MAX_LEN_GUARD]
    if not ns:
        raise GuardError(f"direction {v} does not fit the enumeration guard")
    prefer = [n for n in ns if n * l1 + 12 <= MAX_LEN_GUARD]
    if len(prefer) >= 3:
        ns = prefer
    big = [n for n in ns if n * l1 >= 5] or ns[-1:]
    if len(big) > k:
        top = big[-1]
        big = sorted({top - 2 * i for i in range(k) if top - 2 * i >= big[0]})
    return tuple(big)


def hom_tau(v: Site, beta: float, phi: DecorationFunction = ZERO,
            n_list=None, slack: int = 12) -> TensionEntry:
    """Degree-1 homogeneous surface tension of an integer direction vector.

    Uses -log G(N v) at several N with the prefactor-aware model
    -log G = tau*r + (1/2) ln r + c + c2/r  (r = N |v|_2), least squares;
    Ornstein-Zernike behavior G ~ A e^{-tau r}/sqrt(r) motivates the ln term.
    The truncated length tail of each G is corrected by its geometric
    estimate before fitting.
    """
    if n_list is None:
        n_list = default_n_list(v, slack)
    key = ("tau", tuple(v), beta, phi.cache_key, tuple(n_list), slack)
    if phi.cache_key and key in _TENSION_CACHE:
        return _TENSION_CACHE[key]
    norm = math.hypot(v[0], v[1])
    vals = {}
    logs = {}
    for n in n_list:
        target = (n * v[0], n * v[1])
        l1 = abs(target[0]) + abs(target[1])
        slack_eff = 14 if l1 <= 8 else max(slack, 12)
        ml = min(l1 + slack_eff, MAX_LEN_GUARD)
        res = partition_function(target, beta, phi, max_len=ml)
        g = math.fsum(res.by_length)
        if math.isfinite(res.tail_estimate):
            g += res.tail_estimate
        logs[n] = math.log(g)
        vals[n] = -logs[n] / (n * norm)
    ns = sorted(n_list)
    rs = np.array([n * norm for n in ns])
    b = np.array([-logs[n] - 0.5 * math.log(n * norm) for n in ns])
    if len(ns) >= 3:
        A = np.stack([rs, np.ones_like(rs), 1.0 / rs], axis=1)
    elif len(ns) == 2:
        A = np.stack([rs, np.ones_like(rs)], axis=1)
    else:
        A = rs[:, None]
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    extrap = float(sol[0])
    entry = TensionEntry(tuple(v), (v[0] / norm, v[1] / norm), vals, extrap)
    if phi.cache_key:
        _TENSION_CACHE[key] = entry
    return entry


def surface_tension(direction, beta: float, phi: DecorationFunction = ZERO,
                    n_list=None, slack: int = 10) -> TensionEntry:
    return hom_tau(tuple(direction), beta, phi, n_list, slack)


def directed_transfer_tension(beta: float, hcap: int = 40) -> float:
    """Independent oracle for tau(e1): directed paths (one column crossing per
    step), i.e. beta minus the log of the top eigenvalue of the vertical-run
    kernel K[a,b] = exp(-beta |a-b|)."""
    idx = np.arange(-hcap, hcap + 1)
    K = np.exp(-beta * np.abs(idx[:, None] - idx[None, :]))
    lam = np.linalg.eigvalsh(K).max()
    return beta - math.log(lam)


def dual_tilt(direction, beta: float, phi: DecorationFunction = ZERO,
              dt_den: int = 4, n_list=None, slack: int = 10):
    """Tilt h_y = grad tau at direction y = (1, s): using homogeneity,
    h = (g(s) - s*g'(s), g'(s)) with g(t) = hom_tau((1, t)) and g' from a
    central finite difference with step 1/dt_den."""
    p, q = direction
    if p <= 0:
        raise ValueError("direction must point into the right half-plane")
    nkey = None if n_list is None else tuple(n_list)
    key = ("tilt", (p, q), beta, phi.cache_key, dt_den, nkey, slack)
    if phi.cache_key and key in _TENSION_CACHE:
        return _TENSION_CACHE[key]
    s = q / p
    g0 = hom_tau((p, q), beta, phi, n_list, slack).extrapolated / p

    def g(num, den):
        # g(num/den) = hom_tau((den, num)) / den
        e = hom_tau((den, num), beta, phi, n_list, slack)
        return e.extrapolated / den

    up = g(q * dt_den + p, p * dt_den)
    dn = g(q * dt_den - p, p * dt_den)
    gp = (up - dn) / (2.0 / dt_den)
    h = (g0 - s * gp, gp)
    if phi.cache_key:
        _TENSION_CACHE[key] = h
    return h


@dataclass
class WulffShape:
    beta: float
    boundary: list            # (direction, h vector, tau value)

    def contains(self, h, directions, beta, phi=ZERO, tol=1e-6, n_list=None) -> bool:
        for z in directions:
            tz = hom_tau(tuple(z), beta, phi, n_list).extrapolated
            if h[0] * z[0] + h[1] * z[1] > tz + tol:
                return False
        return True


def wulff_membership(h, beta: float, phi: DecorationFunction = ZERO,
                     directions=((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (2, -1)),
                     n_list=None, slack: int = 10):
    """Check h . z <= tau(z) over a direction grid; returns the worst margin
    (positive = inside)."""
    worst = math.inf
    for z in directions:
        tz = hom_tau(tuple(z), beta, phi, n_list, slack).extrapolated
        worst = min(worst, tz - (h[0] * z[0] + h[1] * z[1]))
    return worst
