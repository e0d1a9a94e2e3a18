"""SOS Gibbs measures on finite boxes: heat-bath MCMC and exact enumeration.

The height field carries its box, inverse temperature, floor flag, and
boundary condition.  The single-site heat-bath update draws from the exact
conditional (piecewise geometric, see ``kernels``); ``run_chain`` applies
raster-order sweeps and is fully deterministic given the RNG seed.

``exact_enumerate`` is the small-box oracle: brute force when the truncated
state space is tiny, otherwise an exact column-transfer dynamic program.
Both are exact for the truncated height range and are cross-checked in the
test suite.  ``cluster_weight_fU`` computes boundary-context cluster weights
by Moebius inversion over sub-regions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .clusters import d_value, is_connected
from .errors import GuardError
from .lattice import Box, Site

BRUTE_STATE_GUARD = 400_000
DP_COLUMN_GUARD = 40_000


def default_hmax(beta: float) -> int:
    """Truncation height: discarded tail mass below ~e^-40."""
    return math.ceil(40.0 / (4.0 * beta)) + 3


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str
    value: int = 0
    h_high: int = 0
    h_low: int = 0
    x_left: int = 0
    x_right: int = 0
    table: tuple = ()

    @classmethod
    def constant(cls, j: int):
        return cls("constant", value=j)

    @classmethod
    def dobrushin_0111(cls):
        """0 on the bottom boundary row, 1 on the other three sides."""
        return cls("dobrushin_0111")

    @classmethod
    def legs(cls, h_high: int, h_low: int, x_left: int, x_right: int):
        """h_low on the bottom-row segment [x_left, x_right], h_high elsewhere."""
        if h_low != h_high - 1:
            raise ValueError("legs boundary requires h_low = h_high - 1")
        return cls("legs", h_high=h_high, h_low=h_low, x_left=x_left, x_right=x_right)

    @classmethod
    def explicit(cls, mapping: dict):
        return cls("explicit", table=tuple(sorted(mapping.items())))

    def height_at(self, site: Site, box: Box) -> int:
        ox, oy = box.origin
        if self.kind == "constant":
            return self.value
        if self.kind == "dobrushin_0111":
            return 0 if site[1] < oy else 1
        if self.kind == "legs":
            if site[1] < oy and self.x_left <= site[0] <= self.x_right:
                return self.h_low
            return self.h_high
        if self.kind == "explicit":
            return dict(self.table)[site]
        raise ValueError(f"unknown boundary kind {self.kind!r}")


class HeightField:
    """Integer heights on a box with a boundary ring; optionally floored at 0."""

    def __init__(self, box: Box, beta: float, floor: bool, bc: BoundaryCondition,
                 heights: np.ndarray | None = None):
        if beta <= 0:
            raise ValueError("beta must be positive")
        if bc.kind == "legs":
            ox, oy = box.origin
            if not (ox <= bc.x_left <= bc.x_right <= ox + box.width - 1):
                raise ValueError("legs segment must lie inside the bottom row")
            if floor and bc.h_low < 0:
                raise ValueError("legs below the floor")
        self.box = box
        self.beta = float(beta)
        self.floor = bool(floor)
        self.bc = bc
        ny, nx = box.height, box.width
        self.grid = np.zeros((ny + 2, nx + 2), dtype=np.int64)
        self._fill_ring()
        if heights is None:
            start = max(0, min(self.grid[0, 1], self.grid[-1, 1])) if floor else 0
            self.grid[1:-1, 1:-1] = start
        else:
            heights = np.asarray(heights, dtype=np.int64)
            if heights.shape != (ny, nx):
                raise ValueError("heights shape mismatch")
            if floor and (heights < 0).any():
                raise ValueError("floored field with negative heights")
            self.grid[1:-1, 1:-1] = heights

    def _fill_ring(self):
        box, bc = self.box, self.bc
        ox, oy = box.origin
        ny, nx = box.height, box.width
        for i in range(nx):
            self.grid[0, i + 1] = bc.height_at((ox + i, oy - 1), box)
            self.grid[ny + 1, i + 1] = bc.height_at((ox + i, oy + ny), box)
        for j in range(ny):
            self.grid[j + 1, 0] = bc.height_at((ox - 1, oy + j), box)
            self.grid[j + 1, nx + 1] = bc.height_at((ox + nx, oy + j), box)
        if self.floor and (min(self.grid[0, 1:-1].min(), self.grid[-1, 1:-1].min(),
                               self.grid[1:-1, 0].min(), self.grid[1:-1, -1].min()) < 0):
            raise ValueError("floored field with negative boundary heights")

    @property
    def heights(self) -> np.ndarray:
        return self.grid[1:-1, 1:-1]

    def site_height(self, site: Site) -> int:
        ox, oy = self.box.origin
        return int(self.grid[site[1] - oy + 1, site[0] - ox + 1])

    def copy(self) -> "HeightField":
        return HeightField(self.box, self.beta, self.floor, self.bc,
                           heights=self.heights.copy())


def hamiltonian(f: HeightField) -> int:
    """Sum of |height gradients| over all pairs with at least one interior
    endpoint (the beta factor is not applied)."""
    g = f.grid
    horiz = np.abs(g[1:-1, 1:] - g[1:-1, :-1]).sum()
    vert = np.abs(g[1:, 1:-1] - g[:-1, 1:-1]).sum()
    return int(horiz + vert)


def heat_bath_update(f: HeightField, site: Site, rng) -> HeightField:
    """One exact single-site heat-bath update; returns a new field."""
    ox, oy = f.box.origin
    i, j = site[0] - ox + 1, site[1] - oy + 1
    if not (1 <= i <= f.box.width and 1 <= j <= f.box.height):
        raise ValueError("site not interior")
    out = f.copy()
    g = out.grid
    h = kernels.heat_bath_site(
        g[j + 1, i], g[j - 1, i], g[j, i - 1], g[j, i + 1],
        f.beta, f.floor, float(rng.random()),
    )
    g[j, i] = h
    return out


def run_chain(f: HeightField, sweeps: int, rng, observables=()) -> dict:
    """Raster-order heat-bath sweeps, mutating ``f`` in place.

    ``observables`` is a sequence of (name, fn) pairs evaluated once per
    sweep on the current field.  Deterministic given the generator state.
    """
    if sweeps < 0:
        raise ValueError("sweeps must be >= 0")
    n = f.box.width * f.box.height
    series = {name: np.empty(sweeps) for name, _ in observables}
    for s in range(sweeps):
        kernels.heat_bath_sweep(f.grid, f.beta, f.floor, rng.random(n))
        for name, fn in observables:
            series[name][s] = fn(f)
    return series


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------


@dataclass
class EnumerationResult:
    log_z: float
    marginals: dict          # site -> probability vector over [lo[site], hi[site]]
    lows: dict               # site -> lowest enumerated height
    tail_bound: float
    method: str


def _site_energy_terms(sites, bc):
    """For each site: list of (other interior site index) and list of fixed
    boundary heights, from its 4 neighbors.  Raises if a neighbor is neither."""
    idx = {s: k for k, s in enumerate(sites)}
    inner, outer = [], []
    for s in sites:
        nbr_in, nbr_out = [], []
        for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (s[0] + d[0], s[1] + d[1])
            if n in idx:
                nbr_in.append(idx[n])
            else:
                if n not in bc:
                    raise KeyError(f"boundary height missing for {n}")
                nbr_out.append(bc[n])
        inner.append(nbr_in)
        outer.append(nbr_out)
    return idx, inner, outer


def enumerate_heights(sites, bc, lo, hi, beta,
                      brute_guard=BRUTE_STATE_GUARD) -> EnumerationResult:
    """Exact partition function and site marginals for heights restricted to
    [lo[s], hi[s]] per site; brute force or column-transfer DP."""
    sites = list(sites)
    if not sites:
        return EnumerationResult(0.0, {}, {}, 0.0, "empty")
    sizes = [hi[s] - lo[s] + 1 for s in sites]
    for s, k in zip(sites, sizes):
        if k < 1:
            raise ValueError(f"empty height range at {s}")
    states = 1
    for k in sizes:
        states *= k
        if states > 10**15:
            break
    if states <= brute_guard:
        return _enumerate_brute(sites, bc, lo, hi, beta)
    return _enumerate_dp(sites, bc, lo, hi, beta)


def _enumerate_brute(sites, bc, lo, hi, beta) -> EnumerationResult:
    idx, inner, outer = _site_energy_terms(sites, bc)
    ranges = [range(lo[s], hi[s] + 1) for s in sites]
    n = len(sites)
    weights = []
    configs = []
    for conf in itertools.product(*ranges):
        e = 0
        for k in range(n):
            hk = conf[k]
            for j in inner[k]:
                if j > k:
                    e += abs(hk - conf[j])
            for hb in outer[k]:
                e += abs(hk - hb)
        weights.append(-beta * e)
        configs.append(conf)
    weights = np.array(weights)
    m = weights.max()
    w = np.exp(weights - m)
    z = w.sum()
    log_z = m + math.log(z)
    p = w / z
    marginals = {}
    confs = np.array(configs)
    for k, s in enumerate(sites):
        vec = np.zeros(hi[s] - lo[s] + 1)
        np.add.at(vec, confs[:, k] - lo[s], p)
        marginals[s] = vec
    return EnumerationResult(log_z, marginals, {s: lo[s] for s in sites},
                             _tail_bound(sites, bc, lo, hi, beta), "brute")


def _tail_bound(sites, bc, lo, hi, beta):
    # exponential single-site tails: crude but honest upper estimate
    href = max((abs(v) for v in bc.values()), default=0)
    depth = min(hi[s] - href for s in sites)
    return len(sites) * math.exp(-4.0 * beta * max(depth, 0)) / max(1e-300, 1 - math.exp(-4 * beta))


def _enumerate_dp(sites, bc, lo, hi, beta) -> EnumerationResult:
    idx, inner, outer = _site_energy_terms(sites, bc)
    cols = sorted({s[0] for s in sites})
    col_sites = {x: sorted([s for s in sites if s[0] == x], key=lambda s: s[1]) for x in cols}

    # per-column state tables
    col_states = {}
    for x in cols:
        cs = col_sites[x]
        k = 1
        for s in cs:
            k *= hi[s] - lo[s] + 1
            if k > DP_COLUMN_GUARD:
                raise GuardError(f"column state space {k} exceeds guard at x={x}")
        grids = np.meshgrid(*[np.arange(lo[s], hi[s] + 1) for s in cs], indexing="ij")
        col_states[x] = np.stack([g.ravel() for g in grids], axis=0)  # (n_sites, n_states)

    def intra_energy(x):
        cs = col_sites[x]
        st = col_states[x]
        e = np.zeros(st.shape[1])
        for a, s in enumerate(cs):
            for hb in outer[idx[s]]:
                e += np.abs(st[a] - hb)
            for b, s2 in enumerate(cs):
                if b > a and abs(s2[1] - s[1]) == 1:
                    e += np.abs(st[a] - st[b])
        return e

    log_off = 0.0
    fwd = []
    prev_x = None
    msg = None
    for x in cols:
        w = np.exp(-beta * intra_energy(x))
        if msg is None:
            msg = w
        else:
            if x - prev_x == 1:
                T = _transfer(col_sites[prev_x], col_states[prev_x],
                              col_sites[x], col_states[x], beta)
                msg = (msg @ T) * w
            else:
                msg = msg.sum() * w
        m = msg.max()
        if m <= 0:
            raise FloatingPointError("DP message vanished; range too wide for beta")
        msg = msg / m
        log_off += math.log(m)
        fwd.append(msg.copy())
        prev_x = x
    log_z = log_off + math.log(msg.sum())

    # backward pass for marginals
    bwd = [None] * len(cols)
    msg = None
    prev_x = None
    for i in range(len(cols) - 1, -1, -1):
        x = cols[i]
        w = np.exp(-beta * intra_energy(x))
        if msg is None:
            msg = w
        else:
            if prev_x - x == 1:
                T = _transfer(col_sites[x], col_states[x],
                              col_sites[prev_x], col_states[prev_x], beta)
                msg = (T @ msg) * w
            else:
                msg = msg.sum() * w
        msg = msg / msg.max()
        bwd[i] = msg.copy()
        prev_x = x

    marginals = {}
    for i, x in enumerate(cols):
        w = np.exp(-beta * intra_energy(x))
        joint = fwd[i] * bwd[i] / np.maximum(w, 1e-300)
        joint /= joint.sum()
        st = col_states[x]
        for a, s in enumerate(col_sites[x]):
            vec = np.zeros(hi[s] - lo[s] + 1)
            np.add.at(vec, st[a] - lo[s], joint)
            marginals[s] = vec
    return EnumerationResult(log_z, marginals, {s: lo[s] for s in sites},
                             _tail_bound(sites, bc, lo, hi, beta), "dp")


def _transfer(cs_a, st_a, cs_b, st_b, beta):
    e = np.zeros((st_a.shape[1], st_b.shape[1]))
    ys_b = {s[1]: b for b, s in enumerate(cs_b)}
    for a, s in enumerate(cs_a):
        b = ys_b.get(s[1])
        if b is not None:
            e += np.abs(st_a[a][:, None] - st_b[b][None, :])
    return np.exp(-beta * e)


def exact_enumerate(box: Box, bc: BoundaryCondition, floor: bool, beta: float,
                    hmax: int | None = None) -> EnumerationResult:
    """Exact Z and single-site marginals for the SOS measure on a box,
    heights truncated to [0, hmax] (floor) or [-hmax, hmax]."""
    if hmax is None:
        hmax = default_hmax(beta)
    sites = box.sites()
    bcm = {s: bc.height_at(s, box) for s in box.boundary_sites()}
    href = max(abs(v) for v in bcm.values()) if bcm else 0
    lo = {s: 0 if floor else -hmax for s in sites}
    hi = {s: hmax + href for s in sites}
    k = max(hi[s] - lo[s] + 1 for s in sites)
    per_col = max(len([s for s in sites if s[0] == x]) for x in {s[0] for s in sites})
    if k**per_col > DP_COLUMN_GUARD and k ** len(sites) > BRUTE_STATE_GUARD:
        raise GuardError("state space exceeds both brute and DP guards")
    return enumerate_heights(sites, bcm, lo, hi, beta)


# ---------------------------------------------------------------------------
# cluster weights f_U by Moebius inversion
# ---------------------------------------------------------------------------


@dataclass
class ClusterWeight:
    cluster: frozenset
    context: frozenset
    value: float
    d_value: int


_FU_CACHE: dict = {}


def _log_z_region(region: frozenset, constrained: frozenset, beta: float, hmax: int) -> float:
    """log of the no-floor partition function on ``region`` with boundary
    height 0 and heights on ``constrained`` restricted to >= 0."""
    key = (region, constrained, beta, hmax)
    if key in _FU_CACHE:
        return _FU_CACHE[key]
    if not region:
        return 0.0
    sites = sorted(region)
    bc = {}
    for s in sites:
        for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (s[0] + d[0], s[1] + d[1])
            if n not in region:
                bc[n] = 0
    lo = {s: (0 if s in constrained else -hmax) for s in sites}
    hi = {s: hmax for s in sites}
    res = enumerate_heights(sites, bc, lo, hi, beta)
    _FU_CACHE[key] = res.log_z
    return res.log_z


def cluster_weight_fU(V, U, beta: float, hmax: int | None = None) -> ClusterWeight:
    """Moebius-inverted cluster weight f_U(V) from log partition functions of
    sub-regions; exactly 0 (to float tolerance) for disconnected V."""
    V = frozenset(V)
    U = frozenset(U)
    if len(V) > 6:
        raise GuardError("cluster size exceeds Moebius guard (|V| <= 6)")
    if hmax is None:
        hmax = math.ceil(40.0 / (4.0 * beta))
    members = sorted(V)
    total = 0.0
    for r in range(len(members) + 1):
        for combo in itertools.combinations(members, r):
            W = frozenset(combo)
            sign = -1.0 if (len(V) - len(W)) % 2 else 1.0
            total += sign * _log_z_region(W, U & W, beta, hmax)
    return ClusterWeight(V, U, total, d_value(V))


def area_tilt_weight(area: int, L: float, beta: float, n: int, c_inf: float = 1.0) -> float:
    """Relative weight exp(-lambda^(n) * area / L) tying the floored contour
    law to the no-floor one; lambda = c_inf * e^{4 beta alpha(L)} (1 - e^{-4 beta})
    with alpha(L) the fractional part of log(L)/(4 beta)."""
    if area < 0:
        raise ValueError("area must be nonnegative")
    x = math.log(L) / (4.0 * beta)
    alpha = x - math.floor(x)
    lam = c_inf * math.exp(4.0 * beta * alpha) * (1.0 - math.exp(-4.0 * beta))
    return math.exp(-lam * math.exp(4.0 * beta * n) * area / L)
