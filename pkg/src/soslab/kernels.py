"""Hot numeric kernels: heat-bath sweeps and splitting-rule path enumeration.

Both kernels are written once as plain Python functions and compiled with
numba ``@njit`` when available.  Set ``SOSLAB_NO_NUMBA=1`` in the environment
to force the pure-Python fallback (identical algorithm, same RNG stream).
``IMPLEMENTATIONS`` exposes both backends so the benchmark under
``benchmarks/`` can compare them directly.

Conventions shared by the path kernels:

- paths live on Z^2, start at (0, 0), and respect the northeast splitting
  rule: a vertex may carry two transits only if the two transit pairs are
  {N, W} and {S, E} (direction codes 0=E, 1=N, 2=W, 3=S; an NE pair is
  exactly a pair of distinct codes summing to 3);
- ``Delta`` sites of a path are the endpoints of its lengthwise-thickened
  bond set (each bond (y, y+e) contributes the collinear sites
  y-e, y, y+e, y+2e).
"""

from __future__ import annotations

import math
import os

import numpy as np

_ENV_DISABLED = os.environ.get("SOSLAB_NO_NUMBA", "").strip() not in ("", "0")

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

# ---------------------------------------------------------------------------
# heat-bath single-site draw and raster sweep
# ---------------------------------------------------------------------------


def _heat_bath_site(n_up, n_dn, n_lf, n_rt, beta, floor, u):
    """Exact draw from the single-site conditional pi(h) ~ exp(-beta*sum|h-n_i|).

    The conditional is piecewise geometric: explicit weights between the
    min and max neighbor heights, closed-form geometric tails outside.
    One uniform ``u`` is consumed (inverse-CDF walk); ``floor`` restricts
    to h >= 0.
    """
    lo = n_up
    if n_dn < lo:
        lo = n_dn
    if n_lf < lo:
        lo = n_lf
    if n_rt < lo:
        lo = n_rt
    hi = n_up
    if n_dn > hi:
        hi = n_dn
    if n_lf > hi:
        hi = n_lf
    if n_rt > hi:
        hi = n_rt
    a = lo
    if floor and a < 0:
        a = 0
    rho = math.exp(-4.0 * beta)

    # energy S(h) = sum_i |h - n_i| on the explicit range [a, hi]
    s_min = 1 << 60
    h = a
    while h <= hi:
        s = abs(h - n_up) + abs(h - n_dn) + abs(h - n_lf) + abs(h - n_rt)
        if s < s_min:
            s_min = s
        h += 1

    mid = 0.0
    w_a = 0.0
    w_b = 0.0
    h = a
    while h <= hi:
        s = abs(h - n_up) + abs(h - n_dn) + abs(h - n_lf) + abs(h - n_rt)
        w = math.exp(-beta * (s - s_min))
        mid += w
        if h == a:
            w_a = w
        w_b = w
        h += 1

    up_tail = w_b * rho / (1.0 - rho)
    if floor:
        # finite geometric sum over h = a-1 .. 0  (slope 4 below a = min >= 0)
        dn_tail = w_a * (rho - rho ** (a + 1)) / (1.0 - rho) if a > 0 else 0.0
    else:
        dn_tail = w_a * rho / (1.0 - rho)

    t = u * (mid + up_tail + dn_tail)

    if t < mid:
        acc = 0.0
        h = a
        while h < hi:
            s = abs(h - n_up) + abs(h - n_dn) + abs(h - n_lf) + abs(h - n_rt)
            acc += math.exp(-beta * (s - s_min))
            if t < acc:
                return h
            h += 1
        return hi
    t -= mid
    if t < up_tail:
        h = hi
        w = w_b * rho
        while True:
            h += 1
            if t < w or w <= 0.0:
                return h
            t -= w
            w *= rho
    t -= up_tail
    h = a
    w = w_a * rho
    while True:
        h -= 1
        if floor and h <= 0:
            return 0
        if t < w or w <= 0.0:
            return h
        t -= w
        w *= rho


def _make_sweep(site_draw):
    def heat_bath_sweep(grid, beta, floor, uniforms):
        """One raster-order sweep over the interior of a padded height grid.

        ``grid`` has shape (ny+2, nx+2); the outer ring holds boundary
        heights.  ``uniforms`` supplies one uniform per interior site in
        raster order (rows bottom to top, columns left to right).
        """
        ny = grid.shape[0] - 2
        nx = grid.shape[1] - 2
        k = 0
        for j in range(1, ny + 1):
            for i in range(1, nx + 1):
                grid[j, i] = site_draw(
                    grid[j + 1, i],
                    grid[j - 1, i],
                    grid[j, i - 1],
                    grid[j, i + 1],
                    beta,
                    floor,
                    uniforms[k],
                )
                k += 1

    return heat_bath_sweep


# ---------------------------------------------------------------------------
# fixed-target splitting-rule path sums (partition functions)
# ---------------------------------------------------------------------------

# direction tables: 0=E, 1=N, 2=W, 3=S
_DX = np.array([1, 0, -1, 0], dtype=np.int64)
_DY = np.array([0, 1, 0, -1], dtype=np.int64)


def _polymer_path_sums(
    tx,
    ty,
    max_len,
    cxlo,
    cxhi,
    cylo,
    cyhi,
    dxlo,
    dxhi,
    dylo,
    dyhi,
    w1,
    node_cap,
):
    """DFS over splitting-rule paths (0,0) -> (tx,ty), <= max_len bonds,
    every vertex inside the confinement box [cxlo,cxhi]x[cylo,cyhi].

    Returns ``(free_sums, mod_sums, nodes, overflow)`` where
    ``free_sums[l]`` sums exp(w1*|Delta|) over paths of length l and
    ``mod_sums[l]`` sums exp(w1*|Delta inside [dxlo..dxhi]x[dylo..dyhi]|).
    With w1 = 0 both reduce to path counts by length.
    """
    xlo = cxlo if cxlo > -max_len else -max_len
    xhi = cxhi if cxhi < max_len else max_len
    ylo = cylo if cylo > -max_len else -max_len
    yhi = cyhi if cyhi < max_len else max_len
    W = xhi - xlo + 1
    H = yhi - ylo + 1

    free_sums = np.zeros(max_len + 1, dtype=np.float64)
    mod_sums = np.zeros(max_len + 1, dtype=np.float64)
    if tx < xlo or tx > xhi or ty < ylo or ty > yhi or W < 1 or H < 1:
        return free_sums, mod_sums, 0, 0
    if 0 < xlo or 0 > xhi or 0 < ylo or 0 > yhi:
        return free_sums, mod_sums, 0, 0

    # bond-used flags: [0]=horizontal from (x,y) to (x+1,y), [1]=vertical
    used = np.zeros((2, H, W), dtype=np.uint8)
    # Delta-site marks on a +-2 margin window
    Wd = W + 4
    Hd = H + 4
    dmark = np.zeros((Hd, Wd), dtype=np.uint8)
    dsites = np.zeros(4 * (max_len + 1), dtype=np.int64)
    dptr = np.zeros(max_len + 2, dtype=np.int64)

    sx = np.zeros(max_len + 1, dtype=np.int64)
    sy = np.zeros(max_len + 1, dtype=np.int64)
    adir = np.zeros(max_len + 1, dtype=np.int64)
    ndir = np.zeros(max_len + 1, dtype=np.int64)
    bstack = np.zeros(max_len + 1, dtype=np.int64)

    sx[0] = 0
    sy[0] = 0
    adir[0] = -1
    ndir[0] = 0
    depth = 0
    ndelta = 0
    ndelta_in = 0
    nodes = 0
    overflow = 0

    while depth >= 0:
        if overflow == 1:
            break
        d = ndir[depth]
        if d == 4:
            # backtrack: unmark entry bond and its Delta contributions
            if depth > 0:
                bid = bstack[depth]
                used[bid // (H * W), (bid % (H * W)) // W, bid % W] = 0
                if w1 != 0.0:
                    p0 = dptr[depth]
                    p1 = dptr[depth + 1]
                    for p in range(p0, p1):
                        sidx = dsites[p]
                        syy = sidx // Wd + (ylo - 2)
                        sxx = sidx % Wd + (xlo - 2)
                        dmark[sidx // Wd, sidx % Wd] = 0
                        ndelta -= 1
                        if dxlo <= sxx <= dxhi and dylo <= syy <= dyhi:
                            ndelta_in -= 1
            depth -= 1
            continue
        ndir[depth] = d + 1
        x = sx[depth]
        y = sy[depth]
        if d == 0:
            nxx = x + 1
            nyy = y
        elif d == 1:
            nxx = x
            nyy = y + 1
        elif d == 2:
            nxx = x - 1
            nyy = y
        else:
            nxx = x
            nyy = y - 1
        if nxx < xlo or nxx > xhi or nyy < ylo or nyy > yhi:
            continue
        rem = max_len - depth - 1
        dist = abs(tx - nxx) + abs(ty - nyy)
        if dist > rem:
            continue
        # bond id for the step
        if d == 0:
            bk, bx, by = 0, x - xlo, y - ylo
        elif d == 2:
            bk, bx, by = 0, nxx - xlo, nyy - ylo
        elif d == 1:
            bk, bx, by = 1, x - xlo, y - ylo
        else:
            bk, bx, by = 1, nxx - xlo, nyy - ylo
        if used[bk, by, bx] == 1:
            continue
        # splitting rule at the current vertex
        cnt = 0
        ix = x - xlo
        iy = y - ylo
        if ix < W - 1 and used[0, iy, ix] == 1:
            cnt += 1
        if ix > 0 and used[0, iy, ix - 1] == 1:
            cnt += 1
        if iy < H - 1 and used[1, iy, ix] == 1:
            cnt += 1
        if iy > 0 and used[1, iy - 1, ix] == 1:
            cnt += 1
        prior = cnt - 1 if depth > 0 else cnt
        if prior == 2 and adir[depth] + d != 3:
            continue

        nodes += 1
        if nodes > node_cap:
            overflow = 1
            continue
        used[bk, by, bx] = 1
        depth += 1
        sx[depth] = nxx
        sy[depth] = nyy
        adir[depth] = (d + 2) % 4
        ndir[depth] = 0
        bstack[depth] = bk * (H * W) + by * W + bx
        if w1 != 0.0:
            # Delta sites of the new bond: collinear 4 along the step axis
            p = dptr[depth]
            for t in range(-1, 3):
                if d == 0 or d == 2:
                    sxx = x + t * (1 if d == 0 else -1)
                    syy = y
                else:
                    sxx = x
                    syy = y + t * (1 if d == 1 else -1)
                jx = sxx - (xlo - 2)
                jy = syy - (ylo - 2)
                if dmark[jy, jx] == 0:
                    dmark[jy, jx] = 1
                    dsites[p] = jy * Wd + jx
                    p += 1
                    ndelta += 1
                    if dxlo <= sxx <= dxhi and dylo <= syy <= dyhi:
                        ndelta_in += 1
            dptr[depth + 1] = p
        else:
            dptr[depth + 1] = dptr[depth]
        if nxx == tx and nyy == ty:
            if w1 != 0.0:
                free_sums[depth] += math.exp(w1 * ndelta)
                mod_sums[depth] += math.exp(w1 * ndelta_in)
            else:
                free_sums[depth] += 1.0
                mod_sums[depth] += 1.0
    return free_sums, mod_sums, nodes, overflow


# ---------------------------------------------------------------------------
# irreducible-animal enumeration (bare contours, decorations handled upstream)
# ---------------------------------------------------------------------------

MODE_IRREDUCIBLE = 0
MODE_LEFT_IRR = 1
MODE_RIGHT_IRR = 2


def _irreducible_enum(mode, max_len, node_cap):
    """Count splitting-rule paths from the origin by (length, displacement),
    keeping only those in the requested irreducibility class.

    mode 0: irreducible (cone points exactly at the two endpoints; path in
            the forward cone of the start and backward cone of the end);
    mode 1: left-irreducible (sole cone point is the endpoint);
    mode 2: right-irreducible (sole cone point is the start, path in the
            start's forward cone).

    A point u of the path is a cone point iff |wy-uy| <= |wx-ux| for every
    path vertex w.  Returns ``(counts, nodes, overflow)`` with counts
    indexed [length, dx, dy + max_len].
    """
    INF = 1 << 30
    if mode == MODE_LEFT_IRR:
        xlo = -max_len
    else:
        xlo = 0
    xhi = max_len
    ylo = -max_len
    yhi = max_len
    W = xhi - xlo + 1
    H = yhi - ylo + 1

    counts = np.zeros((max_len + 1, max_len + 1, 2 * max_len + 1), dtype=np.int64)
    used = np.zeros((2, H, W), dtype=np.uint8)

    sx = np.zeros(max_len + 1, dtype=np.int64)
    sy = np.zeros(max_len + 1, dtype=np.int64)
    adir = np.zeros(max_len + 1, dtype=np.int64)
    ndir = np.zeros(max_len + 1, dtype=np.int64)
    bstack = np.zeros(max_len + 1, dtype=np.int64)
    killed_at = np.full(max_len + 1, INF, dtype=np.int64)
    maxx = np.zeros(max_len + 1, dtype=np.int64)

    sx[0] = 0
    sy[0] = 0
    adir[0] = -1
    ndir[0] = 0
    maxx[0] = 0
    depth = 0
    nodes = 0
    overflow = 0

    while depth >= 0:
        if overflow == 1:
            break
        d = ndir[depth]
        if d == 4:
            if depth > 0:
                bid = bstack[depth]
                used[bid // (H * W), (bid % (H * W)) // W, bid % W] = 0
                for i in range(depth + 1):
                    if killed_at[i] == depth:
                        killed_at[i] = INF
            depth -= 1
            continue
        ndir[depth] = d + 1
        x = sx[depth]
        y = sy[depth]
        if d == 0:
            nxx = x + 1
            nyy = y
        elif d == 1:
            nxx = x
            nyy = y + 1
        elif d == 2:
            nxx = x - 1
            nyy = y
        else:
            nxx = x
            nyy = y - 1
        if nxx < xlo or nxx > xhi or nyy < ylo or nyy > yhi:
            continue
        if depth + 1 > max_len:
            continue
        if mode != MODE_LEFT_IRR and abs(nyy) > nxx:
            continue  # outside the forward cone of the start
        if d == 0:
            bk, bx, by = 0, x - xlo, y - ylo
        elif d == 2:
            bk, bx, by = 0, nxx - xlo, nyy - ylo
        elif d == 1:
            bk, bx, by = 1, x - xlo, y - ylo
        else:
            bk, bx, by = 1, nxx - xlo, nyy - ylo
        if used[bk, by, bx] == 1:
            continue
        cnt = 0
        ix = x - xlo
        iy = y - ylo
        if ix < W - 1 and used[0, iy, ix] == 1:
            cnt += 1
        if ix > 0 and used[0, iy, ix - 1] == 1:
            cnt += 1
        if iy < H - 1 and used[1, iy, ix] == 1:
            cnt += 1
        if iy > 0 and used[1, iy - 1, ix] == 1:
            cnt += 1
        prior = cnt - 1 if depth > 0 else cnt
        if prior == 2 and adir[depth] + d != 3:
            continue

        nodes += 1
        if nodes > node_cap:
            overflow = 1
            continue
        used[bk, by, bx] = 1
        depth += 1
        sx[depth] = nxx
        sy[depth] = nyy
        adir[depth] = (d + 2) % 4
        ndir[depth] = 0
        bstack[depth] = bk * (H * W) + by * W + bx
        # cone-point candidate bookkeeping
        born_dead = 0
        for i in range(depth):
            dyv = sy[i] - nyy
            if dyv < 0:
                dyv = -dyv
            dxv = sx[i] - nxx
            if dxv < 0:
                dxv = -dxv
            if killed_at[i] > depth and dyv > dxv:
                killed_at[i] = depth
            if dyv > dxv:
                born_dead = 1
        killed_at[depth] = depth if born_dead == 1 else INF
        maxx[depth] = maxx[depth - 1] if maxx[depth - 1] > nxx else nxx

        # completion test at the new endpoint
        if mode == MODE_RIGHT_IRR:
            ok = 1
            for i in range(1, depth + 1):
                if killed_at[i] == INF and not (sx[i] == 0 and sy[i] == 0):
                    ok = 0
                    break
            if ok == 1 and (nxx != 0 or nyy != 0):
                counts[depth, nxx, nyy + max_len] += 1
        else:
            if killed_at[depth] == INF and nxx == maxx[depth]:
                ok = 1
                for i in range(1, depth):
                    if killed_at[i] == INF:
                        if sx[i] == nxx and sy[i] == nyy:
                            continue
                        if mode == MODE_IRREDUCIBLE and sx[i] == 0 and sy[i] == 0:
                            continue
                        ok = 0
                        break
                if mode == MODE_LEFT_IRR and ok == 1:
                    # the start must NOT be a cone point (disjoint from A)
                    if killed_at[0] == INF:
                        ok = 0
                if ok == 1 and nxx >= 1:
                    counts[depth, nxx, nyy + max_len] += 1
    return counts, nodes, overflow


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

heat_bath_site_py = _heat_bath_site
heat_bath_sweep_py = _make_sweep(_heat_bath_site)
polymer_path_sums_py = _polymer_path_sums
irreducible_enum_py = _irreducible_enum

IMPLEMENTATIONS = {
    "python": {
        "heat_bath_site": heat_bath_site_py,
        "heat_bath_sweep": heat_bath_sweep_py,
        "polymer_path_sums": polymer_path_sums_py,
        "irreducible_enum": irreducible_enum_py,
    }
}

if _HAVE_NUMBA:
    _site_jit = _njit(cache=True)(_heat_bath_site)
    heat_bath_sweep_nb = _njit(cache=True)(_make_sweep(_site_jit))
    polymer_path_sums_nb = _njit(cache=True)(_polymer_path_sums)
    irreducible_enum_nb = _njit(cache=True)(_irreducible_enum)
    IMPLEMENTATIONS["numba"] = {
        "heat_bath_site": _site_jit,
        "heat_bath_sweep": heat_bath_sweep_nb,
        "polymer_path_sums": polymer_path_sums_nb,
        "irreducible_enum": irreducible_enum_nb,
    }

if _HAVE_NUMBA and not _ENV_DISABLED:
    BACKEND = "numba"
else:
    BACKEND = "python"

heat_bath_site = IMPLEMENTATIONS[BACKEND]["heat_bath_site"]
heat_bath_sweep = IMPLEMENTATIONS[BACKEND]["heat_bath_sweep"]
polymer_path_sums = IMPLEMENTATIONS[BACKEND]["polymer_path_sums"]
irreducible_enum = IMPLEMENTATIONS[BACKEND]["irreducible_enum"]
