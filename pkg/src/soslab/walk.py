"""Effective random walk in the upper half-plane.

The walk has i.i.d. increments from a finitely supported StepDistribution
(first coordinate >= 1), and is killed once its height drops below ``hmin``
(default 1: surviving heights are >= 1, matching the Doney harmonic function
for a walk killed on leaving (0, inf)).  Provided here:

- exact column DP for hitting probabilities, with adaptively certified
  height caps;
- survival and local-probability DPs for the ballot checks;
- the Doney harmonic function by iterated killed expectation;
- exact conditioned bridges (backward-DP h-transform, and rejection);
- diffusive rescaling and Kolmogorov-Smirnov excursion tests against an
  exact cycle-lemma sampler of the simple-random-walk excursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .cones import StepDistribution
from .errors import GuardError

Site = tuple[int, int]


def make_synthetic_step(rho: float = 0.45, dx_max: int = 3,
                        dy_rho: float | None = None) -> StepDistribution:
    """Exponential-tail test step supported in the forward cone
    {1 <= dx <= dx_max, |dy| <= dx}, P ~ rho^(dx-1) dy_rho^|dy|; mean (mu, 0).
    ``dy_rho`` defaults to rho; larger values fatten the vertical dispersion."""
    if dy_rho is None:
        dy_rho = rho
    probs = {}
    for dx in range(1, dx_max + 1):
        for dy in range(-dx, dx + 1):
            probs[(dx, dy)] = rho ** (dx - 1) * dy_rho ** abs(dy)
    z = sum(probs.values())
    return StepDistribution({k: v / z for k, v in probs.items()},
                            meta={"name": f"synthetic(rho={rho},dy_rho={dy_rho})"})


@dataclass
class WalkPath:
    start: Site
    steps: np.ndarray            # (n, 2) increments
    positions: np.ndarray        # (n+1, 2)
    deficit: float = 0.0         # renormalized truncation mass of the step law

    def first_hit(self, target: Site):
        hits = np.nonzero((self.positions[:, 0] == target[0])
                          & (self.positions[:, 1] == target[1]))[0]
        return int(hits[0]) if len(hits) else None


def simulate(step: StepDistribution, start: Site, n: int, rng) -> WalkPath:
    """n i.i.d. increments (deficit mass renormalized and recorded)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    v, p = step.arrays(renormalize=True)
    idx = rng.choice(len(p), size=n, p=p)
    steps = v[idx]
    pos = np.empty((n + 1, 2), dtype=np.int64)
    pos[0] = start
    if n:
        pos[1:] = np.asarray(start)[None, :] + np.cumsum(steps, axis=0)
    return WalkPath(tuple(start), steps, pos, deficit=step.deficit)


# ---------------------------------------------------------------------------
# column DPs
# ---------------------------------------------------------------------------


def _step_arrays(step: StepDistribution):
    v, p = step.arrays(renormalize=True)
    return v[:, 0], v[:, 1], p


def backward_hit_table(step: StepDistribution, v: Site, x_min: int,
                       hmin: int = 1, cap: int | None = None):
    """B[x, y] = P(walk from (x, y) hits v exactly before height < hmin).

    Heights are indexed hmin..cap; the cap is doubled until the table entry
    changes by < 1e-12 relative (certified adaptively).
    """
    dxs, dys, ps = _step_arrays(step)
    span = v[0] - x_min
    if span < 0:
        raise ValueError("v must lie to the right of x_min")

    def build(cap_):
        ny = cap_ - hmin + 1
        B = np.zeros((span + 1, ny))
        if hmin <= v[1] <= cap_:
            B[span, v[1] - hmin] = 1.0
        for j in range(span - 1, -1, -1):
            acc = np.zeros(ny)
            for dx, dy, p in zip(dxs, dys, ps):
                jj = j + dx
                if jj > span:
                    continue
                src = B[jj]
                # target height y + dy for y in [hmin..cap]
                lo = max(hmin, hmin - dy)
                hi = min(cap_, cap_ - dy)
                if lo > hi:
                    continue
                acc[lo - hmin:hi - hmin + 1] += p * src[lo + dy - hmin:hi + dy - hmin + 1]
            B[j] = acc
        return B

    if cap is None:
        cap = max(v[1], hmin) + int(20 * math.sqrt(max(span, 1))) + 40
    B = build(cap)
    while True:
        B2 = build(cap * 2)
        a = B[0].max()
        b = B2[0][: B.shape[1]].max()
        if a > 0 and abs(a - b) <= 1e-12 * max(a, b):
            return B2, cap * 2
        B, cap = B2, cap * 2
        if cap > 1_000_000:
            raise GuardError("hitting DP cap certification did not stabilize")


def hitting_probability_dp(step: StepDistribution, u: Site, v: Site,
                           hmin: int = 1) -> float:
    """Exact P_u(hit v before the height drops below hmin); H_v >= 1 by
    convention, so u == v returns 0."""
    if u == v:
        return 0.0
    if v[0] <= u[0]:
        return 0.0
    B, cap = backward_hit_table(step, v, u[0], hmin)
    if not (hmin <= u[1] <= cap):
        return 0.0
    return float(B[0, u[1] - hmin])


def survival_dp(step: StepDistribution, u_y: int, k_max: int, hmin: int = 1,
                cap: int | None = None):
    """P(H_kill > k) for k = 0..k_max: mass of the killed y-marginal walk.
    The cap absorbs overflow mass into a reported bucket (kept below 1e-12)."""
    ym = {}
    dxs, dys, ps = _step_arrays(step)
    for dy, p in zip(dys, ps):
        ym[int(dy)] = ym.get(int(dy), 0.0) + float(p)
    if cap is None:
        cap = u_y + int(6 * math.sqrt(k_max + 1) * 3) + 60
    mass = np.zeros(cap - hmin + 1)
    mass[u_y - hmin] = 1.0
    out = np.empty(k_max + 1)
    out[0] = 1.0
    lost_up = 0.0
    for k in range(1, k_max + 1):
        nxt = np.zeros_like(mass)
        for dy, p in ym.items():
            if dy >= 0:
                seg = mass[: len(mass) - dy] if dy else mass
                nxt[dy:] += p * seg
                if dy:
                    lost_up += p * mass[len(mass) - dy:].sum()
            else:
                nxt[: dy] += p * mass[-dy:]
        mass = nxt
        out[k] = mass.sum()
    if lost_up > 1e-12:
        raise GuardError(f"survival DP cap too low (lost {lost_up:.2e})")
    return out


def local_profile_dp(step: StepDistribution, u: Site, v_y: int, k: int,
                     hmin: int = 1, cap: int | None = None):
    """P(S(k) = (N, v_y), H_kill > k) for all N: full 2D DP over k steps.
    Returns (N_values, probabilities)."""
    dxs, dys, ps = _step_arrays(step)
    dx_max = int(dxs.max())
    if cap is None:
        cap = max(u[1], v_y) + int(6 * math.sqrt(k + 1) * max(abs(dys).max(), 1)) + 40
    nx = k * dx_max + 1
    ny = cap - hmin + 1
    cur = np.zeros((nx, ny))
    cur[0, u[1] - hmin] = 1.0
    for _ in range(k):
        nxt = np.zeros_like(cur)
        for dx, dy, p in zip(dxs, dys, ps):
            xsrc = cur[: nx - dx] if dx else cur
            lo = max(hmin, hmin - dy)
            hi = min(cap, cap - dy)
            if lo > hi:
                continue
            nxt[dx:, lo - hmin:hi - hmin + 1] += p * xsrc[:, lo + dy - hmin:hi + dy - hmin + 1]
        cur = nxt
    ns = np.arange(nx) + u[0]
    return ns, cur[:, v_y - hmin].copy()


# ---------------------------------------------------------------------------
# Doney harmonic function
# ---------------------------------------------------------------------------


@dataclass
class HarmonicProfile:
    values: np.ndarray         # V(a) for a = 1..range_max
    residuals: np.ndarray      # harmonicity defects per a
    iterations: int
    direction: str = "up"

    def value(self, a: int) -> float:
        return float(self.values[a - 1])


def doney_V1(y_step: dict, range_max: int = 200, tol: float = 1e-8,
             max_iter: int = 400_000, direction: str = "up") -> HarmonicProfile:
    """Positive harmonic function of the 1d walk killed on leaving (0, inf),
    normalized V(a)/a -> 1, by iterating the killed expectation from V = id.

    ``y_step``: dict dy -> prob (centered; exponential tails).  ``direction``
    'down' negates the step (the reversed-walk harmonic function V1')."""
    items = sorted(y_step.items())
    mean = sum(d * p for d, p in items)
    if abs(mean) > 1e-9:
        raise ValueError(f"step must be centered (mean {mean:.2e})")
    if direction == "down":
        items = sorted(((-d, p) for d, p in items))
    dmax = max(abs(d) for d, _ in items)
    buf = dmax + 1
    A = range_max + buf
    a = np.arange(1, A + 1, dtype=float)
    V = a.copy()

    def apply_kill(V_):
        # E[V(a + Y); a + Y >= 1] with affine tail extension above A
        c_tail = V_[-1] - A
        out = np.zeros_like(V_)
        for d, p in items:
            idx = np.arange(1, A + 1) + d
            vals = np.where(
                idx >= 1,
                np.where(idx <= A, V_[np.clip(idx, 1, A) - 1], idx + c_tail),
                0.0,
            )
            out += p * vals
        return out

    it = 0
    while it < max_iter:
        it += 1
        V2 = apply_kill(V)
        diff = np.abs(V2 - V)[:range_max].max()
        V = V2
        if diff < tol:
            break
    res = (apply_kill(V) - V)[:range_max]
    return HarmonicProfile(V[:range_max].copy(), res, it, direction)


# ---------------------------------------------------------------------------
# conditioned bridges
# ---------------------------------------------------------------------------


def conditioned_bridge(step: StepDistribution, u: Site, v: Site, rng,
                       n_samples: int = 1, method: str = "dp_backward",
                       hmin: int = 1, max_tries: int = 100_000_000):
    """Exact samples of the walk conditioned to hit v before killing.

    ``dp_backward`` h-transforms the step law with the backward hitting table
    (exact and fast); ``rejection`` repeatedly simulates and filters (exact,
    slow).  Returns a list of position arrays from u to v."""
    B, cap = backward_hit_table(step, v, u[0], hmin)
    if B[0].max() == 0 or not (hmin <= u[1] <= cap) or B[0, u[1] - hmin] == 0:
        raise ValueError("zero-probability target")
    dxs, dys, ps = _step_arrays(step)
    span = v[0] - u[0]
    out = []
    if method == "dp_backward":
        for _ in range(n_samples):
            pos = [(u[0], u[1])]
            x, y = 0, u[1]
            while (x, y) != (span, v[1]):
                ws = []
                moves = []
                for dx, dy, p in zip(dxs, dys, ps):
                    xx, yy = x + dx, y + dy
                    if xx > span or not (hmin <= yy <= cap):
                        continue
                    w = p * B[xx, yy - hmin]
                    if w > 0:
                        ws.append(w)
                        moves.append((xx, yy))
                ws = np.array(ws)
                xx, yy = moves[rng.choice(len(ws), p=ws / ws.sum())]
                x, y = xx, yy
                pos.append((u[0] + x, y))
            out.append(np.array(pos, dtype=np.int64))
        return out
    if method == "rejection":
        v_arr, p_arr = step.arrays(renormalize=True)
        tries = 0
        while len(out) < n_samples:
            tries += 1
            if tries > max_tries:
                raise GuardError("rejection sampler exceeded max tries")
            pos = [(u[0], u[1])]
            x, y = u
            ok = False
            while x < v[0] and y >= hmin:
                dx, dy = v_arr[rng.choice(len(p_arr), p=p_arr)]
                x, y = x + dx, y + dy
                pos.append((x, y))
                if (x, y) == v:
                    ok = True
                    break
            if ok:
                out.append(np.array(pos, dtype=np.int64))
        return out
    raise ValueError(f"unknown method {method!r}")


def bridge_heights_batch(step: StepDistribution, u: Site, v: Site, rng,
                         n_samples: int, t_list, hmin: int = 1):
    """Vectorized dp_backward sampling of many bridges, returning only the
    (linearly interpolated) heights at x = t*N for each t in t_list, plus the
    minimum height over a requested window per sample.

    Returns dict t -> array of heights, plus (xs grid unavailable) nothing
    else; used by the excursion statistics.
    """
    B, cap = backward_hit_table(step, v, u[0], hmin)
    dxs, dys, ps = _step_arrays(step)
    span = v[0] - u[0]
    n_mv = len(ps)
    xs = np.zeros(n_samples, dtype=np.int64)
    ys = np.full(n_samples, u[1], dtype=np.int64)
    done = np.zeros(n_samples, dtype=bool)
    targets = {t: int(math.floor(t * span)) for t in t_list}
    vals = {t: np.full(n_samples, np.nan) for t in t_list}
    prev_x = xs.copy()
    prev_y = ys.copy()
    # record initial crossings at x=0
    for t, tx in targets.items():
        if tx == 0:
            vals[t][:] = u[1]
    while not done.all():
        act = ~done
        idx = np.nonzero(act)[0]
        x = xs[idx]
        y = ys[idx]
        # candidate weights: (n_active, n_moves)
        W = np.zeros((len(idx), n_mv))
        for m in range(n_mv):
            xx = x + dxs[m]
            yy = y + dys[m]
            okm = (xx <= span) & (yy >= hmin) & (yy <= cap)
            W[okm, m] = ps[m] * B[xx[okm], yy[okm] - hmin]
        W /= W.sum(axis=1, keepdims=True)
        r = rng.random(len(idx))
        choice = (W.cumsum(axis=1) < r[:, None]).sum(axis=1)
        choice = np.minimum(choice, n_mv - 1)
        nx_ = x + dxs[choice]
        ny_ = y + dys[choice]
        # interpolate any crossed targets
        for t, tx in targets.items():
            crossed = (x < tx) & (nx_ >= tx) if tx > 0 else np.zeros(len(idx), bool)
            if crossed.any():
                ii = idx[crossed]
                frac = (tx - x[crossed]) / (nx_[crossed] - x[crossed])
                vals[t][ii] = y[crossed] + frac * (ny_[crossed] - y[crossed])
        xs[idx] = nx_
        ys[idx] = ny_
        done[idx] = (nx_ == span) & (ny_ == v[1])
    return vals


# ---------------------------------------------------------------------------
# rescaling and excursion statistics
# ---------------------------------------------------------------------------


@dataclass
class RescaledPath:
    times: np.ndarray
    values: np.ndarray

    def value_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


def rescale(positions: np.ndarray, sigma: float, n: int | None = None) -> RescaledPath:
    """Diffusive rescaling: x-coordinates by n, heights by sigma*sqrt(n)."""
    pos = np.asarray(positions)
    if n is None:
        n = int(pos[-1, 0] - pos[0, 0])
    if n <= 0 or len(pos) == 0:
        raise ValueError("path must advance")
    times = (pos[:, 0] - pos[0, 0]) / n
    values = pos[:, 1] / (sigma * math.sqrt(n))
    return RescaledPath(times, values)


def ssrw_excursion_marginals(t_list, n_samples: int, rng,
                             n_steps: int = 2 ** 14, batch: int = 2000):
    """Exact sampler of the simple-random-walk excursion of length 2n
    (positive interior, endpoints 0) via the cycle lemma, evaluated at the
    requested times and diffusively rescaled by sqrt(2n).

    Returns dict t -> array of n_samples rescaled heights.
    """
    two_n = n_steps if n_steps % 2 == 0 else n_steps + 1
    n = two_n // 2
    m = 2 * n - 1                      # word length: n ups, n-1 downs
    out = {t: np.empty(n_samples) for t in t_list}
    template = np.concatenate([np.ones(n, dtype=np.int8),
                               -np.ones(n - 1, dtype=np.int8)])
    filled = 0
    while filled < n_samples:
        b = min(batch, n_samples - filled)
        words = np.tile(template, (b, 1))
        words = rng.permuted(words, axis=1)
        S = np.cumsum(words, axis=1, dtype=np.int32)
        rot = np.argmin(S, axis=1) + 1     # rotation start (first minimum)
        rows = np.arange(b)
        s_rot = S[rows, rot - 1]
        s_m = S[:, -1]                     # = +1
        for t in t_list:
            i = int(round(t * two_n))
            i = max(0, min(two_n, i))
            if i == 0 or i == two_n:
                vals = np.zeros(b)
            else:
                j = rot + i - 1            # index into the unrotated sums
                wrap = j >= m
                jj = np.where(wrap, j - m, j)
                vals = np.where(wrap, s_m - s_rot + S[rows, jj],
                                S[rows, jj] - s_rot).astype(float)
            out[t][filled:filled + b] = vals / math.sqrt(two_n)
        filled += b
    return out


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(stats.ks_2samp(a, b).statistic)


def excursion_test(samples_at_t: dict, reference_at_t: dict) -> dict:
    """Per-time KS distance between empirical marginals and the reference."""
    return {t: ks_distance(samples_at_t[t], reference_at_t[t])
            for t in samples_at_t}


# ---------------------------------------------------------------------------
# ballot-type scaling checks
# ---------------------------------------------------------------------------


@dataclass
class FitResult:
    quantity: str
    estimate: float
    stderr: float
    window: tuple

    def row(self):
        return (self.quantity, self.estimate, self.stderr, str(self.window))


def _slope(xs, ys, name, window) -> FitResult:
    r = stats.linregress(xs, ys)
    return FitResult(name, float(r.slope), float(r.stderr), window)


def ballot_check(step: StepDistribution, u: int = 1, v: int = 1,
                 k_grid=(64, 128, 256, 512, 1024, 2048),
                 profile_k: int = 128, hmin: int = 1) -> dict:
    """The half-space scaling battery:

    (a) survival exponent: slope of log P(H > k) vs log k (-> -1/2);
    (b) Gaussian local profile at fixed k: mean ~ k*mu, variance ~ k*sigma1^2;
    (c) hitting exponent: slope of log P(hit (N, v)) vs log N (-> -3/2);
    (d) V1-factorization: P(u, v) / (V1(u) V1'(v)) constant over a grid.
    """
    out = {}
    # (a) survival
    surv = survival_dp(step, u, max(k_grid), hmin)
    ks = np.array(k_grid)
    out["survival"] = _slope(np.log(ks), np.log(surv[ks]), "survival_exponent",
                             (min(k_grid), max(k_grid)))
    # (b) local profile
    ns, prof = local_profile_dp(step, (0, u), v, profile_k, hmin)
    tot = prof.sum()
    mu, s1 = step.mean[0], step.variances()[0]
    mean_n = float((ns * prof).sum() / tot)
    var_n = float((ns ** 2 * prof).sum() / tot - mean_n ** 2)
    out["profile_mean"] = FitResult("profile_mean_over_k_mu",
                                    mean_n / (profile_k * mu), 0.0,
                                    (profile_k,))
    out["profile_var"] = FitResult("profile_var_over_k_sigma1sq",
                                   var_n / (profile_k * s1), 0.0,
                                   (profile_k,))
    # (c) hitting exponent
    hp = []
    for N in k_grid:
        hp.append(hitting_probability_dp(step, (0, u), (N, v), hmin))
    out["hitting"] = _slope(np.log(ks), np.log(hp), "hitting_exponent",
                            (min(k_grid), max(k_grid)))
    # (d) V factorization over a start/end grid
    ym = step.y_marginal()
    V1 = doney_V1(ym, range_max=64)
    V1p = doney_V1(ym, range_max=64, direction="down")
    N = 512
    ratios = []
    for uu in range(1, 9):
        for vv in range(1, 9):
            p = hitting_probability_dp(step, (0, uu), (N, vv), hmin)
            ratios.append(p / (V1.value(uu) * V1p.value(vv)))
    ratios = np.array(ratios)
    out["v_factorization"] = FitResult(
        "v_factorization_spread",
        float(ratios.max() / ratios.min() - 1.0),
        float(ratios.std() / ratios.mean()),
        (1, 8, N),
    )
    return out


def repulsion_check(step: StepDistribution, n_list=(256, 1024, 4096),
                    delta: float = 0.2, n_samples: int = 1500,
                    rng=None, u: int = 1, v: int = 1, hmin: int = 1) -> dict:
    """Empirical probability that a conditioned bridge dips into the low
    rectangle [N^{4 delta}, N - N^{4 delta}] x [0, N^delta]."""
    if rng is None:
        rng = np.random.default_rng(0)
    if not (0 < delta < 0.25):
        raise ValueError("delta must lie in (0, 1/4)")
    out = {}
    for N in n_list:
        x_lo = N ** (4 * delta)
        x_hi = N - N ** (4 * delta)
        y_hi = N ** delta
        if x_lo >= x_hi:
            out[N] = 0.0
            continue
        B, cap = backward_hit_table(step, (N, v), 0, hmin)
        dxs, dys, ps = _step_arrays(step)
        n_mv = len(ps)
        dips = 0
        chunk = 500
        remaining = n_samples
        while remaining > 0:
            b = min(chunk, remaining)
            remaining -= b
            xs = np.zeros(b, dtype=np.int64)
            ys = np.full(b, u, dtype=np.int64)
            done = np.zeros(b, dtype=bool)
            dipped = np.zeros(b, dtype=bool)
            while not done.all():
                idx = np.nonzero(~done)[0]
                x = xs[idx]
                y = ys[idx]
                W = np.zeros((len(idx), n_mv))
                for mmi in range(n_mv):
                    xx = x + dxs[mmi]
                    yy = y + dys[mmi]
                    okm = (xx <= N) & (yy >= hmin) & (yy <= cap)
                    W[okm, mmi] = ps[mmi] * B[xx[okm], yy[okm] - hmin]
                W /= W.sum(axis=1, keepdims=True)
                r = rng.random(len(idx))
                ch = np.minimum((W.cumsum(axis=1) < r[:, None]).sum(axis=1), n_mv - 1)
                xs[idx] = x + dxs[ch]
                ys[idx] = y + dys[ch]
                inside = (xs[idx] >= x_lo) & (xs[idx] <= x_hi) & (ys[idx] <= y_hi)
                dipped[idx] |= inside
                done[idx] = (xs[idx] == N) & (ys[idx] == v)
            dips += int(dipped.sum())
        out[N] = dips / n_samples
    return out
