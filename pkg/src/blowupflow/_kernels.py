"""Compiled inner loops: counter-based normals, the dyadic Brownian bridge,
the polynomial drift and the adaptive Euler-Maruyama stepper.

Everything here works on plain scalars and arrays so numba can compile it;
the public modules wrap these with validated parameter objects.
"""
import math

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K_COMP = np.uint64(0xD1B54A32D192ED03)
_K_DEPTH = np.uint64(0xABC98388FB8FAC03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0

NOISE_ZERO = 0
NOISE_BROWNIAN = 1
NOISE_TABULATED = 2

OUT_SURVIVED = 0
OUT_EXIT_UPPER = 1
OUT_EXIT_LOWER = 2
OUT_BLOWUP = 3


@nb.njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def node_uniform(seed, comp, depth, index):
    h = mix64(seed ^ (np.uint64(comp + 1) * _K_COMP))
    h = mix64(h ^ (np.uint64(depth) * _K_DEPTH + _GOLDEN))
    h = mix64(h ^ np.uint64(index))
    return (float(h >> _S11) + 0.5) * _TWO_M53


@nb.njit(cache=True)
def norm_ppf(p):
    """Wichura's AS241 (PPND16) inverse normal CDF, ~1e-16 relative accuracy."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                    + 67265.770927008700853) * r + 45921.953931549871457) * r
                  + 13731.693765509461125) * r + 1971.5909503065514427) * r
                + 133.14166789178437745) * r + 3.387132872796366608)
        den = (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                    + 39307.89580009271061) * r + 21213.794301586595867) * r
                  + 5394.1960214247511077) * r + 687.1870074920579083) * r
                + 42.313330701600911252) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734)
        den = (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                    + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
                  + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772)
        den = (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                    + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
                  + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                + 0.59983220655588793769) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@nb.njit(cache=True)
def node_normal(seed, comp, depth, index):
    return norm_ppf(node_uniform(seed, comp, depth, index))


@nb.njit(cache=True)
def bridge_mid(wl, wr, horizon, seed, comp, depth, index):
    # midpoint of a parent interval of length horizon / 2**(depth-1);
    # conditional variance is a quarter of that length
    parent_len = horizon * 0.5 ** (depth - 1)
    return 0.5 * (wl + wr) + 0.5 * math.sqrt(parent_len) * node_normal(seed, comp, depth, index)


@nb.njit(cache=True)
def bridge_value(seed, comp, horizon, max_depth, t):
    if t <= 0.0:
        return 0.0
    w_end = math.sqrt(horizon) * node_normal(seed, comp, 0, 0)
    if t >= horizon:
        return w_end
    scaled = (t / horizon) * 2.0 ** max_depth
    pos = np.uint64(math.floor(scaled))
    frac = scaled - float(pos)
    wl = 0.0
    wr = w_end
    k = np.uint64(0)
    one = np.uint64(1)
    for d in range(1, max_depth + 1):
        mid = bridge_mid(wl, wr, horizon, seed, comp, d, (k << one) | one)
        if (pos >> np.uint64(max_depth - d)) & one:
            wl = mid
            k = (k << one) | one
        else:
            wr = mid
            k = k << one
    if frac == 0.0:
        return wl
    return wl + frac * (wr - wl)


@nb.njit(cache=True)
def bridge_level(seed, comp, horizon, depth):
    """All grid values W(horizon*k/2**depth), k = 0..2**depth."""
    w = np.empty(2)
    w[0] = 0.0
    w[1] = math.sqrt(horizon) * node_normal(seed, comp, 0, 0)
    for d in range(1, depth + 1):
        m = w.size - 1
        nw = np.empty(2 * m + 1)
        for k in range(m):
            nw[2 * k] = w[k]
            nw[2 * k + 1] = bridge_mid(w[k], w[k + 1], horizon, seed, comp, d,
                                       np.uint64(2 * k + 1))
        nw[2 * m] = w[m]
        w = nw
    return w


@nb.njit(cache=True)
def noise_value(kind, comp, t, seed, horizon, max_depth, tab_t, tab_w):
    if kind == NOISE_ZERO:
        return 0.0
    if kind == NOISE_BROWNIAN:
        return bridge_value(seed, comp, horizon, max_depth, t)
    return np.interp(t, tab_t, tab_w[comp])


@nb.njit(cache=True)
def drift_xy(n, binom, cj, ck, cre, cim, x, y):
    bx = 0.0
    for j in range(n // 2 + 1):
        term = binom[2 * j] * x ** (n - 2 * j) * y ** (2 * j)
        bx += -term if j % 2 else term
    by = 0.0
    for j in range((n - 1) // 2 + 1):
        term = binom[2 * j + 1] * x ** (n - 2 * j - 1) * y ** (2 * j + 1)
        by += -term if j % 2 else term
    if cj.size:
        z = complex(x, y)
        zb = complex(x, -y)
        f = 0j
        for i in range(cj.size):
            f += complex(cre[i], cim[i]) * z ** cj[i] * zb ** ck[i]
        bx += f.real
        by += f.imag
    return bx, by


@nb.njit(cache=True)
def _grow(a, size):
    b = np.empty(size)
    b[:a.size] = a
    return b


@nb.njit(cache=True)
def integrate(n, binom, cj, ck, cre, cim, sigma,
              x0, y0, t0, t_end, h_max, eta, r_blow,
              classify, alpha, x1, stride, max_steps,
              kind, seed, horizon, max_depth, tab_t, tab_w):
    """Adaptive Euler-Maruyama run; see integrator.simulate for the contract.

    Returns (ts, xs, ys, outcome, outcome_time, events[4], overflow,
    step_limited, n_steps, max_step_ratio).
    """
    cap = 256
    ts = np.empty(cap)
    xs = np.empty(cap)
    ys = np.empty(cap)
    events = np.full(4, np.nan)
    lev = 0.5 * alpha * x1
    use_noise = sigma != 0.0 and kind != NOISE_ZERO

    t = t0
    x = x0
    y = y0
    ts[0] = t
    xs[0] = x
    ys[0] = y
    nrec = 1
    dist = np.empty(4)
    ndist = np.empty(4)
    tc = np.empty(4)
    dist[0] = y - alpha * x
    dist[1] = -y - alpha * x
    dist[2] = y - lev
    dist[3] = -y - lev
    for i in range(4):
        if dist[i] >= 0.0:
            events[i] = t

    outcome = OUT_SURVIVED
    out_t = np.nan
    overflow = False
    step_limited = False
    steps = 0
    max_ratio = 0.0

    if classify and (dist[0] >= 0.0 or dist[1] >= 0.0):
        outcome = OUT_EXIT_UPPER if dist[0] >= 0.0 else OUT_EXIT_LOWER
        return (ts[:1].copy(), xs[:1].copy(), ys[:1].copy(), outcome, t, events, overflow,
                step_limited, steps, max_ratio)

    w1 = 0.0
    w2 = 0.0
    if use_noise:
        w1 = noise_value(kind, 0, t, seed, horizon, max_depth, tab_t, tab_w)
        w2 = noise_value(kind, 1, t, seed, horizon, max_depth, tab_t, tab_w)

    last_recorded = True
    while True:
        if t >= t_end:
            outcome = OUT_SURVIVED
            break
        if steps >= max_steps:
            step_limited = True
            break
        r = math.hypot(x, y)
        scale = max(1.0, r)
        h_rule = eta * scale / (1.0 + r ** n)
        # dyadic step h_max * 2^-k <= h_rule, ending on a multiple of itself: runs
        # restarted mid-way rejoin the same time grid, and halving eta refines it
        hk = h_max
        if not h_rule > 0.0:
            hk = 0.0  # |z|^n overflowed; the drift below is non-finite and ends the run
        elif h_rule < h_max:
            hk = math.ldexp(h_max, -int(math.ceil(math.log2(h_max / h_rule))))
            while hk > h_rule:
                hk *= 0.5
        if hk > 0.0:
            t_new = (math.floor(t / hk + 1e-9) + 1.0) * hk
            h = t_new - t
        else:
            h = -1.0
        if not 0.0 < h <= hk * (1.0 + 1e-9):
            # grid arithmetic lost to rounding (hk near the spacing of t): plain step
            t_new = t + hk
            h = hk
        if t_new >= t_end:
            t_new = t_end
            h = t_end - t
        bx, by = drift_xy(n, binom, cj, ck, cre, cim, x, y)
        ratio = math.hypot(bx, by) * h / (eta * scale)
        if ratio > max_ratio:
            max_ratio = ratio
        xn = x + bx * h
        yn = y + by * h
        if use_noise:
            w1n = noise_value(kind, 0, t_new, seed, horizon, max_depth, tab_t, tab_w)
            w2n = noise_value(kind, 1, t_new, seed, horizon, max_depth, tab_t, tab_w)
            xn += sigma * (w1n - w1)
            yn += sigma * (w2n - w2)
            w1 = w1n
            w2 = w2n
        steps += 1
        if not (math.isfinite(xn) and math.isfinite(yn)):
            overflow = True
            outcome = OUT_BLOWUP
            out_t = t
            break
        rn = math.hypot(xn, yn)
        if not math.isfinite(rn):
            overflow = True
            outcome = OUT_BLOWUP
            out_t = t
            break

        ndist[0] = yn - alpha * xn
        ndist[1] = -yn - alpha * xn
        ndist[2] = yn - lev
        ndist[3] = -yn - lev
        for i in range(4):
            tc[i] = np.inf
            if np.isnan(events[i]) and ndist[i] >= 0.0:
                tc[i] = t + h * (-dist[i]) / (ndist[i] - dist[i])
        t_blow = np.inf
        if rn >= r_blow:
            t_blow = t + h * (r_blow - r) / (rn - r)
        t_exit = np.inf
        if classify:
            t_exit = min(tc[0], tc[1])
        t_stop = min(t_blow, t_exit)
        for i in range(4):
            if tc[i] < np.inf and tc[i] <= t_stop:
                events[i] = tc[i]

        t = t_new
        x = xn
        y = yn
        for i in range(4):
            dist[i] = ndist[i]
        stopping = t_stop < np.inf
        last_recorded = False
        if stopping or steps % stride == 0 or t >= t_end:
            if nrec == ts.size:
                ts = _grow(ts, 2 * nrec)
                xs = _grow(xs, 2 * nrec)
                ys = _grow(ys, 2 * nrec)
            # a zero-length clipped step can repeat a time; keep times strictly increasing
            if t > ts[nrec - 1]:
                ts[nrec] = t
                xs[nrec] = x
                ys[nrec] = y
                nrec += 1
            last_recorded = True
        if stopping:
            if t_exit <= t_blow:
                outcome = OUT_EXIT_UPPER if tc[0] <= tc[1] else OUT_EXIT_LOWER
                out_t = t_exit
            else:
                outcome = OUT_BLOWUP
                out_t = t_blow
            break

    if not last_recorded and t > ts[nrec - 1]:
        if nrec == ts.size:
            ts = _grow(ts, nrec + 1)
            xs = _grow(xs, nrec + 1)
            ys = _grow(ys, nrec + 1)
        ts[nrec] = t
        xs[nrec] = x
        ys[nrec] = y
        nrec += 1
    return (ts[:nrec].copy(), xs[:nrec].copy(), ys[:nrec].copy(), outcome, out_t,
            events, overflow, step_limited, steps, max_ratio)
