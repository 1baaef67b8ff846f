"""Compiled hot paths (numba) for the d=1 experiment drivers.

Everything here is a pure function of explicit scalars and arrays; no
global state.  The RNG primitives mirror rng.py bit for bit (the test
suite asserts parity).  Python reference implementations of the same
operations live in the envs/ modules and serve as oracles for these
kernels on small cases.

Conventions
-----------
* time is the second coordinate; d=1 throughout this module
* seeds are uint64; lattice coordinates are int64 and get reinterpreted
  (two's complement) when fed to the mixer
* eta/omega queries follow the contracts documented in envs/
"""

from __future__ import annotations

import numpy as np
from numba import njit

# ---------------------------------------------------------------- RNG core

_G = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

TAG_DERIVE = 0x01
TAG_WALK_U = 0x02
TAG_BOOL_CELL = 0x03
TAG_REN_NOISE = 0x04

# sub-streams inside a Boolean cell
CELL_COUNT = 0
CELL_BALL = 1

HUGE = np.int64(2**62)


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _w(x):
    return np.uint64(np.int64(x))


@njit(cache=True, inline="always")
def _feed(h, w):
    return _mix(h + _G + w)


@njit(cache=True, inline="always")
def _h_start(seed):
    return _mix(np.uint64(seed) ^ _G)


@njit(cache=True, inline="always")
def u01_4(seed, a, b, c, d):
    h = _h_start(seed)
    h = _feed(h, _w(a))
    h = _feed(h, _w(b))
    h = _feed(h, _w(c))
    h = _feed(h, _w(d))
    return (h >> np.uint64(11)) * 2.0**-53


@njit(cache=True, inline="always")
def derive1(seed, a):
    h = _h_start(seed)
    h = _feed(h, _w(TAG_DERIVE))
    h = _feed(h, _w(a))
    return h


@njit(cache=True, inline="always")
def derive2(seed, a, b):
    h = _h_start(seed)
    h = _feed(h, _w(TAG_DERIVE))
    h = _feed(h, _w(a))
    h = _feed(h, _w(b))
    return h


@njit(cache=True, inline="always")
def site_u(seed, x, t):
    return u01_4(seed, TAG_WALK_U, x, t, 0)


@njit(cache=True, inline="always")
def _cdf_draw(cdf, u):
    return np.searchsorted(cdf, u, side="right")


# ------------------------------------------------------------- jump kernel
# A kernel is packed as (keys, rows, default_row, disp): explicit rows for
# the states in `keys` (sorted), `default_row` for every other state, and
# `disp` the displacement attached to each column (lexicographic order).


@njit(cache=True, inline="always")
def kernel_step(state, keys, rows, default_row, disp, u):
    idx = np.searchsorted(keys, state)
    if idx < keys.shape[0] and keys[idx] == state:
        j = _cdf_draw(rows[idx], u)
    else:
        j = _cdf_draw(default_row, u)
    return disp[j]


# ---------------------------------------------------------- renewal  chains
# Noise triple at (x,t): draw index 0 -> stationary-law jump, 1 -> restart
# indicator, 2 -> residual-law jump.  The composed jump has the interarrival
# law itself.


@njit(cache=True, inline="always")
def ren_jump_W(seed, x, t, hat_cdf, y_cdf, gamma):
    uz = u01_4(seed, TAG_REN_NOISE, x, t, 1)
    if uz < gamma:
        return _cdf_draw(hat_cdf, u01_4(seed, TAG_REN_NOISE, x, t, 0))
    return _cdf_draw(y_cdf, u01_4(seed, TAG_REN_NOISE, x, t, 2))


@njit(cache=True, inline="always")
def ren_restart_flag(seed, x, t, gamma):
    return u01_4(seed, TAG_REN_NOISE, x, t, 1) < gamma


@njit(cache=True)
def ren_chain_from(seed, x, a, b, hat_cdf, y_cdf, gamma):
    """Chain value at time b for the copy started from 0 at time a <= b."""
    val = np.int64(0)
    for t in range(a + 1, b + 1):
        if val >= 1:
            val -= 1
        else:
            val = np.int64(ren_jump_W(seed, x, t, hat_cdf, y_cdf, gamma))
    return val


@njit(cache=True)
def ren_omega(seed, x, t, hat_cdf, y_cdf, gamma, k0, k_max, confirmations):
    """Stationary chain value at (x,t) by backward coalescence.

    Returns (value, depth_used); depth_used = -1 flags a censored query
    (no stabilization within k_max).
    """
    k = k0
    prev = ren_chain_from(seed, x, t - k, t, hat_cdf, y_cdf, gamma)
    conf = 0
    while conf < confirmations:
        k *= 2
        if k > k_max:
            return prev, np.int64(-1)
        cur = ren_chain_from(seed, x, t - k, t, hat_cdf, y_cdf, gamma)
        if cur == prev:
            conf += 1
        else:
            conf = 0
            prev = cur
    return prev, np.int64(k)


@njit(cache=True)
def ren_first_good(seed, x, lo, hi, hat_cdf, y_cdf, gamma, k0, k_max, conf):
    """First t in [lo, hi) with chain zero and a restart flag at t+1.

    Returns HUGE when there is none, -HUGE when the stationary value at lo
    could not be certified (censored).
    """
    if hi <= lo:
        return HUGE
    v, used = ren_omega(seed, x, lo, hat_cdf, y_cdf, gamma, k0, k_max, conf)
    if used < 0:
        return -HUGE
    t = lo
    while t < hi:
        if v == 0 and ren_restart_flag(seed, x, t + 1, gamma):
            return np.int64(t)
        if v >= 1:
            v -= 1
        else:
            v = np.int64(ren_jump_W(seed, x, t + 1, hat_cdf, y_cdf, gamma))
        t += 1
    return HUGE


@njit(cache=True, inline="always")
def _ceil_div(a, b):
    return -((-a) // b)


@njit(cache=True)
def ren_eta(seed, x0, t0, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf):
    """Truncated regeneration indicator at (x0,t0) for the renewal family.

    1 iff the anchor column regenerates exactly at t0 and every column
    within s regenerates strictly before the anchor's forward cone reaches
    it.  Returns -1 if any column query is censored.
    """
    v, used = ren_omega(seed, x0, t0, hat_cdf, y_cdf, gamma, k0, k_max, conf)
    if used < 0:
        return np.int64(-1)
    if v != 0 or not ren_restart_flag(seed, x0, t0 + 1, gamma):
        return np.int64(0)
    for k in range(1, s + 1):
        for sgn in range(-1, 2, 2):
            x = x0 + sgn * k
            lo = t0 - _ceil_div(k, R) + 1
            hi = t0 + (k - 1) // R + 1  # first integer NOT strictly below t0 + k/R
            g = ren_first_good(seed, x, lo, hi, hat_cdf, y_cdf, gamma, k0, k_max, conf)
            if g == -HUGE:
                return np.int64(-1)
            if g == HUGE:
                return np.int64(0)
    return np.int64(1)


@njit(cache=True)
def ren_first_regen_time(seed, x, x0, t0, R, horizon,
                         hat_cdf, y_cdf, gamma, k0, k_max, conf):
    """The column-x regeneration time scanned from the past-cone boundary.

    Scan starts at t0 for the anchor column, else at the boundary time
    t0 - ceil(|x-x0|/R) + 1.  Returns HUGE when the horizon is exceeded,
    -HUGE when censored.
    """
    k = x - x0 if x >= x0 else x0 - x
    if k == 0:
        lo = t0
    else:
        lo = t0 - _ceil_div(k, R) + 1
    return ren_first_good(seed, x, lo, lo + horizon,
                          hat_cdf, y_cdf, gamma, k0, k_max, conf)


@njit(cache=True)
def ren_trunc_pair(seed, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf):
    """(eta_s, eta_2s) at the origin on one realization (shared noise)."""
    e_s = ren_eta(seed, 0, 0, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
    if e_s != 1:
        return e_s, e_s  # eta_2s <= eta_s, so both vanish together
    for k in range(s + 1, 2 * s + 1):
        for sgn in range(-1, 2, 2):
            x = sgn * k
            lo = -_ceil_div(k, R) + 1
            hi = (k - 1) // R + 1
            g = ren_first_good(seed, x, lo, hi, hat_cdf, y_cdf, gamma, k0, k_max, conf)
            if g == -HUGE:
                return np.int64(1), np.int64(-1)
            if g == HUGE:
                return np.int64(1), np.int64(0)
    return np.int64(1), np.int64(1)


@njit(cache=True)
def ren_marginals(seed, n, t, hat_cdf, y_cdf, gamma, k0, k_max, conf):
    """Stationary chain values omega(x, t) for x = 0..n-1 (independent columns)."""
    out = np.empty(n, dtype=np.int64)
    for x in range(n):
        v, used = ren_omega(seed, x, t, hat_cdf, y_cdf, gamma, k0, k_max, conf)
        out[x] = v if used >= 0 else -1
    return out


@njit(cache=True)
def ren_block(block_seed, s, R, horizon, max_rejections,
              hat_cdf, y_cdf, gamma, k0, k_max, conf,
              kkeys, krows, kdefault, kdisp):
    """One regeneration block on the renewal environment.

    Rejection-samples fresh environments until the origin regenerates,
    then walks until the next regeneration point on the trajectory.
    Returns (t1, disp, censored, rejections, status); status 0 ok,
    1 acceptance failure, 2 censored environment query.
    """
    for rej in range(max_rejections):
        env_seed = derive1(block_seed, rej)
        e = ren_eta(env_seed, 0, 0, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
        if e == -1:
            return np.int64(0), np.int64(0), np.int64(0), np.int64(rej), np.int64(2)
        if e != 1:
            continue
        walk_seed = derive2(env_seed, TAG_WALK_U, 0)
        x = np.int64(0)
        for t in range(horizon):
            v, used = ren_omega(env_seed, x, t, hat_cdf, y_cdf, gamma, k0, k_max, conf)
            if used < 0:
                return np.int64(t), x, np.int64(0), np.int64(rej), np.int64(2)
            u = site_u(walk_seed, x, t)
            x += kernel_step(v, kkeys, krows, kdefault, kdisp, u)
            e2 = ren_eta(env_seed, x, t + 1, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
            if e2 == -1:
                return np.int64(t + 1), x, np.int64(0), np.int64(rej), np.int64(2)
            if e2 == 1:
                return np.int64(t + 1), x, np.int64(0), np.int64(rej), np.int64(0)
        return np.int64(horizon), x, np.int64(1), np.int64(rej), np.int64(0)
    return np.int64(0), np.int64(0), np.int64(0), np.int64(max_rejections), np.int64(1)


@njit(cache=True)
def ren_blocks(seed, i0, n, s, R, horizon, max_rejections,
               hat_cdf, y_cdf, gamma, k0, k_max, conf,
               kkeys, krows, kdefault, kdisp):
    t1 = np.empty(n, dtype=np.int64)
    disp = np.empty(n, dtype=np.int64)
    censored = np.empty(n, dtype=np.int64)
    rejections = np.empty(n, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    for i in range(n):
        a, b, c, d, e = ren_block(derive1(seed, i0 + i), s, R, horizon, max_rejections,
                                  hat_cdf, y_cdf, gamma, k0, k_max, conf,
                                  kkeys, krows, kdefault, kdisp)
        t1[i] = a
        disp[i] = b
        censored[i] = c
        rejections[i] = d
        status[i] = e
    return t1, disp, censored, rejections, status


@njit(cache=True)
def ren_direct_finals(seed, n_runs, t_final,
                      hat_cdf, y_cdf, gamma, k0, k_max, conf,
                      kkeys, krows, kdefault, kdisp):
    """Terminal walk positions of n_runs independent (environment, walk) pairs."""
    out = np.empty(n_runs, dtype=np.int64)
    ok = np.ones(n_runs, dtype=np.int64)
    for i in range(n_runs):
        env_seed = derive1(seed, i)
        walk_seed = derive2(env_seed, TAG_WALK_U, 0)
        x = np.int64(0)
        for t in range(t_final):
            v, used = ren_omega(env_seed, x, t, hat_cdf, y_cdf, gamma, k0, k_max, conf)
            if used < 0:
                ok[i] = 0
                break
            u = site_u(walk_seed, x, t)
            x += kernel_step(v, kkeys, krows, kdefault, kdisp, u)
        out[i] = x
    return out, ok


# ---------------------------------------------------------- boolean  model
# Per unit cell (cx, ct): a Poisson(lam) count off one sub-stream, then per
# ball three payload draws (two center offsets, one radius uniform).  Radii
# above rho_max are thinned out; the thinned tail mass is reported by the
# python layer.  radius_kind: 0 Pareto(rho0, beta), 1 deterministic rho0.


@njit(cache=True, inline="always")
def cell_count(seed, cx, ct, lam):
    if lam <= 0.0:
        return 0
    limit = np.exp(-lam)
    prod = 1.0
    k = 0
    while True:
        prod *= u01_4(seed, TAG_BOOL_CELL, cx, ct, CELL_COUNT * 1000000 + k)
        if prod < limit:
            return k
        k += 1


@njit(cache=True, inline="always")
def cell_ball(seed, cx, ct, j, rho0, beta, radius_kind):
    u1 = u01_4(seed, TAG_BOOL_CELL, cx, ct, CELL_BALL * 1000000 + 3 * j)
    u2 = u01_4(seed, TAG_BOOL_CELL, cx, ct, CELL_BALL * 1000000 + 3 * j + 1)
    u3 = u01_4(seed, TAG_BOOL_CELL, cx, ct, CELL_BALL * 1000000 + 3 * j + 2)
    bx = cx + u1
    bt = ct + u2
    if radius_kind == 1:
        rho = rho0
    else:
        rho = rho0 * (1.0 - u3) ** (-1.0 / beta)
    return bx, bt, rho


@njit(cache=True)
def bool_omega(seed, zx, zt, lam, rho0, beta, radius_kind, rho_max):
    """Occupancy at lattice site z: 1 iff some retained ball contains z."""
    m = int(np.ceil(rho_max))
    for cx in range(zx - m, zx + m + 1):
        for ct in range(zt - m, zt + m + 1):
            n = cell_count(seed, cx, ct, lam)
            for j in range(n):
                bx, bt, rho = cell_ball(seed, cx, ct, j, rho0, beta, radius_kind)
                if rho > rho_max:
                    continue
                dx = bx - zx
                dt = bt - zt
                if dx * dx + dt * dt < rho * rho:
                    return np.int64(1)
    return np.int64(0)


@njit(cache=True)
def ball_crosses_cone(bx, bt, rho, zx, zt, R, future):
    """Does the open ball contain a lattice point of the cone rooted at z?

    Per time slice the cone section is the integer interval of half-width
    R * |t - zt|; the closest lattice point of that interval to the ball
    slice center is the coordinatewise clamp of its rounding, which
    minimizes the distance exactly.
    """
    t_lo = int(np.ceil(bt - rho))
    t_hi = int(np.floor(bt + rho))
    for t in range(t_lo, t_hi + 1):
        if future:
            if t < zt:
                continue
            half = R * (t - zt)
        else:
            if t > zt:
                continue
            half = R * (zt - t)
        dt = t - bt
        r2 = rho * rho - dt * dt
        if r2 <= 0.0:
            continue
        px = np.floor(bx + 0.5)
        if px < zx - half:
            px = float(zx - half)
        elif px > zx + half:
            px = float(zx + half)
        dx = px - bx
        if dx * dx < r2:
            return True
    return False


@njit(cache=True, inline="always")
def ball_crosses_both(bx, bt, rho, zx, zt, R):
    if not ball_crosses_cone(bx, bt, rho, zx, zt, R, False):
        return False
    return ball_crosses_cone(bx, bt, rho, zx, zt, R, True)


@njit(cache=True)
def bool_eta(seed, zx, zt, s, R, lam, rho0, beta, radius_kind, rho_max):
    """Truncated regeneration indicator: no ball centered within s/2 of z
    (sup norm, strict) touches lattice points of both cones at z."""
    half = 0.5 * s
    m = int(np.ceil(half)) + 1
    for cx in range(zx - m, zx + m + 1):
        for ct in range(zt - m, zt + m + 1):
            n = cell_count(seed, cx, ct, lam)
            for j in range(n):
                bx, bt, rho = cell_ball(seed, cx, ct, j, rho0, beta, radius_kind)
                if rho > rho_max:
                    continue
                adx = bx - zx if bx >= zx else zx - bx
                adt = bt - zt if bt >= zt else zt - bt
                if adx >= half or adt >= half:
                    continue
                if ball_crosses_both(bx, bt, rho, zx, zt, R):
                    return np.int64(0)
    return np.int64(1)


@njit(cache=True)
def bool_trunc_pair(seed, s, R, lam, rho0, beta, radius_kind, rho_max):
    """(eta_s, eta_2s) at the origin on shared balls."""
    e_s = bool_eta(seed, 0, 0, s, R, lam, rho0, beta, radius_kind, rho_max)
    if e_s == 0:
        return np.int64(0), np.int64(0)
    half_in = 0.5 * s
    half_out = float(s)
    m = s + 1
    for cx in range(-m, m + 1):
        for ct in range(-m, m + 1):
            n = cell_count(seed, cx, ct, lam)
            for j in range(n):
                bx, bt, rho = cell_ball(seed, cx, ct, j, rho0, beta, radius_kind)
                if rho > rho_max:
                    continue
                adx = bx if bx >= 0 else -bx
                adt = bt if bt >= 0 else -bt
                sup = adx if adx >= adt else adt
                if sup < half_in or sup >= half_out:
                    continue
                if ball_crosses_both(bx, bt, rho, 0, 0, R):
                    return np.int64(1), np.int64(0)
    return np.int64(1), np.int64(1)


@njit(cache=True)
def bool_collect_balls(seed, cx_lo, cx_hi, ct_lo, ct_hi,
                       lam, rho0, beta, radius_kind, rho_max):
    """All retained balls with centers in the given cell block (arrays)."""
    cap = 64
    out = np.empty((cap, 3), dtype=np.float64)
    k = 0
    for cx in range(cx_lo, cx_hi + 1):
        for ct in range(ct_lo, ct_hi + 1):
            n = cell_count(seed, cx, ct, lam)
            for j in range(n):
                bx, bt, rho = cell_ball(seed, cx, ct, j, rho0, beta, radius_kind)
                if rho > rho_max:
                    continue
                if k == cap:
                    cap *= 2
                    grown = np.empty((cap, 3), dtype=np.float64)
                    grown[:k] = out[:k]
                    out = grown
                out[k, 0] = bx
                out[k, 1] = bt
                out[k, 2] = rho
                k += 1
    return out[:k]


@njit(cache=True)
def bool_eta_box_bits(seed, x_lo, x_hi, t_lo, t_hi, s, R,
                      lam, rho0, beta, radius_kind, rho_max):
    """eta_s over a box of sites, computed ball-by-ball.

    A ball can only flip sites with |z - center|_inf below s/2, and
    crossing both cones forces |z_t - c_t| <= rho and
    |z_x - c_x| <= (2R+1) rho, so each ball touches a bounded patch.
    """
    width = x_hi - x_lo + 1
    height = t_hi - t_lo + 1
    bits = np.ones((width, height), dtype=np.uint8)
    half = 0.5 * s
    m = int(np.ceil(half)) + 1
    balls = bool_collect_balls(seed, x_lo - m, x_hi + m, t_lo - m, t_hi + m,
                               lam, rho0, beta, radius_kind, rho_max)
    for b in range(balls.shape[0]):
        bx = balls[b, 0]
        bt = balls[b, 1]
        rho = balls[b, 2]
        rx = (2 * R + 1) * rho
        zx_lo = max(x_lo, int(np.ceil(bx - min(rx, half))))
        zx_hi = min(x_hi, int(np.floor(bx + min(rx, half))))
        zt_lo = max(t_lo, int(np.ceil(bt - min(rho, half))))
        zt_hi = min(t_hi, int(np.floor(bt + min(rho, half))))
        for zx in range(zx_lo, zx_hi + 1):
            adx = bx - zx if bx >= zx else zx - bx
            if adx >= half:
                continue
            for zt in range(zt_lo, zt_hi + 1):
                if bits[zx - x_lo, zt - t_lo] == 0:
                    continue
                adt = bt - zt if bt >= zt else zt - bt
                if adt >= half:
                    continue
                if ball_crosses_both(bx, bt, rho, zx, zt, R):
                    bits[zx - x_lo, zt - t_lo] = 0
    return bits


@njit(cache=True)
def bool_first_regen_on_column(seed, L, s, R, lam, rho0, beta, radius_kind, rho_max):
    """First tau in [0, L) with eta_s((0,tau)) = 1, else L.

    Processes cell rows in increasing time and keeps per-tau kill flags, so
    typical realizations touch only the rows around the first regeneration
    point.  Equivalent to scanning bool_eta site by site.
    """
    half = 0.5 * s
    m = int(np.ceil(half)) + 1
    killed = np.zeros(L, dtype=np.uint8)
    tau = 0
    ct = -m - 1
    # a site tau is decided once every cell row ct <= tau + m was ingested
    while tau < L:
        need = tau + m
        while ct < need:
            ct += 1
            for cx in range(-m, m + 1):
                n = cell_count(seed, cx, ct, lam)
                for j in range(n):
                    bx, bt, rho = cell_ball(seed, cx, ct, j, rho0, beta, radius_kind)
                    if rho > rho_max:
                        continue
                    adx = bx if bx >= 0 else -bx
                    if adx >= half:
                        continue
                    z_lo = max(0, int(np.ceil(bt - min(rho, half))))
                    z_hi = min(L - 1, int(np.floor(bt + min(rho, half))))
                    for zt in range(z_lo, z_hi + 1):
                        if killed[zt]:
                            continue
                        adt = bt - zt if bt >= zt else zt - bt
                        if adt >= half:
                            continue
                        if ball_crosses_both(bx, bt, rho, 0, zt, R):
                            killed[zt] = 1
        if not killed[tau]:
            return np.int64(tau)
        tau += 1
    return np.int64(L)


@njit(cache=True)
def bool_block(block_seed, s, R, horizon, max_rejections,
               lam, rho0, beta, radius_kind, rho_max,
               kkeys, krows, kdefault, kdisp):
    """One regeneration block on the Boolean environment (see ren_block)."""
    for rej in range(max_rejections):
        env_seed = derive1(block_seed, rej)
        if bool_eta(env_seed, 0, 0, s, R, lam, rho0, beta, radius_kind, rho_max) != 1:
            continue
        walk_seed = derive2(env_seed, TAG_WALK_U, 0)
        x = np.int64(0)
        for t in range(horizon):
            v = bool_omega(env_seed, x, t, lam, rho0, beta, radius_kind, rho_max)
            u = site_u(walk_seed, x, t)
            x += kernel_step(v, kkeys, krows, kdefault, kdisp, u)
            if bool_eta(env_seed, x, t + 1, s, R, lam, rho0, beta, radius_kind, rho_max) == 1:
                return np.int64(t + 1), x, np.int64(0), np.int64(rej), np.int64(0)
        return np.int64(horizon), x, np.int64(1), np.int64(rej), np.int64(0)
    return np.int64(0), np.int64(0), np.int64(0), np.int64(max_rejections), np.int64(1)


@njit(cache=True)
def bool_blocks(seed, i0, n, s, R, horizon, max_rejections,
                lam, rho0, beta, radius_kind, rho_max,
                kkeys, krows, kdefault, kdisp):
    t1 = np.empty(n, dtype=np.int64)
    disp = np.empty(n, dtype=np.int64)
    censored = np.empty(n, dtype=np.int64)
    rejections = np.empty(n, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    for i in range(n):
        a, b, c, d, e = bool_block(derive1(seed, i0 + i), s, R, horizon, max_rejections,
                                   lam, rho0, beta, radius_kind, rho_max,
                                   kkeys, krows, kdefault, kdisp)
        t1[i] = a
        disp[i] = b
        censored[i] = c
        rejections[i] = d
        status[i] = e
    return t1, disp, censored, rejections, status


@njit(cache=True)
def bool_occupancy_grid(seed, x_lo, x_hi, t_lo, t_hi,
                        lam, rho0, beta, radius_kind, rho_max):
    """Occupancy over a box, rasterized ball by ball (matches bool_omega)."""
    width = x_hi - x_lo + 1
    height = t_hi - t_lo + 1
    grid = np.zeros((width, height), dtype=np.uint8)
    m = int(np.ceil(rho_max))
    balls = bool_collect_balls(seed, x_lo - m, x_hi + m, t_lo - m, t_hi + m,
                               lam, rho0, beta, radius_kind, rho_max)
    for b in range(balls.shape[0]):
        bx = balls[b, 0]
        bt = balls[b, 1]
        rho = balls[b, 2]
        zx_lo = max(x_lo, int(np.ceil(bx - rho)))
        zx_hi = min(x_hi, int(np.floor(bx + rho)))
        for zx in range(zx_lo, zx_hi + 1):
            dx = bx - zx
            rem = rho * rho - dx * dx
            if rem <= 0.0:
                continue
            half = np.sqrt(rem)
            zt_a = max(t_lo, int(np.ceil(bt - half)))
            zt_b = min(t_hi, int(np.floor(bt + half)))
            for zt in range(zt_a, zt_b + 1):
                dt = bt - zt
                if dx * dx + dt * dt < rho * rho:
                    grid[zx - x_lo, zt - t_lo] = 1
    return grid


# ----------------------------------------------------- threat counting / DP


@njit(cache=True)
def threat_raster(trap_x, trap_t, H, x_lo, x_hi, t, out):
    """Mark sites (x, t) threatened within horizon H by any listed trap."""
    out[:] = 0
    for i in range(trap_x.shape[0]):
        dt = trap_t[i] - t
        if dt < 0 or dt > H:
            continue
        a = max(x_lo, trap_x[i] - dt)
        b = min(x_hi, trap_x[i] + dt)
        for x in range(a, b + 1):
            out[x - x_lo] = 1


@njit(cache=True)
def min_threats_dp(trap_x, trap_t, T, H, R, start_lo, start_hi):
    """Minimum number of H-spaced threatened times over range-R paths of
    length T starting in [start_lo, start_hi] x {0}.

    Backward dynamic programming over time layers 0..T; threat hits are
    only charged at times that are multiples of H.
    """
    x_lo = start_lo - R * T
    x_hi = start_hi + R * T
    width = x_hi - x_lo + 1
    thr = np.zeros(width, dtype=np.uint8)
    val = np.zeros(width, dtype=np.int64)
    nxt = np.zeros(width, dtype=np.int64)
    for t in range(T, -1, -1):
        if t == T:
            nxt[:] = 0
        else:
            for i in range(width):
                best = HUGE
                a = max(0, i - R)
                b = min(width - 1, i + R)
                for j in range(a, b + 1):
                    if val[j] < best:
                        best = val[j]
                nxt[i] = best
        if t % H == 0:
            threat_raster(trap_x, trap_t, H, x_lo, x_hi, t, thr)
            for i in range(width):
                nxt[i] += thr[i]
        val[:] = nxt[:]
    best = HUGE
    for x in range(start_lo, start_hi + 1):
        if val[x - x_lo] < best:
            best = val[x - x_lo]
    return best


@njit(cache=True)
def min_threats_brute(trap_x, trap_t, T, H, R, start_lo, start_hi):
    """Exhaustive enumeration over all step sequences (oracle for the DP)."""
    base = 2 * R + 1
    n_paths = base ** T
    best = HUGE
    x_lo = start_lo - R * T
    x_hi = start_hi + R * T
    width = x_hi - x_lo + 1
    n_layers = T // H + 1
    thr = np.zeros((n_layers, width), dtype=np.uint8)
    for li in range(n_layers):
        threat_raster(trap_x, trap_t, H, x_lo, x_hi, li * H, thr[li])
    for start in range(start_lo, start_hi + 1):
        for code in range(n_paths):
            c = code
            x = start
            m = np.int64(thr[0, x - x_lo])
            for t in range(1, T + 1):
                x += (c % base) - R
                c //= base
                if t % H == 0:
                    m += thr[t // H, x - x_lo]
                if m >= best:
                    break
            if m < best:
                best = m
    return best


@njit(cache=True)
def fall_on_trap_walks(walk_seed, n_walks, JH, trap_bits, grid,
                       x_lo, t_lo, kkeys, krows, kdefault, kdisp):
    """Count walks from the origin that avoid every trap through time JH.

    trap_bits and grid are (width, height) rasters over the window with
    offsets (x_lo, t_lo); walks share per-site noise within one seed.
    """
    survived = 0
    for w in range(n_walks):
        seed = derive1(walk_seed, w)
        x = np.int64(0)
        hit = False
        for t in range(JH):
            state = grid[x - x_lo, t - t_lo]
            u = site_u(seed, x, t)
            x += kernel_step(state, kkeys, krows, kdefault, kdisp, u)
            if trap_bits[x - x_lo, t + 1 - t_lo] == 1:
                hit = True
                break
        if not hit:
            survived += 1
    return survived


# ------------------------------------------------- column scans (void runs)


@njit(cache=True)
def ren_first_regen_on_column(seed, L, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf):
    """First tau in [0, L) with eta = 1 on the renewal family, else L;
    -1 when a chain query is censored."""
    for tau in range(L):
        e = ren_eta(seed, 0, tau, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
        if e == -1:
            return np.int64(-1)
        if e == 1:
            return np.int64(tau)
    return np.int64(L)


# -------------------------------------------------- box functional  machinery
# field ids: 0 regeneration indicator, 1 vacant (omega == 0), 2 occupied
# (omega >= 1), 3 restart flag (renewal noise, past-cone statistics only).
# reducer ids: 0 all_zero, 1 any_one, 2 parity, 3 count >= threshold.


@njit(cache=True, inline="always")
def _reduce_accumulate(reducer, acc, bit):
    # returns (acc, decided, value); early decision for all_zero / any_one
    if reducer == 0:
        if bit == 1:
            return acc, True, np.int64(0)
        return acc, False, np.int64(1)
    if reducer == 1:
        if bit == 1:
            return acc, True, np.int64(1)
        return acc, False, np.int64(0)
    return acc + bit, False, np.int64(0)


@njit(cache=True, inline="always")
def _reduce_final(reducer, acc, threshold):
    if reducer == 0:
        return np.int64(1)
    if reducer == 1:
        return np.int64(0)
    if reducer == 2:
        return np.int64(acc & 1)
    return np.int64(1 if acc >= threshold else 0)


@njit(cache=True)
def ren_site_bit(seed, field, x, t, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf):
    if field == 0:
        return ren_eta(seed, x, t, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
    if field == 3:
        return np.int64(1 if ren_restart_flag(seed, x, t, gamma) else 0)
    v, used = ren_omega(seed, x, t, hat_cdf, y_cdf, gamma, k0, k_max, conf)
    if used < 0:
        return np.int64(-1)
    if field == 1:
        return np.int64(1 if v == 0 else 0)
    return np.int64(1 if v >= 1 else 0)


@njit(cache=True)
def ren_box_stat(seed, field, reducer, threshold, x_lo, x_hi, t_lo, t_hi,
                 s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf):
    acc = np.int64(0)
    for x in range(x_lo, x_hi + 1):
        for t in range(t_lo, t_hi + 1):
            bit = ren_site_bit(seed, field, x, t, s, R,
                               hat_cdf, y_cdf, gamma, k0, k_max, conf)
            if bit == -1:
                return np.int64(-1)
            acc, decided, value = _reduce_accumulate(reducer, acc, bit)
            if decided:
                return value
    return _reduce_final(reducer, acc, threshold)


@njit(cache=True)
def bool_site_bit(seed, field, x, t, s, R, lam, rho0, beta, radius_kind, rho_max):
    if field == 0:
        return bool_eta(seed, x, t, s, R, lam, rho0, beta, radius_kind, rho_max)
    v = bool_omega(seed, x, t, lam, rho0, beta, radius_kind, rho_max)
    if field == 1:
        return np.int64(1 - v)
    return v


@njit(cache=True)
def bool_box_stat(seed, field, reducer, threshold, x_lo, x_hi, t_lo, t_hi,
                  s, R, lam, rho0, beta, radius_kind, rho_max):
    acc = np.int64(0)
    for x in range(x_lo, x_hi + 1):
        for t in range(t_lo, t_hi + 1):
            bit = bool_site_bit(seed, field, x, t, s, R,
                                lam, rho0, beta, radius_kind, rho_max)
            acc, decided, value = _reduce_accumulate(reducer, acc, bit)
            if decided:
                return value
    return _reduce_final(reducer, acc, threshold)


@njit(cache=True)
def ren_eta_box_bits(seed, x_lo, x_hi, t_lo, t_hi, s, R,
                     hat_cdf, y_cdf, gamma, k0, k_max, conf):
    """Regeneration indicators over a box, sharing per-column good times.

    Returns (bits, status); status -1 flags a censored chain query.
    """
    pad_t = (s + R - 1) // R + 1
    col_lo = x_lo - s
    col_hi = x_hi + s
    wa = t_lo - pad_t
    wb = t_hi + pad_t
    ncols = col_hi - col_lo + 1
    wt = wb - wa + 1
    pref = np.zeros((ncols, wt + 1), dtype=np.int64)  # prefix counts of good times
    for ci in range(ncols):
        x = col_lo + ci
        v, used = ren_omega(seed, x, wa, hat_cdf, y_cdf, gamma, k0, k_max, conf)
        if used < 0:
            return np.zeros((1, 1), dtype=np.uint8), np.int64(-1)
        for t in range(wa, wb + 1):
            good = 1 if (v == 0 and ren_restart_flag(seed, x, t + 1, gamma)) else 0
            pref[ci, t - wa + 1] = pref[ci, t - wa] + good
            if v >= 1:
                v -= 1
            else:
                v = np.int64(ren_jump_W(seed, x, t + 1, hat_cdf, y_cdf, gamma))
    bits = np.zeros((x_hi - x_lo + 1, t_hi - t_lo + 1), dtype=np.uint8)
    for x0 in range(x_lo, x_hi + 1):
        c0 = x0 - col_lo
        for t0 in range(t_lo, t_hi + 1):
            # anchor good exactly at t0
            if pref[c0, t0 - wa + 1] - pref[c0, t0 - wa] == 0:
                continue
            ok = True
            for k in range(1, s + 1):
                lo = t0 - (k + R - 1) // R + 1
                hi = t0 + (k - 1) // R  # inclusive upper bound
                for sgn in range(-1, 2, 2):
                    ci = c0 + sgn * k
                    if pref[ci, hi - wa + 1] - pref[ci, lo - wa] == 0:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                bits[x0 - x_lo, t0 - t_lo] = 1
    return bits, np.int64(0)


# --------------------------------------------------- paired sample drivers


@njit(cache=True)
def ren_pair_counts(pair_seed, n, conditioned, max_rej,
                    f1_field, f1_red, f1_thr, f1_box,
                    f2_field, f2_red, f2_thr, f2_box,
                    s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf):
    """2x2 joint counts of two box statistics over n fresh realizations.

    conditioned != 0 rejection-samples realizations with a regeneration
    point at the origin.  Returns (counts, status); status 1 means the
    acceptance cap was hit, -1 a censored query.
    """
    counts = np.zeros((2, 2), dtype=np.int64)
    for i in range(n):
        env_seed = np.uint64(0)
        found = False
        for rej in range(max_rej):
            env_seed = derive2(pair_seed, i, rej)
            if conditioned == 0:
                found = True
                break
            e = ren_eta(env_seed, 0, 0, s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
            if e == -1:
                return counts, np.int64(-1)
            if e == 1:
                found = True
                break
        if not found:
            return counts, np.int64(1)
        a = ren_box_stat(env_seed, f1_field, f1_red, f1_thr,
                         f1_box[0], f1_box[1], f1_box[2], f1_box[3],
                         s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
        if a == -1:
            return counts, np.int64(-1)
        b = ren_box_stat(env_seed, f2_field, f2_red, f2_thr,
                         f2_box[0], f2_box[1], f2_box[2], f2_box[3],
                         s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
        if b == -1:
            return counts, np.int64(-1)
        counts[a, b] += 1
    return counts, np.int64(0)


@njit(cache=True)
def bool_pair_counts(pair_seed, n, conditioned, max_rej,
                     f1_field, f1_red, f1_thr, f1_box,
                     f2_field, f2_red, f2_thr, f2_box,
                     s, R, lam, rho0, beta, radius_kind, rho_max):
    counts = np.zeros((2, 2), dtype=np.int64)
    for i in range(n):
        env_seed = np.uint64(0)
        found = False
        for rej in range(max_rej):
            env_seed = derive2(pair_seed, i, rej)
            if conditioned == 0:
                found = True
                break
            if bool_eta(env_seed, 0, 0, s, R, lam, rho0, beta, radius_kind, rho_max) == 1:
                found = True
                break
        if not found:
            return counts, np.int64(1)
        a = bool_box_stat(env_seed, f1_field, f1_red, f1_thr,
                          f1_box[0], f1_box[1], f1_box[2], f1_box[3],
                          s, R, lam, rho0, beta, radius_kind, rho_max)
        b = bool_box_stat(env_seed, f2_field, f2_red, f2_thr,
                          f2_box[0], f2_box[1], f2_box[2], f2_box[3],
                          s, R, lam, rho0, beta, radius_kind, rho_max)
        counts[a, b] += 1
    return counts, np.int64(0)


@njit(cache=True)
def bool_direct_finals(seed, n_runs, t_final, lam, rho0, beta, radius_kind, rho_max,
                       kkeys, krows, kdefault, kdisp):
    out = np.empty(n_runs, dtype=np.int64)
    for i in range(n_runs):
        env_seed = derive1(seed, i)
        walk_seed = derive2(env_seed, TAG_WALK_U, 0)
        x = np.int64(0)
        for t in range(t_final):
            v = bool_omega(env_seed, x, t, lam, rho0, beta, radius_kind, rho_max)
            u = site_u(walk_seed, x, t)
            x += kernel_step(v, kkeys, krows, kdefault, kdisp, u)
        out[i] = x
    return out


@njit(cache=True, inline="always")
def _reduce_bits_2d(bits, reducer, threshold):
    acc = np.int64(0)
    for i in range(bits.shape[0]):
        for j in range(bits.shape[1]):
            b = np.int64(bits[i, j])
            if reducer == 0:
                if b == 1:
                    return np.int64(0)
            elif reducer == 1:
                if b == 1:
                    return np.int64(1)
            else:
                acc += b
    return _reduce_final(reducer, acc, threshold)


@njit(cache=True)
def ren_decouple_counts(pair_seed, n, red_a, thr_a, box_a, red_b, thr_b, box_b,
                        s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf):
    """Joint counts of two regeneration-field box statistics, evaluated on
    shared realizations via the column-sharing box evaluator."""
    counts = np.zeros((2, 2), dtype=np.int64)
    for i in range(n):
        env_seed = derive1(pair_seed, i)
        bits_a, st_a = ren_eta_box_bits(env_seed, box_a[0], box_a[1], box_a[2], box_a[3],
                                        s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
        if st_a < 0:
            return counts, np.int64(-1)
        bits_b, st_b = ren_eta_box_bits(env_seed, box_b[0], box_b[1], box_b[2], box_b[3],
                                        s, R, hat_cdf, y_cdf, gamma, k0, k_max, conf)
        if st_b < 0:
            return counts, np.int64(-1)
        a = _reduce_bits_2d(bits_a, red_a, thr_a)
        b = _reduce_bits_2d(bits_b, red_b, thr_b)
        counts[a, b] += 1
    return counts, np.int64(0)


@njit(cache=True)
def bool_decouple_counts(pair_seed, n, red_a, thr_a, box_a, red_b, thr_b, box_b,
                         s, R, lam, rho0, beta, radius_kind, rho_max):
    counts = np.zeros((2, 2), dtype=np.int64)
    for i in range(n):
        env_seed = derive1(pair_seed, i)
        bits_a = bool_eta_box_bits(env_seed, box_a[0], box_a[1], box_a[2], box_a[3],
                                   s, R, lam, rho0, beta, radius_kind, rho_max)
        bits_b = bool_eta_box_bits(env_seed, box_b[0], box_b[1], box_b[2], box_b[3],
                                   s, R, lam, rho0, beta, radius_kind, rho_max)
        a = _reduce_bits_2d(bits_a, red_a, thr_a)
        b = _reduce_bits_2d(bits_b, red_b, thr_b)
        counts[a, b] += 1
    return counts, np.int64(0)


@njit(cache=True)
def ren_walk_trace(seed, t_final, hat_cdf, y_cdf, gamma, k0, k_max, conf,
                   kkeys, krows, kdefault, kdisp):
    """One renewal-environment walk; returns per-step (state, step) arrays."""
    env_seed = derive1(seed, 0)
    walk_seed = derive2(env_seed, TAG_WALK_U, 0)
    states = np.empty(t_final, dtype=np.int64)
    steps = np.empty(t_final, dtype=np.int64)
    x = np.int64(0)
    for t in range(t_final):
        v, used = ren_omega(env_seed, x, t, hat_cdf, y_cdf, gamma, k0, k_max, conf)
        states[t] = v if used >= 0 else -1
        u = site_u(walk_seed, x, t)
        dy = kernel_step(v, kkeys, krows, kdefault, kdisp, u)
        steps[t] = dy
        x += dy
    return states, steps
