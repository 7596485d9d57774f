"""Compiled inner loops for the finite-difference solvers.

Everything here works on plain arrays so that numba can compile it; the
public wrappers live in pde_engine.
"""

import math

import numpy as np
from numba import njit

# left-end treatments of the moving-domain march
LEFT_FREE = 0
LEFT_DIRICHLET_TABLE = 1
LEFT_NEUMANN = 2

STATUS_OK = 0
STATUS_VANISHED = 1
STATUS_NONFINITE = 2
STATUS_EDGE = 3

PECLET_SWITCH = 2.0
SUBSTEP_FRACTION = 0.2


@njit(cache=True)
def coef(mean, modes, t, x, omega, L):
    v = mean
    tr = (t % omega) / omega
    xr = (x % L) / L
    for i in range(modes.shape[0]):
        ph = 2.0 * math.pi * (modes[i, 0] * tr + modes[i, 1] * xr)
        v += modes[i, 2] * math.cos(ph) + modes[i, 3] * math.sin(ph)
    return v


@njit(cache=True)
def react(code, k, am, amodes, bm, bmodes, t, x, u, omega, L):
    a = coef(am, amodes, t, x, omega, L)
    if code == 1:
        if u <= 0.0:
            return 0.0
        return a * u**k * (1.0 - u)
    b = coef(bm, bmodes, t, x, omega, L)
    return u * (a - b * u)


@njit(cache=True)
def thomas(sub, diag, sup, rhs, out, cp, dp):
    """Tridiagonal solve; sub[0] and sup[-1] are ignored."""
    n = diag.shape[0]
    cp[0] = sup[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / m if i < n - 1 else 0.0
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]


@njit(cache=True)
def table_value(tab, t_span, t_periodic, L_tab, x_off, t, x):
    """Bilinear lookup in a (nt+1, nx) table on [0, t_span] x periodic [x_off, x_off + L_tab)."""
    nt = tab.shape[0] - 1
    nx = tab.shape[1]
    if nt == 0:
        s = 0.0
        i0 = 0
        i1 = 0
    else:
        tt = t
        if t_periodic:
            tt = t % t_span
        s = tt / t_span * nt
        if s < 0.0:
            s = 0.0
        if s > nt:
            s = float(nt)
        i0 = int(math.floor(s))
        if i0 >= nt:
            i0 = nt - 1
        i1 = i0 + 1
        s = s - i0
    r = ((x - x_off) % L_tab) / L_tab * nx
    j0 = int(math.floor(r))
    fr = r - j0
    j0 = j0 % nx
    j1 = (j0 + 1) % nx
    v0 = tab[i0, j0] * (1.0 - fr) + tab[i0, j1] * fr
    v1 = tab[i1, j0] * (1.0 - fr) + tab[i1, j1] * fr
    return v0 * (1.0 - s) + v1 * s


@njit(cache=True)
def march_front(
    U, g, h, t0, nsteps, dt, d, mu, omega, L,
    code, k, am, amodes, bm, bmodes,
    left_mode, width, tab, t_span, t_periodic, L_tab, x_off,
    rec_every, snap_every, vanish_level, vanish_time,
):
    """Front-fixed march of u on [g(t), h(t)] with a free right end.

    U holds nodal values on y_j = j/n, j = 0..n, with x = g + y (h - g).
    The right end is always a Stefan front.  The left end is a second
    Stefan front (LEFT_FREE) or a window edge that follows h at fixed
    ``width`` with a Dirichlet value from ``tab`` or a Neumann condition.
    Returns recorded fronts, snapshots and a status code.
    """
    n = U.shape[0] - 1
    dy = 1.0 / n
    y = np.empty(n + 1)
    for j in range(n + 1):
        y[j] = j * dy
    sub = np.empty(n + 1)
    dia = np.empty(n + 1)
    sup = np.empty(n + 1)
    rhs = np.empty(n + 1)
    cp = np.empty(n + 1)
    dp = np.empty(n + 1)
    Un = np.empty(n + 1)

    nrec = nsteps // rec_every + 2
    rec_t = np.empty(nrec)
    rec_g = np.empty(nrec)
    rec_h = np.empty(nrec)
    rec_max = np.empty(nrec)
    nsnap = nsteps // snap_every + 2
    snaps = np.empty((nsnap, n + 1))
    snap_t = np.empty(nsnap)
    snap_g = np.empty(nsnap)
    snap_h = np.empty(nsnap)

    t = t0
    if left_mode != LEFT_FREE:
        g = h - width
        if left_mode == LEFT_DIRICHLET_TABLE:
            U[0] = table_value(tab, t_span, t_periodic, L_tab, x_off, t, g)
    umax = 0.0
    for j in range(n + 1):
        if U[j] > umax:
            umax = U[j]
    rec_t[0] = t
    rec_g[0] = g
    rec_h[0] = h
    rec_max[0] = umax
    snaps[0, :] = U
    snap_t[0] = t
    snap_g[0] = g
    snap_h[0] = h
    ir = 1
    isn = 1
    status = STATUS_OK
    below_since = -1.0
    max_speed = 0.0
    max_grad = 0.0
    steps_done = 0

    for step in range(nsteps):
        tau_left = dt
        while tau_left > 1e-15 * dt:
            w = h - g
            hp = mu * (4.0 * U[n - 1] - U[n - 2]) / (2.0 * dy * w)
            if left_mode == LEFT_FREE:
                gp = -mu * (4.0 * U[1] - U[2]) / (2.0 * dy * w)
            else:
                gp = hp
            grad = max(abs(hp), abs(gp)) / mu
            if grad > max_grad:
                max_grad = grad
            vmax = max(abs(hp), abs(gp))
            if vmax > max_speed:
                max_speed = vmax
            tau = tau_left
            lim = SUBSTEP_FRACTION * w * dy
            if vmax * tau > lim:
                tau = lim / vmax
                if tau_left - tau < 1e-3 * dt:
                    tau = tau_left
            # reaction at the old positions and time
            for j in range(n + 1):
                xj = g + y[j] * w
                rhs[j] = U[j] + tau * react(code, k, am, amodes, bm, bmodes, t, xj, U[j], omega, L)
            h = h + tau * hp
            g = g + tau * gp
            t = t + tau
            w = h - g
            D = d / (w * w * dy * dy)
            for j in range(1, n):
                v = ((1.0 - y[j]) * gp + y[j] * hp) / w
                if abs(v) * dy * w * w / d > PECLET_SWITCH:
                    if v > 0.0:
                        lo = D
                        hi = D + v / dy
                        mid = -2.0 * D - v / dy
                    else:
                        lo = D - v / dy
                        hi = D
                        mid = -2.0 * D + v / dy
                else:
                    lo = D - v / (2.0 * dy)
                    hi = D + v / (2.0 * dy)
                    mid = -2.0 * D
                sub[j] = -tau * lo
                sup[j] = -tau * hi
                dia[j] = 1.0 - tau * mid
            # right Stefan front
            sub[n] = 0.0
            dia[n] = 1.0
            sup[n] = 0.0
            rhs[n] = 0.0
            # left end
            sub[0] = 0.0
            if left_mode == LEFT_FREE:
                dia[0] = 1.0
                sup[0] = 0.0
                rhs[0] = 0.0
            elif left_mode == LEFT_DIRICHLET_TABLE:
                dia[0] = 1.0
                sup[0] = 0.0
                rhs[0] = table_value(tab, t_span, t_periodic, L_tab, x_off, t, g)
            else:
                dia[0] = 1.0 + 2.0 * tau * D
                sup[0] = -2.0 * tau * D
            thomas(sub, dia, sup, rhs, Un, cp, dp)
            for j in range(n + 1):
                U[j] = Un[j]
            tau_left -= tau
        t = t0 + (step + 1) * dt
        steps_done += 1
        umax = 0.0
        finite = True
        for j in range(n + 1):
            if not math.isfinite(U[j]):
                finite = False
            if U[j] > umax:
                umax = U[j]
        if not finite or not math.isfinite(h) or not math.isfinite(g):
            status = STATUS_NONFINITE
            break
        if (step + 1) % rec_every == 0:
            rec_t[ir] = t
            rec_g[ir] = g
            rec_h[ir] = h
            rec_max[ir] = umax
            ir += 1
        if (step + 1) % snap_every == 0:
            snaps[isn, :] = U
            snap_t[isn] = t
            snap_g[isn] = g
            snap_h[isn] = h
            isn += 1
        if vanish_level > 0.0:
            if umax < vanish_level:
                if below_since < 0.0:
                    below_since = t
                elif t - below_since >= vanish_time:
                    status = STATUS_VANISHED
                    break
            else:
                below_since = -1.0

    # always close the record with the final state
    if rec_t[ir - 1] != t:
        if ir < nrec:
            rec_t[ir] = t
            rec_g[ir] = g
            rec_h[ir] = h
            rec_max[ir] = umax
            ir += 1
    if snap_t[isn - 1] != t:
        if isn < nsnap:
            snaps[isn, :] = U
            snap_t[isn] = t
            snap_g[isn] = g
            snap_h[isn] = h
            isn += 1
    return (
        status, t, g, h, steps_done,
        rec_t[:ir], rec_g[:ir], rec_h[:ir], rec_max[:ir],
        snap_t[:isn], snap_g[:isn], snap_h[:isn], snaps[:isn],
        max_speed, max_grad,
    )


@njit(cache=True)
def march_fixed(
    U, x, t0, nsteps, dt, d, omega, L,
    code, k, am, amodes, bm, bmodes,
    snap_every, level, watch_left, watch_right, edge_frac,
    left_mode, tab, t_span, t_periodic, L_tab, x_off,
):
    """Implicit-diffusion / explicit-reaction march on a fixed uniform grid.

    Ends are homogeneous Neumann, except the left end when ``left_mode`` is
    LEFT_DIRICHLET_TABLE.  Signals STATUS_EDGE when a watched edge zone
    reaches ``level``.
    """
    n = U.shape[0] - 1
    dx = x[1] - x[0]
    D = d * dt / (dx * dx)
    sub = np.full(n + 1, -D)
    dia = np.full(n + 1, 1.0 + 2.0 * D)
    sup = np.full(n + 1, -D)
    sup[0] = -2.0 * D
    sub[n] = -2.0 * D
    if left_mode == LEFT_DIRICHLET_TABLE:
        dia[0] = 1.0
        sup[0] = 0.0
    rhs = np.empty(n + 1)
    cp = np.empty(n + 1)
    dp = np.empty(n + 1)
    nsnap = nsteps // snap_every + 2
    snaps = np.empty((nsnap, n + 1))
    snap_t = np.empty(nsnap)
    snaps[0, :] = U
    snap_t[0] = t0
    isn = 1
    nedge = int(math.ceil(edge_frac * n)) + 1
    t = t0
    status = STATUS_OK
    for step in range(nsteps):
        for j in range(n + 1):
            rhs[j] = U[j] + dt * react(code, k, am, amodes, bm, bmodes, t, x[j], U[j], omega, L)
        t = t0 + (step + 1) * dt
        if left_mode == LEFT_DIRICHLET_TABLE:
            rhs[0] = table_value(tab, t_span, t_periodic, L_tab, x_off, t, x[0])
        thomas(sub, dia, sup, rhs, U, cp, dp)
        finite = True
        for j in range(n + 1):
            if not math.isfinite(U[j]):
                finite = False
        if not finite:
            status = STATUS_NONFINITE
            break
        if (step + 1) % snap_every == 0:
            snaps[isn, :] = U
            snap_t[isn] = t
            isn += 1
        hit = False
        if watch_left:
            for j in range(nedge):
                if U[j] >= level:
                    hit = True
        if watch_right:
            for j in range(n + 1 - nedge, n + 1):
                if U[j] >= level:
                    hit = True
        if hit:
            status = STATUS_EDGE
            break
    if snap_t[isn - 1] != t and isn < nsnap:
        snaps[isn, :] = U
        snap_t[isn] = t
        isn += 1
    return status, t, snap_t[:isn], snaps[:isn]


@njit(cache=True)
def march_periodic(U, x0, dx, t0, nsteps, dt, d, omega, L, code, k, am, amodes, bm, bmodes):
    """Same implicit/explicit step on an x-periodic grid x_j = x0 + j dx.

    Returns all nsteps + 1 profiles; the cyclic system is solved with the
    Sherman-Morrison correction of a tridiagonal solve.
    """
    n = U.shape[0]
    D = d * dt / (dx * dx)
    out = np.empty((nsteps + 1, n))
    out[0, :] = U
    a = -D
    b = 1.0 + 2.0 * D
    gamma = -b
    sub = np.full(n, a)
    dia = np.full(n, b)
    sup = np.full(n, a)
    dia[0] = b - gamma
    dia[n - 1] = b - a * a / gamma
    cp = np.empty(n)
    dp = np.empty(n)
    uvec = np.zeros(n)
    uvec[0] = gamma
    uvec[n - 1] = a
    z = np.empty(n)
    thomas(sub, dia, sup, uvec, z, cp, dp)
    rhs = np.empty(n)
    yv = np.empty(n)
    v = U.copy()
    t = t0
    for step in range(nsteps):
        for j in range(n):
            rhs[j] = v[j] + dt * react(code, k, am, amodes, bm, bmodes, t, x0 + j * dx, v[j], omega, L)
        thomas(sub, dia, sup, rhs, yv, cp, dp)
        fac = (yv[0] + a * yv[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma)
        for j in range(n):
            v[j] = yv[j] - fac * z[j]
        t = t0 + (step + 1) * dt
        out[step + 1, :] = v
    return out
