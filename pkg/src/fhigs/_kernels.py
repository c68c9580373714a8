"""Compiled fixed-step integration loops.

One loop serves three flavours selected by ``kind``:

* ``PWL``    the three-mode linear system; mode switches are located by
             bisection and the step is completed in the new mode.
* ``EPDS``   the projected vector field evaluated at every RK4 stage; the
             active constraint is tracked with the same event location and
             x_h is renormalised onto the active line after each step.
* ``LINEAR`` one mode held throughout (no switching), used for LTI baselines.

State layout: ``z = [x_h, x_v1, x_v2, x_p, x_f]`` where ``x_f`` belongs to the
parallel error filter of the closed loop.
"""

import math

import numpy as np

from ._jit import njit
from .element import (apex_mode_core, inward, mode_core, project_on_line, project_rate_core,
                      violation_core)

PWL = 0
EPDS = 1
LINEAR = 2

OK = 0
CHATTERING = 1
SECTOR = 2
DIVERGED = 3
EVENT_OVERFLOW = 4


@njit(cache=True, inline="always")
def input_eval(t, amp, w, ph, step_h, step_t0, step_rise):
    e = 0.0
    ed = 0.0
    for i in range(amp.shape[0]):
        arg = w[i] * t + ph[i]
        e += amp[i] * math.sin(arg)
        ed += amp[i] * w[i] * math.cos(arg)
    if step_h != 0.0 and t > step_t0:
        if step_rise <= 0.0 or t >= step_t0 + step_rise:
            e += step_h
        else:
            u = (t - step_t0) / step_rise
            e += step_h * 0.5 * (1.0 - math.cos(math.pi * u))
            ed += step_h * 0.5 * math.pi / step_rise * math.sin(math.pi * u)
    return e, ed


@njit(cache=True, inline="always")
def _dot(a, x, lo):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * x[lo + i]
    return s


@njit(cache=True, inline="always")
def signals(z, t, sysv, inp):
    """Return (e, e_dot, v1, v2, v2_dot, f_h, y)."""
    (n1, n2, npl, k1, k2, wh, alpha, nm,
     A1, B1, C1, D1, A2, B2, C2, D2, Ap, Bp, Cp, Am, Bm, Af, Bf, Cf, Df) = sysv
    amp, w, ph, sh, st0, srise = inp
    nc = 1 + n1 + n2
    r, rd = input_eval(t, amp, w, ph, sh, st0, srise)
    y = 0.0
    e = r
    ed = rd
    if npl > 0:
        y = _dot(Cp, z, nc)
        cpap = 0.0
        for i in range(npl):
            cpap += Cp[i] * _dot(Ap[i], z, nc)
        e = r - y
        ed = rd - cpap
    v1 = _dot(C1, z, 1) + D1 * e
    v2 = _dot(C2, z, 1 + n1) + D2 * e
    v2d = D2 * ed
    for i in range(n2):
        v2d += C2[i] * (_dot(A2[i], z, 1 + n1) + B2[i] * e)
    f_h = -alpha * z[0] + wh * v1
    return e, ed, v1, v2, v2d, f_h, y


@njit(cache=True, inline="always")
def deriv(kind, mode, orient, z, t, sysv, inp, out):
    (n1, n2, npl, k1, k2, wh, alpha, nm,
     A1, B1, C1, D1, A2, B2, C2, D2, Ap, Bp, Cp, Am, Bm, Af, Bf, Cf, Df) = sysv
    nc = 1 + n1 + n2
    e, ed, v1, v2, v2d, f_h, y = signals(z, t, sysv, inp)
    if kind == EPDS:
        if mode == 0:
            # stage states past a line continue the interior field, so the
            # arrival check sees the crossing and bisection stays monotone
            if violation_core(z[0], v2, k1, k2) > 0.0:
                rate = f_h
            else:
                rate, line = project_rate_core(z[0], v2, v2d, f_h, k1, k2)
        else:
            # while sliding the active line and its orientation are frozen over
            # the sub-step: the one-sided projection is continuous up to the
            # release, whereas re-deriving the orientation at v2 = 0 is not
            rate = project_on_line(f_h, v2d, k1 if mode == 1 else k2, orient)
        out[0] = rate
        for i in range(n1):
            out[1 + i] = _dot(A1[i], z, 1) + B1[i] * e
        for i in range(n2):
            out[1 + n1 + i] = _dot(A2[i], z, 1 + n1) + B2[i] * e
    else:
        for i in range(nc):
            s = Bm[mode, i, 0] * e + Bm[mode, i, 1] * ed
            for j in range(nc):
                s += Am[mode, i, j] * z[j]
            out[i] = s
    if npl > 0:
        lo = nc + npl
        u = z[0] + Df * e + _dot(Cf, z, lo)
        for i in range(npl):
            out[nc + i] = _dot(Ap[i], z, nc) + Bp[i] * u
        for i in range(nm):
            out[lo + i] = _dot(Af[i], z, lo) + Bf[i] * e


@njit(cache=True)
def rk4(kind, mode, orient, z, t, h, sysv, inp, buf):
    k1 = buf[0]
    k2 = buf[1]
    k3 = buf[2]
    k4 = buf[3]
    tmp = buf[4]
    res = buf[5]
    n = z.shape[0]
    deriv(kind, mode, orient, z, t, sysv, inp, k1)
    for i in range(n):
        tmp[i] = z[i] + 0.5 * h * k1[i]
    deriv(kind, mode, orient, tmp, t + 0.5 * h, sysv, inp, k2)
    for i in range(n):
        tmp[i] = z[i] + 0.5 * h * k2[i]
    deriv(kind, mode, orient, tmp, t + 0.5 * h, sysv, inp, k3)
    for i in range(n):
        tmp[i] = z[i] + h * k3[i]
    deriv(kind, mode, orient, tmp, t + h, sysv, inp, k4)
    for i in range(n):
        res[i] = z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return res


@njit(cache=True)
def _scale(x_h, v2):
    return max(1.0, abs(x_h), abs(v2))


@njit(cache=True)
def event_fired(kind, mode, z, t, sysv, inp):
    """True when the trajectory has left the current mode's region."""
    k1 = sysv[3]
    k2 = sysv[4]
    e, ed, v1, v2, v2d, f_h, y = signals(z, t, sysv, inp)
    if mode == 0:
        if violation_core(z[0], v2, k1, k2) > 1e-12 * _scale(z[0], v2):
            return True
        # the projected field stops x_h at the line, so arrival shows up as an
        # active gain condition rather than as a violation
        return kind == EPDS and mode_core(z[0], v2, v2d, f_h, k1, k2) != 0
    if mode == 1:
        return v2 * (k1 * v2d - f_h) <= 0.0
    return v2 * (k2 * v2d - f_h) >= 0.0


@njit(cache=True)
def _apex(x_h, v2, k1, k2):
    return abs(x_h) <= 1e-8 and (k2 - k1) * abs(v2) <= 1e-8


@njit(cache=True)
def mode_after_event(mode, v2_start, z, t, sysv, inp):
    """Snap onto the reached line when entering a gain mode and pick the
    next mode."""
    k1 = sysv[3]
    k2 = sysv[4]
    e, ed, v1, v2, v2d, f_h, y = signals(z, t, sysv, inp)
    if mode == 0:
        g1 = z[0] - k1 * v2
        g2 = z[0] - k2 * v2
        line = 1 if abs(g1) <= abs(g2) else 2
        k = k1 if line == 1 else k2
        z[0] = k * v2
        if _apex(z[0], v2, k1, k2):
            return apex_mode_core(v2d, f_h, k1, k2)
        if line == 1 and v2 * (k1 * v2d - f_h) > 0.0:
            return 1
        if line == 2 and v2 * (k2 * v2d - f_h) < 0.0:
            return 2
        return 0
    crossed = (v2_start > 0.0) != (v2 > 0.0)
    if crossed or _apex(z[0], v2, k1, k2):
        return apex_mode_core(v2d, f_h, k1, k2)
    return 0


@njit(cache=True)
def _snap(mode, z, t, sysv, inp):
    """Put x_h back on the active line; return the correction size."""
    e, ed, v1, v2, v2d, f_h, y = signals(z, t, sysv, inp)
    target = sysv[3] * v2 if mode == 1 else sysv[4] * v2
    d = abs(z[0] - target)
    z[0] = target
    return d


@njit(cache=True)
def simulate(kind, z0, t0, h, n_steps, decim, ev_tol, mode0, sysv, inp,
             max_events, diverge_limit):
    n1 = sysv[0]
    n2 = sysv[1]
    k1 = sysv[3]
    k2 = sysv[4]
    nz = z0.shape[0]
    n_rec = n_steps // decim + 1
    rec_t = np.empty(n_rec)
    rec_sig = np.empty((n_rec, 6))  # e, ed, v1, v2, x_h, y
    rec_mode = np.empty(n_rec, dtype=np.int64)
    rec_z = np.empty((n_rec, nz))
    ev_t = np.empty(max_events)
    ev_from = np.empty(max_events, dtype=np.int64)
    ev_to = np.empty(max_events, dtype=np.int64)
    n_ev = 0
    buf = np.empty((6, nz))
    z = z0.copy()
    t = t0
    mode = mode0
    status = OK
    fail_t = math.nan
    max_renorm = 0.0
    max_sector = 0.0

    ir = 0
    for k in range(n_steps + 1):
        if k % decim == 0 and ir < n_rec:
            e, ed, v1, v2, v2d, f_h, y = signals(z, t, sysv, inp)
            rec_t[ir] = t
            rec_sig[ir, 0] = e
            rec_sig[ir, 1] = ed
            rec_sig[ir, 2] = v1
            rec_sig[ir, 3] = v2
            rec_sig[ir, 4] = z[0]
            rec_sig[ir, 5] = y
            rec_mode[ir] = mode
            for j in range(nz):
                rec_z[ir, j] = z[j]
            ir += 1
        if k == n_steps:
            break
        t_end = t0 + (k + 1) * h

        # complete the base step, possibly across several mode switches
        sub_h = h
        count = 0
        level_budget = 10
        while t_end - t > 1e-15 * max(1.0, abs(t_end)):
            tau = min(sub_h, t_end - t)
            orient = 0.0
            if kind == EPDS and mode != 0:
                e, ed, v1, v2, v2d, f_h, y = signals(z, t, sysv, inp)
                if v2 == 0.0:
                    v2 = v2d
                orient = inward(mode, v2)
            znew = rk4(kind, mode, orient, z, t, tau, sysv, inp, buf)
            if kind == LINEAR or not event_fired(kind, mode, znew, t + tau, sysv, inp):
                for j in range(nz):
                    z[j] = znew[j]
                t = t + tau
                if kind == EPDS and mode != 0:
                    max_renorm = max(max_renorm, _snap(mode, z, t, sysv, inp))
                continue
            e, ed, v1, v2_start, v2d, f_h, y = signals(z, t, sysv, inp)
            lo = 0.0
            hi = tau
            while hi - lo > ev_tol:
                mid = 0.5 * (lo + hi)
                zm = rk4(kind, mode, orient, z, t, mid, sysv, inp, buf)
                if event_fired(kind, mode, zm, t + mid, sysv, inp):
                    hi = mid
                else:
                    lo = mid
            znew = rk4(kind, mode, orient, z, t, hi, sysv, inp, buf)
            for j in range(nz):
                z[j] = znew[j]
            t = t + hi
            new_mode = mode_after_event(mode, v2_start, z, t, sysv, inp)
            if n_ev >= max_events:
                status = EVENT_OVERFLOW
                fail_t = t
                break
            ev_t[n_ev] = t
            ev_from[n_ev] = mode
            ev_to[n_ev] = new_mode
            n_ev += 1
            mode = new_mode
            count += 1
            if count > level_budget:
                if sub_h <= h / 64.0:
                    status = CHATTERING
                    fail_t = t
                    break
                sub_h = 0.5 * sub_h
                level_budget += 10
        if status != OK:
            break
        t = t_end

        e, ed, v1, v2, v2d, f_h, y = signals(z, t, sysv, inp)
        if kind != LINEAR:
            prod = (z[0] - k1 * v2) * (z[0] - k2 * v2)
            sc = _scale(z[0], v2)
            max_sector = max(max_sector, prod / (sc * sc))
            if prod > 1e-9 * sc * sc:
                status = SECTOR
                fail_t = t
                break
        big = 0.0
        for j in range(nz):
            big = max(big, abs(z[j]))
        if big > diverge_limit or not np.isfinite(big):
            status = DIVERGED
            fail_t = t
            break

    return (rec_t[:ir], rec_sig[:ir], rec_mode[:ir], rec_z[:ir],
            ev_t[:n_ev], ev_from[:n_ev], ev_to[:n_ev],
            status, fail_t, max_renorm, max_sector, mode)
