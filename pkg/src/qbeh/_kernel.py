"""Compiled inner loop of the transient oracle.

The linear part of the circuit is reduced once per step size to a dense
inverse; the two diode junctions are the only nonlinear branches, so each
step solves a 2x2 Newton system on the junction voltages (Schur complement
of the companion-model MNA system).
"""
import math

import numpy as np
from numba import njit

EXP_LIMIT = 80.0

STATUS_OK = 0
STATUS_NEWTON = 1


@njit(cache=True)
def _limexp(x):
    if x > EXP_LIMIT:
        e = math.exp(EXP_LIMIT)
        return e * (1.0 + x - EXP_LIMIT), e
    e = math.exp(x)
    return e, e


@njit(cache=True)
def junction_iq(v, i_s, alpha, c_j0, v_j, fc, b_v, i_bv):
    """Return (current, conductance, charge, capacitance) of one junction."""
    e, de = _limexp(alpha * v)
    i = i_s * (e - 1.0)
    g = i_s * alpha * de
    if v < -b_v:
        eb, deb = _limexp(-alpha * (v + b_v))
        i -= i_bv * (eb - 1.0)
        g += i_bv * alpha * deb
    v_fc = fc * v_j
    if v < v_fc:
        r = math.sqrt(1.0 - v / v_j)
        q = 2.0 * c_j0 * v_j * (1.0 - r)
        c = c_j0 / r
    else:
        # linear capacitance continuation above fc*v_j
        r_fc = math.sqrt(1.0 - fc)
        q_fc = 2.0 * c_j0 * v_j * (1.0 - r_fc)
        k = c_j0 / (1.0 - fc) ** 1.5
        q = q_fc + k * ((1.0 - 1.5 * fc) * (v - v_fc) + 0.25 / v_j * (v * v - v_fc * v_fc))
        c = k * (1.0 - 1.5 * fc + 0.5 * v / v_j)
    return i, g, q, c


@njit(cache=True)
def _node(x, k):
    if k < 0:
        return 0.0
    return x[k]


@njit(cache=True)
def integrate(
    n_steps, t0_index, dt, be_first,
    ainv_tr, zm_tr, w_tr, ainv_be, zm_be, w_be,
    cap_p, cap_q, cap_c, cap_i,
    ind_p, ind_q, ind_l, ind_i,
    src_node, src_g, src_wave,
    jn_a, jn_c, jq, jicap,
    i_s, alpha, c_j0, v_j, fc, b_v, i_bv,
    x, newton_tol, newton_max_iter,
    rec_p, rec_q, rec_buf,
    out_node, r_l, c2_index,
):
    """Advance ``n_steps`` steps in place, starting after sample ``t0_index``.

    ``rec_buf[m, k]`` receives V(rec_p[m]) - V(rec_q[m]) after step k.
    Returns (status, failing step, mean load current, mean C2 current); the
    means are trapezoidal averages over the integrated interval.
    """
    n = x.shape[0]
    n_src = src_wave.shape[0]
    n_cap = cap_c.shape[0]
    n_ind = ind_l.shape[0]
    n_rec = rec_p.shape[0]
    rhs = np.zeros(n)
    x0 = np.zeros(n)
    cap_vold = np.zeros(n_cap)
    ind_vold = np.zeros(n_ind)
    vj = np.zeros(2)
    vj0 = np.zeros(2)
    hist = np.zeros(2)
    inl = np.zeros(2)
    gj = np.zeros(2)
    qnew = np.zeros(2)

    il_sum = 0.5 * _node(x, out_node) / r_l
    ic2_sum = 0.5 * cap_i[c2_index] if c2_index >= 0 else 0.0
    il_last = 0.0
    ic2_last = 0.0

    for step in range(n_steps):
        be = be_first and step == 0
        if be:
            ainv = ainv_be
            zm = zm_be
            w = w_be
            kc = 1.0 / dt
        else:
            ainv = ainv_tr
            zm = zm_tr
            w = w_tr
            kc = 2.0 / dt

        for r in range(n):
            rhs[r] = 0.0
        for k in range(n_cap):
            v_old = _node(x, cap_p[k]) - _node(x, cap_q[k])
            cap_vold[k] = v_old
            jh = kc * cap_c[k] * v_old
            if not be:
                jh += cap_i[k]
            if cap_p[k] >= 0:
                rhs[cap_p[k]] += jh
            if cap_q[k] >= 0:
                rhs[cap_q[k]] -= jh
        for k in range(n_ind):
            v_old = _node(x, ind_p[k]) - _node(x, ind_q[k])
            ind_vold[k] = v_old
            jh = ind_i[k]
            if not be:
                jh += dt / (2.0 * ind_l[k]) * v_old
            if ind_p[k] >= 0:
                rhs[ind_p[k]] -= jh
            if ind_q[k] >= 0:
                rhs[ind_q[k]] += jh
        rhs[src_node] += src_g * src_wave[(t0_index + step + 1) % n_src]

        for k in range(2):
            vj[k] = _node(x, jn_a[k]) - _node(x, jn_c[k])
            hist[k] = kc * jq[k]
            if not be:
                hist[k] += jicap[k]

        for r in range(n):
            acc = 0.0
            for c in range(n):
                acc += ainv[r, c] * rhs[c]
            x0[r] = acc
        for k in range(2):
            vj0[k] = _node(x0, jn_a[k]) - _node(x0, jn_c[k])

        converged = False
        for it in range(newton_max_iter):
            for k in range(2):
                i, g, q, c = junction_iq(vj[k], i_s, alpha, c_j0, v_j, fc, b_v, i_bv)
                inl[k] = i + kc * q - hist[k]
                gj[k] = g + kc * c
            f0 = vj[0] + w[0, 0] * inl[0] + w[0, 1] * inl[1] - vj0[0]
            f1 = vj[1] + w[1, 0] * inl[0] + w[1, 1] * inl[1] - vj0[1]
            j00 = 1.0 + w[0, 0] * gj[0]
            j01 = w[0, 1] * gj[1]
            j10 = w[1, 0] * gj[0]
            j11 = 1.0 + w[1, 1] * gj[1]
            det = j00 * j11 - j01 * j10
            d0 = (f0 * j11 - f1 * j01) / det
            d1 = (j00 * f1 - j10 * f0) / det
            if d0 > 0.1:
                d0 = 0.1
            elif d0 < -0.1:
                d0 = -0.1
            if d1 > 0.1:
                d1 = 0.1
            elif d1 < -0.1:
                d1 = -0.1
            vj[0] -= d0
            vj[1] -= d1
            if abs(d0) <= newton_tol and abs(d1) <= newton_tol:
                converged = True
                break
        if not converged:
            return STATUS_NEWTON, step, 0.0, 0.0

        for k in range(2):
            i, g, q, c = junction_iq(vj[k], i_s, alpha, c_j0, v_j, fc, b_v, i_bv)
            inl[k] = i + kc * q - hist[k]
            qnew[k] = q
        for r in range(n):
            x[r] = x0[r] - zm[r, 0] * inl[0] - zm[r, 1] * inl[1]
        for k in range(2):
            icap = kc * (qnew[k] - jq[k])
            if not be:
                icap -= jicap[k]
            jicap[k] = icap
            jq[k] = qnew[k]
        for k in range(n_cap):
            v_new = _node(x, cap_p[k]) - _node(x, cap_q[k])
            icap = kc * cap_c[k] * (v_new - cap_vold[k])
            if not be:
                icap -= cap_i[k]
            cap_i[k] = icap
        for k in range(n_ind):
            v_new = _node(x, ind_p[k]) - _node(x, ind_q[k])
            if be:
                ind_i[k] += dt / ind_l[k] * v_new
            else:
                ind_i[k] += dt / (2.0 * ind_l[k]) * (ind_vold[k] + v_new)

        for m in range(n_rec):
            rec_buf[m, step] = _node(x, rec_p[m]) - _node(x, rec_q[m])

        il_last = _node(x, out_node) / r_l
        il_sum += il_last
        if c2_index >= 0:
            ic2_last = cap_i[c2_index]
            ic2_sum += ic2_last

    il_sum -= 0.5 * il_last
    ic2_sum -= 0.5 * ic2_last
    return STATUS_OK, -1, il_sum / n_steps, ic2_sum / n_steps
