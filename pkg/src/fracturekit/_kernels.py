"""Numba kernels: lane-batched cell loops and 2D material point functions.

Cells are processed in lanes of width W (vectorization over elements); all
per-lane branches are plain selects so every lane runs the same instruction
stream.  Scratch buffers keep the lane axis last and contiguous.  Gather
and scatter walk cells in ascending order, so results are independent of
the lane width up to nothing at all: the accumulation order is identical.

Scaling conventions: evaluation buffers hold reference-cell derivatives
(divide by h for physical gradients); quadrature fields destined for the
gradient slot of the transpose contraction carry w_q * h, value-slot fields
carry w_q * h^2.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# material point helpers (symmetric 2x2 tensors as component triples)


@njit(inline="always")
def _eig2s(a11, a22, a12):
    """Closed-form eigensystem; v1 = (c, s), v2 = (-s, c), ev1 >= ev2."""
    m = 0.5 * (a11 + a22)
    dh = 0.5 * (a11 - a22)
    r = math.sqrt(dh * dh + a12 * a12)
    ev1 = m + r
    ev2 = m - r
    if dh <= 0.0:
        vx = a12
        vy = r - dh
    else:
        vx = r + dh
        vy = a12
    nrm = math.sqrt(vx * vx + vy * vy)
    if nrm > 0.0:
        c = vx / nrm
        s = vy / nrm
    else:
        c = 1.0
        s = 0.0
    return ev1, ev2, c, s


@njit(inline="always")
def _dpos2s(ev1, ev2, c, s, scale, d11, d22, d12):
    """Derivative of A -> A^+ given the eigensystem of A, direction dA.

    Eigenvalues at zero take the tensile branch; gaps below
    1e-12 * scale use the zero rule of the pseudo-inverse.
    """
    t0 = d11 * c + d12 * s
    t1 = d12 * c + d22 * s
    dl1 = c * t0 + s * t1
    dl2 = s * s * d11 - 2.0 * s * c * d12 + c * c * d22
    dl1p = dl1 if ev1 >= 0.0 else 0.0
    dl2p = dl2 if ev2 >= 0.0 else 0.0
    l1p = ev1 if ev1 > 0.0 else 0.0
    l2p = ev2 if ev2 > 0.0 else 0.0
    gap = ev1 - ev2
    if gap > 1e-12 * scale:
        alpha = (c * t1 - s * t0) / gap
    else:
        alpha = 0.0
    rot = alpha * (l1p - l2p)
    o11 = dl1p * c * c + dl2p * s * s - 2.0 * rot * s * c
    o22 = dl1p * s * s + dl2p * c * c + 2.0 * rot * s * c
    o12 = (dl1p - dl2p) * c * s + rot * (c * c - s * s)
    return o11, o22, o12


@njit(inline="always")
def _sigplus2s(lam, mu, tre, ev1, ev2, c, s):
    trp = tre if tre > 0.0 else 0.0
    l1p = ev1 if ev1 > 0.0 else 0.0
    l2p = ev2 if ev2 > 0.0 else 0.0
    sp11 = lam * trp + 2.0 * mu * (l1p * c * c + l2p * s * s)
    sp22 = lam * trp + 2.0 * mu * (l1p * s * s + l2p * c * c)
    sp12 = 2.0 * mu * (l1p - l2p) * c * s
    return sp11, sp22, sp12


@njit(inline="always")
def _esplus2s(lam, mu, tre, ev1, ev2):
    trp = tre if tre > 0.0 else 0.0
    l1p = ev1 if ev1 > 0.0 else 0.0
    l2p = ev2 if ev2 > 0.0 else 0.0
    return 0.5 * lam * trp * trp + mu * (l1p * l1p + l2p * l2p)


@njit(inline="always")
def _scale2s(e11, e22, e12):
    frob = math.sqrt(e11 * e11 + e22 * e22 + 2.0 * e12 * e12)
    return frob if frob > 1.0 else 1.0


@njit(inline="always")
def _dsig_split_s(lam, mu, g, e11, e22, e12, d11, d22, d12):
    """g * dsigma+ + dsigma- and sigma+ : de at one material point."""
    ev1, ev2, c, s = _eig2s(e11, e22, e12)
    tre = e11 + e22
    o11, o22, o12 = _dpos2s(ev1, ev2, c, s, _scale2s(e11, e22, e12), d11, d22, d12)
    trde = d11 + d22
    tt = 0.0 if tre < 0.0 else trde
    dp11 = lam * tt + 2.0 * mu * o11
    dp22 = lam * tt + 2.0 * mu * o22
    dp12 = 2.0 * mu * o12
    f11 = lam * trde + 2.0 * mu * d11
    f22 = lam * trde + 2.0 * mu * d22
    f12 = 2.0 * mu * d12
    sp11, sp22, sp12 = _sigplus2s(lam, mu, tre, ev1, ev2, c, s)
    spde = sp11 * d11 + sp22 * d22 + 2.0 * sp12 * d12
    return (
        g * dp11 + (f11 - dp11),
        g * dp22 + (f22 - dp22),
        g * dp12 + (f12 - dp12),
        spde,
    )


# ---------------------------------------------------------------------------
# public lane-batched material kernels


@njit(cache=True)
def eig2_lanes(a11, a22, a12):
    n = a11.shape[0]
    ev1 = np.empty(n)
    ev2 = np.empty(n)
    c = np.empty(n)
    s = np.empty(n)
    for l in range(n):
        ev1[l], ev2[l], c[l], s[l] = _eig2s(a11[l], a22[l], a12[l])
    return ev1, ev2, c, s


@njit(cache=True)
def positive_part_lanes(a11, a22, a12):
    n = a11.shape[0]
    p11 = np.empty(n)
    p22 = np.empty(n)
    p12 = np.empty(n)
    for l in range(n):
        ev1, ev2, c, s = _eig2s(a11[l], a22[l], a12[l])
        l1p = ev1 if ev1 > 0.0 else 0.0
        l2p = ev2 if ev2 > 0.0 else 0.0
        p11[l] = l1p * c * c + l2p * s * s
        p22[l] = l1p * s * s + l2p * c * c
        p12[l] = (l1p - l2p) * c * s
    return p11, p22, p12


@njit(cache=True)
def d_positive_part_lanes(a11, a22, a12, d11, d22, d12):
    n = a11.shape[0]
    o11 = np.empty(n)
    o22 = np.empty(n)
    o12 = np.empty(n)
    for l in range(n):
        ev1, ev2, c, s = _eig2s(a11[l], a22[l], a12[l])
        o11[l], o22[l], o12[l] = _dpos2s(
            ev1, ev2, c, s, _scale2s(a11[l], a22[l], a12[l]), d11[l], d22[l], d12[l]
        )
    return o11, o22, o12


@njit(cache=True)
def stress_split_lanes(e11, e22, e12, lam, mu):
    n = e11.shape[0]
    sp11 = np.empty(n)
    sp22 = np.empty(n)
    sp12 = np.empty(n)
    sm11 = np.empty(n)
    sm22 = np.empty(n)
    sm12 = np.empty(n)
    for l in range(n):
        ev1, ev2, c, s = _eig2s(e11[l], e22[l], e12[l])
        tre = e11[l] + e22[l]
        a, b, d = _sigplus2s(lam, mu, tre, ev1, ev2, c, s)
        sp11[l] = a
        sp22[l] = b
        sp12[l] = d
        sm11[l] = lam * tre + 2.0 * mu * e11[l] - a
        sm22[l] = lam * tre + 2.0 * mu * e22[l] - b
        sm12[l] = 2.0 * mu * e12[l] - d
    return sp11, sp22, sp12, sm11, sm22, sm12


@njit(cache=True)
def d_stress_plus_lanes(e11, e22, e12, de11, de22, de12, lam, mu):
    n = e11.shape[0]
    dp11 = np.empty(n)
    dp22 = np.empty(n)
    dp12 = np.empty(n)
    for l in range(n):
        ev1, ev2, c, s = _eig2s(e11[l], e22[l], e12[l])
        o11, o22, o12 = _dpos2s(
            ev1, ev2, c, s, _scale2s(e11[l], e22[l], e12[l]), de11[l], de22[l], de12[l]
        )
        tre = e11[l] + e22[l]
        tt = 0.0 if tre < 0.0 else de11[l] + de22[l]
        dp11[l] = lam * tt + 2.0 * mu * o11
        dp22[l] = lam * tt + 2.0 * mu * o22
        dp12[l] = 2.0 * mu * o12
    return dp11, dp22, dp12


@njit(cache=True)
def energy_split_lanes(e11, e22, e12, lam, mu):
    n = e11.shape[0]
    ep = np.empty(n)
    em = np.empty(n)
    for l in range(n):
        ev1, ev2, c, s = _eig2s(e11[l], e22[l], e12[l])
        tre = e11[l] + e22[l]
        ep[l] = _esplus2s(lam, mu, tre, ev1, ev2)
        trm = tre if tre < 0.0 else 0.0
        l1m = ev1 if ev1 < 0.0 else 0.0
        l2m = ev2 if ev2 < 0.0 else 0.0
        em[l] = 0.5 * lam * trm * trm + mu * (l1m * l1m + l2m * l2m)
    return ep, em


# ---------------------------------------------------------------------------
# sum-factorization building blocks


@njit(inline="always")
def _gather(vec, conn, b0, nl, n1, W, cout):
    for l in range(nl):
        k = 0
        for b in range(n1):
            for a in range(n1):
                cout[b, a, l] = vec[conn[b0 + l, k]]
                k += 1
    for l in range(nl, W):
        for b in range(n1):
            for a in range(n1):
                cout[b, a, l] = 0.0


@njit(inline="always")
def _scatter_add(out, conn, b0, nl, n1, W, rin):
    for l in range(nl):
        k = 0
        for b in range(n1):
            for a in range(n1):
                out[conn[b0 + l, k]] += rin[b, a, l]
                k += 1


@njit(inline="always")
def _fwd_x(M, cin, tout, n1, q, W):
    # tout[b, iq, :] = sum_a M[iq, a] * cin[b, a, :]
    for b in range(n1):
        for iq in range(q):
            for l in range(W):
                tout[b, iq, l] = 0.0
            for a in range(n1):
                m = M[iq, a]
                for l in range(W):
                    tout[b, iq, l] += m * cin[b, a, l]


@njit(inline="always")
def _fwd_y(M, tin, qout, n1, q, W):
    # qout[jq, iq, :] = sum_b M[jq, b] * tin[b, iq, :]
    for jq in range(q):
        for iq in range(q):
            for l in range(W):
                qout[jq, iq, l] = 0.0
            for b in range(n1):
                m = M[jq, b]
                for l in range(W):
                    qout[jq, iq, l] += m * tin[b, iq, l]


@njit(inline="always")
def _bwd_y(M, qin, tout, n1, q, W):
    # tout[b, iq, :] = sum_jq M[jq, b] * qin[jq, iq, :]
    for b in range(n1):
        for iq in range(q):
            for l in range(W):
                tout[b, iq, l] = 0.0
            for jq in range(q):
                m = M[jq, b]
                for l in range(W):
                    tout[b, iq, l] += m * qin[jq, iq, l]


@njit(inline="always")
def _bwd_x_add(M, tin, rout, n1, q, W):
    # rout[b, a, :] += sum_iq M[iq, a] * tin[b, iq, :]
    for b in range(n1):
        for a in range(n1):
            for iq in range(q):
                m = M[iq, a]
                for l in range(W):
                    rout[b, a, l] += m * tin[b, iq, l]


@njit(inline="always")
def _zero_local(r, n1, W):
    for b in range(n1):
        for a in range(n1):
            for l in range(W):
                r[b, a, l] = 0.0


# ---------------------------------------------------------------------------
# residual


@njit(cache=True)
def residual_kernel(conn, h, N, D, w, ux, uy, ph, pht,
                    lam, mu, gc, eps, kappa, miehe, W,
                    out_x, out_y, out_p):
    n_cells = conn.shape[0]
    q = N.shape[0]
    n1 = N.shape[1]
    inv_h = 1.0 / h
    gce = gc / eps

    cu = np.empty((n1, n1, W))
    cv = np.empty((n1, n1, W))
    cp = np.empty((n1, n1, W))
    ct = np.empty((n1, n1, W))
    tx = np.empty((n1, q, W))
    td = np.empty((n1, q, W))
    t1 = np.empty((n1, q, W))
    gxu = np.empty((q, q, W))
    gyu = np.empty((q, q, W))
    gxv = np.empty((q, q, W))
    gyv = np.empty((q, q, W))
    vp = np.empty((q, q, W))
    gxp = np.empty((q, q, W))
    gyp = np.empty((q, q, W))
    vt = np.empty((q, q, W))
    s11 = np.empty((q, q, W))
    s22 = np.empty((q, q, W))
    s12 = np.empty((q, q, W))
    fv = np.empty((q, q, W))
    fgx = np.empty((q, q, W))
    fgy = np.empty((q, q, W))
    ru = np.empty((n1, n1, W))
    rv = np.empty((n1, n1, W))
    rp = np.empty((n1, n1, W))

    for b0 in range(0, n_cells, W):
        nl = min(W, n_cells - b0)
        _gather(ux, conn, b0, nl, n1, W, cu)
        _gather(uy, conn, b0, nl, n1, W, cv)
        _gather(ph, conn, b0, nl, n1, W, cp)
        _gather(pht, conn, b0, nl, n1, W, ct)

        _fwd_x(N, cu, tx, n1, q, W)
        _fwd_x(D, cu, td, n1, q, W)
        _fwd_y(D, tx, gyu, n1, q, W)
        _fwd_y(N, td, gxu, n1, q, W)

        _fwd_x(N, cv, tx, n1, q, W)
        _fwd_x(D, cv, td, n1, q, W)
        _fwd_y(D, tx, gyv, n1, q, W)
        _fwd_y(N, td, gxv, n1, q, W)

        _fwd_x(N, cp, tx, n1, q, W)
        _fwd_x(D, cp, td, n1, q, W)
        _fwd_y(N, tx, vp, n1, q, W)
        _fwd_y(D, tx, gyp, n1, q, W)
        _fwd_y(N, td, gxp, n1, q, W)

        _fwd_x(N, ct, tx, n1, q, W)
        _fwd_y(N, tx, vt, n1, q, W)

        for jq in range(q):
            for iq in range(q):
                wq = w[jq] * w[iq]
                wg = wq * h
                wv = wq * h * h
                for l in range(W):
                    e11 = gxu[jq, iq, l] * inv_h
                    e22 = gyv[jq, iq, l] * inv_h
                    e12 = 0.5 * (gyu[jq, iq, l] + gxv[jq, iq, l]) * inv_h
                    tre = e11 + e22
                    phv = vp[jq, iq, l]
                    ptv = vt[jq, iq, l]
                    g_t = (1.0 - kappa) * ptv * ptv + kappa
                    if miehe:
                        ev1, ev2, c, s = _eig2s(e11, e22, e12)
                        sp11, sp22, sp12 = _sigplus2s(lam, mu, tre, ev1, ev2, c, s)
                        sm11 = lam * tre + 2.0 * mu * e11 - sp11
                        sm22 = lam * tre + 2.0 * mu * e22 - sp22
                        sm12 = 2.0 * mu * e12 - sp12
                        esp = _esplus2s(lam, mu, tre, ev1, ev2)
                    else:
                        sp11 = lam * tre + 2.0 * mu * e11
                        sp22 = lam * tre + 2.0 * mu * e22
                        sp12 = 2.0 * mu * e12
                        sm11 = 0.0
                        sm22 = 0.0
                        sm12 = 0.0
                        esp = 0.5 * lam * tre * tre + mu * (
                            e11 * e11 + e22 * e22 + 2.0 * e12 * e12
                        )
                    s11[jq, iq, l] = (g_t * sp11 + sm11) * wg
                    s22[jq, iq, l] = (g_t * sp22 + sm22) * wg
                    s12[jq, iq, l] = (g_t * sp12 + sm12) * wg
                    dg = 2.0 * (1.0 - kappa) * phv
                    fv[jq, iq, l] = (dg * esp - gce * (1.0 - phv)) * wv
                    fgx[jq, iq, l] = gc * eps * gxp[jq, iq, l] * inv_h * wg
                    fgy[jq, iq, l] = gc * eps * gyp[jq, iq, l] * inv_h * wg

        _zero_local(ru, n1, W)
        _bwd_y(N, s11, t1, n1, q, W)
        _bwd_x_add(D, t1, ru, n1, q, W)
        _bwd_y(D, s12, t1, n1, q, W)
        _bwd_x_add(N, t1, ru, n1, q, W)

        _zero_local(rv, n1, W)
        _bwd_y(N, s12, t1, n1, q, W)
        _bwd_x_add(D, t1, rv, n1, q, W)
        _bwd_y(D, s22, t1, n1, q, W)
        _bwd_x_add(N, t1, rv, n1, q, W)

        _zero_local(rp, n1, W)
        _bwd_y(N, fv, t1, n1, q, W)
        _bwd_x_add(N, t1, rp, n1, q, W)
        _bwd_y(N, fgx, t1, n1, q, W)
        _bwd_x_add(D, t1, rp, n1, q, W)
        _bwd_y(D, fgy, t1, n1, q, W)
        _bwd_x_add(N, t1, rp, n1, q, W)

        _scatter_add(out_x, conn, b0, nl, n1, W, ru)
        _scatter_add(out_y, conn, b0, nl, n1, W, rv)
        _scatter_add(out_p, conn, b0, nl, n1, W, rp)


# ---------------------------------------------------------------------------
# linearization-point cache


@njit(cache=True)
def cache_kernel(conn, h, N, D, w, ux, uy, ph, pht,
                 lam, mu, gc, eps, kappa, miehe, build_tensors,
                 ce11, ce22, ce12, cgt, cdg, cesp, cpc, cC, cgs):
    n_cells = conn.shape[0]
    q = N.shape[0]
    n1 = N.shape[1]
    inv_h = 1.0 / h
    gce = gc / eps
    gdd = 2.0 * (1.0 - kappa)
    W = 1

    cu = np.empty((n1, n1, W))
    cv = np.empty((n1, n1, W))
    cp = np.empty((n1, n1, W))
    ct = np.empty((n1, n1, W))
    tx = np.empty((n1, q, W))
    td = np.empty((n1, q, W))
    gxu = np.empty((q, q, W))
    gyu = np.empty((q, q, W))
    gxv = np.empty((q, q, W))
    gyv = np.empty((q, q, W))
    vp = np.empty((q, q, W))
    vt = np.empty((q, q, W))

    for cidx in range(n_cells):
        _gather(ux, conn, cidx, 1, n1, W, cu)
        _gather(uy, conn, cidx, 1, n1, W, cv)
        _gather(ph, conn, cidx, 1, n1, W, cp)
        _gather(pht, conn, cidx, 1, n1, W, ct)

        _fwd_x(N, cu, tx, n1, q, W)
        _fwd_x(D, cu, td, n1, q, W)
        _fwd_y(D, tx, gyu, n1, q, W)
        _fwd_y(N, td, gxu, n1, q, W)

        _fwd_x(N, cv, tx, n1, q, W)
        _fwd_x(D, cv, td, n1, q, W)
        _fwd_y(D, tx, gyv, n1, q, W)
        _fwd_y(N, td, gxv, n1, q, W)

        _fwd_x(N, cp, tx, n1, q, W)
        _fwd_y(N, tx, vp, n1, q, W)
        _fwd_x(N, ct, tx, n1, q, W)
        _fwd_y(N, tx, vt, n1, q, W)

        for jq in range(q):
            for iq in range(q):
                e11 = gxu[jq, iq, 0] * inv_h
                e22 = gyv[jq, iq, 0] * inv_h
                e12 = 0.5 * (gyu[jq, iq, 0] + gxv[jq, iq, 0]) * inv_h
                tre = e11 + e22
                phv = vp[jq, iq, 0]
                ptv = vt[jq, iq, 0]
                g_t = (1.0 - kappa) * ptv * ptv + kappa
                dg = gdd * phv
                if miehe:
                    ev1, ev2, c, s = _eig2s(e11, e22, e12)
                    esp = _esplus2s(lam, mu, tre, ev1, ev2)
                else:
                    esp = 0.5 * lam * tre * tre + mu * (
                        e11 * e11 + e22 * e22 + 2.0 * e12 * e12
                    )
                ce11[cidx, jq, iq] = e11
                ce22[cidx, jq, iq] = e22
                ce12[cidx, jq, iq] = e12
                cgt[cidx, jq, iq] = g_t
                cdg[cidx, jq, iq] = dg
                cesp[cidx, jq, iq] = esp
                cpc[cidx, jq, iq] = gdd * esp + gce
                if build_tensors:
                    if miehe:
                        a0, b0_, c0, sp0 = _dsig_split_s(lam, mu, g_t, e11, e22, e12, 1.0, 0.0, 0.0)
                        a1, b1, c1, sp1 = _dsig_split_s(lam, mu, g_t, e11, e22, e12, 0.0, 1.0, 0.0)
                        a2, b2, c2, sp2 = _dsig_split_s(lam, mu, g_t, e11, e22, e12, 0.0, 0.0, 1.0)
                        ev1, ev2, c, s = _eig2s(e11, e22, e12)
                        q11, q22, q12 = _sigplus2s(lam, mu, tre, ev1, ev2, c, s)
                    else:
                        a0 = g_t * (lam + 2.0 * mu)
                        b0_ = g_t * lam
                        c0 = 0.0
                        a1 = g_t * lam
                        b1 = g_t * (lam + 2.0 * mu)
                        c1 = 0.0
                        a2 = 0.0
                        b2 = 0.0
                        c2 = g_t * 2.0 * mu
                        q11 = lam * tre + 2.0 * mu * e11
                        q22 = lam * tre + 2.0 * mu * e22
                        q12 = 2.0 * mu * e12
                    cC[cidx, jq, iq, 0, 0] = a0
                    cC[cidx, jq, iq, 1, 0] = b0_
                    cC[cidx, jq, iq, 2, 0] = c0
                    cC[cidx, jq, iq, 0, 1] = a1
                    cC[cidx, jq, iq, 1, 1] = b1
                    cC[cidx, jq, iq, 2, 1] = c1
                    cC[cidx, jq, iq, 0, 2] = a2
                    cC[cidx, jq, iq, 1, 2] = b2
                    cC[cidx, jq, iq, 2, 2] = c2
                    cgs[cidx, jq, iq, 0] = dg * q11
                    cgs[cidx, jq, iq, 1] = dg * q22
                    cgs[cidx, jq, iq, 2] = dg * q12


# ---------------------------------------------------------------------------
# Jacobian action (full or block-filtered)


@njit(cache=True)
def jacobian_kernel(conn, h, N, D, w, dux, duy, dph,
                    ce11, ce22, ce12, cgt, cdg, cpc, cC, cgs,
                    lam, mu, gc, eps,
                    miehe, use_tensors, do_uu, do_pp, do_coup, W,
                    out_x, out_y, out_p):
    n_cells = conn.shape[0]
    q = N.shape[0]
    n1 = N.shape[1]
    inv_h = 1.0 / h
    need_u = do_uu or do_coup

    cu = np.empty((n1, n1, W))
    cv = np.empty((n1, n1, W))
    cp = np.empty((n1, n1, W))
    tx = np.empty((n1, q, W))
    td = np.empty((n1, q, W))
    t1 = np.empty((n1, q, W))
    gxu = np.empty((q, q, W))
    gyu = np.empty((q, q, W))
    gxv = np.empty((q, q, W))
    gyv = np.empty((q, q, W))
    vp = np.empty((q, q, W))
    gxp = np.empty((q, q, W))
    gyp = np.empty((q, q, W))
    s11 = np.empty((q, q, W))
    s22 = np.empty((q, q, W))
    s12 = np.empty((q, q, W))
    fv = np.empty((q, q, W))
    fgx = np.empty((q, q, W))
    fgy = np.empty((q, q, W))
    ru = np.empty((n1, n1, W))
    rv = np.empty((n1, n1, W))
    rp = np.empty((n1, n1, W))

    for b0 in range(0, n_cells, W):
        nl = min(W, n_cells - b0)
        if need_u:
            _gather(dux, conn, b0, nl, n1, W, cu)
            _gather(duy, conn, b0, nl, n1, W, cv)
            _fwd_x(N, cu, tx, n1, q, W)
            _fwd_x(D, cu, td, n1, q, W)
            _fwd_y(D, tx, gyu, n1, q, W)
            _fwd_y(N, td, gxu, n1, q, W)
            _fwd_x(N, cv, tx, n1, q, W)
            _fwd_x(D, cv, td, n1, q, W)
            _fwd_y(D, tx, gyv, n1, q, W)
            _fwd_y(N, td, gxv, n1, q, W)
        if do_pp:
            _gather(dph, conn, b0, nl, n1, W, cp)
            _fwd_x(N, cp, tx, n1, q, W)
            _fwd_x(D, cp, td, n1, q, W)
            _fwd_y(N, tx, vp, n1, q, W)
            _fwd_y(D, tx, gyp, n1, q, W)
            _fwd_y(N, td, gxp, n1, q, W)

        for jq in range(q):
            for iq in range(q):
                wq = w[jq] * w[iq]
                wg = wq * h
                wv = wq * h * h
                for l in range(W):
                    cell = b0 + l if l < nl else b0
                    coup = 0.0
                    if need_u:
                        d11 = gxu[jq, iq, l] * inv_h
                        d22 = gyv[jq, iq, l] * inv_h
                        d12 = 0.5 * (gyu[jq, iq, l] + gxv[jq, iq, l]) * inv_h
                        if use_tensors:
                            ds11 = (cC[cell, jq, iq, 0, 0] * d11
                                    + cC[cell, jq, iq, 0, 1] * d22
                                    + cC[cell, jq, iq, 0, 2] * d12)
                            ds22 = (cC[cell, jq, iq, 1, 0] * d11
                                    + cC[cell, jq, iq, 1, 1] * d22
                                    + cC[cell, jq, iq, 1, 2] * d12)
                            ds12 = (cC[cell, jq, iq, 2, 0] * d11
                                    + cC[cell, jq, iq, 2, 1] * d22
                                    + cC[cell, jq, iq, 2, 2] * d12)
                            coup = (cgs[cell, jq, iq, 0] * d11
                                    + cgs[cell, jq, iq, 1] * d22
                                    + 2.0 * cgs[cell, jq, iq, 2] * d12)
                        else:
                            e11 = ce11[cell, jq, iq]
                            e22 = ce22[cell, jq, iq]
                            e12 = ce12[cell, jq, iq]
                            g_t = cgt[cell, jq, iq]
                            if miehe:
                                ds11, ds22, ds12, spde = _dsig_split_s(
                                    lam, mu, g_t, e11, e22, e12, d11, d22, d12
                                )
                            else:
                                trde = d11 + d22
                                ds11 = g_t * (lam * trde + 2.0 * mu * d11)
                                ds22 = g_t * (lam * trde + 2.0 * mu * d22)
                                ds12 = g_t * 2.0 * mu * d12
                                tre = e11 + e22
                                spde = ((lam * tre + 2.0 * mu * e11) * d11
                                        + (lam * tre + 2.0 * mu * e22) * d22
                                        + 2.0 * (2.0 * mu * e12) * d12)
                            coup = cdg[cell, jq, iq] * spde
                        if do_uu:
                            s11[jq, iq, l] = ds11 * wg
                            s22[jq, iq, l] = ds22 * wg
                            s12[jq, iq, l] = ds12 * wg
                    if do_pp:
                        pval = cpc[cell, jq, iq] * vp[jq, iq, l]
                        if do_coup:
                            pval += coup
                        fv[jq, iq, l] = pval * wv
                        fgx[jq, iq, l] = gc * eps * gxp[jq, iq, l] * inv_h * wg
                        fgy[jq, iq, l] = gc * eps * gyp[jq, iq, l] * inv_h * wg
                    elif do_coup:
                        fv[jq, iq, l] = coup * wv
                        fgx[jq, iq, l] = 0.0
                        fgy[jq, iq, l] = 0.0

        if do_uu:
            _zero_local(ru, n1, W)
            _bwd_y(N, s11, t1, n1, q, W)
            _bwd_x_add(D, t1, ru, n1, q, W)
            _bwd_y(D, s12, t1, n1, q, W)
            _bwd_x_add(N, t1, ru, n1, q, W)
            _zero_local(rv, n1, W)
            _bwd_y(N, s12, t1, n1, q, W)
            _bwd_x_add(D, t1, rv, n1, q, W)
            _bwd_y(D, s22, t1, n1, q, W)
            _bwd_x_add(N, t1, rv, n1, q, W)
            _scatter_add(out_x, conn, b0, nl, n1, W, ru)
            _scatter_add(out_y, conn, b0, nl, n1, W, rv)
        if do_pp or do_coup:
            _zero_local(rp, n1, W)
            _bwd_y(N, fv, t1, n1, q, W)
            _bwd_x_add(N, t1, rp, n1, q, W)
            if do_pp:
                _bwd_y(N, fgx, t1, n1, q, W)
                _bwd_x_add(D, t1, rp, n1, q, W)
                _bwd_y(D, fgy, t1, n1, q, W)
                _bwd_x_add(N, t1, rp, n1, q, W)
            _scatter_add(out_p, conn, b0, nl, n1, W, rp)


# ---------------------------------------------------------------------------
# block diagonals


@njit(cache=True)
def diagonal_kernel(conn, h, N, D, w,
                    ce11, ce22, ce12, cgt, cpc,
                    lam, mu, gc, eps, miehe,
                    diag_x, diag_y, diag_p):
    n_cells = conn.shape[0]
    q = N.shape[0]
    n1 = N.shape[1]
    inv_h = 1.0 / h
    for cell in range(n_cells):
        for b in range(n1):
            for a in range(n1):
                gid = conn[cell, b * n1 + a]
                accx = 0.0
                accy = 0.0
                accp = 0.0
                for jq in range(q):
                    for iq in range(q):
                        wq = w[jq] * w[iq] * h * h
                        gx = D[iq, a] * N[jq, b] * inv_h
                        gy = N[iq, a] * D[jq, b] * inv_h
                        val = N[iq, a] * N[jq, b]
                        g_t = cgt[cell, jq, iq]
                        if miehe:
                            e11 = ce11[cell, jq, iq]
                            e22 = ce22[cell, jq, iq]
                            e12 = ce12[cell, jq, iq]
                            dx11, dx22, dx12, _ = _dsig_split_s(
                                lam, mu, g_t, e11, e22, e12, gx, 0.0, 0.5 * gy
                            )
                            dy11, dy22, dy12, _ = _dsig_split_s(
                                lam, mu, g_t, e11, e22, e12, 0.0, gy, 0.5 * gx
                            )
                        else:
                            dx11 = g_t * (lam + 2.0 * mu) * gx
                            dx22 = g_t * lam * gx
                            dx12 = g_t * mu * gy
                            dy11 = g_t * lam * gy
                            dy22 = g_t * (lam + 2.0 * mu) * gy
                            dy12 = g_t * mu * gx
                        accx += (dx11 * gx + dx12 * gy) * wq
                        accy += (dy12 * gx + dy22 * gy) * wq
                        accp += (cpc[cell, jq, iq] * val * val
                                 + gc * eps * (gx * gx + gy * gy)) * wq
                diag_x[gid] += accx
                diag_y[gid] += accy
                diag_p[gid] += accp


# ---------------------------------------------------------------------------
# cellwise dense Jacobian matrices (assembled oracle path)


@njit(cache=True)
def cell_matrices_kernel(conn, h, N, D, w,
                         ce11, ce22, ce12, cgt, cdg, cpc,
                         lam, mu, gc, eps, miehe,
                         gk):
    """Dense local matrices G_k, ordering (u_x | u_y | phi) x local nodes."""
    n_cells = conn.shape[0]
    q = N.shape[0]
    n1 = N.shape[1]
    nloc = n1 * n1
    inv_h = 1.0 / h
    for cell in range(n_cells):
        for jl in range(nloc):
            aj = jl % n1
            bj = jl // n1
            for comp_j in range(3):
                col = comp_j * nloc + jl
                for jq in range(q):
                    for iq in range(q):
                        wq = w[jq] * w[iq] * h * h
                        gxj = D[iq, aj] * N[jq, bj] * inv_h
                        gyj = N[iq, aj] * D[jq, bj] * inv_h
                        valj = N[iq, aj] * N[jq, bj]
                        g_t = cgt[cell, jq, iq]
                        e11 = ce11[cell, jq, iq]
                        e22 = ce22[cell, jq, iq]
                        e12 = ce12[cell, jq, iq]
                        ds11 = 0.0
                        ds22 = 0.0
                        ds12 = 0.0
                        coup = 0.0
                        pval = 0.0
                        pgx = 0.0
                        pgy = 0.0
                        if comp_j < 2:
                            if comp_j == 0:
                                d11 = gxj
                                d22 = 0.0
                                d12 = 0.5 * gyj
                            else:
                                d11 = 0.0
                                d22 = gyj
                                d12 = 0.5 * gxj
                            if miehe:
                                ds11, ds22, ds12, spde = _dsig_split_s(
                                    lam, mu, g_t, e11, e22, e12, d11, d22, d12
                                )
                            else:
                                trde = d11 + d22
                                ds11 = g_t * (lam * trde + 2.0 * mu * d11)
                                ds22 = g_t * (lam * trde + 2.0 * mu * d22)
                                ds12 = g_t * 2.0 * mu * d12
                                tre = e11 + e22
                                spde = ((lam * tre + 2.0 * mu * e11) * d11
                                        + (lam * tre + 2.0 * mu * e22) * d22
                                        + 2.0 * (2.0 * mu * e12) * d12)
                            coup = cdg[cell, jq, iq] * spde
                        else:
                            pval = cpc[cell, jq, iq] * valj
                            pgx = gc * eps * gxj
                            pgy = gc * eps * gyj
                        for il in range(nloc):
                            ai = il % n1
                            bi = il // n1
                            gxi = D[iq, ai] * N[jq, bi] * inv_h
                            gyi = N[iq, ai] * D[jq, bi] * inv_h
                            vali = N[iq, ai] * N[jq, bi]
                            gk[cell, il, col] += (ds11 * gxi + ds12 * gyi) * wq
                            gk[cell, nloc + il, col] += (ds12 * gxi + ds22 * gyi) * wq
                            gk[cell, 2 * nloc + il, col] += (
                                (coup + pval) * vali + pgx * gxi + pgy * gyi
                            ) * wq
    return gk


@njit(cache=True)
def mass_rowsum_kernel(conn, h, N, w, out):
    """Row sums of the scalar mass matrix (lumped diagonal), scatter-added."""
    n_cells = conn.shape[0]
    q = N.shape[0]
    n1 = N.shape[1]
    col = np.zeros(n1)
    for a in range(n1):
        acc = 0.0
        for iq in range(q):
            acc += w[iq] * N[iq, a]
        col[a] = acc
    for cell in range(n_cells):
        for b in range(n1):
            for a in range(n1):
                out[conn[cell, b * n1 + a]] += col[a] * col[b] * h * h
