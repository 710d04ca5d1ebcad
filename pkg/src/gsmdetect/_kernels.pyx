# cython: language_level=3, boundscheck=False, wraparound=False
# cython: cdivision=True, initializedcheck=False, nonecheck=False
"""Compiled per-realization detection core.

Mirrors the reference path in :mod:`gsmdetect.detectors` step by step:
same preprocessing (Cholesky zero-forcing matrices, MGS + complex LLL),
same stage order, same tie rules and the same FLOP charges. Complex
values are carried as separate real and imaginary arrays so that every
product is spelled out; the extension is built with FP contraction
disabled.

A nonzero status means a combination was numerically degenerate; the
caller then reruns the realization on the reference path.
"""

import numpy as np
from libc.math cimport sqrt, exp, ceil, log, rint, INFINITY

ctypedef long long i64

cdef enum:
    CMUL = 6
    CADD = 2
    CDIV = 11

cdef double PIVOT_TOL = 1e-12
cdef int MAX_LLL_STEPS = 10000

STATUS_OK = 0
STATUS_DEGENERATE = 1


cdef int _prepare_combo(
    const double[:, ::1] hr, const double[:, ::1] hi,
    double[:, ::1] gr, double[:, ::1] gi,
    double[:, ::1] tr, double[:, ::1] ti,
    double[:, ::1] vr, double[:, ::1] vi,
    double[:, ::1] Rr, double[:, ::1] Ri,
    double[:, ::1] qr, double[:, ::1] qi,
    double[::1] ur, double[::1] ui,
    double delta, i64* lll_flops) noexcept nogil:
    """Zero-forcing matrix and LLL transforms for one combination.

    Returns 0 on success, 1 if the combination is degenerate.
    """
    cdef int R = hr.shape[0]
    cdef int A = hr.shape[1]
    cdef int p, q, r, j, i, l, k, col, steps
    cdef double sr, si, d, dmin, dmax, inv, nrm, scale, den, numr, numi
    cdef double mur, mui, ar, ai, br, bi, cr, ci, lhs, rhs, rho, car, cai, cbr, cbi
    cdef double xr, xi, yr, yi
    cdef i64 flops = 0

    # Gram matrix into Rr/Ri (lower part used), then in-place Cholesky
    for p in range(A):
        for q in range(p + 1):
            sr = 0.0
            si = 0.0
            for r in range(R):
                # conj(h[r, p]) * h[r, q]
                sr = sr + (hr[r, p] * hr[r, q] + hi[r, p] * hi[r, q])
                si = si + (hr[r, p] * hi[r, q] - hi[r, p] * hr[r, q])
            Rr[p, q] = sr
            Ri[p, q] = si
    dmin = INFINITY
    dmax = 0.0
    for j in range(A):
        d = Rr[j, j]
        for k in range(j):
            d = d - (Rr[j, k] * Rr[j, k] + Ri[j, k] * Ri[j, k])
        if not d > 0.0:
            return 1
        if d < dmin:
            dmin = d
        if d > dmax:
            dmax = d
        d = sqrt(d)
        Rr[j, j] = d
        Ri[j, j] = 0.0
        inv = 1.0 / d
        for i in range(j + 1, A):
            sr = Rr[i, j]
            si = Ri[i, j]
            for k in range(j):
                # L[i,k] * conj(L[j,k])
                sr = sr - (Rr[i, k] * Rr[j, k] + Ri[i, k] * Ri[j, k])
                si = si - (Ri[i, k] * Rr[j, k] - Rr[i, k] * Ri[j, k])
            Rr[i, j] = sr * inv
            Ri[i, j] = si * inv
    if dmin < PIVOT_TOL * dmax:
        return 1

    # G[:, r] = (L L^H)^{-1} conj(h[r, :])
    for r in range(R):
        for i in range(A):
            sr = hr[r, i]
            si = -hi[r, i]
            for k in range(i):
                sr = sr - (Rr[i, k] * ur[k] - Ri[i, k] * ui[k])
                si = si - (Rr[i, k] * ui[k] + Ri[i, k] * ur[k])
            ur[i] = sr / Rr[i, i]
            ui[i] = si / Rr[i, i]
        for i in range(A - 1, -1, -1):
            sr = ur[i]
            si = ui[i]
            for k in range(i + 1, A):
                # conj(L[k, i]) * g[k]
                sr = sr - (Rr[k, i] * gr[k, r] + Ri[k, i] * gi[k, r])
                si = si - (Rr[k, i] * gi[k, r] - Ri[k, i] * gr[k, r])
            gr[i, r] = sr / Rr[i, i]
            gi[i, r] = si / Rr[i, i]

    # modified Gram-Schmidt QR of h
    scale = 0.0
    for j in range(A):
        nrm = 0.0
        for r in range(R):
            qr[r, j] = hr[r, j]
            qi[r, j] = hi[r, j]
            nrm = nrm + (hr[r, j] * hr[r, j] + hi[r, j] * hi[r, j])
        if sqrt(nrm) > scale:
            scale = sqrt(nrm)
    for p in range(A):
        for q in range(A):
            Rr[p, q] = 0.0
            Ri[p, q] = 0.0
    for j in range(A):
        for i in range(j):
            sr = 0.0
            si = 0.0
            for r in range(R):
                sr = sr + (qr[r, i] * qr[r, j] + qi[r, i] * qi[r, j])
                si = si + (qr[r, i] * qi[r, j] - qi[r, i] * qr[r, j])
            Rr[i, j] = sr
            Ri[i, j] = si
            for r in range(R):
                xr = qr[r, j] - (sr * qr[r, i] - si * qi[r, i])
                xi = qi[r, j] - (sr * qi[r, i] + si * qr[r, i])
                qr[r, j] = xr
                qi[r, j] = xi
        nrm = 0.0
        for r in range(R):
            nrm = nrm + (qr[r, j] * qr[r, j] + qi[r, j] * qi[r, j])
        nrm = sqrt(nrm)
        if not nrm > PIVOT_TOL * scale:
            return 1
        Rr[j, j] = nrm
        inv = 1.0 / nrm
        for r in range(R):
            qr[r, j] = qr[r, j] * inv
            qi[r, j] = qi[r, j] * inv

    # complex LLL on R, tracking T and T^{-1}
    for p in range(A):
        for q in range(A):
            tr[p, q] = 1.0 if p == q else 0.0
            ti[p, q] = 0.0
            vr[p, q] = 1.0 if p == q else 0.0
            vi[p, q] = 0.0
    steps = 0
    k = 1
    while k < A:
        steps += 1
        if steps > MAX_LLL_STEPS:
            return 1
        for l in range(k - 1, -1, -1):
            ar = Rr[l, l]
            ai = Ri[l, l]
            den = ar * ar + ai * ai
            numr = Rr[l, k] * ar + Ri[l, k] * ai
            numi = Ri[l, k] * ar - Rr[l, k] * ai
            mur = rint(numr / den)
            mui = rint(numi / den)
            flops += CDIV + 2
            if mur == 0.0 and mui == 0.0:
                continue
            for i in range(l + 1):
                xr = Rr[i, k] - (mur * Rr[i, l] - mui * Ri[i, l])
                xi = Ri[i, k] - (mur * Ri[i, l] + mui * Rr[i, l])
                Rr[i, k] = xr
                Ri[i, k] = xi
            for i in range(A):
                xr = tr[i, k] - (mur * tr[i, l] - mui * ti[i, l])
                xi = ti[i, k] - (mur * ti[i, l] + mui * tr[i, l])
                tr[i, k] = xr
                ti[i, k] = xi
                xr = vr[l, i] + (mur * vr[k, i] - mui * vi[k, i])
                xi = vi[l, i] + (mur * vi[k, i] + mui * vr[k, i])
                vr[l, i] = xr
                vi[l, i] = xi
            flops += (l + 1) * (CMUL + CADD) + 2 * A * (CMUL + CADD)

        ar = Rr[k - 1, k - 1]
        ai = Ri[k - 1, k - 1]
        br = Rr[k, k]
        bi = Ri[k, k]
        cr = Rr[k - 1, k]
        ci = Ri[k - 1, k]
        lhs = delta * (ar * ar + ai * ai)
        rhs = (br * br + bi * bi) + (cr * cr + ci * ci)
        flops += 11
        if not lhs > rhs:
            k += 1
            continue

        for i in range(A):
            xr = Rr[i, k - 1]; Rr[i, k - 1] = Rr[i, k]; Rr[i, k] = xr
            xi = Ri[i, k - 1]; Ri[i, k - 1] = Ri[i, k]; Ri[i, k] = xi
            xr = tr[i, k - 1]; tr[i, k - 1] = tr[i, k]; tr[i, k] = xr
            xi = ti[i, k - 1]; ti[i, k - 1] = ti[i, k]; ti[i, k] = xi
            xr = vr[k - 1, i]; vr[k - 1, i] = vr[k, i]; vr[k, i] = xr
            xi = vi[k - 1, i]; vi[k - 1, i] = vi[k, i]; vi[k, i] = xi
        ar = Rr[k - 1, k - 1]
        ai = Ri[k - 1, k - 1]
        br = Rr[k, k - 1]
        bi = Ri[k, k - 1]
        rho = sqrt((ar * ar + ai * ai) + (br * br + bi * bi))
        inv = 1.0 / rho
        car = ar * inv
        cai = ai * inv
        cbr = br * inv
        cbi = bi * inv
        Rr[k - 1, k - 1] = rho
        Ri[k - 1, k - 1] = 0.0
        Rr[k, k - 1] = 0.0
        Ri[k, k - 1] = 0.0
        for col in range(k, A):
            xr = Rr[k - 1, col]
            xi = Ri[k - 1, col]
            yr = Rr[k, col]
            yi = Ri[k, col]
            # conj(ca) u + conj(cb) v
            Rr[k - 1, col] = (car * xr + cai * xi) + (cbr * yr + cbi * yi)
            Ri[k - 1, col] = (car * xi - cai * xr) + (cbr * yi - cbi * yr)
            # -cb u + ca v
            Rr[k, col] = -(cbr * xr - cbi * xi) + (car * yr - cai * yi)
            Ri[k, col] = -(cbr * xi + cbi * xr) + (car * yi + cai * yr)
        flops += (7 + 1 + 1 + 4) + (A - k) * (4 * CMUL + 2 * CADD)
        k = k - 1 if k > 1 else 1

    lll_flops[0] += flops
    return 0


cdef inline double _residual_sq(
    const double[::1] yr, const double[::1] yi,
    const double[:, ::1] hr, const double[:, ::1] hi,
    const double[::1] xr, const double[::1] xi) noexcept nogil:
    """||y - h x||^2 with the column-accumulation order of numerics.matvec."""
    cdef int R = hr.shape[0]
    cdef int A = hr.shape[1]
    cdef int r, a
    cdef double sr, si, er, ei, acc = 0.0
    for r in range(R):
        sr = hr[r, 0] * xr[0] - hi[r, 0] * xi[0]
        si = hr[r, 0] * xi[0] + hi[r, 0] * xr[0]
        for a in range(1, A):
            sr = sr + (hr[r, a] * xr[a] - hi[r, a] * xi[a])
            si = si + (hr[r, a] * xi[a] + hi[r, a] * xr[a])
        er = yr[r] - sr
        ei = yi[r] - si
        if r == 0:
            acc = er * er + ei * ei
        else:
            acc = acc + (er * er + ei * ei)
    return acc


cdef inline int _list_length(double eps2, int R, double sigma2,
                             double l_min, double l1, int n_c) noexcept nogil:
    cdef double phi, arg, v
    if sigma2 <= 0.0:
        v = l_min
    else:
        phi = (eps2 - R * sigma2) / (sqrt(<double>R) * sigma2)
        arg = l1 * phi
        if arg >= log(<double>n_c):
            return n_c
        v = exp(arg)
        if l_min > v:
            v = l_min
    v = ceil(v)
    if v >= n_c:
        return n_c
    return <int>v


cdef inline int _quantize_label(double vr, double vi, double offr, double offi,
                                double scale, int side,
                                const i64[:, ::1] label_grid) noexcept nogil:
    cdef double u
    cdef int di, dq
    u = ceil((vr - offr) / scale - 0.5)
    if u < 0.0:
        u = 0.0
    if u > side - 1:
        u = side - 1
    di = <int>u
    u = ceil((vi - offi) / scale - 0.5)
    if u < 0.0:
        u = 0.0
    if u > side - 1:
        u = side - 1
    dq = <int>u
    return <int>label_grid[di, dq]


def run_block(hs, Y, points, label_grid, double scale, offset,
              double sigma2, double l_min, double l1, double lll_delta,
              bint do_ml, bint do_pbld, bint do_lrzf, costs):
    """Detect every channel use of one realization.

    Parameters
    ----------
    hs : (n_c, n_r, n_a) complex array
        Per-combination channel submatrices.
    Y : (n_uses, n_r) complex array
        Received vectors.
    costs : dict
        Nominal per-step FLOP charges (see :mod:`gsmdetect.core`).

    Returns
    -------
    status : int
    out : dict
        Per-detector arrays, keyed by detector name.
    """
    hs = np.asarray(hs, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    points = np.asarray(points, dtype=complex)
    cdef int NC = hs.shape[0]
    cdef int R = hs.shape[1]
    cdef int A = hs.shape[2]
    cdef int U = Y.shape[0]
    cdef int M = points.shape[0]
    cdef int side = label_grid.shape[0]
    cdef double offr = offset.real
    cdef double offi = offset.imag

    cdef double[:, :, ::1] hr = np.ascontiguousarray(hs.real)
    cdef double[:, :, ::1] hi = np.ascontiguousarray(hs.imag)
    cdef double[:, ::1] yr = np.ascontiguousarray(Y.real)
    cdef double[:, ::1] yi = np.ascontiguousarray(Y.imag)
    cdef double[::1] pr = np.ascontiguousarray(points.real)
    cdef double[::1] pi = np.ascontiguousarray(points.imag)
    cdef const i64[:, ::1] lg = np.ascontiguousarray(label_grid, dtype=np.int64)

    cdef double[:, :, ::1] gr = np.zeros((NC, A, R))
    cdef double[:, :, ::1] gi = np.zeros((NC, A, R))
    cdef double[:, :, ::1] tr = np.zeros((NC, A, A))
    cdef double[:, :, ::1] ti = np.zeros((NC, A, A))
    cdef double[:, :, ::1] vr = np.zeros((NC, A, A))
    cdef double[:, :, ::1] vi = np.zeros((NC, A, A))
    cdef double[:, ::1] shr = np.zeros((NC, A))
    cdef double[:, ::1] shi = np.zeros((NC, A))
    cdef double[:, ::1] Rr = np.zeros((A, A))
    cdef double[:, ::1] Ri = np.zeros((A, A))
    cdef double[:, ::1] qr = np.zeros((R, A))
    cdef double[:, ::1] qi = np.zeros((R, A))
    cdef double[::1] ur = np.zeros(max(A, R))
    cdef double[::1] ui = np.zeros(max(A, R))

    # per-use work buffers
    cdef double[:, ::1] wr = np.zeros((NC, A))
    cdef double[:, ::1] wi = np.zeros((NC, A))
    cdef double[::1] mags = np.zeros(NC)
    cdef i64[::1] order = np.zeros(NC, dtype=np.int64)
    cdef double[::1] zr = np.zeros(A)
    cdef double[::1] zi = np.zeros(A)
    cdef double[::1] xr = np.zeros(A)
    cdef double[::1] xi = np.zeros(A)
    cdef i64[::1] lab = np.zeros(A, dtype=np.int64)
    cdef i64[::1] best_lab = np.zeros(A, dtype=np.int64)

    cdef i64 s1_cost = costs["stage1_combo"]
    cdef i64 s2_cost = costs["stage2"]
    cdef i64 res_cost = costs["residual"]
    cdef i64 upd_cost = costs["update"]
    cdef i64 ml_cost = costs["ml_candidate"]
    cdef i64 zf_cost = costs["zf_prep"]
    cdef i64 mlrow_cost = costs["ml_row"]
    cdef i64 qr_cost = costs["qr_prep"]

    cdef i64 lll_flops = 0
    cdef int status = 0
    cdef int i, j, a, b, r, u, p, lam, n_exam, best_k, cand, P, idx, rem
    cdef double sr, si, er, ei, acc, eps_min, eps2, dr, di_
    cdef i64 fl, last_lam
    cdef bint mono
    cdef bint need_lr = do_pbld or do_lrzf

    P = 1
    for a in range(A):
        P *= M

    out = {}
    cdef i64[::1] pk, pn, pl, pf, lk, mk, mf
    cdef i64[:, ::1] plab, llab, mlab
    cdef double[::1] pe, le, me
    cdef char[::1] pmono, pvalid, lvalid
    if do_pbld:
        d = dict(k=np.zeros(U, np.int64), labels=np.zeros((U, A), np.int64),
                 eps=np.zeros(U), examined=np.zeros(U, np.int64),
                 final_len=np.zeros(U, np.int64), flops=np.zeros(U, np.int64),
                 monotone=np.ones(U, np.int8), valid=np.ones(U, np.int8))
        out["pbld"] = d
        pk = d["k"]; plab = d["labels"]; pe = d["eps"]; pn = d["examined"]
        pl = d["final_len"]; pf = d["flops"]; pmono = d["monotone"]; pvalid = d["valid"]
    if do_lrzf:
        d = dict(k=np.zeros(U, np.int64), labels=np.zeros((U, A), np.int64),
                 eps=np.zeros(U), examined=np.ones(U, np.int64),
                 final_len=np.ones(U, np.int64), flops=np.zeros(U, np.int64),
                 monotone=np.ones(U, np.int8), valid=np.ones(U, np.int8))
        out["lrzf_single"] = d
        lk = d["k"]; llab = d["labels"]; le = d["eps"]; lvalid = d["valid"]
    cdef i64[::1] lf_
    if do_lrzf:
        lf_ = out["lrzf_single"]["flops"]
    cdef double[:, ::1] tabr
    cdef double[:, ::1] tabi
    if do_ml:
        d = dict(k=np.zeros(U, np.int64), labels=np.zeros((U, A), np.int64),
                 eps=np.zeros(U), examined=np.full(U, NC * P, np.int64),
                 final_len=np.full(U, NC * P, np.int64), flops=np.zeros(U, np.int64),
                 monotone=np.ones(U, np.int8), valid=np.ones(U, np.int8))
        out["ml"] = d
        mk = d["k"]; mlab = d["labels"]; me = d["eps"]; mf = d["flops"]
        tabr = np.zeros((NC * P, R))
        tabi = np.zeros((NC * P, R))

    with nogil:
        # ---- channel preprocessing
        if need_lr:
            for i in range(NC):
                if _prepare_combo(hr[i], hi[i], gr[i], gi[i], tr[i], ti[i],
                                  vr[i], vi[i], Rr, Ri, qr, qi, ur, ui,
                                  lll_delta, &lll_flops):
                    status = 1
                    break
                for a in range(A):
                    sr = 0.0
                    si = 0.0
                    for b in range(A):
                        sr = sr + vr[i, a, b]
                        si = si + vi[i, a, b]
                    shr[i, a] = offr * sr - offi * si
                    shi[i, a] = offr * si + offi * sr
        if do_ml and status == 0:
            for i in range(NC):
                for cand in range(P):
                    rem = cand
                    for a in range(A - 1, -1, -1):
                        lab[a] = rem % M
                        rem = rem // M
                    for r in range(R):
                        sr = hr[i, r, 0] * pr[lab[0]] - hi[i, r, 0] * pi[lab[0]]
                        si = hr[i, r, 0] * pi[lab[0]] + hi[i, r, 0] * pr[lab[0]]
                        for a in range(1, A):
                            sr = sr + (hr[i, r, a] * pr[lab[a]] - hi[i, r, a] * pi[lab[a]])
                            si = si + (hr[i, r, a] * pi[lab[a]] + hi[i, r, a] * pr[lab[a]])
                        tabr[i * P + cand, r] = sr
                        tabi[i * P + cand, r] = si

        if status == 0:
            for u in range(U):
                if need_lr:
                    # ---- stage 1
                    for i in range(NC):
                        for a in range(A):
                            sr = gr[i, a, 0] * yr[u, 0] - gi[i, a, 0] * yi[u, 0]
                            si = gr[i, a, 0] * yi[u, 0] + gi[i, a, 0] * yr[u, 0]
                            for r in range(1, R):
                                sr = sr + (gr[i, a, r] * yr[u, r] - gi[i, a, r] * yi[u, r])
                                si = si + (gr[i, a, r] * yi[u, r] + gi[i, a, r] * yr[u, r])
                            wr[i, a] = sr
                            wi[i, a] = si
                        acc = 0.0
                        for r in range(R):
                            sr = hr[i, r, 0] * wr[i, 0] - hi[i, r, 0] * wi[i, 0]
                            si = hr[i, r, 0] * wi[i, 0] + hi[i, r, 0] * wr[i, 0]
                            for a in range(1, A):
                                sr = sr + (hr[i, r, a] * wr[i, a] - hi[i, r, a] * wi[i, a])
                                si = si + (hr[i, r, a] * wi[i, a] + hi[i, r, a] * wr[i, a])
                            if r == 0:
                                acc = sr * sr + si * si
                            else:
                                acc = acc + (sr * sr + si * si)
                        mags[i] = acc
                        # insertion sort: descending magnitude, ascending index
                        j = i
                        while j > 0 and mags[order[j - 1]] < acc:
                            order[j] = order[j - 1]
                            j -= 1
                        order[j] = i
                    fl = NC * s1_cost

                    # ---- stages 2 and 3
                    eps_min = INFINITY
                    lam = NC
                    last_lam = NC
                    mono = True
                    best_k = -1
                    j = 0
                    while j < lam and j < NC:
                        p = order[j]
                        j += 1
                        # z~ = T^-1 w, quantize in the reduced domain
                        for a in range(A):
                            sr = 0.0
                            si = 0.0
                            for b in range(A):
                                sr = sr + (vr[p, a, b] * wr[p, b] - vi[p, a, b] * wi[p, b])
                                si = si + (vr[p, a, b] * wi[p, b] + vi[p, a, b] * wr[p, b])
                            dr = rint((sr - shr[p, a]) / scale)
                            di_ = rint((si - shi[p, a]) / scale)
                            zr[a] = scale * dr + shr[p, a]
                            zi[a] = scale * di_ + shi[p, a]
                        # back with T, snap to the alphabet
                        for a in range(A):
                            sr = 0.0
                            si = 0.0
                            for b in range(A):
                                sr = sr + (tr[p, a, b] * zr[b] - ti[p, a, b] * zi[b])
                                si = si + (tr[p, a, b] * zi[b] + ti[p, a, b] * zr[b])
                            lab[a] = _quantize_label(sr, si, offr, offi, scale, side, lg)
                            xr[a] = pr[lab[a]]
                            xi[a] = pi[lab[a]]
                        fl += s2_cost
                        eps2 = _residual_sq(yr[u], yi[u], hr[p], hi[p], xr, xi)
                        fl += res_cost
                        if do_lrzf and j == 1:
                            lk[u] = p
                            for a in range(A):
                                llab[u, a] = lab[a]
                            le[u] = sqrt(eps2)
                            lf_[u] = fl + 1
                            if not do_pbld:
                                break
                        if eps2 < eps_min:
                            eps_min = eps2
                            best_k = p
                            for a in range(A):
                                best_lab[a] = lab[a]
                            lam = _list_length(eps2, R, sigma2, l_min, l1, NC)
                            fl += upd_cost
                            if lam > last_lam:
                                mono = False
                            last_lam = lam
                    if do_pbld:
                        pk[u] = best_k
                        for a in range(A):
                            plab[u, a] = best_lab[a]
                        pe[u] = sqrt(eps_min)
                        pn[u] = j
                        pl[u] = lam
                        pf[u] = fl + 1
                        pmono[u] = mono

                if do_ml:
                    acc = INFINITY
                    idx = 0
                    for cand in range(NC * P):
                        eps2 = 0.0
                        for r in range(R):
                            er = yr[u, r] - tabr[cand, r]
                            ei = yi[u, r] - tabi[cand, r]
                            if r == 0:
                                eps2 = er * er + ei * ei
                            else:
                                eps2 = eps2 + (er * er + ei * ei)
                        if eps2 < acc:
                            acc = eps2
                            idx = cand
                    mk[u] = idx // P
                    rem = idx % P
                    for a in range(A - 1, -1, -1):
                        mlab[u, a] = rem % M
                        rem = rem // M
                    me[u] = sqrt(acc)
                    mf[u] = NC * P * ml_cost + 1

    prep = {}
    if need_lr:
        lr_prep = NC * (zf_cost + qr_cost) + lll_flops
        if do_pbld:
            prep["pbld"] = lr_prep
        if do_lrzf:
            prep["lrzf_single"] = lr_prep
    if do_ml:
        prep["ml"] = NC * P * mlrow_cost
    return status, out, prep
