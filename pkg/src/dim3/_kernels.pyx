# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled label-sweep kernels; see ``_pykernels`` for the reference loops."""
import numpy as np

from libc.math cimport exp, lgamma, log, pow, INFINITY

cdef double B_FLOOR = 1e-300


cdef inline double _log_edge(const long long[:, ::1] L1, const long long[:, ::1] L0,
                             Py_ssize_t k, Py_ssize_t l, int e,
                             double lam1, double lam2) noexcept nogil:
    cdef double n1 = L1[k, l]
    cdef double n0 = L0[k, l]
    if e:
        return log((n1 + lam1) / (n1 + n0 + lam1 + lam2))
    return log((n0 + lam2) / (n1 + n0 + lam1 + lam2))


cdef inline double _forward(double b, double c, long long m) noexcept nogil:
    if m == 0:
        return 0.0
    if b < B_FLOOR:
        b = B_FLOOR
    return lgamma(b + c + m) - lgamma(b + c) - lgamma(b + m) + lgamma(b)


cdef Py_ssize_t _pick(double[::1] lw, double[::1] w, Py_ssize_t ncell, double u) noexcept nogil:
    cdef double mx = -INFINITY
    cdef double total = 0.0
    cdef double cum = 0.0
    cdef double target, v
    cdef Py_ssize_t a, last = -1
    for a in range(ncell):
        if lw[a] > mx:
            mx = lw[a]
    for a in range(ncell):
        if lw[a] == -INFINITY:
            v = 0.0
        else:
            v = exp(lw[a] - mx)
        w[a] = v
        total += v
    target = u * total
    for a in range(ncell):
        if w[a] > 0.0:
            cum += w[a]
            last = a
            if cum > target:
                return a
    return last


cdef inline double _open_new(double[::1] beta, double[::1] beta_u, long long[::1] K,
                             double u, double gamma) noexcept nogil:
    cdef double b = 1.0 - pow(u, 1.0 / gamma)
    cdef long long k = K[0]
    beta[k] = b * beta_u[0]
    beta_u[0] = (1.0 - b) * beta_u[0]
    K[0] = k + 1
    return b


cdef inline void _resolve_new(Py_ssize_t* k, Py_ssize_t* l, Py_ssize_t Kold,
                              double[::1] beta, double[::1] beta_u, long long[::1] K,
                              const double[:, ::1] U, Py_ssize_t p, double gamma) noexcept nogil:
    cdef double b
    if k[0] == Kold and l[0] == Kold:
        k[0] = K[0]
        b = _open_new(beta, beta_u, K, U[p, 1], gamma)
        if U[p, 2] < b:
            l[0] = k[0]
        else:
            l[0] = K[0]
            _open_new(beta, beta_u, K, U[p, 3], gamma)
    elif k[0] == Kold:
        k[0] = K[0]
        _open_new(beta, beta_u, K, U[p, 1], gamma)
    elif l[0] == Kold:
        l[0] = K[0]
        _open_new(beta, beta_u, K, U[p, 1], gamma)


def mtv_gibbs_labels(const signed char[:, :, ::1] E, int[:, :, ::1] S, int[:, :, ::1] R,
                     long long[:, :, ::1] N, long long[:, ::1] L1, long long[:, ::1] L0,
                     double[::1] beta, double[::1] beta_u, long long[::1] K,
                     const long long[:, ::1] order, const double[:, ::1] U,
                     double alpha, double c, double lam1, double lam2, double gamma,
                     int allow_new, Py_ssize_t start):
    cdef Py_ssize_t T = E.shape[0]
    cdef Py_ssize_t cap = N.shape[2]
    cdef Py_ssize_t P = order.shape[0]
    cdef double[::1] ls = np.empty(cap + 1)
    cdef double[::1] lr = np.empty(cap + 1)
    cdef double[::1] lw = np.empty((cap + 1) * (cap + 1))
    cdef double[::1] w = np.empty((cap + 1) * (cap + 1))
    cdef Py_ssize_t p, t, i, j, k, l, k0, l0, Kc, nc, cell
    cdef int e
    cdef double ab, ws, wr, wn, le, le_new
    cdef Py_ssize_t stop = P
    with nogil:
        for p in range(start, P):
            if allow_new and K[0] + 2 > cap:
                stop = p
                break
            t = order[p, 0]
            i = order[p, 1]
            j = order[p, 2]
            e = E[t, i, j]
            k0 = S[t, i, j]
            l0 = R[t, i, j]
            N[t, i, k0] -= 1
            N[t, j, l0] -= 1
            if e:
                L1[k0, l0] -= 1
            else:
                L0[k0, l0] -= 1

            Kc = K[0]
            nc = Kc + 1 if allow_new else Kc
            for k in range(Kc):
                ab = alpha * beta[k]
                ws = N[t, i, k] + ab
                wr = N[t, j, k] + ab
                if t > 0:
                    ws += c * N[t - 1, i, k]
                    wr += c * N[t - 1, j, k]
                ls[k] = log(ws) if ws > 0.0 else -INFINITY
                lr[k] = log(wr) if wr > 0.0 else -INFINITY
                if t < T - 1:
                    ls[k] += _forward(ab + c * N[t, i, k], c, N[t + 1, i, k])
                    lr[k] += _forward(ab + c * N[t, j, k], c, N[t + 1, j, k])
            if allow_new:
                wn = alpha * beta_u[0]
                ls[Kc] = log(wn) if wn > 0.0 else -INFINITY
                lr[Kc] = ls[Kc]

            if e:
                le_new = log(lam1 / (lam1 + lam2))
            else:
                le_new = log(lam2 / (lam1 + lam2))
            for k in range(nc):
                for l in range(nc):
                    if k < Kc and l < Kc:
                        le = _log_edge(L1, L0, k, l, e, lam1, lam2)
                    else:
                        le = le_new
                    lw[k * nc + l] = ls[k] + lr[l] + le
            cell = _pick(lw, w, nc * nc, U[p, 0])
            k = cell // nc
            l = cell % nc
            if allow_new:
                _resolve_new(&k, &l, Kc, beta, beta_u, K, U, p, gamma)

            S[t, i, j] = <int>k
            R[t, i, j] = <int>l
            N[t, i, k] += 1
            N[t, j, l] += 1
            if e:
                L1[k, l] += 1
            else:
                L0[k, l] += 1
    return stop


def mtv_slice_labels(const signed char[:, :, ::1] E, int[:, :, ::1] S, int[:, :, ::1] R,
                     long long[:, :, ::1] N, long long[:, ::1] L1, long long[:, ::1] L0,
                     const double[::1] beta, const double[:, ::1] pi,
                     const double[::1] us, const double[::1] ur,
                     const long long[:, ::1] pairs, const double[::1] U,
                     double alpha, double c, double lam1, double lam2):
    cdef Py_ssize_t T = E.shape[0]
    cdef Py_ssize_t Kx = pi.shape[1]
    cdef Py_ssize_t P = pairs.shape[0]
    cdef long long[::1] ks = np.empty(Kx, dtype=np.int64)
    cdef long long[::1] kr = np.empty(Kx, dtype=np.int64)
    cdef double[::1] ls = np.empty(Kx)
    cdef double[::1] lr = np.empty(Kx)
    cdef double[::1] lw = np.empty(Kx * Kx)
    cdef double[::1] w = np.empty(Kx * Kx)
    cdef Py_ssize_t p, t, i, j, k, l, k0, l0, a, b, na, nb, cell
    cdef int e
    with nogil:
        for p in range(P):
            t = pairs[p, 0]
            i = pairs[p, 1]
            j = pairs[p, 2]
            e = E[t, i, j]
            k0 = S[t, i, j]
            l0 = R[t, i, j]
            N[t, i, k0] -= 1
            N[t, j, l0] -= 1
            if e:
                L1[k0, l0] -= 1
            else:
                L0[k0, l0] -= 1

            na = 0
            for k in range(Kx):
                if pi[i, k] > us[p]:
                    ls[na] = 0.0
                    if t < T - 1:
                        ls[na] = _forward(alpha * beta[k] + c * N[t, i, k], c, N[t + 1, i, k])
                    ks[na] = k
                    na += 1
            nb = 0
            for l in range(Kx):
                if pi[j, l] > ur[p]:
                    lr[nb] = 0.0
                    if t < T - 1:
                        lr[nb] = _forward(alpha * beta[l] + c * N[t, j, l], c, N[t + 1, j, l])
                    kr[nb] = l
                    nb += 1
            for a in range(na):
                for b in range(nb):
                    lw[a * nb + b] = ls[a] + lr[b] + _log_edge(L1, L0, ks[a], kr[b], e, lam1, lam2)
            cell = _pick(lw, w, na * nb, U[p])
            k = ks[cell // nb]
            l = kr[cell % nb]
            S[t, i, j] = <int>k
            R[t, i, j] = <int>l
            N[t, i, k] += 1
            N[t, j, l] += 1
            if e:
                L1[k, l] += 1
            else:
                L0[k, l] += 1


cdef inline double _mti_slot(const long long[:, :, ::1] TR, const long long[:, ::1] TOT,
                             Py_ssize_t a, Py_ssize_t p, Py_ssize_t q, Py_ssize_t k,
                             Py_ssize_t Kc, double alpha, double kappa,
                             const double[::1] beta, double beta_u, int has_next) noexcept nogil:
    cdef double first, num, den, lw
    if k < Kc:
        first = TR[a, p, k] + alpha * beta[k]
        if p == k + 1:
            first += kappa
        if first <= 0.0:
            return -INFINITY
        lw = log(first)
        if has_next:
            num = TR[a, k + 1, q] + alpha * beta[q]
            den = TOT[a, k + 1] + alpha + kappa
            if k == q:
                num += kappa
            if p == k + 1:
                den += 1.0
                if k == q:
                    num += 1.0
            if num <= 0.0:
                return -INFINITY
            lw += log(num / den)
        return lw
    first = alpha * beta_u
    if first <= 0.0:
        return -INFINITY
    lw = log(first)
    if has_next:
        num = alpha * beta[q]
        if num <= 0.0:
            return -INFINITY
        lw += log(num / (alpha + kappa))
    return lw


def mti_gibbs_labels(const signed char[:, :, ::1] E, int[:, :, ::1] S, int[:, :, ::1] R,
                     long long[:, :, ::1] TR, long long[:, ::1] TOT,
                     long long[:, ::1] L1, long long[:, ::1] L0,
                     double[::1] beta, double[::1] beta_u, long long[::1] K,
                     const long long[:, ::1] order, const double[:, ::1] U,
                     double alpha, double kappa, double lam1, double lam2, double gamma,
                     int allow_new, Py_ssize_t start):
    cdef Py_ssize_t T = E.shape[0]
    cdef Py_ssize_t cap = TR.shape[2]
    cdef Py_ssize_t P = order.shape[0]
    cdef double[::1] ls = np.empty(cap + 1)
    cdef double[::1] lr = np.empty(cap + 1)
    cdef double[::1] lw = np.empty((cap + 1) * (cap + 1))
    cdef double[::1] w = np.empty((cap + 1) * (cap + 1))
    cdef Py_ssize_t p, t, i, j, k, l, k0, l0, ps, pr, qs, qr, Kc, nc, cell
    cdef int e, has_next
    cdef double le, le_new
    cdef Py_ssize_t stop = P
    with nogil:
        for p in range(start, P):
            if allow_new and K[0] + 2 > cap:
                stop = p
                break
            t = order[p, 0]
            i = order[p, 1]
            j = order[p, 2]
            e = E[t, i, j]
            k0 = S[t, i, j]
            l0 = R[t, i, j]
            if t > 0:
                ps = S[t - 1, i, j] + 1
                pr = R[t - 1, i, j] + 1
            else:
                ps = 0
                pr = 0
            has_next = t < T - 1
            if has_next:
                qs = S[t + 1, i, j]
                qr = R[t + 1, i, j]
            else:
                qs = -1
                qr = -1

            TR[i, ps, k0] -= 1
            TOT[i, ps] -= 1
            TR[j, pr, l0] -= 1
            TOT[j, pr] -= 1
            if has_next:
                TR[i, k0 + 1, qs] -= 1
                TOT[i, k0 + 1] -= 1
                TR[j, l0 + 1, qr] -= 1
                TOT[j, l0 + 1] -= 1
            if e:
                L1[k0, l0] -= 1
            else:
                L0[k0, l0] -= 1

            Kc = K[0]
            nc = Kc + 1 if allow_new else Kc
            for k in range(nc):
                ls[k] = _mti_slot(TR, TOT, i, ps, qs, k, Kc, alpha, kappa, beta, beta_u[0], has_next)
                lr[k] = _mti_slot(TR, TOT, j, pr, qr, k, Kc, alpha, kappa, beta, beta_u[0], has_next)
            if e:
                le_new = log(lam1 / (lam1 + lam2))
            else:
                le_new = log(lam2 / (lam1 + lam2))
            for k in range(nc):
                for l in range(nc):
                    if k < Kc and l < Kc:
                        le = _log_edge(L1, L0, k, l, e, lam1, lam2)
                    else:
                        le = le_new
                    lw[k * nc + l] = ls[k] + lr[l] + le
            cell = _pick(lw, w, nc * nc, U[p, 0])
            k = cell // nc
            l = cell % nc
            if allow_new:
                _resolve_new(&k, &l, Kc, beta, beta_u, K, U, p, gamma)

            S[t, i, j] = <int>k
            R[t, i, j] = <int>l
            TR[i, ps, k] += 1
            TOT[i, ps] += 1
            TR[j, pr, l] += 1
            TOT[j, pr] += 1
            if has_next:
                TR[i, k + 1, qs] += 1
                TOT[i, k + 1] += 1
                TR[j, l + 1, qr] += 1
                TOT[j, l + 1] += 1
            if e:
                L1[k, l] += 1
            else:
                L0[k, l] += 1
    return stop
