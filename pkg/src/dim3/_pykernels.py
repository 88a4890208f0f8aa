"""Pure-Python label-sweep kernels.

Loop-for-loop twin of ``_kernels.pyx``; used when the compiled extension is
unavailable or ``DIM3_BACKEND=python`` is set.  Arguments are numpy arrays
that are updated in place (labels, counts, weights, boxes for ``K`` and the
remainder weight).  All randomness comes in as pre-drawn uniforms so both
backends consume the same stream.

Uniform columns per pair: 0 picks the cell, 1 splits the remainder for a
first new community, 2 decides whether a second new label shares it, 3 splits
again when it does not.
"""
from math import exp, inf, lgamma, log

B_FLOOR = 1e-300


def _log_edge(L1, L0, k, l, e, lam1, lam2):
    n1 = L1[k, l]
    n0 = L0[k, l]
    if e:
        return log((n1 + lam1) / (n1 + n0 + lam1 + lam2))
    return log((n0 + lam2) / (n1 + n0 + lam1 + lam2))


def _forward(b, c, m):
    # change in log P(labels at t+1) when one more label at t joins this community
    if m == 0:
        return 0.0
    if b < B_FLOOR:
        b = B_FLOOR
    return lgamma(b + c + m) - lgamma(b + c) - lgamma(b + m) + lgamma(b)


def _pick(lw, nk, nl, u):
    """Row-major inverse-CDF draw from an ``nk x nl`` table of log weights."""
    mx = -inf
    for a in range(nk):
        for b in range(nl):
            if lw[a][b] > mx:
                mx = lw[a][b]
    total = 0.0
    w = [[0.0] * nl for _ in range(nk)]
    for a in range(nk):
        for b in range(nl):
            if lw[a][b] == -inf:
                v = 0.0
            else:
                v = exp(lw[a][b] - mx)
            w[a][b] = v
            total += v
    target = u * total
    cum = 0.0
    last_a = last_b = -1
    for a in range(nk):
        for b in range(nl):
            if w[a][b] > 0.0:
                cum += w[a][b]
                last_a, last_b = a, b
                if cum > target:
                    return a, b
    return last_a, last_b


def _open_new(beta, beta_u, K, u, gamma):
    """Instantiate community ``K[0]`` with a Beta(1, gamma) share of the remainder."""
    b = 1.0 - u ** (1.0 / gamma)
    k = K[0]
    beta[k] = b * beta_u[0]
    beta_u[0] = (1.0 - b) * beta_u[0]
    K[0] = k + 1
    return k, b


def _resolve_new(k, l, Kold, beta, beta_u, K, urow, gamma):
    # both coordinates new: the receiver joins the sender's new community with
    # probability equal to its share of the remainder, else opens another one
    if k == Kold and l == Kold:
        k, b = _open_new(beta, beta_u, K, urow[1], gamma)
        if urow[2] < b:
            l = k
        else:
            l, _ = _open_new(beta, beta_u, K, urow[3], gamma)
    elif k == Kold:
        k, _ = _open_new(beta, beta_u, K, urow[1], gamma)
    elif l == Kold:
        l, _ = _open_new(beta, beta_u, K, urow[1], gamma)
    return k, l


def mtv_gibbs_labels(E, S, R, N, L1, L0, beta, beta_u, K, order, U,
                     alpha, c, lam1, lam2, gamma, allow_new, start):
    T = E.shape[0]
    cap = N.shape[2]
    P = order.shape[0]
    for p in range(start, P):
        if allow_new and K[0] + 2 > cap:
            return p
        t, i, j = order[p, 0], order[p, 1], order[p, 2]
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
        ls = [0.0] * nc
        lr = [0.0] * nc
        for k in range(Kc):
            ab = alpha * beta[k]
            ws = N[t, i, k] + ab
            wr = N[t, j, k] + ab
            if t > 0:
                ws += c * N[t - 1, i, k]
                wr += c * N[t - 1, j, k]
            ls[k] = log(ws) if ws > 0.0 else -inf
            lr[k] = log(wr) if wr > 0.0 else -inf
            if t < T - 1:
                ls[k] += _forward(ab + c * N[t, i, k], c, N[t + 1, i, k])
                lr[k] += _forward(ab + c * N[t, j, k], c, N[t + 1, j, k])
        if allow_new:
            wn = alpha * beta_u[0]
            ls[Kc] = log(wn) if wn > 0.0 else -inf
            lr[Kc] = ls[Kc]

        lw = [[0.0] * nc for _ in range(nc)]
        for k in range(nc):
            for l in range(nc):
                if k < Kc and l < Kc:
                    le = _log_edge(L1, L0, k, l, e, lam1, lam2)
                elif e:
                    le = log(lam1 / (lam1 + lam2))
                else:
                    le = log(lam2 / (lam1 + lam2))
                lw[k][l] = ls[k] + lr[l] + le
        k, l = _pick(lw, nc, nc, U[p, 0])
        if allow_new:
            k, l = _resolve_new(k, l, Kc, beta, beta_u, K, U[p], gamma)

        S[t, i, j] = k
        R[t, i, j] = l
        N[t, i, k] += 1
        N[t, j, l] += 1
        if e:
            L1[k, l] += 1
        else:
            L0[k, l] += 1
    return P


def mtv_slice_labels(E, S, R, N, L1, L0, beta, pi, us, ur, pairs, U,
                     alpha, c, lam1, lam2):
    T = E.shape[0]
    Kx = pi.shape[1]
    P = pairs.shape[0]
    for p in range(P):
        t, i, j = pairs[p, 0], pairs[p, 1], pairs[p, 2]
        e = E[t, i, j]
        k0 = S[t, i, j]
        l0 = R[t, i, j]
        N[t, i, k0] -= 1
        N[t, j, l0] -= 1
        if e:
            L1[k0, l0] -= 1
        else:
            L0[k0, l0] -= 1

        ks = []
        ls = []
        for k in range(Kx):
            if pi[i, k] > us[p]:
                v = 0.0
                if t < T - 1:
                    v = _forward(alpha * beta[k] + c * N[t, i, k], c, N[t + 1, i, k])
                ks.append(k)
                ls.append(v)
        ls_r = []
        kr = []
        for l in range(Kx):
            if pi[j, l] > ur[p]:
                v = 0.0
                if t < T - 1:
                    v = _forward(alpha * beta[l] + c * N[t, j, l], c, N[t + 1, j, l])
                kr.append(l)
                ls_r.append(v)
        lw = [[ls[a] + ls_r[b] + _log_edge(L1, L0, ks[a], kr[b], e, lam1, lam2)
               for b in range(len(kr))] for a in range(len(ks))]
        a, b = _pick(lw, len(ks), len(kr), U[p])
        k = ks[a]
        l = kr[b]
        S[t, i, j] = k
        R[t, i, j] = l
        N[t, i, k] += 1
        N[t, j, l] += 1
        if e:
            L1[k, l] += 1
        else:
            L0[k, l] += 1


def _mti_slot(TR, TOT, a, p, q, k, Kc, alpha, kappa, beta, beta_u, has_next):
    """Log weight of label ``k`` for a chain slot of node ``a``.

    ``p`` is the restaurant the label is drawn in (0 at the first time,
    otherwise previous label + 1); ``q`` the next label in the chain.
    """
    if k < Kc:
        first = TR[a, p, k] + alpha * beta[k]
        if p == k + 1:
            first += kappa
        if first <= 0.0:
            return -inf
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
                return -inf
            lw += log(num / den)
        return lw
    first = alpha * beta_u
    if first <= 0.0:
        return -inf
    lw = log(first)
    if has_next:
        num = alpha * beta[q]
        if num <= 0.0:
            return -inf
        lw += log(num / (alpha + kappa))
    return lw


def mti_gibbs_labels(E, S, R, TR, TOT, L1, L0, beta, beta_u, K, order, U,
                     alpha, kappa, lam1, lam2, gamma, allow_new, start):
    T = E.shape[0]
    cap = TR.shape[2]
    P = order.shape[0]
    for p in range(start, P):
        if allow_new and K[0] + 2 > cap:
            return p
        t, i, j = order[p, 0], order[p, 1], order[p, 2]
        e = E[t, i, j]
        k0 = S[t, i, j]
        l0 = R[t, i, j]
        ps = S[t - 1, i, j] + 1 if t > 0 else 0
        pr = R[t - 1, i, j] + 1 if t > 0 else 0
        has_next = t < T - 1
        qs = S[t + 1, i, j] if has_next else -1
        qr = R[t + 1, i, j] if has_next else -1

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
        ls = [_mti_slot(TR, TOT, i, ps, qs, k, Kc, alpha, kappa, beta, beta_u[0], has_next)
              for k in range(nc)]
        lr = [_mti_slot(TR, TOT, j, pr, qr, k, Kc, alpha, kappa, beta, beta_u[0], has_next)
              for k in range(nc)]
        lw = [[0.0] * nc for _ in range(nc)]
        for k in range(nc):
            for l in range(nc):
                if k < Kc and l < Kc:
                    le = _log_edge(L1, L0, k, l, e, lam1, lam2)
                elif e:
                    le = log(lam1 / (lam1 + lam2))
                else:
                    le = log(lam2 / (lam1 + lam2))
                lw[k][l] = ls[k] + lr[l] + le
        k, l = _pick(lw, nc, nc, U[p, 0])
        if allow_new:
            k, l = _resolve_new(k, l, Kc, beta, beta_u, K, U[p], gamma)

        S[t, i, j] = k
        R[t, i, j] = l
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
    return P
