"""Hot numeric kernels: batched panel log-likelihood and first-passage scans.

Each kernel has a numba implementation and a pure-numpy twin with identical
semantics. ``USE_NUMBA`` (see :mod:`degradex._backend`) picks the default;
both are importable so tests and the benchmark can compare them directly.

Likelihood structure
--------------------
Units of one stress level that share a measurement grid share the covariance

    Sigma = s_eps^2 I + s_bm^2 min(t_u, t_v) + U U^T,   U = [s_y0 1, s_a e tau]

The first two terms are the covariance of a random walk observed with white
noise; a scalar Kalman filter gives its LDL^T factor in O(m). The rank-2 part
is handled as a ridge regression of the whitened residual on the whitened
columns of U: the quadratic form is the ridge residual (summed as squares,
so it cannot cancel to a spurious negative) and the determinant lemma gives
the log-determinant. One group costs O(m n) instead of O(m^3 + m^2 n).
"""
import math

import numpy as np

from ._backend import USE_NUMBA, njit

PENALTY = -1e300
JITTER = 1e-10
LOG_2PI = math.log(2.0 * math.pi)

# column order of the per-candidate theta matrix handed to the likelihood kernels
THETA_COLUMNS = ("mu_y0", "sigma_y0", "mu_a", "sigma_a", "beta", "sigma_bm", "sigma_eps")


@njit(nogil=True)
def _gains(times, s2, e2, F, K):
    prev_t = 0.0
    c_prev = 0.0
    for j in range(times.shape[0]):
        p = c_prev + s2 * (times[j] - prev_t)
        f = p + e2
        if not (f > 0.0) or not np.isfinite(f):
            return False
        F[j] = f
        K[j] = p / f
        c_prev = p * e2 / f
        prev_t = times[j]
    return True


@njit(nogil=True)
def _innovate(x, K, isf, out):
    mprev = 0.0
    for j in range(x.shape[0]):
        v = x[j] - mprev
        out[j] = v * isf[j]
        mprev += K[j] * v


@njit(nogil=True)
def _group_loglik(th, loge, times, logt, Y, F, K, isf, tau, w1, w2, q1, q2, z):
    mu_y0, s_y0, mu_a, s_a, beta, s_bm, s_eps = th[0], th[1], th[2], th[3], th[4], th[5], th[6]
    m = times.shape[0]
    n = Y.shape[0]
    e = math.exp(loge)
    s2 = s_bm * s_bm
    e2 = s_eps * s_eps
    tr_tau2 = 0.0
    for j in range(m):
        tau[j] = math.exp(beta * logt[j])
        tr_tau2 += tau[j] * tau[j]
    if not _gains(times, s2, e2, F, K):
        # singular base part: add diagonal jitter scaled to the mean variance once
        tr = m * s_y0 * s_y0 + s_a * s_a * e * e * tr_tau2
        for j in range(m):
            tr += s2 * times[j] + e2
        jit = JITTER * tr / m
        if not (jit > 0.0) or not _gains(times, s2, e2 + jit, F, K):
            return PENALTY
    logdet = 0.0
    for j in range(m):
        isf[j] = 1.0 / math.sqrt(F[j])
        logdet += math.log(F[j])
        z[j] = 1.0
    _innovate(z, K, isf, w1)
    _innovate(tau, K, isf, w2)
    c1 = s_y0
    c2 = s_a * e
    # Orthonormal basis of the augmented design [c1*w1, c2*w2; I_2]; body rows
    # in q1/q2, the two extra rows in q1t*/q2t*.
    r11 = 1.0
    for j in range(m):
        r11 += (c1 * w1[j]) ** 2
    r11 = math.sqrt(r11)
    for j in range(m):
        q1[j] = c1 * w1[j] / r11
    q1t0 = 1.0 / r11
    r12 = 0.0
    for j in range(m):
        r12 += q1[j] * c2 * w2[j]
    for j in range(m):
        q2[j] = c2 * w2[j] - r12 * q1[j]
    q2t0 = -r12 * q1t0
    q2t1 = 1.0
    d = q1t0 * q2t0  # reorthogonalize once
    for j in range(m):
        d += q1[j] * q2[j]
    r22 = 0.0
    for j in range(m):
        q2[j] -= d * q1[j]
        r22 += q2[j] * q2[j]
    q2t0 -= d * q1t0
    r22 = math.sqrt(r22 + q2t0 * q2t0 + q2t1 * q2t1)
    if not (r22 > 0.0 and r11 < np.inf and r22 < np.inf):
        return PENALTY
    for j in range(m):
        q2[j] /= r22
    q2t0 /= r22
    q2t1 /= r22
    logdet += 2.0 * (math.log(r11) + math.log(r22))
    drift = mu_a * e
    quad = 0.0
    for i in range(n):
        # whitened residual; its ridge-regression residual on the basis is the
        # quadratic form, accumulated as a sum of squares (no cancellation)
        _innovate(Y[i], K, isf, z)
        a1 = 0.0
        a2 = 0.0
        for j in range(m):
            r = z[j] - mu_y0 * w1[j] - drift * w2[j]
            z[j] = r
            a1 += q1[j] * r
            a2 += q2[j] * r
        t0 = a1 * q1t0 + a2 * q2t0
        t1 = a2 * q2t1
        res = t0 * t0 + t1 * t1
        for j in range(m):
            v = z[j] - a1 * q1[j] - a2 * q2[j]
            res += v * v
        quad += res
    return -0.5 * (n * (m * LOG_2PI + logdet) + quad)


@njit(nogil=True)
def _loglik_batch_numba(theta, loge, times, logt, t_off, y, y_off, g_n, g_level, out):
    G = g_n.shape[0]
    mmax = 0
    for g in range(G):
        mmax = max(mmax, t_off[g + 1] - t_off[g])
    buf = np.empty((9, mmax))
    for c in range(theta.shape[0]):
        total = 0.0
        for g in range(G):
            m = t_off[g + 1] - t_off[g]
            Y = y[y_off[g] : y_off[g + 1]].reshape((g_n[g], m))
            val = _group_loglik(
                theta[c],
                loge[c, g_level[g]],
                times[t_off[g] : t_off[g + 1]],
                logt[t_off[g] : t_off[g + 1]],
                Y,
                buf[0, :m],
                buf[1, :m],
                buf[2, :m],
                buf[3, :m],
                buf[4, :m],
                buf[5, :m],
                buf[6, :m],
                buf[7, :m],
                buf[8, :m],
            )
            if val == PENALTY:
                total = PENALTY
                break
            total += val
        if not np.isfinite(total):
            total = PENALTY
        out[c] = total
    return out


def _innov_np(X, K, isf):
    # X (..., m); K, isf broadcast against X[..., j]
    out = np.empty_like(X)
    mprev = np.zeros(X.shape[:-1])
    for j in range(X.shape[-1]):
        v = X[..., j] - mprev
        out[..., j] = v * isf[..., j]
        mprev = mprev + K[..., j] * v
    return out


def _gains_np(times, s2, e2):
    C = s2.shape[0]
    m = times.shape[0]
    F = np.empty((C, m))
    K = np.empty((C, m))
    c_prev = np.zeros(C)
    prev_t = 0.0
    for j in range(m):
        p = c_prev + s2 * (times[j] - prev_t)
        f = p + e2
        F[:, j] = f
        with np.errstate(divide="ignore", invalid="ignore"):
            K[:, j] = p / f
            c_prev = p * e2 / f
        prev_t = times[j]
    ok = np.all((F > 0) & np.isfinite(F), axis=1)
    return F, K, ok


def _loglik_batch_numpy(theta, loge, times, logt, t_off, y, y_off, g_n, g_level, out):
    C = theta.shape[0]
    mu_y0, s_y0, mu_a, s_a, beta, s_bm, s_eps = (theta[:, k] for k in range(7))
    total = np.zeros(C)
    bad = np.zeros(C, dtype=bool)
    for g in range(g_n.shape[0]):
        sl = slice(t_off[g], t_off[g + 1])
        t = times[sl]
        m = t.shape[0]
        n = int(g_n[g])
        Y = y[y_off[g] : y_off[g + 1]].reshape(n, m)
        e = np.exp(loge[:, g_level[g]])
        tau = np.exp(beta[:, None] * logt[sl][None, :])
        s2 = s_bm**2
        e2 = s_eps**2
        F, K, ok = _gains_np(t, s2, e2)
        if not ok.all():
            tr = m * s_y0**2 + s_a**2 * e**2 * (tau**2).sum(axis=1) + s2 * t.sum() + m * e2
            jit = JITTER * tr / m
            F2, K2, ok2 = _gains_np(t, s2, e2 + jit)
            redo = ~ok
            F[redo], K[redo] = F2[redo], K2[redo]
            bad |= redo & ~(ok2 & (jit > 0))
            F = np.where(bad[:, None], 1.0, F)
            K = np.where(bad[:, None], 0.0, K)
        with np.errstate(all="ignore"):
            isf = 1.0 / np.sqrt(F)
            logdet = np.log(F).sum(axis=1)
            w1 = _innov_np(np.ones((C, m)), K, isf)
            w2 = _innov_np(tau, K, isf)
            x1 = s_y0[:, None] * w1
            x2 = (s_a * e)[:, None] * w2
            # augmented basis: body rows (C, m) plus two extra rows
            r11 = np.sqrt(1.0 + (x1 * x1).sum(axis=1))
            q1 = x1 / r11[:, None]
            q1t0 = 1.0 / r11
            r12 = (q1 * x2).sum(axis=1)
            q2 = x2 - r12[:, None] * q1
            q2t0 = -r12 * q1t0
            q2t1 = np.ones(C)
            d = (q1 * q2).sum(axis=1) + q1t0 * q2t0
            q2 = q2 - d[:, None] * q1
            q2t0 = q2t0 - d * q1t0
            r22 = np.sqrt((q2 * q2).sum(axis=1) + q2t0**2 + q2t1**2)
            bad |= ~((r22 > 0) & np.isfinite(r22) & np.isfinite(r11))
            q2 = q2 / r22[:, None]
            q2t0 = q2t0 / r22
            q2t1 = q2t1 / r22
            logdet = logdet + 2.0 * (np.log(r11) + np.log(r22))
            Z = _innov_np(np.broadcast_to(Y, (C, n, m)), K[:, None, :], isf[:, None, :])
            R = Z - mu_y0[:, None, None] * w1[:, None, :] - (mu_a * e)[:, None, None] * w2[:, None, :]
            a1 = (q1[:, None, :] * R).sum(axis=2)
            a2 = (q2[:, None, :] * R).sum(axis=2)
            V = R - a1[:, :, None] * q1[:, None, :] - a2[:, :, None] * q2[:, None, :]
            q = (V * V).sum(axis=2) + (a1 * q1t0[:, None] + a2 * q2t0[:, None]) ** 2 + (a2 * q2t1[:, None]) ** 2
            total += -0.5 * (n * (m * LOG_2PI + logdet) + q.sum(axis=1))
    total[bad | ~np.isfinite(total)] = PENALTY
    out[:] = total
    return out


@njit(nogil=True)
def _first_passage_numba(y0, a, drift, times, sqrt_dt, bm_z, sigma_bm, noise, threshold, life, censored):
    P = y0.shape[0]
    nt = times.shape[0]
    use_bm = bm_z.shape[1] > 0 and sigma_bm > 0.0
    use_noise = noise.shape[1] > 0
    for q in range(P):
        b = 0.0
        prev = y0[q] + a[q] * drift[0]
        if use_noise:
            prev += noise[q, 0]
        censored[q] = False
        if prev >= threshold:
            life[q] = times[0]
            continue
        hit = False
        for k in range(1, nt):
            if use_bm:
                b += sigma_bm * sqrt_dt[k - 1] * bm_z[q, k - 1]
            cur = y0[q] + a[q] * drift[k] + b
            if use_noise:
                cur += noise[q, k]
            if cur >= threshold:
                life[q] = times[k - 1] + (times[k] - times[k - 1]) * (threshold - prev) / (cur - prev)
                hit = True
                break
            prev = cur
        if not hit:
            life[q] = times[nt - 1]
            censored[q] = True


def _first_passage_numpy(y0, a, drift, times, sqrt_dt, bm_z, sigma_bm, noise, threshold, life, censored):
    Y = y0[:, None] + a[:, None] * drift[None, :]
    if bm_z.shape[1] > 0 and sigma_bm > 0.0:
        B = np.zeros_like(Y)
        B[:, 1:] = np.cumsum(sigma_bm * sqrt_dt[None, :] * bm_z, axis=1)
        Y = Y + B
    if noise.shape[1] > 0:
        Y = Y + noise
    above = Y >= threshold
    hit = above.any(axis=1)
    k = np.argmax(above, axis=1)
    life[:] = times[-1]
    censored[:] = ~hit
    start = hit & (k == 0)
    life[start] = times[0]
    mid = hit & (k > 0)
    rows = np.nonzero(mid)[0]
    kk = k[rows]
    prev = Y[rows, kk - 1]
    cur = Y[rows, kk]
    life[rows] = times[kk - 1] + (times[kk] - times[kk - 1]) * (threshold - prev) / (cur - prev)


def loglik_batch(theta, loge, layout, use_numba=None):
    """Evaluate the panel log-likelihood for every row of ``theta``.

    ``theta`` is (C, 7) in :data:`THETA_COLUMNS` order and ``loge`` is (C, k)
    holding the log-rate of each candidate at each stress level.
    """
    use_numba = USE_NUMBA if use_numba is None else use_numba
    theta = np.ascontiguousarray(theta, dtype=float)
    loge = np.ascontiguousarray(loge, dtype=float)
    out = np.empty(theta.shape[0])
    fn = _loglik_batch_numba if use_numba else _loglik_batch_numpy
    fn(theta, loge, *layout, out)
    return out


def first_passage(y0, a, drift, times, bm_z, sigma_bm, noise, threshold, use_numba=None):
    """Scan simulated paths for their first crossing of ``threshold``.

    Returns ``(life, censored)``; crossings are linearly interpolated inside
    the grid step, paths starting at or above threshold get ``times[0]``.
    """
    use_numba = USE_NUMBA if use_numba is None else use_numba
    P = y0.shape[0]
    life = np.empty(P)
    censored = np.empty(P, dtype=bool)
    sqrt_dt = np.sqrt(np.diff(times))
    fn = _first_passage_numba if use_numba else _first_passage_numpy
    fn(
        np.ascontiguousarray(y0, dtype=float),
        np.ascontiguousarray(a, dtype=float),
        np.ascontiguousarray(drift, dtype=float),
        np.ascontiguousarray(times, dtype=float),
        sqrt_dt,
        np.ascontiguousarray(bm_z, dtype=float),
        float(sigma_bm),
        np.ascontiguousarray(noise, dtype=float),
        float(threshold),
        life,
        censored,
    )
    return life, censored
