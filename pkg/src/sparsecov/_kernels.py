"""Compiled inner loops.

``bcd_sweep`` mirrors ``bcd._sweep_incremental`` (the numpy reference)
operation for operation; the two are checked against each other in the
test suite. ``lambda_roots`` is the scalar Newton solve behind
``pd.eigen_lambda_update``.
"""

import math

import numpy as np
from numba import njit

ROOT_TIE_TOL = 1e-12

# return codes of bcd_sweep
OK = 0
BAD_THETA = 1
NO_ROOT = 2
BAD_SCHUR = 3


@njit(cache=True)
def _poly(c3, c2, c1, c0, x):
    return ((c3 * x + c2) * x + c1) * x + c0


@njit(cache=True)
def _polish(c3, c2, c1, c0, x):
    for _ in range(4):
        d = (3.0 * c3 * x + 2.0 * c2) * x + c1
        if d == 0.0:
            break
        x_new = x - _poly(c3, c2, c1, c0, x) / d
        if abs(_poly(c3, c2, c1, c0, x_new)) > abs(_poly(c3, c2, c1, c0, x)):
            break
        x = x_new
    return x


@njit(cache=True)
def cubic_real_roots(c3, c2, c1, c0, out):
    """Write the real roots into ``out`` (unsorted); return how many."""
    a = c2 / c3
    b = c1 / c3
    c = c0 / c3
    shift = a / 3.0
    P = b - a * a / 3.0
    Q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c
    disc = (Q / 2.0) ** 2 + (P / 3.0) ** 3
    k = 0
    if P == 0.0 and Q == 0.0:
        out[0] = 0.0
        k = 1
    elif disc < 0.0:
        r = 2.0 * math.sqrt(-P / 3.0)
        arg = 3.0 * Q / (P * r) if r > 0 else 0.0
        arg = min(1.0, max(-1.0, arg))
        phi = math.acos(arg)
        for i in range(3):
            out[i] = r * math.cos((phi - 2.0 * math.pi * i) / 3.0)
        k = 3
    else:
        A = -math.copysign(np.cbrt(abs(Q) / 2.0 + math.sqrt(disc)), Q)
        B = -P / (3.0 * A) if A != 0.0 else 0.0
        out[0] = A + B
        k = 1
        if disc == 0.0 and A != 0.0:
            out[1] = -A
            k = 2
    for i in range(k):
        out[i] = _polish(c3, c2, c1, c0, out[i] - shift)
    return k


@njit(cache=True)
def _block_objective(t11, t12, t22, a, c, b):
    det = a * b - c * c
    if not (a > 0.0 and det > 0.0):
        return np.inf
    return (t11 * b - 2.0 * t12 * c + t22 * a) / det + math.log(det)


@njit(cache=True)
def constrained_schur(t11, t12, t22, psi, roots):
    """Return (code, Sbar_11, Sbar_22, objective) for the zero-pair block."""
    if not (t11 > 0.0 and t22 > 1e-14 * t11):
        return BAD_THETA, 0.0, 0.0, 0.0
    ratio = t22 / t11
    k = cubic_real_roots(t22, -t22 * t11, -t11 * (psi * psi + 2.0 * t12 * psi), -psi * psi * t11 * t11, roots)
    roots[:k].sort()
    found = False
    best_a = 0.0
    best_val = np.inf
    for i in range(k):
        a = roots[i]
        if not a > 0.0:
            continue
        val = _block_objective(t11, t12, t22, a, -psi, ratio * a)
        if not np.isfinite(val):
            continue
        if (not found) or val <= best_val + ROOT_TIE_TOL * max(1.0, abs(best_val)):
            found = True
            best_a = a
            best_val = min(val, best_val)
    if not found:
        return NO_ROOT, 0.0, 0.0, 0.0
    return OK, best_a, ratio * best_a, best_val


@njit(cache=True)
def bcd_sweep(sigma, K, S, Z, lam, use_l0):
    """One cyclic sweep over all pairs, updating ``sigma`` and ``K = sigma^{-1}`` in place.

    With ``use_l0`` the pattern is ignored and each pair picks the better of
    the zero and free solutions under the penalty ``lam``.
    """
    p = sigma.shape[0]
    W = np.empty((p, 2))
    SW = np.empty((p, 2))
    roots = np.empty(3)
    for u in range(p - 1):
        for v in range(u + 1, p):
            k11 = K[u, u]
            k12 = K[u, v]
            k22 = K[v, v]
            kdet = k11 * k22 - k12 * k12
            if not kdet > 0.0:
                return BAD_SCHUR
            s11 = k22 / kdet
            s12 = -k12 / kdet
            s22 = k11 / kdet
            for i in range(p):
                W[i, 0] = K[i, u] * s11 + K[i, v] * s12
                W[i, 1] = K[i, u] * s12 + K[i, v] * s22
            W[u, 0] = 1.0
            W[u, 1] = 0.0
            W[v, 0] = 0.0
            W[v, 1] = 1.0
            for i in range(p):
                x0 = 0.0
                x1 = 0.0
                for j in range(p):
                    x0 += S[i, j] * W[j, 0]
                    x1 += S[i, j] * W[j, 1]
                SW[i, 0] = x0
                SW[i, 1] = x1
            t11 = 0.0
            t12 = 0.0
            t21 = 0.0
            t22 = 0.0
            for i in range(p):
                t11 += W[i, 0] * SW[i, 0]
                t12 += W[i, 0] * SW[i, 1]
                t21 += W[i, 1] * SW[i, 0]
                t22 += W[i, 1] * SW[i, 1]
            t12 = 0.5 * (t12 + t21)
            psi11 = sigma[u, u] - s11
            psi12 = sigma[u, v] - s12
            psi22 = sigma[v, v] - s22

            free = Z[u, v] != 0
            if use_l0 or not free:
                code, a, b, zero_val = constrained_schur(t11, t12, t22, psi12, roots)
                if code != OK:
                    return code
                if use_l0:
                    free_val = _block_objective(t11, t12, t22, t11, t12, t22) + 2.0 * lam
                    free = not (zero_val < free_val)
            if free:
                n11 = t11 + psi11
                n12 = t12 + psi12
                n22 = t22 + psi22
                b11 = t11
                b12 = t12
                b22 = t22
            else:
                n11 = a + psi11
                n12 = 0.0
                n22 = b + psi22
                b11 = a
                b12 = -psi12
                b22 = b
            sigma[u, u] = n11
            sigma[v, v] = n22
            sigma[u, v] = n12
            sigma[v, u] = n12

            bdet = b11 * b22 - b12 * b12
            if not (b11 > 0.0 and bdet > 0.0):
                return BAD_SCHUR
            d11 = b22 / bdet - k11
            d12 = -b12 / bdet - k12
            d22 = b11 / bdet - k22
            for i in range(p):
                g0 = W[i, 0] * d11 + W[i, 1] * d12
                g1 = W[i, 0] * d12 + W[i, 1] * d22
                for j in range(i, p):
                    val = K[i, j] + g0 * W[j, 0] + g1 * W[j, 1]
                    K[i, j] = val
                    K[j, i] = val
    return OK


@njit(cache=True)
def lambda_roots(e, nu, rho, out):
    """Positive root of ``rho l^3 + e_k l^2 - nu`` for every ``e_k``.

    Newton from the right of the root, where the cubic is increasing and
    convex, so the iterates decrease monotonically.
    """
    base = (nu / rho) ** (1.0 / 3.0)
    for k in range(e.shape[0]):
        ek = e[k]
        if ek > 0.0:
            lam = min(base, math.sqrt(nu / ek))
        else:
            lam = base - ek / rho
        for _ in range(200):
            h = (rho * lam + ek) * lam * lam - nu
            dh = (3.0 * rho * lam + 2.0 * ek) * lam
            if dh <= 0.0:
                break
            new = lam - h / dh
            if new <= 0.0:
                new = 0.5 * lam
            if abs(new - lam) <= 4e-16 * lam:
                lam = new
                break
            lam = new
        out[k] = lam
    return out
