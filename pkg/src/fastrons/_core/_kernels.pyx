# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled assembly loops.

Same closed forms as ``fastrons.gaussian_kernels`` and the tanh network in
``fastrons.ansatz``, fused into one pass per mode pair / collocation point.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, pow, tanh, sin, cos, M_PI

cnp.import_array()


cdef inline void _metric_pair(int d, double Ai, double wi, double ai,
                              double Aj, double wj, double aj,
                              double sig2, double G,
                              double* u, double* v, double uu, double vv, double uv,
                              double* T) noexcept nogil:
    # fills T[a * K + b] for a <= b with <d_a phi_i, d_b phi_j>
    cdef int K = d + 2
    cdef int k, l
    cdef double Ai2 = Ai * Ai, Aj2 = Aj * Aj
    cdef double ww_moment, cA, cw, cc
    T[0] = 4.0 * Ai * Aj * G
    T[1] = -4.0 * Ai * wj * Aj2 * (vv + d * sig2) * G
    ww_moment = (d * d + 2 * d) * sig2 * sig2 + d * sig2 * (uu + vv) + 4.0 * sig2 * uv + uu * vv
    T[K + 1] = 4.0 * wi * wj * Ai2 * Aj2 * ww_moment * G
    cA = 4.0 * Ai * aj * Aj2 * G
    cw = -4.0 * wi * Ai2 * aj * Aj2 * G
    cc = 4.0 * ai * aj * Ai2 * Aj2 * G
    for l in range(d):
        T[2 + l] = cA * v[l]
        T[K + 2 + l] = cw * (v[l] * (d * sig2 + uu) + 2.0 * sig2 * u[l])
        for k in range(l + 1):
            T[(2 + k) * K + 2 + l] = cc * ((sig2 if k == l else 0.0) + u[k] * v[l])


def gaussian_metric(double[:, ::1] modes):
    """Metric tensor of a Gaussian mixture, modes laid out as ``(A, w, c_1..c_d)``."""
    cdef int r = modes.shape[0]
    cdef int K = modes.shape[1]
    cdef int d = K - 2
    cdef int n = r * K
    cdef int i, j, a, b, k
    cdef double ai, aj, s, sig2, G, uu, vv, uv, dk
    out = np.zeros((n, n))
    cdef double[:, ::1] M = out
    cdef double[::1] u = np.empty(d), v = np.empty(d)
    cdef double[::1] Tij = np.empty(K * K), Tji = np.empty(K * K)
    cdef double half_d = 0.5 * d
    for i in range(r):
        ai = modes[i, 1] * modes[i, 1]
        for j in range(i, r):
            aj = modes[j, 1] * modes[j, 1]
            s = ai + aj
            sig2 = 0.5 / s
            uu = 0.0
            vv = 0.0
            uv = 0.0
            dk = 0.0
            for k in range(d):
                u[k] = modes[i, 2 + k] - modes[j, 2 + k]  # delta, rescaled below
                dk += u[k] * u[k]
            G = pow(M_PI / s, half_d) * exp(-ai * aj * dk / s)
            for k in range(d):
                v[k] = (ai / s) * u[k]
                u[k] = -(aj / s) * u[k]
                uu += u[k] * u[k]
                vv += v[k] * v[k]
                uv += u[k] * v[k]
            _metric_pair(d, modes[i, 0], modes[i, 1], ai, modes[j, 0], modes[j, 1], aj,
                         sig2, G, &u[0], &v[0], uu, vv, uv, &Tij[0])
            if i == j:
                for a in range(K):
                    for b in range(a, K):
                        M[i * K + a, i * K + b] = Tij[a * K + b]
                        M[i * K + b, i * K + a] = Tij[a * K + b]
                continue
            # exchanged pair: u and v swap roles
            _metric_pair(d, modes[j, 0], modes[j, 1], aj, modes[i, 0], modes[i, 1], ai,
                         sig2, G, &v[0], &u[0], vv, uu, uv, &Tji[0])
            for a in range(K):
                for b in range(a, K):
                    M[i * K + a, j * K + b] = Tij[a * K + b]
                    M[j * K + b, i * K + a] = Tij[a * K + b]
                    if a != b:
                        M[i * K + b, j * K + a] = Tji[a * K + b]
                        M[j * K + a, i * K + b] = Tji[a * K + b]
    return out


def gaussian_rhs(double[:, ::1] modes, double a_t, double alpha, double nu):
    """Right-hand side ``f`` of the Fokker-Planck problem for a Gaussian mixture."""
    cdef int r = modes.shape[0]
    cdef int K = modes.shape[1]
    cdef int d = K - 2
    cdef int i, j, k
    cdef double ai, aj, s, sig2, G, uu, vv, dk, Ai2, Aj2
    cdef double trB = d + alpha * (d - 1)
    cdef double mmean, vmean, beta0_v, p0, trP2, up1, EP, cfa, coef
    cdef double half_d = 0.5 * d
    out = np.zeros(r * K)
    cdef double[::1] f = out
    cdef double[::1] u = np.empty(d), v = np.empty(d), m = np.empty(d), p1 = np.empty(d)
    cdef double[::1] beta0 = np.empty(d)
    for i in range(r):
        ai = modes[i, 1] * modes[i, 1]
        Ai2 = modes[i, 0] * modes[i, 0]
        for j in range(r):
            aj = modes[j, 1] * modes[j, 1]
            Aj2 = modes[j, 0] * modes[j, 0]
            s = ai + aj
            sig2 = 0.5 / s
            dk = 0.0
            mmean = 0.0
            vmean = 0.0
            uu = 0.0
            vv = 0.0
            for k in range(d):
                dk += (modes[i, 2 + k] - modes[j, 2 + k]) * (modes[i, 2 + k] - modes[j, 2 + k])
                m[k] = (ai * modes[i, 2 + k] + aj * modes[j, 2 + k]) / s
                u[k] = m[k] - modes[i, 2 + k]
                v[k] = m[k] - modes[j, 2 + k]
                mmean += m[k]
                vmean += v[k]
                uu += u[k] * u[k]
                vv += v[k] * v[k]
            mmean /= d
            vmean /= d
            G = pow(M_PI / s, half_d) * exp(-ai * aj * dk / s)
            beta0_v = 0.0
            up1 = 0.0
            for k in range(d):
                beta0[k] = a_t - ((1.0 + alpha) * m[k] - alpha * mmean)
                beta0_v += beta0[k] * v[k]
                p1[k] = 2.0 * aj * (beta0[k] - ((1.0 + alpha) * v[k] - alpha * vmean)) \
                    + 8.0 * nu * aj * aj * v[k]
                up1 += u[k] * p1[k]
            p0 = trB + 2.0 * aj * beta0_v + nu * (4.0 * aj * aj * vv - 2.0 * d * aj)
            trP2 = -2.0 * aj * trB + 4.0 * nu * d * aj * aj
            EP = p0 + sig2 * trP2
            f[i * K] += 2.0 * modes[i, 0] * Aj2 * EP * G
            f[i * K + 1] += -2.0 * modes[i, 1] * Ai2 * Aj2 * G * (
                p0 * (d * sig2 + uu) + 2.0 * sig2 * up1 + ((d + 2) * sig2 * sig2 + uu * sig2) * trP2)
            coef = 2.0 * ai * Ai2 * Aj2 * G
            for k in range(d):
                f[i * K + 2 + k] += coef * (u[k] * EP + sig2 * p1[k])
    return out


def tanh_collocation(double[::1] x, double[:, ::1] modes, double ell):
    """Collocation matrix and Kuramoto-Sivashinsky right-hand side for a tanh network."""
    cdef int N = x.shape[0]
    cdef int r = modes.shape[0]
    cdef int p, i
    cdef double kx = M_PI / ell
    cdef double A, w, c, dd, th, sn, cs, T, S, z1, z2, z3, z4, T1, T2, T3, T4
    cdef double U, U1, U2, U4
    Mt_arr = np.empty((N, 4 * r))
    ft_arr = np.empty(N)
    cdef double[:, ::1] Mt = Mt_arr
    cdef double[::1] ft = ft_arr
    for p in range(N):
        U = 0.0
        U1 = 0.0
        U2 = 0.0
        U4 = 0.0
        for i in range(r):
            A = modes[i, 0]
            w = modes[i, 1]
            c = modes[i, 2]
            dd = modes[i, 3]
            th = kx * x[p] + c
            sn = sin(th)
            cs = cos(th)
            T = tanh(w * sn + dd)
            S = 1.0 - T * T
            Mt[p, 4 * i] = T
            Mt[p, 4 * i + 1] = A * S * sn
            Mt[p, 4 * i + 2] = A * S * w * cs
            Mt[p, 4 * i + 3] = A * S
            z1 = w * kx * cs
            z2 = -w * kx * kx * sn
            z3 = -w * kx * kx * kx * cs
            z4 = w * kx * kx * kx * kx * sn
            T1 = S
            T2 = -2.0 * T * S
            T3 = (6.0 * T * T - 2.0) * S
            T4 = (16.0 * T - 24.0 * T * T * T) * S
            U += A * T
            U1 += A * T1 * z1
            U2 += A * (T2 * z1 * z1 + T1 * z2)
            U4 += A * (T4 * z1 * z1 * z1 * z1 + 6.0 * T3 * z1 * z1 * z2
                       + T2 * (3.0 * z2 * z2 + 4.0 * z1 * z3) + T1 * z4)
        ft[p] = -U * U1 - U2 - U4
    return Mt_arr, ft_arr
