# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same signatures and return layout as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs, sqrt, isfinite, isnan, NAN

cnp.import_array()

cdef enum:
    OK = 0
    CONE_EXIT = 1
    WALL_CONTACT = 2
    NONFINITE = 3


cdef inline double _rate(double x, double th, double f, double R, double v, double k) nogil:
    cdef double c = cos(th)
    cdef double s = sin(th)
    cdef double den = f * f * c * c - s * s
    if fabs(den) < 1e-12:
        return NAN
    return -2.0 * f * k * (f * c * (s + R) + x * s) / (v * den)


cdef inline int _check(double x, double th, double f, double R) nogil:
    if not (isfinite(x) and isfinite(th)):
        return NONFINITE
    if fabs(x) >= R:
        return WALL_CONTACT
    if sin(th) - f * fabs(cos(th)) <= 0.0:
        return CONE_EXIT
    return OK


def corridor_run(double x, double y, double theta, double f, double R, double v,
                 double k, double dt, Py_ssize_t n_steps, Py_ssize_t hold_every):
    states_arr = np.empty((n_steps + 1, 3))
    controls_arr = np.empty(n_steps + 1)
    cdef double[:, ::1] states = states_arr
    cdef double[::1] controls = controls_arr
    cdef double u = 0.0, hd = 0.5 * dt
    cdef double k1x, k1y, k1u, k2x, k2y, k2u, k3x, k3y, k3u, k4x, k4y, k4u
    cdef double x2, t2, x3, t3, x4, t4
    cdef Py_ssize_t i
    cdef int status
    states[0, 0] = x
    states[0, 1] = y
    states[0, 2] = theta
    status = _check(x, theta, f, R)
    if status != OK:
        controls[0] = NAN
        return states_arr, controls_arr, status, 0
    with nogil:
        for i in range(n_steps):
            if hold_every == 0:
                k1u = _rate(x, theta, f, R, v, k)
                u = k1u
                k1x = v * cos(theta)
                k1y = v * sin(theta)
                x2 = x + hd * k1x
                t2 = theta + hd * k1u
                k2u = _rate(x2, t2, f, R, v, k)
                k2x = v * cos(t2)
                k2y = v * sin(t2)
                x3 = x + hd * k2x
                t3 = theta + hd * k2u
                k3u = _rate(x3, t3, f, R, v, k)
                k3x = v * cos(t3)
                k3y = v * sin(t3)
                x4 = x + dt * k3x
                t4 = theta + dt * k3u
                k4u = _rate(x4, t4, f, R, v, k)
                k4x = v * cos(t4)
                k4y = v * sin(t4)
                if isnan(k1u + k2u + k3u + k4u):
                    controls[i] = u
                    status = CONE_EXIT
                    break
                x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
                y = y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
                theta = theta + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
            else:
                if i % hold_every == 0:
                    u = _rate(x, theta, f, R, v, k)
                    if isnan(u):
                        controls[i] = u
                        status = CONE_EXIT
                        break
                k1x = v * cos(theta)
                k1y = v * sin(theta)
                t2 = theta + hd * u
                k2x = v * cos(t2)
                k2y = v * sin(t2)
                k4x = v * cos(theta + dt * u)
                k4y = v * sin(theta + dt * u)
                x = x + dt / 6.0 * (k1x + 4 * k2x + k4x)
                y = y + dt / 6.0 * (k1y + 4 * k2y + k4y)
                theta = theta + dt * u
            controls[i] = u
            states[i + 1, 0] = x
            states[i + 1, 1] = y
            states[i + 1, 2] = theta
            status = _check(x, theta, f, R)
            if status != OK:
                controls[i + 1] = u
                i = i + 1
                break
    if status != OK:
        return states_arr, controls_arr, status, i
    if hold_every == 0:
        u = _rate(x, theta, f, R, v, k)
    controls[n_steps] = u
    return states_arr, controls_arr, OK, n_steps


cdef inline double _side_mean(double x, double th, double f, double R, double v,
                              const double[::1] d, const cnp.uint8_t[::1] alive,
                              double sigma, double z) nogil:
    cdef double c = cos(th)
    cdef double s = sin(th)
    cdef double wall, den, par, total = 0.0
    cdef Py_ssize_t j, cnt = 0
    for j in range(d.shape[0]):
        if not alive[j]:
            continue
        wall = -R if d[j] < 0 else R
        den = f * c + d[j] * s
        if den == 0.0 or (den > 0) != (wall > 0):
            continue
        par = (wall - x - f * c) / den
        if not par > 0.0:
            continue
        total += f * (1.0 + par) / v
        cnt += 1
    if cnt == 0:
        return NAN
    return total / cnt + sigma * z / sqrt(<double>cnt)


cdef inline double _noisy_rate(double x, double th, double f, double R, double v, double k,
                               const double[::1] dl, const double[::1] dr,
                               const cnp.uint8_t[::1] al, const cnp.uint8_t[::1] ar,
                               double sigma, double zl, double zr) nogil:
    return k * (_side_mean(x, th, f, R, v, dl, al, sigma, zl) - _side_mean(x, th, f, R, v, dr, ar, sigma, zr))


def corridor_noisy_run(double x, double y, double theta, double f, double R, double v,
                       double k, double dt, Py_ssize_t n_steps,
                       d_left, d_right, alive_left, alive_right, double sigma,
                       z_left, z_right, double u_prev=0.0):
    cdef const double[:, ::1] dL = np.ascontiguousarray(d_left, dtype=np.float64)
    cdef const double[:, ::1] dR = np.ascontiguousarray(d_right, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] aL = np.ascontiguousarray(alive_left, dtype=np.uint8)
    cdef const cnp.uint8_t[:, ::1] aR = np.ascontiguousarray(alive_right, dtype=np.uint8)
    cdef const double[::1] zL = np.ascontiguousarray(z_left, dtype=np.float64)
    cdef const double[::1] zR = np.ascontiguousarray(z_right, dtype=np.float64)
    states_arr = np.empty((n_steps + 1, 3))
    controls_arr = np.empty(n_steps + 1)
    cdef double[:, ::1] states = states_arr
    cdef double[::1] controls = controls_arr
    cdef double hd = 0.5 * dt
    cdef double k1x, k1y, k1u, k2x, k2y, k2u, k3x, k3y, k3u, k4x, k4y, k4u
    cdef double x2, t2, x3, t3, x4, t4
    cdef Py_ssize_t i, starved = 0
    cdef int status
    states[0, 0] = x
    states[0, 1] = y
    states[0, 2] = theta
    status = _check(x, theta, f, R)
    if status != OK:
        controls[0] = NAN
        return states_arr, controls_arr, status, 0, 0, u_prev
    with nogil:
        for i in range(n_steps):
            k1u = _noisy_rate(x, theta, f, R, v, k, dL[i], dR[i], aL[i], aR[i], sigma, zL[i], zR[i])
            if isnan(k1u):
                starved += 1
                k1u = u_prev
            else:
                u_prev = k1u
            k1x = v * cos(theta)
            k1y = v * sin(theta)
            x2 = x + hd * k1x
            t2 = theta + hd * k1u
            k2u = _noisy_rate(x2, t2, f, R, v, k, dL[i], dR[i], aL[i], aR[i], sigma, zL[i], zR[i])
            if isnan(k2u):
                k2u = u_prev
            k2x = v * cos(t2)
            k2y = v * sin(t2)
            x3 = x + hd * k2x
            t3 = theta + hd * k2u
            k3u = _noisy_rate(x3, t3, f, R, v, k, dL[i], dR[i], aL[i], aR[i], sigma, zL[i], zR[i])
            if isnan(k3u):
                k3u = u_prev
            k3x = v * cos(t3)
            k3y = v * sin(t3)
            x4 = x + dt * k3x
            t4 = theta + dt * k3u
            k4u = _noisy_rate(x4, t4, f, R, v, k, dL[i], dR[i], aL[i], aR[i], sigma, zL[i], zR[i])
            if isnan(k4u):
                k4u = u_prev
            k4x = v * cos(t4)
            k4y = v * sin(t4)
            x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            y = y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
            theta = theta + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
            controls[i] = k1u
            states[i + 1, 0] = x
            states[i + 1, 1] = y
            states[i + 1, 2] = theta
            status = _check(x, theta, f, R)
            if status != OK:
                controls[i + 1] = k1u
                i = i + 1
                break
    if status != OK:
        return states_arr, controls_arr, status, i, starved, u_prev
    controls[n_steps] = u_prev
    return states_arr, controls_arr, OK, n_steps, starved, u_prev


def affine_run(Ms, cs, modes, x0, double dt):
    cdef const double[:, :, ::1] M = np.ascontiguousarray(Ms, dtype=np.float64)
    cdef const double[:, ::1] C = np.ascontiguousarray(cs, dtype=np.float64)
    cdef const long[::1] q = np.ascontiguousarray(modes, dtype=np.int_)
    cdef Py_ssize_t n = M.shape[1], n_steps = q.shape[0]
    states_arr = np.empty((n_steps + 1, n))
    cdef double[:, ::1] X = states_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] k1 = np.empty(n), k2 = np.empty(n), k3 = np.empty(n), k4 = np.empty(n)
    cdef double[::1] tmp = np.empty(n)
    cdef Py_ssize_t i, r, c, mode
    cdef double acc, hd = 0.5 * dt
    cdef int status = OK
    for r in range(n):
        X[0, r] = x[r]
    with nogil:
        for i in range(n_steps):
            mode = q[i]
            for r in range(n):
                acc = C[mode, r]
                for c in range(n):
                    acc = acc + M[mode, r, c] * x[c]
                k1[r] = acc
            for r in range(n):
                tmp[r] = x[r] + hd * k1[r]
            for r in range(n):
                acc = C[mode, r]
                for c in range(n):
                    acc = acc + M[mode, r, c] * tmp[c]
                k2[r] = acc
            for r in range(n):
                tmp[r] = x[r] + hd * k2[r]
            for r in range(n):
                acc = C[mode, r]
                for c in range(n):
                    acc = acc + M[mode, r, c] * tmp[c]
                k3[r] = acc
            for r in range(n):
                tmp[r] = x[r] + dt * k3[r]
            for r in range(n):
                acc = C[mode, r]
                for c in range(n):
                    acc = acc + M[mode, r, c] * tmp[c]
                k4[r] = acc
            for r in range(n):
                x[r] = x[r] + dt / 6.0 * (k1[r] + 2 * k2[r] + 2 * k3[r] + k4[r])
                X[i + 1, r] = x[r]
                if not isfinite(x[r]):
                    status = NONFINITE
            if status != OK:
                break
    if status != OK:
        return states_arr, status, i
    return states_arr, OK, n_steps
