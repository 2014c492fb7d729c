"""Pure-Python kernels.

Reference implementation of the hot loops; ``_ckernels.pyx`` mirrors every
function here with the same signature and return layout.

Status codes: 0 finished, 1 left the critical cone, 2 touched a wall,
3 non-finite state.
"""

import math

import numpy as np

OK, CONE_EXIT, WALL_CONTACT, NONFINITE = 0, 1, 2, 3


def _rate(x, th, f, R, v, k):
    c = math.cos(th)
    s = math.sin(th)
    den = f * f * c * c - s * s
    if abs(den) < 1e-12:
        return math.nan
    return -2.0 * f * k * (f * c * (s + R) + x * s) / (v * den)


def _check(x, th, f, R):
    if not (math.isfinite(x) and math.isfinite(th)):
        return NONFINITE
    if abs(x) >= R:
        return WALL_CONTACT
    if math.sin(th) - f * abs(math.cos(th)) <= 0.0:
        return CONE_EXIT
    return OK


def corridor_run(x, y, theta, f, R, v, k, dt, n_steps, hold_every):
    """RK4 on the unicycle under the tau-balance law.

    ``hold_every == 0`` evaluates the law at every RK stage; otherwise the
    turn rate is sampled every ``hold_every`` steps and held in between.
    """
    states = np.empty((n_steps + 1, 3))
    controls = np.empty(n_steps + 1)
    states[0] = (x, y, theta)
    status = _check(x, theta, f, R)
    if status != OK:
        controls[0] = math.nan
        return states, controls, status, 0
    u = 0.0
    hd = 0.5 * dt
    for i in range(n_steps):
        if hold_every == 0:
            k1u = _rate(x, theta, f, R, v, k)
            u = k1u
            k1x, k1y = v * math.cos(theta), v * math.sin(theta)
            x2, t2 = x + hd * k1x, theta + hd * k1u
            k2u = _rate(x2, t2, f, R, v, k)
            k2x, k2y = v * math.cos(t2), v * math.sin(t2)
            x3, t3 = x + hd * k2x, theta + hd * k2u
            k3u = _rate(x3, t3, f, R, v, k)
            k3x, k3y = v * math.cos(t3), v * math.sin(t3)
            x4, t4 = x + dt * k3x, theta + dt * k3u
            k4u = _rate(x4, t4, f, R, v, k)
            k4x, k4y = v * math.cos(t4), v * math.sin(t4)
            if math.isnan(k1u + k2u + k3u + k4u):
                controls[i] = u
                return states, controls, CONE_EXIT, i
            x += dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            y += dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
            theta += dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        else:
            if i % hold_every == 0:
                u = _rate(x, theta, f, R, v, k)
                if math.isnan(u):
                    controls[i] = u
                    return states, controls, CONE_EXIT, i
            k1x, k1y = v * math.cos(theta), v * math.sin(theta)
            t2 = theta + hd * u
            k2x, k2y = v * math.cos(t2), v * math.sin(t2)
            k4x, k4y = v * math.cos(theta + dt * u), v * math.sin(theta + dt * u)
            x += dt / 6.0 * (k1x + 4 * k2x + k4x)
            y += dt / 6.0 * (k1y + 4 * k2y + k4y)
            theta += dt * u
        controls[i] = u
        states[i + 1] = (x, y, theta)
        status = _check(x, theta, f, R)
        if status != OK:
            controls[i + 1] = u
            return states, controls, status, i + 1
    if hold_every == 0:
        u = _rate(x, theta, f, R, v, k)
    controls[n_steps] = u
    return states, controls, OK, n_steps


def _side_mean(x, th, f, R, v, d, alive, sigma, z):
    c, s = math.cos(th), math.sin(th)
    wall = np.where(d < 0, -R, R)
    den = f * c + d * s
    with np.errstate(divide="ignore", invalid="ignore"):
        par = (wall - x - f * c) / den
    ok = alive & (den != 0) & ((den > 0) == (wall > 0)) & (par > 0)
    cnt = int(ok.sum())
    if cnt == 0:
        return math.nan
    return float((f * (1.0 + par[ok]) / v).sum() / cnt) + sigma * z / math.sqrt(cnt)


def _noisy_rate(x, th, f, R, v, k, dl, dr, al, ar, sigma, zl, zr):
    ml = _side_mean(x, th, f, R, v, dl, al, sigma, zl)
    mr = _side_mean(x, th, f, R, v, dr, ar, sigma, zr)
    return k * (ml - mr)


def corridor_noisy_run(x, y, theta, f, R, v, k, dt, n_steps,
                       d_left, d_right, alive_left, alive_right, sigma,
                       z_left, z_right, u_prev=0.0):
    """RK4 with the turn rate averaged over many noisy receptors.

    Row ``i`` of the receptor arrays is the draw for step ``i`` and stays
    fixed over the four RK stages.  Each receptor's transit time carries iid
    N(0, sigma^2) noise; only the side mean enters the law, so the noise is
    applied there as sigma * z / sqrt(count) with one standard normal ``z``
    per side and step, which has exactly the same distribution.  A side with
    no usable receptor makes the stage fall back to the last good turn rate (``u_prev`` seeds it, and the
    final value is returned so long runs can be chunked); such steps are
    counted as starved when it happens at the first stage.
    """
    states = np.empty((n_steps + 1, 3))
    controls = np.empty(n_steps + 1)
    states[0] = (x, y, theta)
    alive_left = np.asarray(alive_left, dtype=bool)
    alive_right = np.asarray(alive_right, dtype=bool)
    status = _check(x, theta, f, R)
    starved = 0
    if status != OK:
        controls[0] = math.nan
        return states, controls, status, 0, starved, u_prev
    hd = 0.5 * dt
    for i in range(n_steps):
        args = (d_left[i], d_right[i], alive_left[i], alive_right[i], sigma, z_left[i], z_right[i])
        k1u = _noisy_rate(x, theta, f, R, v, k, *args)
        if math.isnan(k1u):
            starved += 1
            k1u = u_prev
        else:
            u_prev = k1u
        k1x, k1y = v * math.cos(theta), v * math.sin(theta)
        x2, t2 = x + hd * k1x, theta + hd * k1u
        k2u = _noisy_rate(x2, t2, f, R, v, k, *args)
        if math.isnan(k2u):
            k2u = u_prev
        k2x, k2y = v * math.cos(t2), v * math.sin(t2)
        x3, t3 = x + hd * k2x, theta + hd * k2u
        k3u = _noisy_rate(x3, t3, f, R, v, k, *args)
        if math.isnan(k3u):
            k3u = u_prev
        k3x, k3y = v * math.cos(t3), v * math.sin(t3)
        x4, t4 = x + dt * k3x, theta + dt * k3u
        k4u = _noisy_rate(x4, t4, f, R, v, k, *args)
        if math.isnan(k4u):
            k4u = u_prev
        k4x, k4y = v * math.cos(t4), v * math.sin(t4)
        x += dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        y += dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        theta += dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        controls[i] = k1u
        states[i + 1] = (x, y, theta)
        status = _check(x, theta, f, R)
        if status != OK:
            controls[i + 1] = k1u
            return states, controls, status, i + 1, starved, u_prev
    controls[n_steps] = u_prev
    return states, controls, OK, n_steps, starved, u_prev


def affine_run(Ms, cs, modes, x0, dt):
    """RK4 on the switched affine system x' = M[q] x + c[q], q = modes[i] on step i.

    With the mode frozen over a step, one RK4 step is the affine map
    x -> Phi x + Gamma, which is precomputed per mode.
    """
    Ms = np.asarray(Ms, dtype=float)
    cs = np.asarray(cs, dtype=float)
    modes = np.asarray(modes)
    n = Ms.shape[1]
    I = np.eye(n)
    phis, gammas = [], []
    for M, c in zip(Ms, cs):
        hM = dt * M
        hM2 = hM @ hM
        hM3 = hM2 @ hM
        phis.append(I + hM + hM2 / 2 + hM3 / 6 + hM3 @ hM / 24)
        gammas.append(dt * (I + hM / 2 + hM2 / 6 + hM3 / 24) @ c)
    n_steps = len(modes)
    states = np.empty((n_steps + 1, n))
    x = np.array(x0, dtype=float)
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            q = modes[i]
            x = phis[q] @ x + gammas[q]
            if not np.all(np.isfinite(x)):
                return states, NONFINITE, i
            states[i + 1] = x
    return states, OK, n_steps
