"""The compiled kernels must agree with the pure-Python reference."""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from percept_ctl import _backend
from percept_ctl.corridor import CorridorScene, VehicleState
from percept_ctl.steering import ReceptorArray, receptor_draws, simulate_two_pixel

py = _backend.python_kernels
cy = _backend.compiled_kernels
needs_compiled = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


@needs_compiled
@pytest.mark.parametrize("hold", [0, 1, 25])
@pytest.mark.parametrize("start", [(1.0, 0.0, math.radians(100)), (-1.5, 2.0, math.radians(70)),
                                   (1.9, 0.0, math.radians(50))])
def test_corridor_run_agrees(hold, start):
    args = (*start, 1.0, 2.0, 1.0, 0.2, 1e-2, 3000, hold)
    a, b = py.corridor_run(*args), cy.corridor_run(*args)
    assert a[2:] == b[2:]
    stop = a[3]
    np.testing.assert_allclose(b[0][: stop + 1], a[0][: stop + 1], rtol=0, atol=1e-12)
    np.testing.assert_allclose(b[1][: stop + 1], a[1][: stop + 1], rtol=0, atol=1e-12)


@needs_compiled
@pytest.mark.parametrize("n,drop", [(1, 0.0), (7, 0.3), (50, 0.6), (1, 0.95)])
def test_noisy_run_agrees(n, drop):
    rng = np.random.default_rng(n)
    m = 800
    d = receptor_draws(ReceptorArray(n, drop, 0.2), rng, m)
    args = (1.0, 0.0, math.radians(100), 1.0, 2.0, 1.0, 0.2, 1e-2, m,
            d["d_left"], d["d_right"], d["alive_left"], d["alive_right"], 0.2, d["z_left"], d["z_right"], 0.05)
    a, b = py.corridor_noisy_run(*args), cy.corridor_noisy_run(*args)
    assert a[2:5] == b[2:5]
    assert a[5] == pytest.approx(b[5], abs=1e-12)
    stop = a[3]
    np.testing.assert_allclose(b[0][: stop + 1], a[0][: stop + 1], rtol=0, atol=1e-11)


@needs_compiled
def test_affine_run_agrees():
    rng = np.random.default_rng(0)
    Ms = rng.standard_normal((3, 3, 3)) - 2 * np.eye(3)
    cs = rng.standard_normal((3, 3))
    modes = rng.integers(0, 3, 5000)
    a = py.affine_run(Ms, cs, modes, [1.0, -1.0, 0.5], 1e-3)
    b = cy.affine_run(Ms, cs, modes, [1.0, -1.0, 0.5], 1e-3)
    assert a[1:] == b[1:]
    np.testing.assert_allclose(b[0], a[0], rtol=1e-12, atol=1e-13)


def test_affine_run_nonfinite_stops():
    M = np.array([[[50.0]]])
    states, status, stop = py.affine_run(M, np.zeros((1, 1)), np.zeros(100000, dtype=np.int_), [1.0], 1.0)
    assert status == 3 and stop < 1000


def test_affine_step_is_rk4():
    # one RK4 step of x' = a x + c from x0, by hand
    a, c, x0, h = -0.7, 0.3, 2.0, 0.1
    f = lambda x: a * x + c
    k1 = f(x0); k2 = f(x0 + h / 2 * k1); k3 = f(x0 + h / 2 * k2); k4 = f(x0 + h * k3)
    expected = x0 + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    states, _, _ = py.affine_run([[[a]]], [[c]], [0], [x0], h)
    assert states[1, 0] == pytest.approx(expected, abs=1e-15)


def test_simulation_matches_across_backends(any_backend):
    tr = simulate_two_pixel(VehicleState(1.0, 0.0, math.radians(100)), CorridorScene(R=2.0, f=1.0), 0.2, 10.0, 1e-2)
    assert tr.meta["backend"] == any_backend
    # reference value from the python kernel
    ref = py.corridor_run(1.0, 0.0, math.radians(100), 1.0, 2.0, 1.0, 0.2, 1e-2, 1000, 0)[0][-1]
    np.testing.assert_allclose(tr.final, ref, atol=1e-12)


def test_env_var_forces_python():
    env = dict(os.environ, PERCEPT_CTL_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from percept_ctl import _backend; print(_backend.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
