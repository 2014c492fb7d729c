import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percept_ctl.corridor import (
    CorridorScene,
    FeaturePoint,
    VehicleState,
    tau_at_image,
    tau_balance_closed_form,
    tau_from_image_track,
    tau_of_feature,
    tau_pair_exact,
    wall_feature_world,
)
from percept_ctl.errors import (
    ConeViolationError,
    CriticalHeadingError,
    ParameterError,
    UndefinedTauError,
)

SCENE = CorridorScene(R=2.0, f=1.0)
CENTRED = VehicleState(0.0, 0.0, math.pi / 2)


def cone_states(scene, n, seed=3):
    rng = np.random.default_rng(seed)
    lo = scene.critical_angle
    out = []
    while len(out) < n:
        x = rng.uniform(-0.95, 0.95) * scene.R
        th = rng.uniform(lo + 0.02, math.pi - lo - 0.02)
        if abs(x + scene.f * math.cos(th)) < 0.98 * scene.R:  # pinhole inside the corridor
            out.append(VehicleState(x, rng.uniform(-5, 5), th))
    return out


class TestScene:
    @pytest.mark.parametrize("kw", [dict(R=0.0, f=1.0), dict(R=1.0, f=-1.0), dict(R=1.0, f=1.0, v=0.0),
                                    dict(R=math.inf, f=1.0)])
    def test_rejects_bad_constants(self, kw):
        with pytest.raises(ParameterError):
            CorridorScene(**kw)

    def test_cone(self):
        assert SCENE.critical_angle == pytest.approx(math.pi / 4)
        assert SCENE.in_cone(math.pi / 2)
        assert not SCENE.in_cone(math.pi / 4 - 1e-9)
        assert not SCENE.in_cone(3 * math.pi / 4 + 1e-9)


class TestTauOfFeature:
    def test_straight_ahead(self):
        assert tau_of_feature(VehicleState(0, 0, 0), SCENE, FeaturePoint(5, 0)) == 5

    def test_abeam(self):
        assert tau_of_feature(VehicleState(0, 1.5, math.pi / 2), SCENE, FeaturePoint(7.0, 1.5)) == pytest.approx(0, abs=1e-15)

    def test_speed_scaling(self):
        scene = CorridorScene(R=2.0, f=1.0, v=2.0)
        assert tau_of_feature(VehicleState(0, 0, math.pi / 2), scene, FeaturePoint(3, 4)) == pytest.approx(2.0)

    @pytest.mark.parametrize("feat", [FeaturePoint(3.0, 4.0), FeaturePoint(-1.0, 2.0), FeaturePoint(2.0, -0.5)])
    def test_maximised_when_heading_at_feature(self, feat):
        state = VehicleState(0.5, 0.25, 0.0)
        thetas = np.linspace(-math.pi, math.pi, 200001)
        taus = [tau_of_feature(VehicleState(state.x, state.y, t), SCENE, feat) for t in thetas[::50]]
        coarse = thetas[::50][int(np.argmax(taus))]
        fine = np.linspace(coarse - 0.01, coarse + 0.01, 20001)
        best = fine[int(np.argmax([tau_of_feature(VehicleState(state.x, state.y, t), SCENE, feat) for t in fine]))]
        assert abs(best - math.atan2(feat.yr - state.y, feat.xr - state.x)) < 1e-4


class TestImageTrack:
    def test_quotient(self):
        assert tau_from_image_track(1.0, 0.5) == 2.0

    def test_at_focus_of_expansion(self):
        assert tau_from_image_track(0.0, 1.0) == 0.0

    def test_similar_triangles(self):
        f, D, xt, v = 1.0, 2.0, 4.0, 1.0
        d = f * D / xt
        assert tau_from_image_track(d, v * d / xt) == pytest.approx(4.0)

    def test_zero_rate(self):
        with pytest.raises(UndefinedTauError):
            tau_from_image_track(1.0, 0.0)


class TestWallFeature:
    def test_right_wall_centred(self):
        # gaze ray (f, -1) in the body frame hits x = R at y = f + R
        p = wall_feature_world(CENTRED, SCENE, "right")
        assert p.xr == 2.0
        assert p.yr == pytest.approx(3.0)

    def test_left_is_mirror(self):
        left = wall_feature_world(CENTRED, SCENE, "left")
        right = wall_feature_world(CENTRED, SCENE, "right")
        assert left.xr == -SCENE.R
        assert left.yr == pytest.approx(right.yr)

    @pytest.mark.parametrize("state", cone_states(SCENE, 20))
    def test_points_lie_on_gaze_rays(self, state):
        c, s = math.cos(state.theta), math.sin(state.theta)
        pin = np.array([state.x + SCENE.f * c, state.y + SCENE.f * s])
        for side, d in (("left", -1.0), ("right", 1.0)):
            p = wall_feature_world(state, SCENE, side)
            assert p.xr == (-SCENE.R if side == "left" else SCENE.R)
            ray = np.array([SCENE.f * c + d * s, SCENE.f * s - d * c])
            rel = np.array([p.xr, p.yr]) - pin
            assert abs(ray[0] * rel[1] - ray[1] * rel[0]) < 1e-9 * (1 + np.abs(rel).max())
            assert ray @ rel > 0

    def test_outside_cone(self):
        with pytest.raises(ConeViolationError):
            wall_feature_world(VehicleState(0, 0, 0.5), SCENE, "left")

    def test_bad_side(self):
        with pytest.raises(ParameterError):
            wall_feature_world(CENTRED, SCENE, "up")


class TestTauPair:
    def test_centred(self):
        pair = tau_pair_exact(CENTRED, SCENE)
        assert pair.tau_left == pytest.approx(3.0)
        assert pair.tau_right == pytest.approx(3.0)
        assert pair.difference == pytest.approx(0.0, abs=1e-14)

    @given(st.floats(-1.9, 1.9), st.floats(-3, 3))
    def test_symmetric_on_centre_heading(self, x, y):
        pair = tau_pair_exact(VehicleState(0.0, y, math.pi / 2), SCENE)
        assert pair.tau_left == pytest.approx(pair.tau_right)

    def test_composition_oracle(self):
        for scene in (SCENE, CorridorScene(R=1.0, f=0.5, v=2.0)):
            for state in cone_states(scene, 100):
                pair = tau_pair_exact(state, scene)
                left = tau_of_feature(state, scene, wall_feature_world(state, scene, "left"))
                right = tau_of_feature(state, scene, wall_feature_world(state, scene, "right"))
                assert pair.tau_left == pytest.approx(left, rel=1e-10, abs=1e-12)
                assert pair.tau_right == pytest.approx(right, rel=1e-10, abs=1e-12)
                assert tau_at_image(state, scene, -1.0) == pytest.approx(left, rel=1e-10, abs=1e-12)
                assert tau_at_image(state, scene, 1.0) == pytest.approx(right, rel=1e-10, abs=1e-12)

    def test_outside_cone(self):
        with pytest.raises(ConeViolationError):
            tau_pair_exact(VehicleState(0, 0, 2.5), SCENE)


class TestBalanceLaw:
    def test_zero_at_rest_point(self):
        assert tau_balance_closed_form(CENTRED, SCENE, 0.7) == pytest.approx(0.0, abs=1e-15)

    def test_substitution(self):
        scene = CorridorScene(R=1.0, f=1.0)
        assert tau_balance_closed_form(VehicleState(0.1, 0, math.pi / 2), scene, 1.0) == pytest.approx(0.2)

    def test_matches_tau_difference(self):
        for scene in (SCENE, CorridorScene(R=1.5, f=0.7, v=1.3)):
            for state in cone_states(scene, 1000, seed=11):
                k = 0.37
                expected = k * tau_pair_exact(state, scene).difference
                got = tau_balance_closed_form(state, scene, k)
                assert got == pytest.approx(expected, rel=1e-10, abs=1e-10)

    @given(st.floats(1e-3, 1.99))
    def test_turns_back_towards_centre(self, x):
        # right of centre on a parallel heading: theta grows, so the heading
        # tips to the left (cos theta < 0) and x decreases
        u_right = tau_balance_closed_form(VehicleState(x, 0, math.pi / 2), SCENE, 0.5)
        u_left = tau_balance_closed_form(VehicleState(-x, 0, math.pi / 2), SCENE, 0.5)
        assert u_right > 0
        assert u_left == pytest.approx(-u_right)

    def test_critical_heading(self):
        with pytest.raises(CriticalHeadingError):
            tau_balance_closed_form(VehicleState(0, 0, math.pi / 4), SCENE, 1.0)
