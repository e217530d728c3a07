import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petkin.graphical import (
    FitError,
    FitWindow,
    cumulative_integral,
    fit_lines,
    graphical_from_curves,
    graphical_from_frames,
    linear_fit,
    logan,
    logan_points,
    parametric_images,
    patlak,
    patlak_points,
)
from petkin.kinetics import FrameModel, KineticParams, TimeActivityCurve, ct_analytic, dense_grid

T = dense_grid(60.0)


@pytest.fixture(scope="module")
def cp_curve(fdg):
    return TimeActivityCurve(T, fdg.input_function(T))


@pytest.fixture(scope="module")
def window(fdg):
    return FitWindow.last(10, fdg.schedule)


def influx(p):
    return p.K1 * p.k3 / (p.k2 + p.k3)


class TestCumulativeIntegral:
    def test_constant(self):
        c = cumulative_integral(TimeActivityCurve(T, np.full_like(T, 2.5)))
        assert np.allclose(c.values, 2.5 * T, rtol=1e-12, atol=1e-12)

    def test_zero(self):
        assert np.all(cumulative_integral(TimeActivityCurve(T, np.zeros_like(T))).values == 0)

    def test_exponential(self):
        t = dense_grid(10.0)
        c = cumulative_integral(TimeActivityCurve(t, np.exp(-t)))
        assert np.max(np.abs(c.values - (1 - np.exp(-t)))) < 1e-4

    def test_too_short(self):
        with pytest.raises(FitError):
            cumulative_integral(TimeActivityCurve(np.array([0.0]), np.array([1.0])))


class TestLogan:
    def test_identical_curves(self, cp_curve, window, fdg):
        pts = logan_points(cp_curve, cp_curve, window, fdg.schedule)
        assert np.allclose(pts.y, pts.x, rtol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_ordinate_scale_invariance(self, alpha):
        from petkin.config import load_config

        cfg = load_config("task1")
        cp = TimeActivityCurve(T, cfg.input_function(T))
        ct = ct_analytic(KineticParams(0.1, 0.12, 0.06, 0.006), cfg.input_function, T)
        w = FitWindow.last(10, cfg.schedule)
        a = logan_points(ct, cp, w, cfg.schedule)
        b = logan_points(TimeActivityCurve(T, alpha * ct.values), cp, w, cfg.schedule)
        assert np.allclose(a.y, b.y, rtol=1e-12, atol=0)
        # the abscissa carries 1/C_T, so it scales by 1/alpha
        assert np.allclose(b.x, a.x / alpha, rtol=1e-12, atol=0)

    def test_secant_slope_approaches_distribution_volume(self, fdg, cp_curve, window):
        p = KineticParams(0.1, 0.12, 0.06, 0.006)
        dv = p.K1 / p.k2 * (1 + p.k3 / p.k4)
        pts = logan_points(ct_analytic(p, fdg.input_function, T), cp_curve, window, fdg.schedule)
        secants = np.diff(pts.y) / np.diff(pts.x)
        assert np.all(np.diff(secants) > 0)
        assert np.all(secants < dv)

    def test_slope_near_distribution_volume_for_fast_exchange(self, fmz):
        p = fmz.roi_means[0]
        cp = TimeActivityCurve(T, fmz.input_function(T))
        res = logan(ct_analytic(p, fmz.input_function, T), cp, FitWindow.last(10, fmz.schedule), fmz.schedule)
        dv = p.K1 / p.k2 * (1 + p.k3 / p.k4)
        assert res.slope_K == pytest.approx(dv, rel=0.05)

    def test_zero_tissue_fails(self, cp_curve, window, fdg):
        with pytest.raises(FitError):
            logan_points(TimeActivityCurve(T, np.zeros_like(T)), cp_curve, window, fdg.schedule)


class TestPatlak:
    def test_tissue_equals_plasma(self, cp_curve, window, fdg):
        pts = patlak_points(cp_curve, cp_curve, window, fdg.schedule)
        assert np.allclose(pts.y, 1.0, rtol=1e-12)

    def test_constructed_line(self, cp_curve, window, fdg):
        tissue = cumulative_integral(cp_curve)
        tissue = TimeActivityCurve(T, 0.037 * tissue.values)
        res = patlak(tissue, cp_curve, window, fdg.schedule)
        assert res.Ki == pytest.approx(0.037, rel=1e-9)
        assert abs(res.V0) < 1e-9

    def test_influx_example(self, fdg, cp_curve, window):
        p = KineticParams(0.1, 0.12, 0.06, 0.0)
        res = patlak(ct_analytic(p, fdg.input_function, T), cp_curve, window, fdg.schedule)
        assert res.Ki == pytest.approx(influx(p), rel=0.01)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_homogeneity(self, alpha):
        from petkin.config import load_config

        cfg = load_config("task1")
        cp = TimeActivityCurve(T, cfg.input_function(T))
        w = FitWindow.last(10, cfg.schedule)
        ct = ct_analytic(KineticParams(0.1, 0.12, 0.06, 0.0), cfg.input_function, T)
        a = patlak(ct, cp, w, cfg.schedule)
        b = patlak(TimeActivityCurve(T, alpha * ct.values), cp, w, cfg.schedule)
        assert b.Ki == pytest.approx(alpha * a.Ki, rel=1e-12)
        assert b.V0 == pytest.approx(alpha * a.V0, rel=1e-12, abs=1e-12 * abs(alpha * a.Ki))

    def test_frame_input_matches_curve_input(self, fdg, fdg_model, window):
        p = np.array([[0.1, 0.12, 0.06, 0.0], [0.2, 0.3, 0.05, 0.0]])
        curves = fdg_model.curves(p)
        s1, b1, _ = graphical_from_curves(fdg_model, curves, p, "patlak", window)
        s2, b2, _ = graphical_from_frames(fdg_model.frames(p), fdg.input_function, fdg.schedule, "patlak", window,
                                          fdg.tracer.decay_constant)
        assert np.allclose(s1, s2, rtol=1e-10)
        assert np.allclose(b1, b2, rtol=1e-10)


class TestLinearFit:
    def test_exact_line(self):
        assert linear_fit([(0, 3), (1, 5), (2, 7)]) == pytest.approx((2.0, 3.0))

    def test_flat(self):
        assert linear_fit([(0, 0), (1, 0)]) == (0.0, 0.0)

    def test_degenerate(self):
        with pytest.raises(FitError):
            linear_fit([(1, 0), (1, 2)])
        with pytest.raises(FitError):
            linear_fit([(1, 0)])

    def test_normal_equations_oracle(self, rng):
        x = rng.uniform(-5, 5, 100)
        y = 1.7 * x - 0.3 + rng.normal(0, 1, 100)
        A = np.column_stack([x, np.ones_like(x)])
        ref = np.linalg.solve(A.T @ A, A.T @ y)
        assert np.allclose(linear_fit(np.column_stack([x, y])), ref, rtol=1e-10)

    @given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=40))
    def test_residual_orthogonality(self, pts):
        arr = np.array(pts)
        x, y = arr[:, 0], arr[:, 1]
        if np.ptp(x) < 1e-3:
            return
        k, b = linear_fit(arr)
        r = y - (k * x + b)
        scale = max(np.abs(y).max(), 1.0) * len(x) * max(np.abs(x).max(), 1.0)
        assert abs(r.sum()) / scale < 1e-9
        assert abs((r * x).sum()) / scale < 1e-9

    def test_masked_columns(self):
        x = np.arange(5.0)
        y = np.stack([2 * x + 1, -x], axis=1)
        valid = np.ones((5, 2), bool)
        valid[:4, 1] = False
        s, b, ok = fit_lines(x, y, valid)
        assert ok.tolist() == [True, False]
        assert s[0] == pytest.approx(2) and b[0] == pytest.approx(1)
        assert s[1] == 0 and b[1] == 0


class TestParametricImages:
    def test_uniform_image(self, fdg, fdg_model):
        img = np.broadcast_to([0.1, 0.12, 0.06, 0.0], (6, 5, 4))
        s, b, failed = parametric_images(img, fdg.input_function, fdg.tracer, fdg.schedule, "patlak", model=fdg_model)
        assert np.ptp(s) == 0 and np.ptp(b) == 0
        assert not failed.any()

    def test_two_roi_patlak(self, fdg, fdg_model):
        # the preset FDG means; slow-equilibrating draws can sit further from the limit
        pa, pb = fdg.roi_means[1], fdg.roi_means[0]
        img = np.zeros((4, 6, 5))
        img[:, :3] = pa.as_array()
        img[:, 3:] = pb.as_array()
        s, _, _ = parametric_images(img, fdg.input_function, fdg.tracer, fdg.schedule, "patlak", model=fdg_model)
        assert np.allclose(s[:, :3], influx(pa), rtol=0.01)
        assert np.allclose(s[:, 3:], influx(pb), rtol=0.01)

    def test_single_voxel_matches_scalar(self, fdg, fdg_model, cp_curve, window):
        p = KineticParams(0.12, 0.2, 0.05, 0.01)
        s, b, _ = parametric_images(p.as_array()[None, None], fdg.input_function, fdg.tracer, fdg.schedule,
                                    "logan", model=fdg_model)
        ref = logan(ct_analytic(p, fdg.input_function, fdg_model.times), cp_curve, window, fdg.schedule)
        assert s[0, 0] == pytest.approx(ref.slope_K, rel=1e-12)
        assert b[0, 0] == pytest.approx(ref.intercept_b, rel=1e-12)

    def test_mask_and_failures(self, fdg, fdg_model):
        img = np.zeros((3, 3, 4))
        img[1, 1] = [0.1, 0.12, 0.06, 0.0]
        mask = np.zeros((3, 3), bool)
        mask[1, 1] = mask[0, 0] = True
        s, b, failed = parametric_images(img, fdg.input_function, fdg.tracer, fdg.schedule, "logan",
                                         mask=mask, model=fdg_model)
        assert failed[0, 0] and not failed[1, 1]
        assert s[0, 0] == 0 and s[2, 2] == 0 and not failed[2, 2]

    def test_bad_shape(self, fdg):
        with pytest.raises(ValueError):
            parametric_images(np.zeros((3, 3)), fdg.input_function, fdg.tracer, fdg.schedule, "patlak")


class TestWindow:
    def test_last(self, fdg):
        assert FitWindow.last(10, fdg.schedule).indices == tuple(range(8, 18))
        with pytest.raises(FitError):
            FitWindow.last(19, fdg.schedule)

    def test_after(self, fdg):
        assert FitWindow.after(30, fdg.schedule).indices == tuple(range(12, 18))

    def test_invalid(self):
        with pytest.raises(FitError):
            FitWindow((3,))
        with pytest.raises(FitError):
            FitWindow((2, 2))
