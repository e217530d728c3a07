import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from petkin.kinetics import (
    _feng_exp_conv,
    DENSE_DT,
    FengCoefficients,
    FrameModel,
    FrameSchedule,
    InputFunction,
    KineticParams,
    KineticsError,
    TimeActivityCurve,
    Tracer,
    beta_roots,
    compartment_ode_solve,
    ct_analytic,
    dense_grid,
    feng_input,
    frame_activity,
    standard_schedule,
)

P_REF = KineticParams(0.1, 0.12, 0.06, 0.006)
rate = st.floats(0.0, 2.0, allow_nan=False)


def rel_linf(a, b, floor=0.01):
    """Max relative error over points above ``floor`` of the reference peak."""
    keep = b > floor * b.max()
    return np.max(np.abs(a[keep] - b[keep]) / b[keep])


def one_tissue_oracle(K1, k2, cp, grid):
    # direct trapezoidal convolution of K1 exp(-k2 t) with the input
    dt = grid[1] - grid[0]
    c = cp(grid)
    out = np.zeros_like(grid)
    for n in range(1, len(grid)):
        kern = K1 * np.exp(-k2 * (grid[n] - grid[: n + 1]))
        f = kern * c[: n + 1]
        out[n] = dt * (f.sum() - 0.5 * (f[0] + f[-1]))
    return out


class TestFengInput:
    def test_zero_at_origin(self, fdg):
        assert feng_input(fdg.input_function.feng, 0.0) == 0.0

    def test_zero_curve(self):
        c = FengCoefficients(0, 0, 0, 1.0, 1.0, 1.0)
        assert np.all(feng_input(c, np.linspace(0, 60, 50)) == 0)

    def test_peak_matches_dense_grid(self, fdg):
        c = fdg.input_function.feng
        t = np.linspace(0, 60, 10_000)
        dense = feng_input(c, t)
        # refine around the dense-grid peak with a golden-section bracket
        i = int(np.argmax(dense))
        lo, hi = t[max(i - 1, 0)], t[i + 1]
        for _ in range(80):
            m1, m2 = lo + 0.382 * (hi - lo), lo + 0.618 * (hi - lo)
            if feng_input(c, m1) > feng_input(c, m2):
                hi = m2
            else:
                lo = m1
        assert feng_input(c, 0.5 * (lo + hi)) == pytest.approx(dense.max(), rel=1e-4)

    def test_negative_values_clamped_and_counted(self):
        c = FengCoefficients(0.0, 5.0, 0.0, 0.1, 1.0, 1.0)
        diag = {}
        v = feng_input(c, np.array([0.5, 1.0, 2.0]), diag)
        assert np.all(v >= 0)
        assert diag["feng_clamped"] > 0

    def test_rejects_nonfinite(self):
        with pytest.raises(KineticsError):
            FengCoefficients(np.nan, 1, 1, 1, 1, 1)


class TestBetaRoots:
    def test_irreversible(self):
        b1, b2 = beta_roots(KineticParams(0.1, 0.12, 0.06, 0.0))
        assert b1 == 0.0
        assert b2 == pytest.approx(0.18)

    def test_collapsed_discriminant(self):
        b1, b2 = beta_roots(KineticParams(0.1, 0.1, 0.0, 0.3))
        assert b1 == pytest.approx(0.1, abs=1e-15)
        assert b2 == pytest.approx(0.3, abs=1e-15)

    @given(rate, rate, rate)
    def test_vieta(self, k2, k3, k4):
        b1, b2 = beta_roots(KineticParams(0.1, k2, k3, k4))
        s = k2 + k3 + k4
        assert b1 <= b2
        assert abs((b1 + b2) - s) <= 1e-12 * max(s, 1.0)
        assert abs(b1 * b2 - k2 * k4) <= 1e-12 * max(s * s, 1.0)
        for b in (b1, b2):
            assert abs(b * b - s * b + k2 * k4) <= 1e-12 * max(s * s, 1.0)


class TestTissueCurve:
    def test_zero_inflow(self, fdg):
        grid = dense_grid(60.0)
        ct = ct_analytic(P_REF.replace(K1=0.0), fdg.input_function, grid)
        assert np.all(ct.values == 0)

    def test_zero_input(self):
        cp = InputFunction.from_samples([0.0, 60.0], [0.0, 0.0])
        ct = ct_analytic(P_REF, cp, dense_grid(60.0))
        assert np.all(ct.values == 0)

    def test_matches_ode_oracle(self, fdg):
        grid = dense_grid(60.0)
        ct = ct_analytic(P_REF, fdg.input_function, grid)
        _, _, ode = compartment_ode_solve(P_REF, fdg.input_function, grid)
        assert rel_linf(ct.values, ode.values) < 0.005

    def test_ode_one_tissue_limit(self, fdg):
        grid = np.arange(0, 20 * 60 + 1) / 60.0
        p = KineticParams(0.1, 0.12, 0.0, 0.0)
        _, _, ode = compartment_ode_solve(p, fdg.input_function, grid)
        ref = one_tissue_oracle(0.1, 0.12, fdg.input_function, grid)
        assert rel_linf(ode.values, ref) < 0.005

    def test_ode_zero_params(self, fdg):
        grid = dense_grid(5.0)
        curves = compartment_ode_solve(KineticParams(0, 0, 0, 0), fdg.input_function, grid)
        assert all(np.all(c.values == 0) for c in curves)

    def test_confluent_roots(self, fdg):
        # k3 = 0 and k2 = k4 gives beta1 = beta2; compare with a slightly split pair
        grid = dense_grid(60.0)
        p = KineticParams(0.1, 0.2, 0.0, 0.2)
        near = KineticParams(0.1, 0.2, 1e-7, 0.2)
        a = ct_analytic(p, fdg.input_function, grid).values
        b = ct_analytic(near, fdg.input_function, grid).values
        assert np.all(np.isfinite(a))
        assert rel_linf(a, b) < 1e-5

    @pytest.mark.parametrize("k3", [1e-14, 1e-13, 1e-10])
    def test_confluent_switch_is_continuous(self, fdg, k3):
        grid = dense_grid(60.0)
        a = ct_analytic(KineticParams(0.1, 0.2, 0.0, 0.2), fdg.input_function, grid).values
        b = ct_analytic(KineticParams(0.1, 0.2, k3, 0.2), fdg.input_function, grid).values
        assert rel_linf(b, a) < 1e-7

    @pytest.mark.parametrize("p", [P_REF, KineticParams(0.3, 0.5, 0.02, 0.04), KineticParams(0.2, 0.3, 0.1, 0.0)])
    def test_pointwise_quadrature_oracle(self, fdg, p):
        # adaptive quadrature of the impulse response against the input, early times included
        b1, b2 = beta_roots(p)
        cp = fdg.input_function

        def response(u):
            return p.K1 * ((p.k3 + p.k4 - b1) * np.exp(-b1 * u) + (b2 - p.k3 - p.k4) * np.exp(-b2 * u)) / (b2 - b1)

        grid = dense_grid(60.0)
        ct = ct_analytic(p, cp, grid).values
        for i in (1, 3, 12, 60, 600, 3600):
            t = grid[i]
            ref, _ = quad(lambda s: response(t - s) * float(cp(s)), 0, t, epsabs=0, epsrel=1e-12, limit=200)
            assert ct[i] == pytest.approx(ref, rel=1e-9)

    @pytest.mark.parametrize("b", [0.0, 0.1, 4.133859, 4.2])
    def test_exponential_kernel_recursions(self, fdg, b):
        # both kernels used by the exact path: e^{-b t} and the confluent limit t e^{-b t}
        c = fdg.input_function.feng
        grid = dense_grid(60.0)
        y, z = _feng_exp_conv(c, np.array([b]), grid, with_t=True)
        for i in (1, 3, 60, 3600):
            t = grid[i]
            ref_y, _ = quad(lambda s: feng_input(c, s) * np.exp(-b * (t - s)), 0, t, epsabs=0, epsrel=1e-13, limit=400)
            ref_z, _ = quad(lambda s: feng_input(c, s) * (t - s) * np.exp(-b * (t - s)), 0, t, epsabs=0,
                            epsrel=1e-13, limit=400)
            assert y[i, 0] == pytest.approx(ref_y, rel=1e-11)
            assert z[i, 0] == pytest.approx(ref_z, rel=1e-11)

    def test_feng_linear_in_amplitudes(self, fdg):
        c = fdg.input_function.feng
        grid = dense_grid(60.0)
        base = ct_analytic(P_REF, fdg.input_function, grid).values
        scaled = InputFunction(feng=FengCoefficients(2.5 * c.A1, 2.5 * c.A2, 2.5 * c.A3, c.l1, c.l2, c.l3))
        assert np.allclose(ct_analytic(P_REF, scaled, grid).values, 2.5 * base, rtol=1e-12, atol=0)

    def test_clamped_feng_uses_clamped_input(self):
        # this input is negative everywhere after t = 0, so it clamps to zero
        cp = InputFunction(feng=FengCoefficients(0.0, 5.0, 0.0, 0.1, 1.0, 1.0))
        assert np.all(ct_analytic(P_REF, cp, dense_grid(30.0)).values == 0)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.0, 10.0))
    def test_linear_in_input(self, alpha):
        grid = dense_grid(30.0)
        t = grid
        base = InputFunction.from_samples(t, 100 * t * np.exp(-t))
        scaled = InputFunction.from_samples(t, alpha * 100 * t * np.exp(-t))
        a = ct_analytic(P_REF, base, grid).values
        b = ct_analytic(P_REF, scaled, grid).values
        assert np.allclose(b, alpha * a, rtol=1e-12, atol=1e-12 * max(alpha, 1) * a.max())

    def test_rejects_nonuniform_or_empty_grid(self, fdg):
        with pytest.raises(KineticsError):
            ct_analytic(P_REF, fdg.input_function, np.array([0.0]))
        with pytest.raises(KineticsError):
            ct_analytic(P_REF, fdg.input_function, np.array([0.0, 0.1, 0.3]))


class TestFrameActivity:
    def test_constant_integrand(self):
        t = dense_grid(2.0)
        ct = TimeActivityCurve(t, np.full_like(t, 3.0))
        sched = FrameSchedule([0.0], [2.0])
        x = frame_activity(ct, ct, KineticParams(0, 0, 0, 0), Tracer("none", 0.0), sched)
        assert x[0] == pytest.approx(6.0, rel=1e-12)

    def test_blood_only_voxel(self, fdg):
        t = dense_grid(60.0)
        cb = TimeActivityCurve(t, fdg.input_function(t))
        ct1 = TimeActivityCurve(t, np.ones_like(t))
        ct2 = TimeActivityCurve(t, 5 * np.ones_like(t))
        p = KineticParams(0.1, 0.1, 0.1, 0.0, vb=1.0)
        a = frame_activity(ct1, cb, p, fdg.tracer, fdg.schedule)
        b = frame_activity(ct2, cb, p, fdg.tracer, fdg.schedule)
        assert np.array_equal(a, b)

    def test_matches_adaptive_quadrature(self, fdg, rng):
        t = dense_grid(60.0)
        for _ in range(3):
            p = KineticParams(*rng.uniform([0.05, 0.05, 0.02, 0.0], [0.2, 0.2, 0.1, 0.02]), vb=rng.uniform(0, 0.1))
            ct = ct_analytic(p, fdg.input_function, t)
            cb = TimeActivityCurve(t, fdg.input_function(t))
            x = frame_activity(ct, cb, p, fdg.tracer, fdg.schedule)
            lam = fdg.tracer.decay_constant

            def f(tau):
                tissue = np.interp(tau, t, ct.values)
                return ((1 - p.vb) * tissue + p.vb * float(fdg.input_function(tau))) * np.exp(-lam * tau)

            for k in (0, 5, 17):
                ref, _ = quad(f, fdg.schedule.starts[k], fdg.schedule.ends[k], limit=400, epsabs=0, epsrel=1e-10)
                assert x[k] == pytest.approx(ref, rel=1e-3)

    def test_schedule_past_support(self, fdg):
        t = dense_grid(10.0)
        ct = TimeActivityCurve(t, np.ones_like(t))
        with pytest.raises(KineticsError):
            frame_activity(ct, ct, P_REF, fdg.tracer, fdg.schedule)

    def test_frame_additivity(self, fdg, rng):
        t = dense_grid(60.0)
        ct = ct_analytic(P_REF, fdg.input_function, t)
        cb = TimeActivityCurve(t, fdg.input_function(t))
        whole = frame_activity(ct, cb, P_REF, fdg.tracer, fdg.schedule)
        for k in (0, 4, 12):
            ts, te = fdg.schedule.starts[k], fdg.schedule.ends[k]
            n_in = int(round((te - ts) / DENSE_DT))
            cut = ts + int(rng.integers(1, n_in)) * DENSE_DT
            split = FrameSchedule([0.0, ts, cut], [ts, cut, te]) if ts > 0 else FrameSchedule([0.0, cut], [cut, te])
            parts = frame_activity(ct, cb, P_REF, fdg.tracer, split)
            assert parts[-2] + parts[-1] == pytest.approx(whole[k], rel=1e-10)

    def test_nonnegative(self, fdg, rng):
        model = FrameModel(fdg.input_function, fdg.tracer, fdg.schedule)
        params = rng.uniform(0, 1, size=(200, 4))
        assert np.all(model.curves(params) >= 0)
        assert np.all(model.frames(params) >= 0)

    def test_vectorized_path_matches_scalar(self, fdg_model, fdg):
        t = fdg_model.times
        ct = ct_analytic(P_REF, fdg.input_function, t)
        cb = TimeActivityCurve(t, fdg.input_function(t))
        scalar = frame_activity(ct, cb, P_REF, fdg.tracer, fdg.schedule)
        assert np.array_equal(fdg_model.frames(P_REF.as_array()[None])[:, 0], scalar)


class TestTypes:
    def test_schedule(self):
        s = standard_schedule()
        assert s.n_frames == 18
        assert s.end == pytest.approx(60.0)
        with pytest.raises(KineticsError):
            FrameSchedule([0.0, 1.5], [1.0, 2.0])
        with pytest.raises(KineticsError):
            FrameSchedule([0.5], [1.0])

    def test_param_validation(self):
        with pytest.raises(KineticsError):
            KineticParams(-0.1, 0.1, 0.1, 0.1)
        with pytest.raises(KineticsError):
            KineticParams(0.1, 0.1, 0.1, 0.1, vb=1.5)

    def test_sampled_input(self):
        with pytest.raises(KineticsError):
            InputFunction.from_samples([0.0, 1.0, 1.0], [0, 1, 2])
        with pytest.raises(KineticsError):
            InputFunction.from_samples([0.0, 1.0], [0, -1])
        cp = InputFunction.from_samples([0.0, 2.0], [0.0, 4.0])
        assert cp(1.0) == pytest.approx(2.0)
        assert cp.blood(1.0) == pytest.approx(2.0)

    def test_decay_constant(self):
        tr = Tracer.from_half_life("F18", 109.77)
        assert tr.decay_constant == pytest.approx(np.log(2) / 109.77)
