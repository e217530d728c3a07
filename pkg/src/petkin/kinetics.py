"""Two-tissue compartment model: input functions, tissue curves and frame activities.

All times are in minutes. Curves live on a uniform dense grid (1 s by default)
whose points coincide with every frame boundary of the acquisition schedule,
so frame integrals are plain trapezoidal sums over grid points.
"""

from __future__ import annotations

from collections.abc import Iterable, MutableMapping
from dataclasses import dataclass, field

import numpy as np

DENSE_DT = 1.0 / 60.0
PARAM_NAMES = ("K1", "k2", "k3", "k4")


class KineticsError(ValueError):
    """Raised for invalid kinetic inputs (bad parameters, grids or schedules)."""


@dataclass(frozen=True)
class Tracer:
    name: str
    decay_constant: float
    reversible: bool = False

    def __post_init__(self):
        if not np.isfinite(self.decay_constant) or self.decay_constant < 0:
            raise KineticsError(f"decay constant must be >= 0, got {self.decay_constant}")

    @classmethod
    def from_half_life(cls, name: str, half_life: float, reversible: bool = False) -> Tracer:
        return cls(name, float(np.log(2.0) / half_life), reversible)


@dataclass(frozen=True)
class KineticParams:
    """Rate constants of the two-tissue model plus the blood volume fraction."""

    K1: float
    k2: float
    k3: float
    k4: float
    vb: float = 0.0

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise KineticsError(f"non-finite kinetic parameters: {values}")
        if min(self.K1, self.k2, self.k3, self.k4) < 0:
            raise KineticsError(f"rate constants must be >= 0: {values}")
        if not 0.0 <= self.vb <= 1.0:
            raise KineticsError(f"blood volume fraction must lie in [0, 1], got {self.vb}")

    def as_array(self) -> np.ndarray:
        return np.array([self.K1, self.k2, self.k3, self.k4, self.vb], dtype=float)

    @classmethod
    def from_array(cls, values) -> KineticParams:
        values = [float(v) for v in values]
        if len(values) == 4:
            values.append(0.0)
        return cls(*values)

    def replace(self, **changes) -> KineticParams:
        kw = dict(K1=self.K1, k2=self.k2, k3=self.k3, k4=self.k4, vb=self.vb)
        kw.update(changes)
        return KineticParams(**kw)


@dataclass(frozen=True)
class FengCoefficients:
    """Coefficients of the three-exponential Feng input model.

    ``Cp(t) = (A1 t - A2 - A3) exp(-l1 t) + A2 exp(-l2 t) + A3 exp(-l3 t)``
    with positive decay rates ``l1, l2, l3`` in 1/min.
    """

    A1: float
    A2: float
    A3: float
    l1: float
    l2: float
    l3: float

    def __post_init__(self):
        values = np.array([self.A1, self.A2, self.A3, self.l1, self.l2, self.l3])
        if not np.all(np.isfinite(values)):
            raise KineticsError(f"non-finite Feng coefficients: {values}")
        if min(self.l1, self.l2, self.l3) <= 0:
            raise KineticsError("Feng decay exponents must be > 0")


def feng_input(coefficients: FengCoefficients, t, diagnostics: MutableMapping | None = None):
    """Evaluate the Feng plasma input model at times ``t`` (min).

    Negative values (possible for ill-chosen coefficients) are clamped to zero;
    the number of clamped samples is added to ``diagnostics["feng_clamped"]``
    when a mapping is supplied.
    """
    c = coefficients
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise KineticsError("Feng input is only defined for t >= 0")
    value = (
        (c.A1 * t - c.A2 - c.A3) * np.exp(-c.l1 * t)
        + c.A2 * np.exp(-c.l2 * t)
        + c.A3 * np.exp(-c.l3 * t)
    )
    # exact zero at t=0; floating cancellation leaves ~1e-15 residue otherwise
    value = np.where(t == 0, 0.0, value)
    negative = value < 0
    if diagnostics is not None:
        diagnostics["feng_clamped"] = diagnostics.get("feng_clamped", 0) + int(np.count_nonzero(negative))
    return np.where(negative, 0.0, value)


@dataclass(frozen=True)
class InputFunction:
    """Plasma input curve, analytic (Feng form) or sampled, with optional whole-blood curve."""

    feng: FengCoefficients | None = None
    times: np.ndarray | None = None
    values: np.ndarray | None = None
    whole_blood: InputFunction | None = None
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if (self.feng is None) == (self.times is None):
            raise KineticsError("an input function is either analytic or sampled, not both")
        if self.times is not None:
            times = np.asarray(self.times, dtype=float)
            values = np.asarray(self.values, dtype=float)
            if times.ndim != 1 or times.shape != values.shape or len(times) < 2:
                raise KineticsError("sampled input needs matching 1-D times/values with >= 2 points")
            if np.any(np.diff(times) <= 0):
                raise KineticsError("sampled input times must be strictly increasing")
            if np.any(values < 0) or not np.all(np.isfinite(values)):
                raise KineticsError("sampled input values must be finite and >= 0")
            object.__setattr__(self, "times", times)
            object.__setattr__(self, "values", values)

    @classmethod
    def from_samples(cls, times, values, whole_blood: InputFunction | None = None) -> InputFunction:
        return cls(times=np.asarray(times, float), values=np.asarray(values, float), whole_blood=whole_blood)

    def __call__(self, t):
        if self.feng is not None:
            return feng_input(self.feng, t, self.diagnostics)
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0] - 1e-12) or np.any(t > self.times[-1] + 1e-12):
            raise KineticsError("sampled input evaluated outside its time support")
        return np.interp(t, self.times, self.values)

    def blood(self, t):
        """Whole-blood concentration; defaults to the plasma curve."""
        if self.whole_blood is None:
            return self(t)
        return self.whole_blood(t)


@dataclass(frozen=True)
class FrameSchedule:
    starts: np.ndarray
    ends: np.ndarray

    def __post_init__(self):
        starts = np.asarray(self.starts, dtype=float)
        ends = np.asarray(self.ends, dtype=float)
        if starts.ndim != 1 or starts.shape != ends.shape or len(starts) == 0:
            raise KineticsError("frame schedule needs matching non-empty start/end lists")
        if starts[0] != 0:
            raise KineticsError("first frame must start at t=0")
        if np.any(ends <= starts):
            raise KineticsError("every frame needs t_s < t_e")
        if not np.allclose(starts[1:], ends[:-1], rtol=0, atol=1e-12):
            raise KineticsError("frames must be contiguous and non-overlapping")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "ends", ends)

    @classmethod
    def from_durations(cls, blocks: Iterable[tuple[int, float]]) -> FrameSchedule:
        """Build from ``(count, duration_in_seconds)`` blocks, e.g. ``[(4, 30), (4, 120)]``."""
        durations = [seconds / 60.0 for count, seconds in blocks for _ in range(int(count))]
        ends = np.cumsum(durations)
        starts = np.concatenate([[0.0], ends[:-1]])
        return cls(starts, ends)

    @property
    def n_frames(self) -> int:
        return len(self.starts)

    @property
    def durations(self) -> np.ndarray:
        return self.ends - self.starts

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.starts + self.ends)

    @property
    def end(self) -> float:
        return float(self.ends[-1])

    def to_list(self) -> list[list[float]]:
        return [[float(s), float(e)] for s, e in zip(self.starts, self.ends)]


def standard_schedule() -> FrameSchedule:
    """4 x 30 s + 4 x 120 s + 10 x 300 s (60 min, 18 frames)."""
    return FrameSchedule.from_durations([(4, 30), (4, 120), (10, 300)])


@dataclass(frozen=True)
class TimeActivityCurve:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape[0] != values.shape[0]:
            raise KineticsError("times and values must have the same length")
        if not np.all(np.isfinite(values)):
            raise KineticsError("curve values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.times)


def dense_grid(t_end: float, dt: float = DENSE_DT) -> np.ndarray:
    n = int(round(t_end / dt))
    if not np.isclose(n * dt, t_end, rtol=0, atol=1e-9):
        raise KineticsError(f"t_end={t_end} is not a multiple of the grid step {dt}")
    return np.arange(n + 1) * dt


def _grid_step(grid) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise KineticsError("time grid needs at least two points")
    if grid[0] != 0:
        raise KineticsError("time grid must start at 0")
    steps = np.diff(grid)
    if np.any(steps <= 0):
        raise KineticsError("time grid must be strictly increasing")
    dt = float(steps.mean())
    if np.max(np.abs(steps - dt)) > 1e-9 * max(dt, 1.0):
        raise KineticsError("tissue convolution requires a uniform time grid")
    return dt


def beta_roots(p: KineticParams) -> tuple[float, float]:
    """Roots of ``s^2 - (k2+k3+k4) s + k2 k4``, ordered ``beta1 <= beta2``."""
    b1, b2 = _beta_roots(np.array([p.k2]), np.array([p.k3]), np.array([p.k4]))
    return float(b1[0]), float(b2[0])


def _beta_roots(k2, k3, k4):
    total = k2 + k3 + k4
    prod = k2 * k4
    disc = total * total - 4.0 * prod
    if np.any(disc < -1e-12 * np.maximum(total * total, 1e-300)):
        raise KineticsError("parameter set gives complex compartment eigenvalues")
    root = np.sqrt(np.maximum(disc, 0.0))
    b2 = 0.5 * (total + root)
    # small root via the product to avoid cancellation
    b1 = np.divide(prod, b2, out=np.zeros_like(b2), where=b2 > 0)
    return b1, b2


def tissue_curves(params, cp_values, dt: float) -> np.ndarray:
    """Tissue curves ``C_T`` for many voxels at once.

    Args:
        params: array ``(N, >=4)`` holding K1, k2, k3, k4 per voxel.
        cp_values: plasma input sampled on a uniform grid starting at 0.
        dt: grid step (min).

    Returns:
        Array ``(n_t, N)``.

    The impulse response ``K1/(b2-b1) [(k3+k4-b1) e^{-b1 t} + (b2-k3-k4) e^{-b2 t}]``
    is convolved with the input by the discrete trapezoidal rule. The
    convolution is evaluated with the equivalent exact recursion for
    exponential kernels; the term ``(e^{-b1 t} - e^{-b2 t}) / (b2 - b1)`` gets
    its own recursion so the confluent case ``b1 == b2`` needs no special path.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    cp = np.asarray(cp_values, dtype=float)
    K1, k2, k3, k4 = (params[:, i] for i in range(4))
    b1, b2 = _beta_roots(k2, k3, k4)
    a1 = np.exp(-b1 * dt)
    a2 = np.exp(-b2 * dt)
    gap = (b2 - b1) * dt
    # (a1 - a2) / (b2 - b1), written without cancellation
    phi = np.where(gap > 0, -np.expm1(-gap) / np.where(gap > 0, gap, 1.0), 1.0)
    cross = a1 * dt * phi
    half = 0.5 * dt

    n_t = len(cp)
    e2 = np.zeros((n_t, len(K1)))
    div = np.zeros((n_t, len(K1)))
    h2 = np.zeros(len(K1))
    d = np.zeros(len(K1))
    for n in range(n_t - 1):
        d = a1 * d + cross * (h2 + half * cp[n])
        h2 = a2 * h2 + half * (cp[n + 1] + a2 * cp[n])
        e2[n + 1] = h2
        div[n + 1] = d
    return K1 * ((k3 + k4 - b1) * div + e2)


def _exp_moments(lam: float, b: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``M_m(t) = int_0^t s^m exp(-lam s) exp(-b (t - s)) ds`` for ``m = 0, 1, 2``.

    ``b`` has shape ``(N,)`` and ``t`` shape ``(n_t,)``; results are
    ``(n_t, N)``. With ``x = (b - lam) t`` each moment equals
    ``t^(m+1) exp(-lam t) h_m(x)`` where ``h_m(x) = int_0^1 (1-u)^m exp(-x u) du``.
    Small ``|x|`` uses the power series of ``h_m``; elsewhere the closed forms
    are arranged so that ``exp(-lam t) exp(-x)`` appears as ``exp(-b t)`` and
    nothing overflows.
    """
    t = np.asarray(t, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[None, :]
    x = (b - lam) * t
    el = np.exp(-lam * t)
    eb = np.exp(-b * t)
    small = np.abs(x) < 0.5
    xl = np.where(small, 1.0, x)
    out = [
        t * (el - eb) / xl,
        t**2 * (el * (xl - 1) + eb) / xl**2,
        t**3 * (el * (xl * xl - 2 * xl + 2) - 2 * eb) / xl**3,
    ]
    if small.any():
        xs = x[small]
        ts = np.broadcast_to(t, x.shape)[small]
        els = np.broadcast_to(el, x.shape)[small]
        for m in range(3):
            acc = np.zeros_like(xs)
            power = np.ones_like(xs)
            fact = 1.0
            for k in range(20):
                fact /= m + k + 1  # m! / (m + k + 1)!
                acc += power * fact
                power = power * -xs
            out[m][small] = ts ** (m + 1) * els * acc
    return out[0], out[1], out[2]


def _feng_responses(c: FengCoefficients, b: np.ndarray, t) -> tuple[np.ndarray, np.ndarray]:
    """``Cp * e^{-b t}`` and ``Cp * t e^{-b t}`` for a Feng input, each ``(n_t, N)``."""
    t = np.asarray(t, dtype=float)
    tc = t[:, None]
    conv = 0.0
    conv_t = 0.0
    # Cp(s) = A1 s e^{-l1 s} - (A2 + A3) e^{-l1 s} + A2 e^{-l2 s} + A3 e^{-l3 s}
    for lam, coef0, coef1 in ((c.l1, -(c.A2 + c.A3), c.A1), (c.l2, c.A2, 0.0), (c.l3, c.A3, 0.0)):
        m0, m1, m2 = _exp_moments(lam, b, t)
        conv = conv + coef0 * m0 + coef1 * m1
        # kernel (t - s) e^{-b (t - s)}
        conv_t = conv_t + coef0 * (tc * m0 - m1) + coef1 * (tc * m1 - m2)
    return conv, conv_t


def feng_is_nonnegative(c: FengCoefficients, grid) -> bool:
    """True when the Feng formula needs no clamping on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    raw = (
        (c.A1 * grid - c.A2 - c.A3) * np.exp(-c.l1 * grid)
        + c.A2 * np.exp(-c.l2 * grid)
        + c.A3 * np.exp(-c.l3 * grid)
    )
    return bool(np.all(raw[grid > 0] >= 0))


def _feng_exp_conv(c: FengCoefficients, b: np.ndarray, t: np.ndarray, with_t: bool = False):
    """``Cp * e^{-b t}`` on a uniform grid by an exact one-step recursion.

    Over one step the convolution obeys
    ``y(t + dt) = e^{-b dt} y(t) + int_t^{t+dt} Cp(s) e^{-b (t + dt - s)} ds``
    and, for each Feng term, the increment is ``e^{-lam t}`` times a closed-form
    integral over ``[0, dt]`` that is constant or linear in ``t``. With
    ``with_t`` the convolution with ``t e^{-b t}`` is returned as well; it obeys
    ``z(t + dt) = e^{-b dt} (z(t) + dt y(t)) + increment``.
    """
    dt = t[1] - t[0]
    lams, p_rows, q_rows, pz_rows, qz_rows = [], [], [], [], []
    for lam, coef0, coef1 in ((c.l1, -(c.A2 + c.A3), c.A1), (c.l2, c.A2, 0.0), (c.l3, c.A3, 0.0)):
        m0, m1, m2 = (m[0] for m in _exp_moments(lam, b, np.array([dt])))
        lams.append(lam)
        # (t + u) e^{-lam (t + u)} splits into t * M0 + M1 after factoring e^{-lam t}
        p_rows.append(coef0 * m0 + coef1 * m1)
        q_rows.append(coef1 * m0)
        if with_t:
            n0, n1 = dt * m0 - m1, dt * m1 - m2  # extra (dt - u) weight
            pz_rows.append(coef0 * n0 + coef1 * n1)
            qz_rows.append(coef1 * n0)
    el = np.exp(-np.outer(t[:-1], lams))
    tel = t[:-1, None] * el
    inc = el @ np.array(p_rows) + tel @ np.array(q_rows)
    a = np.exp(-b * dt)
    out = np.empty((len(t), len(b)))
    out[0] = 0.0
    for n in range(len(t) - 1):
        np.multiply(out[n], a, out=out[n + 1])
        out[n + 1] += inc[n]
    if not with_t:
        return out
    inc_z = el @ np.array(pz_rows) + tel @ np.array(qz_rows)
    ad = a * dt
    z = np.empty_like(out)
    z[0] = 0.0
    for n in range(len(t) - 1):
        np.multiply(z[n], a, out=z[n + 1])
        z[n + 1] += ad * out[n]
        z[n + 1] += inc_z[n]
    return out, z


def feng_tissue_curves(params, feng: FengCoefficients, t) -> np.ndarray:
    """Exact tissue curves ``(n_t, N)`` for a Feng input on a uniform grid from 0.

    The convolution of the bi-exponential impulse response with the input is
    written as ``K1 [Cp * e^{-b2 t} + (k3 + k4 - b1) Cp * D]`` with the
    divided difference ``D = (e^{-b1 t} - e^{-b2 t}) / (b2 - b1)``. When the
    roots nearly coincide ``D`` is replaced by its limit ``t e^{-b t}``.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    t = np.asarray(t, dtype=float)
    K1, k2, k3, k4 = (params[:, i] for i in range(4))
    b1, b2 = _beta_roots(k2, k3, k4)
    conv2 = _feng_exp_conv(feng, b2, t)
    gap = b2 - b1
    near = gap * t[-1] <= 1e-5
    divided = _feng_exp_conv(feng, b1, t)
    divided -= conv2
    divided /= np.where(near, 1.0, gap)
    if near.any():
        cols = np.flatnonzero(near)
        divided[:, cols] = _feng_exp_conv(feng, 0.5 * (b1[cols] + b2[cols]), t, with_t=True)[1]
    divided *= k3 + k4 - b1
    divided += conv2
    divided *= K1
    return divided


def ct_analytic(p: KineticParams, cp: InputFunction, grid) -> TimeActivityCurve:
    """Tissue curve ``C_T`` on a uniform grid starting at 0.

    For a Feng input the convolution is evaluated in closed form. Sampled
    inputs (and Feng inputs that would be clamped at zero somewhere) use the
    trapezoidal convolution of :func:`tissue_curves`.
    """
    dt = _grid_step(grid)
    grid = np.asarray(grid, dtype=float)
    if cp.feng is not None and feng_is_nonnegative(cp.feng, grid):
        values = feng_tissue_curves(p.as_array()[None, :], cp.feng, grid)[:, 0]
    else:
        values = tissue_curves(p.as_array()[None, :], cp(grid), dt)[:, 0]
    return TimeActivityCurve(grid, np.maximum(values, 0.0))


def compartment_ode_solve(p: KineticParams, cp: InputFunction, grid, max_step: float = DENSE_DT):
    """Classical RK4 integration of the two compartment ODEs.

    Steps larger than ``max_step`` are subdivided. Returns ``(C1, C2, C_T)``
    curves on ``grid``.
    """
    grid = np.asarray(grid, dtype=float)
    _grid_step(grid)
    K1, k2, k3, k4 = p.K1, p.k2, p.k3, p.k4

    def rhs(t, c1, c2):
        inflow = K1 * float(cp(t))
        return inflow - (k2 + k3) * c1 + k4 * c2, k3 * c1 - k4 * c2

    c1 = np.zeros(len(grid))
    c2 = np.zeros(len(grid))
    y1 = y2 = 0.0
    for i in range(len(grid) - 1):
        t0, t1 = grid[i], grid[i + 1]
        n_sub = max(1, int(np.ceil((t1 - t0) / max_step - 1e-9)))
        h = (t1 - t0) / n_sub
        t = t0
        for _ in range(n_sub):
            a1, a2 = rhs(t, y1, y2)
            b1, b2 = rhs(t + h / 2, y1 + h / 2 * a1, y2 + h / 2 * a2)
            c1_, c2_ = rhs(t + h / 2, y1 + h / 2 * b1, y2 + h / 2 * b2)
            d1, d2 = rhs(t + h, y1 + h * c1_, y2 + h * c2_)
            y1 += h / 6 * (a1 + 2 * b1 + 2 * c1_ + d1)
            y2 += h / 6 * (a2 + 2 * b2 + 2 * c2_ + d2)
            t += h
        c1[i + 1], c2[i + 1] = y1, y2
    c1 = np.maximum(c1, 0.0)
    c2 = np.maximum(c2, 0.0)
    return (
        TimeActivityCurve(grid, c1),
        TimeActivityCurve(grid, c2),
        TimeActivityCurve(grid, c1 + c2),
    )


def frame_weights(times, schedule: FrameSchedule) -> np.ndarray:
    """Trapezoid weights ``(n_frames, n_t)`` integrating a grid curve over each frame."""
    times = np.asarray(times, dtype=float)
    if schedule.end > times[-1] + 1e-9 or times[0] > 1e-12:
        raise KineticsError("frame schedule extends past the curve support")
    tol = 1e-6 * np.min(np.diff(times))
    weights = np.zeros((schedule.n_frames, len(times)))
    for k, (ts, te) in enumerate(zip(schedule.starts, schedule.ends)):
        i0 = int(np.searchsorted(times, ts - tol))
        i1 = int(np.searchsorted(times, te - tol))
        if i1 >= len(times) or abs(times[i0] - ts) > tol or abs(times[i1] - te) > tol:
            raise KineticsError(f"frame ({ts}, {te}) boundaries must fall on grid points")
        steps = np.diff(times[i0 : i1 + 1])
        weights[k, i0:i1] += 0.5 * steps
        weights[k, i0 + 1 : i1 + 1] += 0.5 * steps
    return weights


def frame_activity(
    ct: TimeActivityCurve,
    cb: TimeActivityCurve,
    p: KineticParams,
    tracer: Tracer,
    schedule: FrameSchedule,
) -> np.ndarray:
    """Decayed, blood-weighted frame integrals of a tissue curve."""
    if len(ct) != len(cb) or not np.allclose(ct.times, cb.times, rtol=0, atol=1e-12):
        raise KineticsError("tissue and blood curves must share a time grid")
    w = frame_weights(ct.times, schedule) * np.exp(-tracer.decay_constant * ct.times)[None, :]
    # same operation order as FrameModel.frames_from_curves, so both paths agree bit for bit
    tissue = w @ ct.values[:, None]
    blood = w @ cb.values
    return np.maximum((1.0 - p.vb) * tissue[:, 0] + p.vb * blood, 0.0)


class FrameModel:
    """Kinetic parameters -> frame activities for a fixed input, tracer and schedule.

    Precomputes the dense grid, the sampled input curves and the frame weights
    so that many voxels can be evaluated in one vectorized call.
    """

    def __init__(self, cp: InputFunction, tracer: Tracer, schedule: FrameSchedule, dt: float = DENSE_DT):
        self.cp = cp
        self.tracer = tracer
        self.schedule = schedule
        self.dt = dt
        self.times = dense_grid(schedule.end, dt)
        self.cp_values = np.asarray(cp(self.times), dtype=float)
        self.cb_values = np.asarray(cp.blood(self.times), dtype=float)
        self.decay = np.exp(-tracer.decay_constant * self.times)
        self.weights = frame_weights(self.times, schedule) * self.decay[None, :]
        self.blood_frames = self.weights @ self.cb_values
        self.exact = cp.feng is not None and feng_is_nonnegative(cp.feng, self.times)

    def curves(self, params) -> np.ndarray:
        """Dense tissue curves ``(n_t, N)`` for parameter rows ``(N, >=4)``."""
        if self.exact:
            return np.maximum(feng_tissue_curves(params, self.cp.feng, self.times), 0.0)
        return np.maximum(tissue_curves(params, self.cp_values, self.dt), 0.0)

    def frames(self, params, chunk: int = 4096) -> np.ndarray:
        """Frame activities ``(n_frames, N)``; column 4 of ``params`` (if present) is V_B."""
        params = np.atleast_2d(np.asarray(params, dtype=float))
        out = np.empty((self.schedule.n_frames, len(params)))
        for lo in range(0, len(params), chunk):
            block = params[lo : lo + chunk]
            out[:, lo : lo + chunk] = self.frames_from_curves(self.curves(block), block)
        return out

    def frames_from_curves(self, curves, params) -> np.ndarray:
        params = np.atleast_2d(np.asarray(params, dtype=float))
        vb = params[:, 4] if params.shape[1] > 4 else np.zeros(len(params))
        tissue = self.weights @ curves
        return np.maximum((1.0 - vb)[None, :] * tissue + vb[None, :] * self.blood_frames[:, None], 0.0)
