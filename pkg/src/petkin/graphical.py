"""Logan and Patlak graphical analysis, scalar and voxelwise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .kinetics import (
    DENSE_DT,
    FrameModel,
    FrameSchedule,
    InputFunction,
    TimeActivityCurve,
    Tracer,
    dense_grid,
)

GUARD = 1e-9
MODES = ("logan", "patlak")


class FitError(ValueError):
    """Raised when a graphical fit has fewer than two usable points or no x spread."""


@dataclass(frozen=True)
class FitWindow:
    """Frame indices entering the regression (``t > t*``)."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.indices) < 2:
            raise FitError("a fit window needs at least two frames")
        if len(set(self.indices)) != len(self.indices) or min(self.indices) < 0:
            raise FitError(f"invalid window indices {self.indices}")

    @classmethod
    def last(cls, n: int, schedule: FrameSchedule) -> FitWindow:
        if n > schedule.n_frames:
            raise FitError(f"window of {n} frames exceeds the {schedule.n_frames}-frame schedule")
        return cls(tuple(range(schedule.n_frames - n, schedule.n_frames)))

    @classmethod
    def after(cls, t_min: float, schedule: FrameSchedule) -> FitWindow:
        """Frames that start at or after ``t_min`` minutes."""
        return cls(tuple(int(i) for i in np.flatnonzero(schedule.starts >= t_min - 1e-9)))

    def check(self, schedule: FrameSchedule) -> np.ndarray:
        idx = np.asarray(self.indices)
        if idx.max() >= schedule.n_frames:
            raise FitError("window indices exceed the schedule")
        return idx


def default_window(schedule: FrameSchedule) -> FitWindow:
    return FitWindow.last(min(10, schedule.n_frames), schedule)


@dataclass(frozen=True)
class PlotPoints:
    x: np.ndarray
    y: np.ndarray
    dropped: int = 0

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class LoganResult:
    slope_K: float
    intercept_b: float


@dataclass(frozen=True)
class PatlakResult:
    Ki: float
    V0: float


def cumulative_integral(curve: TimeActivityCurve) -> TimeActivityCurve:
    if len(curve) < 2:
        raise FitError("cumulative integral needs at least two points")
    if np.any(np.diff(curve.times) <= 0):
        raise FitError("curve times must be strictly increasing")
    return TimeActivityCurve(curve.times, cumulative_trapezoid(curve.values, curve.times, axis=0, initial=0.0))


def _sample(times, values, at):
    """Linear interpolation of ``values`` (``(n_t,)`` or ``(n_t, N)``) at times ``at``."""
    idx = np.clip(np.searchsorted(times, at, side="right") - 1, 0, len(times) - 2)
    frac = (at - times[idx]) / (times[idx + 1] - times[idx])
    if values.ndim == 2:
        frac = frac[:, None]
    return (1.0 - frac) * values[idx] + frac * values[idx + 1]


def _guarded_ratio(num, den, peak):
    ok = den > GUARD * peak
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=ok), ok


def _plasma_abscissa(times, cp_values, mids):
    cum = cumulative_trapezoid(cp_values, times, initial=0.0)
    x, ok = _guarded_ratio(_sample(times, cum, mids), _sample(times, cp_values, mids), cp_values.max())
    return x, ok


def _logan_coordinates(times, cp_values, curves, mids):
    """Voxelwise Logan coordinates.

    ``x = int_0^t C_p / C_T(t)`` and ``y = int_0^t C_T / C_T(t)``, both
    ``(n_mids, N)``, plus the mask of points passing the division guards.
    """
    cum_cp = cumulative_trapezoid(cp_values, times, initial=0.0)
    cp_ok = _sample(times, cp_values, mids) > GUARD * cp_values.max()
    cum_ct = cumulative_trapezoid(curves, times, axis=0, initial=0.0)
    ct_mid = _sample(times, curves, mids)
    peak = curves.max(axis=0)
    ct_ok = ct_mid > GUARD * peak
    ok = ct_ok & cp_ok[:, None]
    den = np.where(ok, ct_mid, 1.0)
    x = np.where(ok, _sample(times, cum_cp, mids)[:, None] / den, 0.0)
    y = np.where(ok, _sample(times, cum_ct, mids) / den, 0.0)
    return x, y, ok


def decay_corrected_means(frames, schedule: FrameSchedule, decay_constant: float):
    """Frame integrals -> decay-corrected mean concentrations over each frame."""
    dur = schedule.durations
    if decay_constant > 0:
        factor = decay_constant * np.exp(decay_constant * schedule.starts) / -np.expm1(-decay_constant * dur)
    else:
        factor = 1.0 / dur
    frames = np.asarray(frames, dtype=float)
    return frames * (factor if frames.ndim == 1 else factor[:, None])


def _to_points(x, y, ok) -> PlotPoints:
    dropped = int(np.count_nonzero(~ok))
    if len(ok) - dropped < 2:
        raise FitError(f"only {len(ok) - dropped} usable points after division guards")
    return PlotPoints(x[ok], y[ok], dropped)


def logan_points(ct: TimeActivityCurve, cp: TimeActivityCurve, window: FitWindow, schedule: FrameSchedule) -> PlotPoints:
    idx = window.check(schedule)
    mids = schedule.midpoints[idx]
    if len(ct) != len(cp) or not np.allclose(ct.times, cp.times, rtol=0, atol=1e-12):
        raise FitError("tissue and plasma curves must share a time grid")
    x, y, ok = _logan_coordinates(cp.times, cp.values, ct.values[:, None], mids)
    return _to_points(x[:, 0], y[:, 0], ok[:, 0])


def patlak_points(
    tissue,
    cp: TimeActivityCurve,
    window: FitWindow,
    schedule: FrameSchedule,
    decay_constant: float = 0.0,
) -> PlotPoints:
    """Patlak coordinates at the window's frame midpoints.

    ``tissue`` is either a dense :class:`TimeActivityCurve` (sampled at the
    midpoints) or an array of frame integrals, which is converted to
    decay-corrected mean concentrations first.
    """
    idx = window.check(schedule)
    mids = schedule.midpoints[idx]
    x, okx = _plasma_abscissa(cp.times, cp.values, mids)
    cp_mid = _sample(cp.times, cp.values, mids)
    if isinstance(tissue, TimeActivityCurve):
        num = _sample(tissue.times, tissue.values, mids)
    else:
        num = decay_corrected_means(tissue, schedule, decay_constant)[idx]
    y = np.divide(num, cp_mid, out=np.zeros_like(cp_mid), where=okx)
    return _to_points(x, y, okx)


def fit_lines(x, y, valid):
    """Masked least-squares lines for many point columns.

    Args:
        x: ``(n,)`` shared abscissa or ``(n, N)`` per column.
        y: ``(n, N)`` ordinates.
        valid: ``(n, N)`` boolean mask of usable points.

    Returns:
        ``(slope, intercept, ok)`` each of shape ``(N,)``; failed columns are 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(valid, dtype=float)
    xb = np.broadcast_to(x[:, None] if x.ndim == 1 else x, y.shape)
    n = w.sum(axis=0)
    safe_n = np.maximum(n, 1.0)
    mx = (w * xb).sum(axis=0) / safe_n
    my = (w * y).sum(axis=0) / safe_n
    dx = (xb - mx) * w
    sxx = (dx * dx).sum(axis=0)
    sxy = (dx * (y - my)).sum(axis=0)
    scale = (w * xb * xb).sum(axis=0)
    ok = (n >= 2) & (sxx > 1e-12 * np.maximum(scale, 1e-300))
    slope = np.divide(sxy, sxx, out=np.zeros_like(sxx), where=ok)
    intercept = np.where(ok, my - slope * mx, 0.0)
    return slope, intercept, ok


def linear_fit(points) -> tuple[float, float]:
    """Ordinary least squares ``y = slope x + intercept``."""
    if isinstance(points, PlotPoints):
        x, y = points.x, points.y
    else:
        arr = np.asarray(points, dtype=float).reshape(-1, 2)
        x, y = arr[:, 0], arr[:, 1]
    if len(x) < 2:
        raise FitError("linear fit needs at least two points")
    slope, intercept, ok = fit_lines(x, y[:, None], np.ones((len(x), 1), bool))
    if not ok[0]:
        raise FitError("degenerate x spread in linear fit")
    return float(slope[0]), float(intercept[0])


def logan(ct, cp, window, schedule) -> LoganResult:
    k, b = linear_fit(logan_points(ct, cp, window, schedule))
    return LoganResult(k, b)


def patlak(tissue, cp, window, schedule, decay_constant: float = 0.0) -> PatlakResult:
    ki, v0 = linear_fit(patlak_points(tissue, cp, window, schedule, decay_constant))
    return PatlakResult(ki, v0)


def graphical_from_curves(model: FrameModel, curves, params, mode: str, window: FitWindow, frames=None):
    """Slope/intercept for voxel columns given their dense tissue curves.

    Returns ``(slope, intercept, ok)``; ``frames`` may be passed when already
    computed (Patlak only).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    schedule = model.schedule
    idx = window.check(schedule)
    mids = schedule.midpoints[idx]
    if mode == "logan":
        x, y, valid = _logan_coordinates(model.times, model.cp_values, curves, mids)
    else:
        x, okx = _plasma_abscissa(model.times, model.cp_values, mids)
        if frames is None:
            frames = model.frames_from_curves(curves, params)
        means = decay_corrected_means(frames, schedule, model.tracer.decay_constant)[idx]
        cp_mid = _sample(model.times, model.cp_values, mids)
        y = np.divide(means, cp_mid[:, None], out=np.zeros_like(means), where=okx[:, None])
        valid = np.broadcast_to(okx[:, None], y.shape)
    return fit_lines(x, y, valid)


def parametric_images(
    param_images,
    cp: InputFunction,
    tracer: Tracer,
    schedule: FrameSchedule,
    mode: str,
    window: FitWindow | None = None,
    mask=None,
    model: FrameModel | None = None,
):
    """Slope and intercept images from a kinetic-parameter image.

    Args:
        param_images: ``(H, W, 4)`` or ``(H, W, 5)`` array (K1, k2, k3, k4[, V_B]).
        mode: ``"logan"`` or ``"patlak"``.
        mask: optional boolean ``(H, W)``; voxels outside are skipped.

    Returns:
        ``(slope, intercept, failed)`` where ``failed`` flags voxels whose fit
        had too few usable points; skipped and failed voxels hold 0.

    Voxels sharing a parameter vector are computed once.
    """
    params = np.asarray(param_images, dtype=float)
    if params.ndim != 3 or params.shape[2] not in (4, 5):
        raise ValueError("param_images must have shape (H, W, 4) or (H, W, 5)")
    H, W, _ = params.shape
    window = window or default_window(schedule)
    model = model or FrameModel(cp, tracer, schedule)
    flat = params.reshape(-1, params.shape[2])
    active = np.ones(H * W, bool) if mask is None else np.asarray(mask, bool).reshape(-1)
    slope = np.zeros(H * W)
    intercept = np.zeros(H * W)
    failed = np.zeros(H * W, bool)
    if active.any():
        rows, inverse = np.unique(flat[active], axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        s, b, ok = graphical_from_curves(model, model.curves(rows), rows, mode, window)
        slope[active] = s[inverse]
        intercept[active] = b[inverse]
        failed[active] = ~ok[inverse]
    return slope.reshape(H, W), intercept.reshape(H, W), failed.reshape(H, W)


def graphical_from_frames(frames, cp: InputFunction, schedule: FrameSchedule, mode: str, window: FitWindow,
                          decay_constant: float = 0.0, dt: float = DENSE_DT):
    """Slope/intercept from measured frame integrals ``(n_frames, N)``.

    Frame integrals become decay-corrected mean concentrations. For Logan the
    running tissue integral at a midpoint is the sum of completed frames plus
    half of the current one.

    Returns ``(slope, intercept, ok)``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    frames = np.asarray(frames, dtype=float)
    if frames.ndim == 1:
        frames = frames[:, None]
    if frames.shape[0] != schedule.n_frames:
        raise FitError("frame count does not match the schedule")
    idx = window.check(schedule)
    mids = schedule.midpoints[idx]
    times = dense_grid(schedule.end, dt)
    cp_values = np.asarray(cp(times), dtype=float)
    x, okx = _plasma_abscissa(times, cp_values, mids)
    conc = decay_corrected_means(frames, schedule, decay_constant)
    if mode == "patlak":
        cp_mid = _sample(times, cp_values, mids)
        y = np.divide(conc[idx], cp_mid[:, None], out=np.zeros((len(idx), frames.shape[1])), where=okx[:, None])
        return fit_lines(x, y, np.broadcast_to(okx[:, None], y.shape))
    area = conc * schedule.durations[:, None]
    running = np.cumsum(area, axis=0) - 0.5 * area
    c = conc[idx]
    peak = np.max(conc, axis=0)
    ok = (c > GUARD * np.where(peak > 0, peak, np.inf)) & okx[:, None]
    den = np.where(ok, c, 1.0)
    cum_cp = _sample(times, cumulative_trapezoid(cp_values, times, initial=0.0), mids)
    xl = np.where(ok, cum_cp[:, None] / den, 0.0)
    yl = np.where(ok, running[idx] / den, 0.0)
    return fit_lines(xl, yl, ok)
