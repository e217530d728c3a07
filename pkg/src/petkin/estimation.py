"""Voxelwise nonlinear least-squares fitting of the two-tissue model.

Box-constrained Levenberg-Marquardt with a finite-difference Jacobian. Many
voxels are fitted in lock step: each iteration evaluates every active voxel's
model and Jacobian in one vectorized call, but all step-size decisions are
made per voxel, so a voxel's result does not depend on its neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinetics import FrameModel, FrameSchedule, InputFunction, KineticParams, Tracer

N_RATES = 4


@dataclass
class FitConfig:
    """Settings for :func:`fit_voxel` / :func:`fit_image`.

    Attributes:
        lower, upper: bounds for (K1, k2, k3, k4[, V_B]). A zero-width
            interval fixes that parameter.
        init: starting point; the midpoint of the bounds when omitted.
        vb: blood fraction used when V_B is not fitted.
        fit_vb: fit V_B as a fifth parameter (bounds then need 5 entries).
        max_iter: cap on Jacobian evaluations per voxel.
        ftol: stop when an accepted step lowers the cost by less than this
            fraction.
        gtol: stop when the column-normalized projected gradient falls below
            ``gtol * ||r||``.
        xtol: stop when an accepted step, in bound-span units, is shorter than
            ``xtol * (xtol + ||theta||)``.
        fd_step: central-difference step as a fraction of each bound range.
    """

    lower: np.ndarray
    upper: np.ndarray
    init: np.ndarray | None = None
    vb: float = 0.0
    fit_vb: bool = False
    max_iter: int = 200
    ftol: float = 1e-12
    gtol: float = 1e-9
    xtol: float = 1e-10
    fd_step: float = 1e-5
    lam0: float = 1e-3

    def __post_init__(self):
        n = N_RATES + int(self.fit_vb)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError(f"bounds need {n} entries")
        if np.any(self.lower < 0) or np.any(self.upper < self.lower):
            raise ValueError("bounds must satisfy 0 <= lo <= hi")
        if self.fit_vb and self.upper[4] > 1:
            raise ValueError("V_B upper bound must be <= 1")
        if self.init is None:
            self.init = 0.5 * (self.lower + self.upper)
        self.init = np.asarray(self.init, dtype=float)
        if self.init.shape != (n,) or np.any(self.init < self.lower) or np.any(self.init > self.upper):
            raise ValueError("init must lie within the bounds")
        if self.ftol <= 0 or self.gtol <= 0 or self.xtol <= 0:
            raise ValueError("tolerances must be > 0")

    @classmethod
    def from_means(cls, means: list[KineticParams], factor: float = 5.0, **kwargs) -> FitConfig:
        """Bounds ``[0, factor * max mean]`` per parameter."""
        rows = np.array([m.as_array() for m in means])
        fit_vb = kwargs.get("fit_vb", False)
        n = N_RATES + int(fit_vb)
        upper = factor * rows[:, :n].max(axis=0)
        if fit_vb:
            upper[4] = min(max(upper[4], 0.1), 1.0)
        return cls(np.zeros(n), upper, **kwargs)

    @property
    def n_params(self) -> int:
        return len(self.lower)

    @property
    def free(self) -> np.ndarray:
        return self.upper > self.lower


@dataclass
class FitResult:
    params: KineticParams
    residual_norm: float
    converged: bool
    iterations: int
    cost_history: list = field(default_factory=list)


def _full_params(cfg: FitConfig, theta):
    """Fitted vectors ``(N, n)`` -> model rows ``(N, 5)``."""
    theta = np.atleast_2d(theta)
    if cfg.fit_vb:
        return theta
    return np.column_stack([theta, np.full(len(theta), cfg.vb)])


def jacobian(model: FrameModel, cfg: FitConfig, theta, h: float | None = None):
    """Central-difference Jacobian of the frame model for parameter rows ``(N, n)``.

    Steps are ``h * (hi - lo)``; near a bound the stencil is shifted inside the
    box and becomes one-sided. Fixed parameters get a zero column.

    Returns:
        ``(N, n_frames, n)`` array.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    h = cfg.fd_step if h is None else h
    N, n = theta.shape
    span = cfg.upper - cfg.lower
    step = h * span
    free = np.flatnonzero(cfg.free)
    rows = []
    plan = []
    for j in free:
        up = np.minimum(theta[:, j] + step[j], cfg.upper[j])
        dn = np.maximum(theta[:, j] - step[j], cfg.lower[j])
        a = theta.copy()
        b = theta.copy()
        a[:, j] = up
        b[:, j] = dn
        rows.extend([a, b])
        plan.append((j, up - dn))
    J = np.zeros((N, model.schedule.n_frames, n))
    if not plan:
        return J
    vals = model.frames(_full_params(cfg, np.concatenate(rows)))
    for i, (j, width) in enumerate(plan):
        fa = vals[:, (2 * i) * N : (2 * i + 1) * N]
        fb = vals[:, (2 * i + 1) * N : (2 * i + 2) * N]
        J[:, :, j] = ((fa - fb) / np.where(width > 0, width, 1.0)).T
    return J


def _lm_batch(model: FrameModel, data, cfg: FitConfig, theta0=None):
    """Fit each column of ``data`` (n_frames, N); returns per-voxel arrays."""
    data = np.asarray(data, dtype=float)
    n_frames, N = data.shape
    n = cfg.n_params
    lo, hi = cfg.lower, cfg.upper
    free = cfg.free
    theta = np.tile(cfg.init, (N, 1)) if theta0 is None else np.array(theta0, dtype=float)
    span = np.where(free, hi - lo, 1.0)

    # all-zero series: if the lower corner reproduces them exactly, that is the answer
    # (with K1 = 0 the remaining rates are unidentifiable)
    blank = ~np.any(data, axis=0)
    if blank.any() and not np.any(model.frames(_full_params(cfg, lo[None, :]))):
        theta[blank] = lo

    r = (model.frames(_full_params(cfg, theta)) - data).T  # (N, n_frames)
    cost = 0.5 * np.sum(r * r, axis=1)
    lam = np.full(N, cfg.lam0)
    iters = np.zeros(N, int)
    done = np.zeros(N, bool)
    converged = np.zeros(N, bool)
    J = np.zeros((N, n_frames, n))
    need_j = np.ones(N, bool)
    history = [[c] for c in cost]
    scale = np.sqrt(np.sum(data * data, axis=0))

    # perfect fits at the start need no work
    zero = cost == 0
    done |= zero
    converged |= zero

    while not done.all():
        act = np.flatnonzero(~done)
        fresh = act[need_j[act]]
        if len(fresh):
            J[fresh] = jacobian(model, cfg, theta[fresh])
            iters[fresh] += 1
            need_j[fresh] = False

        Ja, ra = J[act], r[act]
        g = np.einsum("nkj,nk->nj", Ja, ra)
        A = np.einsum("nkj,nki->nji", Ja, Ja)
        colnorm = np.sqrt(np.maximum(np.einsum("njj->nj", A), 0.0))

        # projected-gradient test: components pushing outward at an active bound do not count
        at_lo = (theta[act] <= lo) & (g > 0)
        at_hi = (theta[act] >= hi) & (g < 0)
        pg = np.where(at_lo | at_hi | ~free, 0.0, g) / np.where(colnorm > 0, colnorm, 1.0)
        rnorm = np.sqrt(2.0 * cost[act])
        small = np.max(np.abs(pg), axis=1) <= cfg.gtol * np.maximum(rnorm, 1e-300)
        if small.any():
            converged[act[small]] = True
            done[act[small]] = True

        out = (iters[act] >= cfg.max_iter) & ~small
        done[act[out]] = True
        keep = ~(small | out)
        act = act[keep]
        if not len(act):
            break
        g, A = g[keep], A[keep]

        # Marquardt-damped step on the free parameters, then projection onto the box
        diag = np.einsum("njj->nj", A)
        floor = 1e-12 * np.maximum(diag.max(axis=1, keepdims=True), 1e-300)
        damp = lam[act, None] * np.maximum(diag, floor)
        M = A + np.einsum("nj,jk->njk", damp, np.eye(n))
        mask = free[None, :] & np.ones((len(act), n), bool)
        M = np.where(mask[:, :, None] & mask[:, None, :], M, np.eye(n)[None])
        rhs = np.where(mask, -g, 0.0)
        delta = np.linalg.solve(M, rhs[:, :, None])[:, :, 0]
        trial = np.clip(theta[act] + delta, lo, hi)

        r_new = (model.frames(_full_params(cfg, trial)) - data[:, act]).T
        cost_new = 0.5 * np.sum(r_new * r_new, axis=1)
        better = cost_new < cost[act]
        for i, idx in enumerate(act):
            if better[i]:
                drop = cost[idx] - cost_new[i]
                rel = drop / cost[idx]
                step = np.linalg.norm((trial[i] - theta[idx]) / span)
                tiny = step <= cfg.xtol * (cfg.xtol + np.linalg.norm(trial[i] / span))
                theta[idx] = trial[i]
                r[idx] = r_new[i]
                cost[idx] = cost_new[i]
                history[idx].append(cost_new[i])
                lam[idx] = max(lam[idx] / 3.0, 1e-15)
                need_j[idx] = True
                if rel <= cfg.ftol or tiny or cost_new[i] == 0:
                    converged[idx] = True
                    done[idx] = True
            else:
                lam[idx] *= 4.0
                if lam[idx] > 1e16:
                    # no descent left; a residual at rounding level still counts as a fit
                    done[idx] = True
                    converged[idx] = np.sqrt(2.0 * cost[idx]) <= 1e-10 * scale[idx]
    return theta, np.sqrt(2.0 * cost), converged, iters, history


def _to_params(cfg: FitConfig, theta) -> KineticParams:
    row = _full_params(cfg, theta[None, :])[0]
    return KineticParams.from_array(row)


def fit_voxel(xk, cp: InputFunction, tracer: Tracer, schedule: FrameSchedule, cfg: FitConfig,
              model: FrameModel | None = None) -> FitResult:
    """Least-squares fit of one voxel's frame activities."""
    xk = np.asarray(xk, dtype=float)
    if xk.shape != (schedule.n_frames,) or not np.all(np.isfinite(xk)):
        raise ValueError("frame values must be finite with one entry per frame")
    model = model or FrameModel(cp, tracer, schedule)
    theta, rn, conv, iters, hist = _lm_batch(model, xk[:, None], cfg)
    return FitResult(_to_params(cfg, theta[0]), float(rn[0]), bool(conv[0]), int(iters[0]), hist[0])


@dataclass
class ImageFit:
    params: np.ndarray  # (4, H, W) or (5, H, W) when V_B is fitted
    residual: np.ndarray
    converged: np.ndarray

    def __iter__(self):
        return iter((self.params, self.residual, self.converged))


def fit_image(dyn, cp: InputFunction, tracer: Tracer, cfg: FitConfig, mask=None,
              schedule: FrameSchedule | None = None, model: FrameModel | None = None, chunk: int = 512) -> ImageFit:
    """Voxelwise fit of a dynamic image.

    Args:
        dyn: :class:`~petkin.phantom.DynamicImage` or an ``(H, W, T)`` array
            together with ``schedule``.
        mask: boolean ``(H, W)``; unmasked voxels are left at 0.

    Voxels with identical time series are fitted once.
    """
    values = getattr(dyn, "values", dyn)
    schedule = schedule or getattr(dyn, "schedule", None)
    if schedule is None:
        raise ValueError("a frame schedule is required")
    values = np.asarray(values, dtype=float)
    H, W, T = values.shape
    if T != schedule.n_frames:
        raise ValueError("frame count does not match the schedule")
    mask = np.ones((H, W), bool) if mask is None else np.asarray(mask, bool)
    if mask.shape != (H, W):
        raise ValueError("mask must match the image")
    model = model or FrameModel(cp, tracer, schedule)
    n_out = N_RATES + int(cfg.fit_vb)
    params = np.zeros((H * W, n_out))
    resid = np.zeros(H * W)
    conv = np.zeros(H * W, bool)
    idx = np.flatnonzero(mask.ravel())
    if len(idx):
        series = values.reshape(-1, T)[idx]
        uniq, inverse = np.unique(series, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        th = np.zeros((len(uniq), cfg.n_params))
        rn = np.zeros(len(uniq))
        cv = np.zeros(len(uniq), bool)
        for lo in range(0, len(uniq), chunk):
            t, r, c, _, _ = _lm_batch(model, uniq[lo : lo + chunk].T, cfg)
            th[lo : lo + chunk], rn[lo : lo + chunk], cv[lo : lo + chunk] = t, r, c
        params[idx] = _full_params(cfg, th)[:, :n_out][inverse]
        resid[idx] = rn[inverse]
        conv[idx] = cv[inverse]
    return ImageFit(np.moveaxis(params.reshape(H, W, n_out), 2, 0), resid.reshape(H, W), conv.reshape(H, W))


def grid_search(model: FrameModel, xk, cfg: FitConfig, points: int = 6):
    """Brute-force best point on a regular grid over the bounds (test oracle)."""
    axes = [np.linspace(a, b, points) if b > a else np.array([a]) for a, b in zip(cfg.lower, cfg.upper)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, cfg.n_params)
    pred = model.frames(_full_params(cfg, mesh))
    res = np.sqrt(np.sum((pred - np.asarray(xk, dtype=float)[:, None]) ** 2, axis=0))
    best = int(np.argmin(res))
    return mesh[best], float(res[best])
