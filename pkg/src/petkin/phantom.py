"""Procedural label phantoms, ROI parameter randomization and noise-free dynamic images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .kinetics import FrameModel, FrameSchedule, InputFunction, KineticParams, Tracer

# (cx, cy, rx, ry, angle_deg) in normalized [-1, 1] coordinates, painted in order
_LAYOUTS = {
    "brain": [
        (0.0, 0.0, 0.78, 0.90, 0.0),
        (-0.36, 0.12, 0.22, 0.38, 12.0),
        (0.36, 0.12, 0.22, 0.38, -12.0),
        (0.0, -0.12, 0.17, 0.14, 0.0),
        (0.0, -0.62, 0.30, 0.16, 0.0),
    ],
    "thorax": [
        (0.0, 0.0, 0.92, 0.62, 0.0),
        (0.28, -0.05, 0.24, 0.20, 25.0),
        (-0.42, 0.05, 0.18, 0.28, 0.0),
    ],
}
_DEFAULT_ROIS = {"brain": 5, "thorax": 3}
KINDS = ("brain", "thorax")


class PhantomError(ValueError):
    pass


@dataclass(frozen=True)
class LabelMap:
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise PhantomError("label map must be 2-D")
        labels = labels.astype(np.int32)
        ids = np.unique(labels[labels > 0])
        if len(ids) and not np.array_equal(ids, np.arange(1, len(ids) + 1)):
            raise PhantomError(f"ROI labels must be contiguous 1..n, got {ids.tolist()}")
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def n_rois(self) -> int:
        return int(self.labels.max(initial=0))

    def mask(self, roi: int) -> np.ndarray:
        return self.labels == roi

    @property
    def body(self) -> np.ndarray:
        return self.labels > 0


def _smooth_warp(size: int, rng: np.random.Generator, amplitude: float):
    """Seeded smooth displacement field, in normalized units."""
    fields = []
    for _ in range(2):
        noise = rng.standard_normal((size, size))
        smooth = gaussian_filter(noise, sigma=size / 6.0, mode="wrap")
        peak = np.max(np.abs(smooth))
        fields.append(amplitude * smooth / peak if peak > 0 else smooth)
    return fields


def make_phantom(
    kind: str = "brain",
    size: int = 128,
    n_rois: int | None = None,
    seed: int = 0,
    warp: float = 0.04,
) -> LabelMap:
    """Elliptical ROI phantom inside a body outline.

    ROI 1 is the body itself; further ROIs are nested ellipses painted over
    it. Extra ROIs beyond the layout template are seeded disks. The seed also
    drives a small random rigid jitter and a smooth warp of the coordinates.
    """
    if kind not in _LAYOUTS:
        raise PhantomError(f"unknown phantom kind {kind!r}, expected one of {KINDS}")
    if size < 16:
        raise PhantomError("phantom size must be >= 16")
    n_rois = _DEFAULT_ROIS[kind] if n_rois is None else int(n_rois)
    if n_rois < 1:
        raise PhantomError("need at least one ROI")
    rng = np.random.default_rng(seed)

    if n_rois == 1:
        shapes = [(0.0, 0.0, 0.6, 0.6, 0.0)]
    else:
        shapes = list(_LAYOUTS[kind][:n_rois])
        while len(shapes) < n_rois:
            r = rng.uniform(0.08, 0.14)
            ang = rng.uniform(0, 2 * np.pi)
            rad = rng.uniform(0.1, 0.5)
            shapes.append((rad * np.cos(ang), rad * np.sin(ang), r, r, 0.0))

    c = (np.arange(size) - (size - 1) / 2.0) / (size / 2.0)
    x, y = np.meshgrid(c, -c)
    if warp > 0 and n_rois > 1:
        dx, dy = _smooth_warp(size, rng, warp)
        theta = np.deg2rad(rng.uniform(-5, 5))
        shift = rng.uniform(-0.03, 0.03, size=2)
        xr = np.cos(theta) * x - np.sin(theta) * y + shift[0] + dx
        yr = np.sin(theta) * x + np.cos(theta) * y + shift[1] + dy
        x, y = xr, yr

    labels = np.zeros((size, size), np.int32)
    for roi, (cx, cy, rx, ry, deg) in enumerate(shapes, start=1):
        a = np.deg2rad(deg)
        u = np.cos(a) * (x - cx) + np.sin(a) * (y - cy)
        v = -np.sin(a) * (x - cx) + np.cos(a) * (y - cy)
        labels[(u / rx) ** 2 + (v / ry) ** 2 <= 1.0] = roi
    counts = np.bincount(labels.ravel(), minlength=n_rois + 1)
    if np.any(counts[1:] == 0):
        missing = [int(i) for i in np.flatnonzero(counts[1:] == 0) + 1]
        raise PhantomError(f"{n_rois} ROIs do not fit a {size}x{size} phantom (empty ROIs {missing})")
    return LabelMap(labels)


RoiParamTable = dict  # {roi label: KineticParams}


def roi_table(means: list[KineticParams], n_rois: int) -> RoiParamTable:
    """Assign preset means to ROIs 1..n, cycling when there are more ROIs than rows."""
    return {roi: means[(roi - 1) % len(means)] for roi in range(1, n_rois + 1)}


def _truncated_normal(rng, mean, sd):
    if sd == 0:
        return mean
    while True:
        value = rng.normal(mean, sd)
        if value >= 0:
            return value


def randomize_params(table: RoiParamTable, cv: float = 0.2, seed=None, rng=None) -> RoiParamTable:
    """Gaussian physiological variation: sd = cv * mean, negatives resampled, V_B clamped to [0, 1]."""
    if cv < 0:
        raise ValueError("cv must be >= 0")
    rng = rng if rng is not None else np.random.default_rng(seed)
    out = {}
    for roi in sorted(table):
        p = table[roi]
        rates = [_truncated_normal(rng, m, cv * m) for m in (p.K1, p.k2, p.k3, p.k4)]
        vb = float(np.clip(rng.normal(p.vb, cv * p.vb), 0.0, 1.0)) if p.vb > 0 else p.vb
        out[roi] = KineticParams(*rates, vb)
    return out


@dataclass(frozen=True)
class DynamicImage:
    """Frame-integrated activity, array shape ``(H, W, n_frames)``."""

    values: np.ndarray
    schedule: FrameSchedule

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3 or values.shape[2] != self.schedule.n_frames:
            raise ValueError("dynamic image must be (H, W, n_frames) matching its schedule")
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[2]

    def frame(self, k: int) -> np.ndarray:
        return self.values[:, :, k]


def param_images(label_map: LabelMap, params: RoiParamTable) -> np.ndarray:
    """Fill each ROI with its parameters: ``(H, W, 5)`` (K1, k2, k3, k4, V_B); background 0."""
    out = np.zeros(label_map.labels.shape + (5,))
    for roi in range(1, label_map.n_rois + 1):
        if roi not in params:
            raise PhantomError(f"no kinetic parameters for ROI {roi}")
        out[label_map.mask(roi)] = params[roi].as_array()
    return out


def synthesize_dynamic(
    label_map: LabelMap,
    params: RoiParamTable,
    cp: InputFunction,
    tracer: Tracer,
    schedule: FrameSchedule,
    model: FrameModel | None = None,
) -> DynamicImage:
    model = model or FrameModel(cp, tracer, schedule)
    out = np.zeros(label_map.labels.shape + (schedule.n_frames,))
    for roi in range(1, label_map.n_rois + 1):
        if roi not in params:
            raise PhantomError(f"no kinetic parameters for ROI {roi}")
        out[label_map.mask(roi)] = model.frames(params[roi].as_array()[None, :])[:, 0]
    return DynamicImage(out, schedule)
