"""Image-quality and ROI metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11x11 window


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak: float | None = None) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are equal.

    ``peak`` defaults to the maximum of ``b`` (the reference image).
    """
    a, b = _pair(a, b)
    peak = float(np.max(b)) if peak is None else float(peak)
    if peak <= 0:
        raise ValueError("peak must be > 0")
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def ssim(a, b, peak: float | None = None) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Local statistics use population (biased) moments and reflective borders,
    with stabilizers ``(0.01 peak)^2`` and ``(0.03 peak)^2``. ``peak``
    defaults to the maximum of ``b``, or 1 when that is not positive.
    """
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise ValueError("ssim expects 2-D images")
    peak = float(np.max(b)) if peak is None else float(peak)
    if peak <= 0:
        peak = 1.0
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    trunc = SSIM_RADIUS / SSIM_SIGMA

    def blur(x):
        return gaussian_filter(x, SSIM_SIGMA, truncate=trunc, mode="reflect")

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a * mu_a
    var_b = blur(b * b) - mu_b * mu_b
    cov = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    # crop the border where the window leaves the image
    r = SSIM_RADIUS
    smap = num / den
    if smap.shape[0] > 2 * r and smap.shape[1] > 2 * r:
        smap = smap[r:-r, r:-r]
    return float(np.mean(smap))


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr: float
    ssim: float

    def to_dict(self):
        return {"mse": self.mse, "psnr": self.psnr, "ssim": self.ssim}


def compare(pred, target, peak: float | None = None) -> MetricReport:
    pred, target = _pair(pred, target)
    peak = float(np.max(target)) if peak is None else peak
    if peak <= 0:
        peak = 1.0
    return MetricReport(mse(pred, target), psnr(pred, target, peak), ssim(pred, target, peak))


@dataclass(frozen=True)
class RoiStats:
    bias: float
    variance: float
    n: int
    excluded: int


def roi_bias_variance(truth, pred, mask=None, centered_on_prediction: bool = False) -> RoiStats:
    """Relative bias and variance over an ROI.

    ``bias = mean(|x - x_hat| / x)``. The default variance is
    ``mean(((x - m) / x)^2)`` with ``m`` the mean prediction in the ROI, which
    mixes the truth with the prediction mean. ``centered_on_prediction=True``
    gives ``mean(((x_hat - m) / x)^2)`` instead. Voxels with ``x <= 0`` are
    excluded and counted.
    """
    truth, pred = _pair(truth, pred)
    mask = np.ones(truth.shape, bool) if mask is None else np.asarray(mask, bool)
    if mask.shape != truth.shape:
        raise ValueError("mask must match the images")
    keep = mask & (truth > 0)
    n = int(keep.sum())
    if n == 0:
        raise ValueError("ROI has no voxels with positive ground truth")
    x = truth[keep]
    xh = pred[keep]
    m = float(np.mean(xh))
    bias = float(np.mean(np.abs(x - xh) / x))
    centre = xh if centered_on_prediction else x
    variance = float(np.mean(((centre - m) / x) ** 2))
    return RoiStats(bias, variance, n, int(mask.sum()) - n)


def line_profile(image, index: int, axis: str = "row") -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("profiles need a 2-D image")
    if axis not in ("row", "col"):
        raise ValueError("axis must be 'row' or 'col'")
    size = image.shape[0] if axis == "row" else image.shape[1]
    if not 0 <= index < size:
        raise IndexError(f"{axis} index {index} out of range [0, {size})")
    return (image[index, :] if axis == "row" else image[:, index]).copy()
