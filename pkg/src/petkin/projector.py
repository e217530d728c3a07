"""Parallel-beam projection, Poisson count noise and OSEM reconstruction."""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np
import scipy.sparse as sp

BASE_COUNTS = 1e6


class ParallelBeamProjector:
    """Discrete Radon transform of a square image as a sparse system matrix.

    Each ray is sampled every ``step`` pixels and the image is read with
    bilinear interpolation, so ``forward`` is linear and ``back`` is its exact
    transpose. Rows are ordered angle-major: row ``a * n_bins + b``.
    """

    def __init__(self, size: int, n_angles: int | None = None, n_bins: int | None = None, step: float = 0.5):
        self.size = int(size)
        self.n_angles = int(n_angles or size)
        self.n_bins = int(n_bins or math.ceil(math.sqrt(2.0) * size))
        if self.n_angles < 1:
            raise ValueError("need at least one projection angle")
        if self.n_bins < math.ceil(math.sqrt(2.0) * size) - 1e-9:
            raise ValueError("detector bins must cover the image diagonal")
        self.step = step
        self.angles = np.arange(self.n_angles) * np.pi / self.n_angles

    @property
    def sino_shape(self) -> tuple[int, int]:
        return (self.n_angles, self.n_bins)

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        n = self.size
        half = (n - 1) / 2.0
        bins = np.arange(self.n_bins) - (self.n_bins - 1) / 2.0
        radius = math.sqrt(2.0) * n / 2.0 + 1.0
        t = np.arange(-radius, radius + self.step / 2, self.step)
        blocks = []
        for theta in self.angles:
            c, s = math.cos(theta), math.sin(theta)
            # sample points (bins, t) in image-centred coordinates, y pointing up
            px = bins[:, None] * c - t[None, :] * s
            py = bins[:, None] * s + t[None, :] * c
            col = px + half
            row = half - py
            c0 = np.floor(col)
            r0 = np.floor(row)
            fc = col - c0
            fr = row - r0
            ray = np.broadcast_to(np.arange(self.n_bins)[:, None], px.shape)
            rows, cols, vals = [], [], []
            for dr, dc, w in ((0, 0, (1 - fr) * (1 - fc)), (0, 1, (1 - fr) * fc), (1, 0, fr * (1 - fc)), (1, 1, fr * fc)):
                rr = r0 + dr
                cc = c0 + dc
                ok = (rr >= 0) & (rr < n) & (cc >= 0) & (cc < n) & (w > 0)
                rows.append(ray[ok])
                cols.append((rr[ok] * n + cc[ok]).astype(np.int64))
                vals.append(w[ok] * self.step)
            block = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.n_bins, n * n),
            ).tocsr()
            block.sum_duplicates()
            blocks.append(block)
        return sp.vstack(blocks, format="csr")

    @cached_property
    def matrix_t(self) -> sp.csr_matrix:
        return self.matrix.T.tocsr()

    def forward(self, image) -> np.ndarray:
        image = np.asarray(image, dtype=float)
        if image.shape != (self.size, self.size):
            raise ValueError(f"expected a {self.size}x{self.size} image, got {image.shape}")
        return (self.matrix @ image.ravel()).reshape(self.sino_shape)

    def back(self, sinogram) -> np.ndarray:
        sinogram = np.asarray(sinogram, dtype=float).reshape(-1)
        return (self.matrix_t @ sinogram).reshape(self.size, self.size)

    def subset_rows(self, subsets: int) -> list[np.ndarray]:
        """Interleaved angle subsets (i, i+S, i+2S, ...) as row index arrays."""
        if subsets < 1 or subsets > self.n_angles:
            raise ValueError("subset count must be between 1 and the number of angles")
        out = []
        for i in range(subsets):
            angles = np.arange(i, self.n_angles, subsets)
            out.append((angles[:, None] * self.n_bins + np.arange(self.n_bins)[None, :]).ravel())
        return out


def forward_project(image, geometry: ParallelBeamProjector) -> np.ndarray:
    return geometry.forward(image)


def add_poisson(sinogram, noise_level: float = 0.2, seed=None, rng=None, base_counts: float = BASE_COUNTS) -> np.ndarray:
    """Poisson realization at a total count budget of ``base_counts / noise_level``.

    The sinogram is scaled to that budget, sampled, and scaled back, so the
    output keeps the input's units.
    """
    sinogram = np.asarray(sinogram, dtype=float)
    if np.any(sinogram < 0):
        raise ValueError("sinogram must be nonnegative")
    if noise_level <= 0:
        raise ValueError("noise level must be > 0")
    rng = rng if rng is not None else np.random.default_rng(seed)
    total = sinogram.sum()
    if total == 0:
        return np.zeros_like(sinogram)
    scale = base_counts / noise_level / total
    return rng.poisson(sinogram * scale) / scale


def poisson_loglik(sinogram, expected) -> float:
    """Poisson log-likelihood up to the data-only constant."""
    y = np.asarray(sinogram, dtype=float).ravel()
    ybar = np.asarray(expected, dtype=float).ravel()
    pos = ybar > 0
    return float(np.sum(y[pos] * np.log(ybar[pos]) - ybar[pos]) - (np.inf if np.any(y[~pos] > 0) else 0.0))


def osem_reconstruct(
    sinogram,
    geometry: ParallelBeamProjector,
    iterations: int = 6,
    subsets: int = 5,
    init=None,
    callback=None,
) -> np.ndarray:
    """Ordered-subsets EM with interleaved angle subsets.

    ``callback(iteration, subset, image)`` is invoked after every subset update.
    Pixels with zero subset sensitivity are held at zero; 0/0 ratios count as 0.
    """
    y = np.asarray(sinogram, dtype=float).reshape(-1)
    if np.any(y < 0):
        raise ValueError("sinogram must be nonnegative")
    n = geometry.size
    x = np.ones(n * n) if init is None else np.asarray(init, dtype=float).reshape(-1).copy()
    P = geometry.matrix
    groups = []
    for rows in geometry.subset_rows(subsets):
        Ps = P[rows]
        PsT = Ps.T.tocsr()
        sens = PsT @ np.ones(len(rows))
        groups.append((rows, Ps, PsT, sens))
    for it in range(iterations):
        for s, (rows, Ps, PsT, sens) in enumerate(groups):
            proj = Ps @ x
            ratio = np.divide(y[rows], proj, out=np.zeros_like(proj), where=proj > 0)
            update = PsT @ ratio
            x = np.where(sens > 0, x * np.divide(update, sens, out=np.zeros_like(update), where=sens > 0), 0.0)
            if callback is not None:
                callback(it, s, x.reshape(n, n))
    return x.reshape(n, n)
