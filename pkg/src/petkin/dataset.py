"""Simulated training pairs: phantom -> kinetics -> projection -> noise -> OSEM.

On disk a dataset is a directory with a root ``meta.json`` and one
``sample_%04d/`` folder per sample. Dynamic images are stored frames-first,
``(T, H, W)``; parameter and parametric images are ``(H, W)``.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .graphical import FitWindow, parametric_images
from .io import read_array, write_array, write_json
from .kinetics import PARAM_NAMES, FrameModel
from .phantom import LabelMap, make_phantom, param_images, randomize_params, roi_table, synthesize_dynamic
from .projector import ParallelBeamProjector, add_poisson, osem_reconstruct

ARRAY_FILES = ("noisy", "clean") + PARAM_NAMES + ("slope", "intercept")
FORMAT_VERSION = 1


class DatasetError(RuntimeError):
    pass


@dataclass
class Sample:
    noisy: np.ndarray  # (T, H, W) OSEM reconstructions
    clean: np.ndarray  # (T, H, W) noise-free frames
    params: np.ndarray  # (4, H, W) K1, k2, k3, k4
    slope: np.ndarray
    intercept: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def index(self) -> int:
        return int(self.meta.get("index", -1))


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``PETKIN_THREADS``, else the available cores."""
    if threads is None:
        env = os.environ.get("PETKIN_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ValueError(f"PETKIN_THREADS must be an integer, got {env!r}") from exc
    if threads is None:
        threads = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return int(threads)


def sample_seeds(master_seed: int, index: int) -> dict[str, int]:
    """Independent per-sample seeds derived from (master seed, index)."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    phantom, params, noise = (int(c.generate_state(1)[0]) for c in ss.spawn(3))
    return {"phantom": phantom, "params": params, "noise": noise}


@lru_cache(maxsize=4)
def _projector(size: int) -> ParallelBeamProjector:
    return ParallelBeamProjector(size)


def _model(cfg: ExperimentConfig) -> FrameModel:
    return FrameModel(cfg.input_function, cfg.tracer, cfg.schedule)


def simulate_sample(cfg: ExperimentConfig, index: int, seed: int | None = None, label_map: LabelMap | None = None,
                    model: FrameModel | None = None) -> Sample:
    """Build one paired sample; deterministic in (config, seed, index)."""
    seed = cfg.seed if seed is None else seed
    seeds = sample_seeds(seed, index)
    ph = cfg["phantom"]
    if label_map is None:
        label_map = make_phantom(ph["kind"], ph["size"], ph["n_rois"], seed=seeds["phantom"], warp=ph["warp"])
    model = model or _model(cfg)
    table = randomize_params(roi_table(cfg.roi_means, label_map.n_rois), cfg["param_cv"], seed=seeds["params"])
    clean = synthesize_dynamic(label_map, table, cfg.input_function, cfg.tracer, cfg.schedule, model=model).values

    geom = _projector(label_map.height) if label_map.height == label_map.width else None
    if geom is None:
        raise DatasetError("projection needs a square phantom")
    rng = np.random.default_rng(seeds["noise"])
    noisy = np.empty((clean.shape[2],) + clean.shape[:2])
    for k in range(clean.shape[2]):
        sino = add_poisson(geom.forward(clean[:, :, k]), cfg["noise"]["level"], rng=rng,
                           base_counts=cfg["noise"]["base_counts"])
        noisy[k] = osem_reconstruct(sino, geom, cfg["osem"]["iterations"], cfg["osem"]["subsets"])

    pimg = param_images(label_map, table)
    window = FitWindow.last(cfg["fit_window"], cfg.schedule)
    slope, intercept, failed = parametric_images(
        pimg, cfg.input_function, cfg.tracer, cfg.schedule, cfg.graphical_mode, window, mask=label_map.body, model=model
    )
    meta = {
        "index": index,
        "seeds": seeds,
        "roi_params": {str(r): list(p.as_array()) for r, p in table.items()},
        "graphical_mode": cfg.graphical_mode,
        "graphical_failures": int(failed.sum()),
    }
    return Sample(
        noisy=noisy,
        clean=np.moveaxis(clean, 2, 0),
        params=np.moveaxis(pimg[:, :, :4], 2, 0),
        slope=slope,
        intercept=intercept,
        meta=meta,
    )


def dataset_meta(cfg: ExperimentConfig, n_samples: int, seed: int) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "seed": seed,
        "n_samples": n_samples,
        "n_train": min(cfg["dataset"]["n_train"], n_samples),
        "tracer": {"name": cfg.tracer.name, "decay_constant": cfg.tracer.decay_constant,
                   "reversible": cfg.tracer.reversible},
        "schedule": cfg.schedule.to_list(),
        "noise": {"level": cfg["noise"]["level"], "base_counts": cfg["noise"]["base_counts"],
                  "semantics": "total counts per frame = base_counts / level"},
        "array_layout": {"dynamic": "frames, rows, cols", "parameter": "rows, cols"},
        "files": list(ARRAY_FILES),
    }


def save_sample(sample: Sample, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays = {"noisy": sample.noisy, "clean": sample.clean, "slope": sample.slope, "intercept": sample.intercept}
    for i, name in enumerate(PARAM_NAMES):
        arrays[name] = sample.params[i]
    for name in ARRAY_FILES:
        write_array(directory / f"{name}.pkarr", arrays[name], {"name": name, "index": sample.index})
    write_json(directory / "meta.json", sample.meta)
    return directory


def load_sample(directory) -> Sample:
    directory = Path(directory)
    try:
        arrays = {name: read_array(directory / f"{name}.pkarr")[0].astype(float) for name in ARRAY_FILES}
        meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DatasetError(f"incomplete sample directory {directory}: {exc.filename}") from exc
    return Sample(
        noisy=arrays["noisy"],
        clean=arrays["clean"],
        params=np.stack([arrays[n] for n in PARAM_NAMES]),
        slope=arrays["slope"],
        intercept=arrays["intercept"],
        meta=meta,
    )


def build_dataset(config, out, n_samples: int | None = None, seed: int | None = None,
                  threads: int | None = None, label_map: LabelMap | None = None) -> Path:
    """Simulate and write a dataset directory.

    ``n_samples`` defaults to ``n_train + n_test`` from the config; the first
    ``n_train`` samples form the training split. Output bytes depend only on
    (config, seed), never on the thread count.
    """
    cfg = load_config(config)
    seed = cfg.seed if seed is None else int(seed)
    if n_samples is None:
        n_samples = cfg["dataset"]["n_train"] + cfg["dataset"]["n_test"]
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "meta.json", dataset_meta(cfg, n_samples, seed))
    model = _model(cfg)

    def job(i):
        save_sample(simulate_sample(cfg, i, seed, label_map, model), out / f"sample_{i:04d}")

    workers = min(resolve_threads(threads), max(n_samples, 1))
    if workers == 1:
        for i in range(n_samples):
            job(i)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(job, range(n_samples)))
    return out


class Dataset:
    """Lazy view of a dataset directory."""

    def __init__(self, root):
        self.root = Path(root)
        meta_path = self.root / "meta.json"
        if not meta_path.exists():
            raise DatasetError(f"{self.root} is not a dataset (no meta.json)")
        self.meta = json.loads(meta_path.read_text(encoding="utf-8"))
        self.dirs = sorted(p for p in self.root.glob("sample_*") if p.is_dir())
        if len(self.dirs) != self.meta["n_samples"]:
            raise DatasetError(f"meta.json lists {self.meta['n_samples']} samples, found {len(self.dirs)}")
        self._cache: dict[int, Sample] = {}

    def __len__(self):
        return len(self.dirs)

    def __getitem__(self, i) -> Sample:
        if i not in self._cache:
            self._cache[i] = load_sample(self.dirs[i])
        return self._cache[i]

    @property
    def config(self) -> ExperimentConfig:
        return ExperimentConfig(self.meta["config"])

    @property
    def train_indices(self) -> list[int]:
        return list(range(self.meta["n_train"]))

    @property
    def test_indices(self) -> list[int]:
        return list(range(self.meta["n_train"], len(self)))
