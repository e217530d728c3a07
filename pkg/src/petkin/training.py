"""Multi-term training of the invertible network and the prediction path.

The network maps the normalized early frames (``C`` channels) to ``C``
output channels: the first four are the kinetic rate constants divided by a
fixed per-parameter scale, the rest are auxiliary latents pushed toward zero.
The four loss terms are

* L1, forward: output channels vs. scaled target parameters (+ auxiliaries vs. 0);
* L2, backward: inverse of (targets, zero auxiliaries) vs. the input frames;
* L3, dynamic: all frames rebuilt from the predicted parameters vs. the clean frames;
* L4, parametric: Patlak/Logan slope and intercept of the prediction vs. targets.

L3 and L4 pass through the non-learnable kinetic model; their gradients reach
the network through per-voxel finite-difference sensitivities of that model.
"""

from __future__ import annotations

import json
import math
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .graphical import FitWindow, graphical_from_curves
from .inn import InnNetwork, NetworkSpec
from .io import append_csv, read_array, read_csv, write_array, write_csv, write_json
from .kinetics import FrameModel, FrameSchedule, InputFunction, Tracer

LOSS_COLUMNS = ["epoch", "step", "L1", "L2", "L3", "L4", "total", "step_size"]
VALID_COLUMNS = ["epoch", "L1", "L2", "L3", "L4", "total"]
CHECKPOINT_FORMAT = 1


class TrainingError(RuntimeError):
    def __init__(self, message, sample_index=None):
        super().__init__(message)
        self.sample_index = sample_index


class ManifestError(ValueError):
    pass


@dataclass
class LossWeights:
    """Weights of the backward, dynamic and parametric terms (L1 has weight 1)."""

    l1: float = 1.2
    l2: float = 1.0
    l3: float = 1.0

    def __post_init__(self):
        if min(self.l1, self.l2, self.l3) < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass
class LossReport:
    L1: float
    L2: float
    L3: float
    L4: float
    total: float

    def as_list(self):
        return [self.L1, self.L2, self.L3, self.L4, self.total]


def combine(L1, L2, L3, L4, weights: LossWeights, toggles: dict | None = None) -> float:
    """Weighted total; disabled terms are dropped without renormalizing the rest."""
    toggles = toggles or {}
    total = L1
    if toggles.get("L2", True):
        total += weights.l1 * L2
    if toggles.get("L3", True):
        total += weights.l2 * L3
    if toggles.get("L4", True):
        total += weights.l3 * L4
    return total


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 1
    lr: float = 1e-4
    halve_every: int = 50
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weights: LossWeights = field(default_factory=LossWeights)
    toggles: dict = field(default_factory=lambda: {"L2": True, "L3": True, "L4": True})
    aux_weight: float = 1.0
    fd_step: float = 1e-4
    swap_l1_l2: bool = False
    seed: int = 0
    input_frames: int = 12
    fit_window: int = 10
    param_scale: tuple = (0.1, 0.1, 0.1, 0.1)
    mode: str = "patlak"
    network: NetworkSpec | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be >= 1")
        if self.lr <= 0:
            raise ValueError("step size must be > 0")
        if self.mode not in ("patlak", "logan"):
            raise ValueError("mode must be 'patlak' or 'logan'")
        self.param_scale = tuple(float(s) for s in self.param_scale)
        if self.network is None:
            self.network = NetworkSpec(channels=self.input_frames)
        if self.network.channels != self.input_frames:
            raise ValueError("network channels must equal the number of input frames")

    def step_size(self, epoch: int) -> float:
        """Step size for a 1-based epoch: halved after every ``halve_every`` epochs."""
        return self.lr * 0.5 ** ((epoch - 1) // self.halve_every)

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> TrainConfig:
        t = cfg["train"]
        n = cfg["network"]
        spec = NetworkSpec(
            channels=cfg["input_frames"], blocks=n["blocks"], hidden=n["hidden"],
            layers=n["layers"], slope=n["slope"], sigma=n["sigma"],
        )
        return cls(
            epochs=t["epochs"], batch_size=t["batch_size"], lr=t["lr"], halve_every=t["halve_every"],
            betas=tuple(t["betas"]), eps=t["eps"], weights=LossWeights(*t["weights"]),
            toggles=dict(t["losses"]), aux_weight=t["aux_weight"], fd_step=t["fd_step"],
            swap_l1_l2=t["swap_l1_l2"], seed=cfg.seed, input_frames=cfg["input_frames"],
            fit_window=cfg["fit_window"], param_scale=tuple(n["param_scale"]),
            mode=cfg.graphical_mode, network=spec,
        )


# -- irreversible modules: kinetic model and graphical fit -------------------


class PhysicsMaps:
    """Per-voxel maps from (K1, k2, k3, k4) to frames and slope/intercept.

    Evaluation is chunked over voxels; chunks are independent and reassembled
    in order, so the thread count does not affect results.
    """

    def __init__(self, model: FrameModel, mode: str, window: FitWindow, threads: int = 1, chunk_rows: int = 2304):
        self.model = model
        self.mode = mode
        self.window = window
        self.threads = max(1, int(threads))
        self.chunk_rows = chunk_rows

    @property
    def n_frames(self) -> int:
        return self.model.schedule.n_frames

    def _eval_rows(self, rows):
        curves = self.model.curves(rows)
        frames = self.model.frames_from_curves(curves, rows)
        s, b, ok = graphical_from_curves(self.model, curves, rows, self.mode, self.window, frames=frames)
        return frames, np.where(ok, s, 0.0), np.where(ok, b, 0.0), ok

    def _map(self, fn, blocks):
        if self.threads == 1 or len(blocks) == 1:
            return [fn(b) for b in blocks]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, blocks))

    def evaluate(self, params):
        """Frames ``(T, N)``, slope ``(N,)``, intercept ``(N,)``, ok ``(N,)``."""
        params = np.atleast_2d(np.asarray(params, dtype=float))
        blocks = [params[i : i + self.chunk_rows] for i in range(0, len(params), self.chunk_rows)] or [params]
        parts = self._map(self._eval_rows, blocks)
        return (np.concatenate([p[0] for p in parts], axis=1), *(np.concatenate([p[i] for p in parts]) for i in (1, 2, 3)))

    def sensitivities(self, params, steps):
        """Values plus finite-difference Jacobians at parameter rows ``(N, 4)``.

        ``steps`` holds the absolute step per parameter. Where ``p_j >= h_j``
        the difference is central; closer to 0 it is one-sided forward.

        Returns:
            ``(frames (T, N), slope, intercept, dF (N, T, 4), dS (N, 4), dB (N, 4), ok)``
        """
        params = np.atleast_2d(np.asarray(params, dtype=float))
        N = len(params)
        steps = np.asarray(steps, dtype=float)
        per = max(1, self.chunk_rows // 9)

        def job(lo):
            p = params[lo : lo + per]
            n = len(p)
            rows = [p]
            widths = []
            for j in range(4):
                up = p.copy()
                up[:, j] += steps[j]
                dn = p.copy()
                central = p[:, j] >= steps[j]
                dn[:, j] = np.where(central, p[:, j] - steps[j], p[:, j])
                rows += [up, dn]
                widths.append(np.where(central, 2 * steps[j], steps[j]))
            frames, s, b, ok = self._eval_rows(np.concatenate(rows))
            F0, s0, b0 = frames[:, :n], s[:n], b[:n]
            dF = np.empty((n, frames.shape[0], 4))
            dS = np.empty((n, 4))
            dB = np.empty((n, 4))
            good = ok[:n].copy()
            for j in range(4):
                a, c = slice((1 + 2 * j) * n, (2 + 2 * j) * n), slice((2 + 2 * j) * n, (3 + 2 * j) * n)
                dF[:, :, j] = ((frames[:, a] - frames[:, c]) / widths[j]).T
                dS[:, j] = (s[a] - s[c]) / widths[j]
                dB[:, j] = (b[a] - b[c]) / widths[j]
                good &= ok[a] & ok[c]
            # a failed graphical fit anywhere in the stencil gives no usable slope/intercept sensitivity
            dS[~good] = 0.0
            dB[~good] = 0.0
            return F0, s0, b0, dF, dS, dB, ok[:n]

        parts = self._map(job, list(range(0, N, per)) or [0])
        return (
            np.concatenate([p[0] for p in parts], axis=1),
            *(np.concatenate([p[i] for p in parts]) for i in range(1, 7)),
        )


# -- samples -----------------------------------------------------------------


@dataclass
class Prepared:
    """A sample in network units."""

    x: np.ndarray  # (C, H, W) normalized early frames
    target_params: np.ndarray  # (4, H, W) physical
    target_scaled: np.ndarray  # (4, H, W)
    clean: np.ndarray  # (T, H, W) normalized
    slope: np.ndarray
    intercept: np.ndarray
    norm: float
    slope_norm: float
    intercept_norm: float
    index: int = -1


def _safe_max(a):
    m = float(np.max(np.abs(a))) if np.size(a) else 0.0
    return m if m > 0 else 1.0


def prepare(sample, tcfg: TrainConfig) -> Prepared:
    """Normalize a sample by the global maximum of its early frames."""
    early = np.asarray(sample.noisy[: tcfg.input_frames], dtype=float)
    if early.shape[0] != tcfg.input_frames:
        raise ValueError(f"need {tcfg.input_frames} early frames, got {early.shape[0]}")
    norm = _safe_max(early)
    scale = np.asarray(tcfg.param_scale)[:, None, None]
    params = np.asarray(sample.params, dtype=float)
    return Prepared(
        x=early / norm,
        target_params=params,
        target_scaled=params / scale,
        clean=np.asarray(sample.clean, dtype=float) / norm,
        slope=np.asarray(sample.slope, dtype=float),
        intercept=np.asarray(sample.intercept, dtype=float),
        norm=norm,
        slope_norm=_safe_max(sample.slope),
        intercept_norm=_safe_max(sample.intercept),
        index=getattr(sample, "index", -1),
    )


# -- losses ------------------------------------------------------------------


def compute_losses(net: InnNetwork, prep: Prepared, physics: PhysicsMaps, tcfg: TrainConfig,
                   want_grads: bool = True, diagnostics: dict | None = None):
    """Loss report and (optionally) parameter gradients of the weighted total.

    Returns:
        ``(LossReport, grads)``; ``grads`` is ``None`` when ``want_grads`` is false.
    """
    w, tg = tcfg.weights, tcfg.toggles
    C, H, W = prep.x.shape
    P = len(tcfg.param_scale)
    scale = np.asarray(tcfg.param_scale)
    grads = net.zero_grads() if want_grads else None

    # forward pass: parameters and auxiliary latents
    y, ftape = net.forward(prep.x)
    d_out = y[:P] - prep.target_scaled
    aux = y[P:]
    fwd = float(np.mean(d_out**2))
    if aux.size:
        fwd += tcfg.aux_weight * float(np.mean(aux**2))

    # backward pass from the targets with zero auxiliaries
    z = np.zeros_like(prep.x)
    z[:P] = prep.target_scaled
    xr, itape = net.inverse(z)
    d_in = xr - prep.x
    bwd = float(np.mean(d_in**2))

    c_fwd, c_bwd = (w.l1, 1.0) if tcfg.swap_l1_l2 else (1.0, w.l1)
    use_bwd_term = tg.get("L2", True) if not tcfg.swap_l1_l2 else True
    use_fwd_term = True if not tcfg.swap_l1_l2 else tg.get("L2", True)
    L1, L2 = (bwd, fwd) if tcfg.swap_l1_l2 else (fwd, bwd)

    # irreversible modules on clamped physical parameters
    raw = np.moveaxis(y[:P], 0, -1).reshape(-1, P) * scale
    positive = raw > 0
    phys = np.where(positive, raw, 0.0)
    if diagnostics is not None:
        diagnostics["clamped"] = diagnostics.get("clamped", 0) + int(np.count_nonzero(~positive))
    need_phys = tg.get("L3", True) or tg.get("L4", True)
    if want_grads and need_phys:
        F, s, b, dF, dS, dB, _ = physics.sensitivities(phys, tcfg.fd_step * scale)
    else:
        F, s, b, _ = physics.evaluate(phys)
    T = F.shape[0]
    F_img = F.T.reshape(H, W, T)
    res3 = np.moveaxis(F_img, 2, 0) / prep.norm - prep.clean
    L3 = float(np.mean(res3**2))
    rs = (s.reshape(H, W) - prep.slope) / prep.slope_norm
    rb = (b.reshape(H, W) - prep.intercept) / prep.intercept_norm
    L4 = 0.5 * (float(np.mean(rs**2)) + float(np.mean(rb**2)))

    total = combine(L1, L2, L3, L4, w, tg)
    report = LossReport(L1, L2, L3, L4, total)
    if not want_grads:
        return report, None

    dy = np.zeros_like(y)
    if use_fwd_term:
        dy[:P] += c_fwd * 2.0 * d_out / d_out.size
        if aux.size:
            dy[P:] += c_fwd * tcfg.aux_weight * 2.0 * aux / aux.size
    if need_phys:
        dphys = np.zeros((H * W, P))
        if tg.get("L3", True):
            g3 = (2.0 / res3.size / prep.norm) * np.moveaxis(res3, 0, -1).reshape(-1, T)
            dphys += w.l2 * np.einsum("nt,ntj->nj", g3, dF)
        if tg.get("L4", True):
            gs = (0.5 * 2.0 / rs.size / prep.slope_norm) * rs.reshape(-1)
            gb = (0.5 * 2.0 / rb.size / prep.intercept_norm) * rb.reshape(-1)
            dphys += w.l3 * (gs[:, None] * dS + gb[:, None] * dB)
        draw = np.where(positive, dphys, 0.0) * scale
        dy[:P] += np.moveaxis(draw.reshape(H, W, P), 2, 0)
    net.backward(ftape, dy, grads)
    if use_bwd_term:
        net.inverse_backward(itape, c_bwd * 2.0 * d_in / d_in.size, grads)
    return report, grads


# -- optimizer ---------------------------------------------------------------


class Adam:
    def __init__(self, params: dict, betas=(0.9, 0.999), eps=1e-8):
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict, lr: float):
        """In-place update; returns the applied increments."""
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        deltas = {}
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            d = -lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            p += d
            deltas[k] = d
        return deltas


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(path, net: InnNetwork, tcfg: TrainConfig, epoch: int, step: int,
                    opt: Adam | None = None, extra: dict | None = None) -> Path:
    """Write a checkpoint directory; the previous one is replaced only once the new one is complete."""
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    (tmp / "params").mkdir(parents=True)
    names = list(net.named_params())
    for k, v in net.named_params().items():
        write_array(tmp / "params" / f"{k}.pkarr", v, {"name": k})
    if opt is not None:
        (tmp / "adam").mkdir()
        for k in names:
            write_array(tmp / "adam" / f"m.{k}.pkarr", opt.m[k])
            write_array(tmp / "adam" / f"v.{k}.pkarr", opt.v[k])
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "network": net.spec.to_dict(),
        "param_names": names,
        "param_scale": list(tcfg.param_scale),
        "input_frames": tcfg.input_frames,
        "mode": tcfg.mode,
        "normalization": "global max of the early frames",
        "scale_clamp": f"sigma*tanh(z/sigma), sigma={net.spec.sigma}",
        "epoch": epoch,
        "step": step,
        "adam_t": opt.t if opt is not None else 0,
        "train_config": _tcfg_dict(tcfg),
    }
    manifest.update(extra or {})
    write_json(tmp / "manifest.json", manifest)
    if path.exists():
        shutil.rmtree(path)
    tmp.rename(path)
    return path


def _tcfg_dict(tcfg: TrainConfig) -> dict:
    d = asdict(tcfg)
    d["network"] = tcfg.network.to_dict()
    return d


def load_checkpoint(path):
    """Returns ``(net, manifest, adam_or_None)``."""
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.exists():
        raise ManifestError(f"{path} has no manifest.json")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ManifestError(f"unsupported checkpoint format {manifest.get('format')}")
    nd = manifest["network"]
    spec = NetworkSpec(**{**nd, "param_channels": tuple(nd["param_channels"])})
    net = InnNetwork.build(spec, seed=0)
    params = net.named_params()
    if sorted(params) != sorted(manifest["param_names"]):
        raise ManifestError("checkpoint parameters do not match the network layout")
    for k, v in params.items():
        arr, _ = read_array(path / "params" / f"{k}.pkarr")
        if arr.shape != v.shape:
            raise ManifestError(f"shape mismatch for {k}: {arr.shape} vs {v.shape}")
        v[...] = arr
    net.sync()
    opt = None
    if (path / "adam").is_dir():
        opt = Adam(params)
        opt.t = int(manifest.get("adam_t", 0))
        for k in params:
            opt.m[k] = read_array(path / "adam" / f"m.{k}.pkarr")[0].astype(float)
            opt.v[k] = read_array(path / "adam" / f"v.{k}.pkarr")[0].astype(float)
    return net, manifest, opt


# -- training loop -------------------------------------------------------------


def make_physics(cfg: ExperimentConfig, threads: int = 1) -> PhysicsMaps:
    model = FrameModel(cfg.input_function, cfg.tracer, cfg.schedule)
    return PhysicsMaps(model, cfg.graphical_mode, FitWindow.last(cfg["fit_window"], cfg.schedule), threads)


def _check_finite(report: LossReport, index: int):
    if not all(math.isfinite(v) for v in report.as_list()):
        raise TrainingError(f"non-finite loss on sample {index}: {report}", sample_index=index)


def evaluate_losses(net, prepared: list[Prepared], physics, tcfg) -> LossReport:
    reps = [compute_losses(net, p, physics, tcfg, want_grads=False)[0] for p in prepared]
    for p, r in zip(prepared, reps):
        _check_finite(r, p.index)
    return LossReport(*np.mean([r.as_list() for r in reps], axis=0).tolist())


def train(dataset, cfg: ExperimentConfig, out, tcfg: TrainConfig | None = None, resume=None,
          threads: int = 1, log=None) -> dict:
    """Train on ``dataset.train_indices`` and validate on ``dataset.test_indices``.

    Writes ``loss.csv`` (one row per optimizer step), ``validation.csv`` (one
    row per epoch) and the ``checkpoint_final`` / ``checkpoint_best``
    directories into ``out``.

    Returns:
        Summary dict with the initial and final epoch-mean training totals.
    """
    tcfg = tcfg or TrainConfig.from_config(cfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    physics = make_physics(cfg, threads)
    train_idx = list(dataset.train_indices)
    if not train_idx:
        raise TrainingError("the training split is empty")
    train_set = [prepare(dataset[i], tcfg) for i in train_idx]
    valid_set = [prepare(dataset[i], tcfg) for i in dataset.test_indices]
    for i, p in zip(train_idx, train_set):
        p.index = i

    loss_csv = out / "loss.csv"
    valid_csv = out / "validation.csv"
    if resume is not None:
        net, manifest, opt = load_checkpoint(resume)
        if manifest["network"] != tcfg.network.to_dict():
            raise ManifestError("checkpoint network does not match the configuration")
        start = int(manifest["epoch"]) + 1
        step = int(manifest["step"])
        best = float(manifest.get("best_validation", math.inf))
        if opt is None:
            opt = Adam(net.named_params(), tcfg.betas, tcfg.eps)
        for path, cols in ((loss_csv, LOSS_COLUMNS), (valid_csv, VALID_COLUMNS)):
            rows = [r for r in read_csv(path) if int(r["epoch"]) < start] if path.exists() else []
            write_csv(path, cols, [[r[c] for c in cols] for r in rows])
    else:
        net = InnNetwork.build(tcfg.network, seed=tcfg.seed)
        opt = Adam(net.named_params(), tcfg.betas, tcfg.eps)
        start, step, best = 1, 0, math.inf
        write_csv(loss_csv, LOSS_COLUMNS, [])
        write_csv(valid_csv, VALID_COLUMNS, [])
    write_json(out / "train_config.json", {"experiment": cfg.to_dict(), "train": _tcfg_dict(tcfg)})

    params = net.named_params()
    epoch_means = {}
    for epoch in range(start, tcfg.epochs + 1):
        lr = tcfg.step_size(epoch)
        order = np.random.default_rng([tcfg.seed, epoch]).permutation(len(train_set))
        rows = []
        for lo in range(0, len(order), tcfg.batch_size):
            batch = [train_set[i] for i in order[lo : lo + tcfg.batch_size]]
            acc = None
            reps = []
            for prep in batch:
                rep, g = compute_losses(net, prep, physics, tcfg)
                _check_finite(rep, prep.index)
                reps.append(rep.as_list())
                acc = g if acc is None else {k: acc[k] + g[k] for k in acc}
            if len(batch) > 1:
                acc = {k: v / len(batch) for k, v in acc.items()}
            opt.step(params, acc, lr)
            net.sync()
            step += 1
            mean = np.mean(reps, axis=0).tolist()
            rows.append([epoch, step, *mean, lr])
        append_csv(loss_csv, rows)
        epoch_means[epoch] = float(np.mean([r[6] for r in rows]))

        vrep = evaluate_losses(net, valid_set, physics, tcfg) if valid_set else None
        if vrep is not None:
            append_csv(valid_csv, [[epoch, *vrep.as_list()]])
            if vrep.total < best:
                best = vrep.total
                save_checkpoint(out / "checkpoint_best", net, tcfg, epoch, step, None, {"best_validation": best})
        if log is not None:
            log(epoch, epoch_means[epoch], vrep)
        save_checkpoint(out / "checkpoint_final", net, tcfg, epoch, step, opt, {"best_validation": best})
    return {"epochs": tcfg.epochs, "steps": step, "epoch_mean_total": epoch_means, "best_validation": best}


# -- prediction ----------------------------------------------------------------


def predict(net, early_frames, cp: InputFunction, tracer: Tracer, schedule: FrameSchedule,
            param_scale=None, model: FrameModel | None = None):
    """Early frames ``(C, H, W)`` -> parameter images ``(4, H, W)`` and all frames ``(T, H, W)``.

    ``net`` is an :class:`InnNetwork` (then ``param_scale`` is required) or a
    checkpoint directory.
    """
    if not isinstance(net, InnNetwork):
        net, manifest, _ = load_checkpoint(net)
        param_scale = manifest["param_scale"] if param_scale is None else param_scale
    if param_scale is None:
        raise ValueError("param_scale is required with an in-memory network")
    early = np.asarray(early_frames, dtype=float)
    if early.ndim != 3 or early.shape[0] != net.spec.channels:
        raise ManifestError(f"network expects {net.spec.channels} input frames, got shape {early.shape}")
    scale = np.asarray(param_scale, dtype=float)
    P = len(scale)
    _, H, W = early.shape
    norm = float(np.max(np.abs(early)))
    if norm > 0:
        y, _ = net.forward(early / norm)
        params = np.maximum(y[:P] * scale[:, None, None], 0.0)
    else:
        # no recorded activity: the normalization is undefined and nothing can be inferred
        params = np.zeros((P, H, W))
    model = model or FrameModel(cp, tracer, schedule)
    frames = model.frames(np.moveaxis(params, 0, -1).reshape(-1, P))
    return params, np.moveaxis(frames.T.reshape(H, W, -1), 2, 0)
