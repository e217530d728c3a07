"""``petkin`` command line: simulate, fit, train, predict, evaluate.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime data error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .dataset import Dataset, DatasetError, build_dataset, resolve_threads
from .estimation import FitConfig, fit_image
from .graphical import FitError, FitWindow, graphical_from_frames
from .io import ArrayFormatError, read_array, read_csv, write_array, write_csv, write_json, write_pgm
from .kinetics import PARAM_NAMES, FengCoefficients, InputFunction, KineticsError
from .metrics import compare, line_profile, roi_bias_variance
from .training import ManifestError, TrainConfig, TrainingError, load_checkpoint, predict, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _read(path, what="input"):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{what} file {path} not found")
    return read_array(path)[0].astype(float)


def _load_input_function(path) -> InputFunction:
    """Sampled input from a CSV (``time``, ``cp`` and optional ``cb`` columns) or Feng JSON."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"input function file {path} not found")
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        return InputFunction(feng=FengCoefficients(**data))
    rows = read_csv(path)
    try:
        t = np.array([float(r["time"]) for r in rows])
        cp = np.array([float(r["cp"]) for r in rows])
        blood = None
        if rows and "cb" in rows[0]:
            blood = InputFunction.from_samples(t, np.array([float(r["cb"]) for r in rows]))
    except (KeyError, ValueError) as exc:
        raise DataError(f"input function CSV needs numeric 'time' and 'cp' columns: {exc}") from exc
    return InputFunction.from_samples(t, cp, whole_blood=blood)


def _config(args):
    cfg = load_config(args.config) if args.config else load_config("desk")
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _summary(obj):
    print(json.dumps(obj, sort_keys=True, default=str))


# -- commands -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = Path(args.out or cfg["out"])
    n = args.n_samples
    build_dataset(cfg, out, n_samples=n, threads=args.threads)
    ds = Dataset(out)
    _summary({"out": str(out), "samples": len(ds), "train": len(ds.train_indices), "test": len(ds.test_indices),
              "tracer": cfg.tracer.name, "size": cfg["phantom"]["size"], "seed": cfg.seed})
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _config(args)
    dyn = _read(args.input)
    if dyn.ndim == 1:
        dyn = dyn[:, None, None]
    if dyn.ndim != 3:
        raise DataError("dynamic image must be (frames, rows, cols)")
    schedule, tracer = cfg.schedule, cfg.tracer
    if dyn.shape[0] != schedule.n_frames:
        raise DataError(f"image has {dyn.shape[0]} frames, schedule has {schedule.n_frames}")
    cp = _load_input_function(args.input_function) if args.input_function else cfg.input_function
    mask = _read(args.mask, "mask") > 0 if args.mask else None
    out = Path(args.out or "fit_out")
    out.mkdir(parents=True, exist_ok=True)
    T, H, W = dyn.shape
    report = {"method": args.method, "tracer": tracer.name, "shape": [H, W], "frames": T}

    if args.method == "nlls":
        fc = FitConfig.from_means(cfg.roi_means, fit_vb=args.fit_vb)
        res = fit_image(np.moveaxis(dyn, 0, -1), cp, tracer, fc, mask=mask, schedule=schedule)
        names = PARAM_NAMES + (("vb",) if args.fit_vb else ())
        for name, img in zip(names, res.params):
            write_array(out / f"{name}.pkarr", img, {"name": name})
        write_array(out / "residual.pkarr", res.residual)
        write_array(out / "converged.pkarr", res.converged.astype(float))
        active = mask if mask is not None else np.ones((H, W), bool)
        report.update({"voxels": int(active.sum()), "converged": int(res.converged[active].sum()),
                       "bounds": {"lower": fc.lower.tolist(), "upper": fc.upper.tolist()}})
    else:
        if args.method == "logan" and not tracer.reversible:
            _warn(f"Logan analysis on data from irreversible tracer {tracer.name}; proceeding")
        window = FitWindow.last(args.window or cfg["fit_window"], schedule)
        flat = dyn.reshape(T, -1)
        active = np.ones(H * W, bool) if mask is None else mask.reshape(-1)
        slope = np.zeros(H * W)
        intercept = np.zeros(H * W)
        failed = np.zeros(H * W, bool)
        if active.any():
            s, b, ok = graphical_from_frames(flat[:, active], cp, schedule, args.method, window, tracer.decay_constant)
            slope[active], intercept[active], failed[active] = s, b, ~ok
        write_array(out / "slope.pkarr", slope.reshape(H, W), {"name": "slope", "method": args.method})
        write_array(out / "intercept.pkarr", intercept.reshape(H, W), {"name": "intercept", "method": args.method})
        write_array(out / "failed.pkarr", failed.reshape(H, W).astype(float))
        report.update({"voxels": int(active.sum()), "failed": int(failed[active].sum()),
                       "window_frames": list(window.indices)})
    write_json(out / "report.json", report)
    _summary(report)
    return EXIT_OK


def cmd_train(args) -> int:
    ds = Dataset(args.dataset)
    cfg = load_config(args.config) if args.config else ds.config
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["train"] = {"epochs": args.epochs}
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    tcfg = TrainConfig.from_config(cfg)
    out = Path(args.out or cfg["out"])

    def log(epoch, mean_total, vrep):
        extra = f" validation {vrep.total:.6g}" if vrep is not None else ""
        print(f"epoch {epoch} train {mean_total:.6g}{extra}", flush=True)

    summ = train(ds, cfg, out, tcfg, resume=args.resume, threads=resolve_threads(args.threads), log=log)
    _summary({"out": str(out), "steps": summ["steps"], "best_validation": summ["best_validation"]})
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _config(args)
    try:
        net, manifest, _ = load_checkpoint(args.checkpoint)
    except FileNotFoundError as exc:
        raise DataError(f"checkpoint incomplete: {exc}") from exc
    if manifest["input_frames"] != cfg["input_frames"]:
        raise ManifestError(f"checkpoint expects {manifest['input_frames']} input frames, config has {cfg['input_frames']}")
    frames = _read(args.input)
    if frames.ndim != 3:
        raise DataError("early frames must be (frames, rows, cols)")
    C = manifest["input_frames"]
    if frames.shape[0] < C:
        raise ManifestError(f"need {C} early frames, file has {frames.shape[0]}")
    cp = _load_input_function(args.input_function) if args.input_function else cfg.input_function
    params, dyn = predict(net, frames[:C], cp, cfg.tracer, cfg.schedule, manifest["param_scale"])
    out = Path(args.out or "predict_out")
    for name, img in zip(PARAM_NAMES, params):
        write_array(out / f"{name}.pkarr", img, {"name": name})
    write_array(out / "dynamic.pkarr", dyn, {"name": "dynamic", "layout": "frames, rows, cols"})
    _summary({"out": str(out), "frames": int(dyn.shape[0]), "shape": list(dyn.shape[1:])})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred = _read(args.pred, "prediction")
    target = _read(args.target, "target")
    if pred.shape != target.shape:
        raise DataError(f"shape mismatch: prediction {pred.shape} vs target {target.shape}")
    if pred.ndim == 2:
        pred, target = pred[None], target[None]
    if pred.ndim != 3:
        raise DataError("images must be (rows, cols) or (frames, rows, cols)")
    T = pred.shape[0]
    frames = list(range(T)) if args.frames is None else [int(f) for f in args.frames.split(",")]
    if any(not 0 <= f < T for f in frames):
        raise DataError(f"frame index out of range [0, {T})")
    out = Path(args.out or "eval_out")
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for k in frames:
        rep = compare(pred[k], target[k], args.peak)
        rows.append([k, rep.mse, rep.psnr, rep.ssim])
    agg = compare(pred[frames].reshape(-1, pred.shape[2]), target[frames].reshape(-1, pred.shape[2]), args.peak)
    result = {
        "frames": frames,
        "aggregate": agg.to_dict(),
        "per_frame": [{"frame": r[0], "mse": r[1], "psnr": r[2], "ssim": r[3]} for r in rows],
        "peak": args.peak if args.peak is not None else "max of target",
    }
    write_csv(out / "metrics.csv", ["frame", "mse", "psnr", "ssim"], [[r[0], r[1], _num(r[2]), r[3]] for r in rows])

    if args.mask:
        labels = np.rint(_read(args.mask, "mask")).astype(int)
        if labels.shape != pred.shape[1:]:
            raise DataError("mask must match the image size")
        rois = [int(v) for v in np.unique(labels) if v > 0]
        if not rois:
            _warn("mask is empty; ROI statistics omitted")
        roi_rows = []
        for roi in rois:
            for k in frames:
                try:
                    st = roi_bias_variance(target[k], pred[k], labels == roi)
                    alt = roi_bias_variance(target[k], pred[k], labels == roi, centered_on_prediction=True)
                except ValueError:
                    _warn(f"ROI {roi} frame {k} has no positive ground-truth voxels; skipped")
                    continue
                roi_rows.append([roi, k, st.bias, st.variance, alt.variance, st.n, st.excluded])
        if roi_rows:
            write_csv(out / "roi.csv", ["roi", "frame", "bias", "variance", "variance_centered_on_prediction",
                                        "n", "excluded"], roi_rows)
            result["roi"] = [dict(zip(["roi", "frame", "bias", "variance", "variance_centered_on_prediction", "n",
                                       "excluded"], r)) for r in roi_rows]

    if args.profile_row is not None:
        k = frames[-1]
        try:
            tp = line_profile(target[k], args.profile_row)
            pp = line_profile(pred[k], args.profile_row)
        except IndexError as exc:
            raise DataError(str(exc)) from exc
        write_csv(out / "profile.csv", ["col", "target", "prediction"], [[i, a, b] for i, (a, b) in enumerate(zip(tp, pp))])

    if not args.no_previews:
        for k in frames:
            hi = float(max(target[k].max(), pred[k].max()))
            write_pgm(out / f"target_{k:02d}.pgm", target[k], 0.0, hi)
            write_pgm(out / f"pred_{k:02d}.pgm", pred[k], 0.0, hi)
            write_pgm(out / f"error_{k:02d}.pgm", np.abs(pred[k] - target[k]))
    write_json(out / "metrics.json", result)
    _summary({"out": str(out), "psnr": _num(agg.psnr), "ssim": agg.ssim, "mse": agg.mse})
    return EXIT_OK


def _num(v):
    return "inf" if isinstance(v, float) and math.isinf(v) else v


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config JSON path or preset name (task1, task2, task3, desk)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="worker threads (default: PETKIN_THREADS or all cores)")
    common.add_argument("--out", help="output directory")

    p = _Parser(prog="petkin", description="Tracer-kinetics simulation, estimation and network training.")
    p.add_argument("--version", action="version", version=f"petkin {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="generate a simulated dataset")
    s.add_argument("--n-samples", type=int, help="number of samples (default: n_train + n_test)")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", parents=[common], help="voxelwise kinetic or graphical fit of a dynamic image")
    f.add_argument("input", help="dynamic image array file (frames, rows, cols)")
    f.add_argument("--method", choices=["nlls", "logan", "patlak"], default="nlls")
    f.add_argument("--input-function", help="CSV (time, cp[, cb]) or JSON Feng coefficients")
    f.add_argument("--mask", help="array file; voxels > 0 are fitted")
    f.add_argument("--window", type=int, help="number of trailing frames for graphical fits")
    f.add_argument("--fit-vb", action="store_true", help="fit the blood fraction too (nlls)")
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("train", parents=[common], help="train the network on a dataset")
    t.add_argument("dataset", help="dataset directory from 'simulate'")
    t.add_argument("--epochs", type=int)
    t.add_argument("--resume", help="checkpoint directory to continue from")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("predict", parents=[common], help="predict parameters and all frames from early frames")
    r.add_argument("checkpoint", help="checkpoint directory")
    r.add_argument("input", help="array file with the early frames (frames, rows, cols)")
    r.add_argument("--input-function", help="CSV (time, cp[, cb]) or JSON Feng coefficients")
    r.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", parents=[common], help="image metrics, ROI statistics, profiles and previews")
    e.add_argument("pred", help="predicted image array file")
    e.add_argument("target", help="target image array file")
    e.add_argument("--mask", help="ROI label array file (0 = background)")
    e.add_argument("--frames", help="comma-separated frame indices (default: all)")
    e.add_argument("--peak", type=float, help="PSNR/SSIM peak (default: max of target)")
    e.add_argument("--profile-row", type=int, help="write a line profile of this row")
    e.add_argument("--no-previews", action="store_true", help="skip PGM previews")
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"petkin: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingError as exc:
        where = f" (sample {exc.sample_index})" if exc.sample_index is not None else ""
        print(f"petkin: training aborted{where}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, DatasetError, ManifestError, ArrayFormatError, FitError, KineticsError) as exc:
        print(f"petkin: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        if "PETKIN_THREADS" in str(exc):
            print(f"petkin: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"petkin: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
