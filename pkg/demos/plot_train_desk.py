"""
Training the invertible predictor at desk scale
===============================================

Simulate a small paired dataset, train the invertible network that maps
early frames to kinetic parameters, and predict the late frames of the
held-out samples. Pass an epoch count on the command line for a longer run.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from petkin.config import load_config
from petkin.dataset import Dataset, build_dataset
from petkin.inn import InnNetwork
from petkin.metrics import psnr
from petkin.training import TrainConfig, predict, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 5
cfg = load_config("desk").with_overrides(train={"epochs": epochs})
work = Path(tempfile.mkdtemp(prefix="petkin_demo_"))

###############################################################################
# Dataset
# -------
# Samples are written as one directory each; the first ``n_train`` form the
# training split.

ds = Dataset(build_dataset(cfg, work / "data"))
print(f"{len(ds.train_indices)} training and {len(ds.test_indices)} test samples in {work}")

###############################################################################
# Training
# --------
# Every step is logged to ``loss.csv`` together with its four loss terms.

tcfg = TrainConfig.from_config(cfg)
summary = train(ds, cfg, work / "run", tcfg)
means = summary["epoch_mean_total"]
print(f"epoch-mean loss {means[1]:.4f} -> {means[epochs]:.4f}")

###############################################################################
# Held-out prediction
# -------------------
# The untrained network starts as a pure channel mixing, which gives a
# baseline for the late frames.

def late_psnr(net):
    scores = []
    for i in ds.test_indices:
        s = ds[i]
        _, frames = predict(net, s.noisy[: tcfg.input_frames], cfg.input_function, cfg.tracer, cfg.schedule,
                            tcfg.param_scale)
        scores.append(psnr(frames[-6:], s.clean[-6:]))
    return float(np.mean(scores))


print(f"late-frame PSNR untrained {late_psnr(InnNetwork.build(tcfg.network, seed=tcfg.seed)):.2f} dB")
print(f"late-frame PSNR trained   {late_psnr(work / 'run' / 'checkpoint_final'):.2f} dB")
