#!/usr/bin/env python3
"""Run the finite-difference gradient audit over every op and the full
micro-schedule network; prints the worst relative error per check.

Usage:
    python3 scripts/check_gradients.py [--max-coords 40]
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from dcganet import functional as F
from dcganet.autograd import Variable, grad_check
from dcganet.blocks import MICRO_SCHEDULE, DcgaNet, NetConfig
from dcganet.kernels import ConvSpec
from dcganet.training import TrainConfig, total_loss


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-coords", type=int, default=40)
    ap.add_argument("--tol", type=float, default=1e-3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    def leaf(shape, name):
        return Variable(rng.normal(size=shape), requires_grad=True, name=name)

    checks = []
    x = leaf((1, 2, 6, 6), "x")
    w = leaf((3, 2, 3, 3), "w")
    b = leaf(3, "b")
    spec = ConvSpec((3, 3), 1, 1, 1, 1)
    checks.append(grad_check(lambda: F.sum_all(F.conv2d(x, w, b, spec)),
                             [x, w, b], op_name="conv2d"))
    off = Variable(rng.uniform(0.2, 0.45, (1, 18, 6, 6)), requires_grad=True,
                   name="off")
    checks.append(grad_check(lambda: F.sum_all(F.deform_conv2d(x, off, w, b, spec)),
                             [x, off, w, b], op_name="deform_conv2d"))

    net = DcgaNet(NetConfig(schedule=MICRO_SCHEDULE, seed=0), dtype=np.float64)
    for name, v in net.store.items():
        if name.endswith("offsets.b"):
            v.data[:] = 0.3  # keep taps off the bilinear integer lines
    rng_net = np.random.default_rng(0)
    imgs = rng_net.normal(size=(1, 1, 16, 16))
    masks = (rng_net.uniform(size=(1, 1, 16, 16)) > 0.9).astype(float)
    cfg = TrainConfig(epochs=1)
    rep = grad_check(lambda: total_loss(net, imgs, masks, cfg),
                     net.store.variables(), op_name="dcganet(micro)",
                     max_coords=args.max_coords, rng=np.random.default_rng(1),
                     floor=1e-6)
    checks.append(rep)

    failed = 0
    for rep in checks:
        status = "ok " if rep.ok(args.tol) else "FAIL"
        print(f"{status} {rep.op_name:<16s} max rel err {rep.max_rel_error:.3e} "
              f"(worst: {rep.worst_param}{list(rep.worst_index)})")
        failed += not rep.ok(args.tol)
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
