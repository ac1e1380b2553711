#!/usr/bin/env python3
"""Check a synthesis report against its model by independent simulation.

Sweeps sampled admissible uncertainties (nominal, ball vertices, random
interior points), propagates the closed-loop second moments for each,
and prints the margin to the claimed bound per sample.  Optional Monte
Carlo spot checks re-estimate each cost from sampled trajectories; at
the default dt this is slow for long horizons, so pick paths and dt to
taste.  Exits 3 if any admissible sample violates the bound.
"""

import argparse
import json

import numpy as np

from qgcc.model import Controller
from qgcc.modelfile import load_model
from qgcc.verify import sweep_bound


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("model")
    ap.add_argument("report")
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mc-paths", type=int, default=0,
                    help="Monte Carlo paths per sample (0 disables)")
    ap.add_argument("--mc-dt", type=float, default=1e-2)
    args = ap.parse_args(argv)

    sys_, w, _ = load_model(args.model)
    with open(args.report, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    ctrl = Controller(A_K=np.array(doc["controller"]["A_K"], dtype=float),
                      B_K=np.array(doc["controller"]["B_K"], dtype=float),
                      C_K=np.array(doc["controller"]["C_K"], dtype=float),
                      x_K0=np.array(doc["controller"]["x_K0"], dtype=float))

    result = sweep_bound(sys_, w, ctrl, float(doc["bound"]),
                         float(doc["horizon"]), n_samples=args.samples,
                         seed=args.seed, mc_paths=args.mc_paths,
                         mc_dt=args.mc_dt)

    print(f"bound V = {result.bound:.6f}, horizon = {doc['horizon']:g}, "
          f"{len(result.samples)} samples (seed {args.seed})")
    header = f"  {'sample':<12} {'sigma':>6} {'J_dre':>12} {'margin':>12}"
    if args.mc_paths:
        header += f" {'J_mc':>12} {'stderr':>9}"
    print(header)
    for s in result.samples:
        line = (f"  {s.delta_id:<12} {s.sigma_max:>6.3f} {s.j_dre:>12.6f} "
                f"{s.margin:>12.6f}")
        if s.j_mc is not None:
            line += f" {s.j_mc:>12.6f} {s.mc_stderr:>9.6f}"
        if not s.passed:
            line += "  VIOLATED"
        if s.note:
            line += f"  [{s.note}]"
        print(line)

    print(f"worst J_dre = {result.max_j_dre:.6f}, "
          f"min margin = {result.min_margin:.6f}, "
          f"all pass = {result.all_pass}")
    return 0 if result.all_pass else 3


if __name__ == "__main__":
    raise SystemExit(main())
