#!/usr/bin/env python3
"""Sweep the distracted-trial fraction and report how the fence behaves.

For each contamination level this prints, averaged over dataset draws:
the fraction of ground-truth distracted epochs removed at each fence
multiplier, the baseline / proposed test accuracies, and their gap.  Above
~25% contamination the upper quartile of the attention index sits inside the
distracted cluster, so every fence with k > 0 goes blind; this sweep makes
that visible.

Usage:
  python scripts/sweep_contamination.py [--fracs 0.1,0.2,0.3] [--draws 3]
"""

import argparse
import sys
import tempfile
from pathlib import Path

import numpy as np

from statefilter import attention as att
from statefilter import curriculum as cur
from statefilter import dsp, eegio
from statefilter import evaluate as ev


def sweep_one(frac: float, draw: int, k_grid) -> dict:
    cfg = eegio.SynthConfig(n_subjects=1, n_sessions=2, distract_frac=frac, seed=draw)
    sessions = {r.manifest.session_id: r for r in eegio.synth_dataset(cfg)}
    train_ep = dsp.preprocess_recording(sessions["0"], role="train")
    test_ep = dsp.preprocess_recording(sessions["1"], role="test")
    distracted = np.array([f["distracted"] for f in train_ep.epoch_flags])

    removal = {}
    for k in k_grid:
        profile = att.build_profile(train_ep, k)
        removed = (~profile.mask) & distracted
        removal[k] = removed.sum() / max(1, distracted.sum())

    decoder = ev.ReferenceDecoder(l2=1e-4)
    base = decoder.fit(train_ep, cur.CurriculumSchedule(enabled=False))
    profile = att.build_profile(train_ep, min(k_grid))
    kept = att.apply_mask(train_ep, profile)
    prop = decoder.fit(kept, cur.CurriculumSchedule(enabled=True))
    acc_base = ev.score_predictions(decoder.predict(base, test_ep), test_ep)
    acc_prop = ev.score_predictions(decoder.predict(prop, test_ep), test_ep)
    return {"removal": removal, "baseline": acc_base, "proposed": acc_prop}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fracs", default="0.05,0.1,0.15,0.2,0.25,0.3,0.4",
                        help="comma-separated contamination fractions")
    parser.add_argument("--draws", type=int, default=3, help="dataset draws per fraction")
    parser.add_argument("--k-grid", default="0,0.5,1.5,3",
                        help="fence multipliers to probe")
    args = parser.parse_args()
    fracs = [float(v) for v in args.fracs.split(",")]
    k_grid = [float(v) for v in args.k_grid.split(",")]

    header = ["frac"] + [f"rm@k={k:g}" for k in k_grid] + ["base", "prop", "gap"]
    print("  ".join(f"{h:>9s}" for h in header))
    for frac in fracs:
        runs = [sweep_one(frac, d, k_grid) for d in range(args.draws)]
        row = [f"{frac:9.2f}"]
        for k in k_grid:
            row.append(f"{np.mean([r['removal'][k] for r in runs]):9.2f}")
        base = np.mean([r["baseline"] for r in runs])
        prop = np.mean([r["proposed"] for r in runs])
        row += [f"{base:9.3f}", f"{prop:9.3f}", f"{prop - base:+9.3f}"]
        print("  ".join(row))
    return 0


if __name__ == "__main__":
    sys.exit(main())
