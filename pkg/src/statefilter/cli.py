"""Command-line front end.

Subcommands cover the whole pipeline: ``synth`` (dataset generation),
``preprocess`` (filter/decimate/segment/standardize one session),
``attention`` (fence mask for one epoch set), ``train`` / ``evaluate``
(decoder fit and scoring), ``experiment`` (end-to-end baseline vs proposed),
and ``alphamap`` (per-channel alpha-power CSV).

Exit codes: 0 success, 1 validation error (bad flags, missing paths,
malformed config), 2 runtime error.  Diagnostics go to stderr; machine
output goes to files only.  A ``--config`` JSON file supplies defaults that
explicit flags override (CLI > file > built-in).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import attention as att
from . import curriculum as cur
from . import dsp
from . import eegio
from . import evaluate as ev


class CliValidationError(Exception):
    """Bad flags, paths, or config content; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; this tool reserves 2 for runtime errors
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise CliValidationError(message)


def _parse_band(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError as exc:
        raise CliValidationError(f"--band expects lo:hi, got {text!r}") from exc


def _parse_grid(text: str) -> list[float]:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise CliValidationError(f"--k-grid expects lo:hi:step, got {text!r}") from exc
    if step <= 0 or hi < lo:
        raise CliValidationError(f"bad grid {text!r}")
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 12) for i in range(n + 1) if lo + i * step <= hi + 1e-9]


def _require_dir(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise CliValidationError(f"{what} directory not found: {p}")
    return p


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliValidationError(f"{what} not found: {p}")
    return p


def _load_config_defaults(
    args: argparse.Namespace, parser: argparse.ArgumentParser, argv: list[str]
):
    """Apply config-file values for flags the user left at their defaults."""
    if not getattr(args, "config", None):
        return
    path = _require_file(args.config, "config file")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CliValidationError(f"config {path} must hold a JSON object")
    explicit = {
        a.dest
        for a in parser._actions
        if any(opt in argv for opt in a.option_strings)
    }
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if hasattr(args, dest) and dest not in explicit:
            setattr(args, dest, value)


def _load_epochs_flexible(path: Path) -> eegio.EpochSet:
    """Accept either a preprocessed epochs directory or a raw session
    directory; raw sessions get the default preprocessing (1-40 Hz order 4,
    250 Hz, 2 s windows, per-epoch standardization)."""
    manifest, _ = eegio.read_manifest(path)
    if manifest.metadata.get("kind") == "epochs":
        return eegio.read_epochs(path)
    return dsp.preprocess_recording(eegio.read_recording(path))


def _schedule_from_args(args: argparse.Namespace) -> cur.CurriculumSchedule:
    return cur.CurriculumSchedule(
        enabled=args.curriculum == "on",
        q0=float(args.q0),
        ramp_frac=float(args.ramp_frac),
        epochs=int(args.epochs),
        lr=float(args.lr),
    )


def _feature_layout(epochs: eegio.EpochSet) -> dict:
    return {
        "channels": list(epochs.channel_names),
        "bands": dsp.DEFAULT_BANDS.names,
        "order": "channel_major",
    }


def cmd_synth(args) -> int:
    cfg = eegio.SynthConfig(
        n_subjects=int(args.subjects),
        n_sessions=int(args.sessions),
        n_trials=int(args.trials),
        n_channels=int(args.channels),
        fs_hz=float(args.fs),
        trial_sec=float(args.trial_sec),
        distract_frac=float(args.distract_frac),
        noise_std=float(args.noise_std),
        seed=int(args.seed),
    )
    recs = eegio.synth_dataset(cfg)
    paths = eegio.write_dataset(recs, args.out)
    print(f"wrote {len(paths)} sessions under {args.out}", file=sys.stderr)
    return 0


def cmd_preprocess(args) -> int:
    in_dir = _require_dir(getattr(args, "in"), "input session")
    rec = eegio.read_recording(in_dir)
    epochs = dsp.preprocess_recording(
        rec,
        band=_parse_band(args.band),
        order=int(args.order),
        fs_out=float(args.fs_out),
        window_sec=float(args.window_sec),
        scope=args.standardize_scope,
        extra_lowpass_hz=float(args.extra_lowpass) if args.extra_lowpass else None,
    )
    eegio.write_epochs(epochs, args.out, dataset_id=rec.manifest.dataset_id)
    print(
        f"{len(epochs)} epochs of {epochs.n_samples} samples -> {args.out}",
        file=sys.stderr,
    )
    return 0


def cmd_attention(args) -> int:
    in_dir = _require_dir(getattr(args, "in"), "input epochs")
    epochs = _load_epochs_flexible(in_dir)
    if args.k == "auto":
        decoder = ev.ReferenceDecoder(l2=float(args.l2))
        sched = _schedule_from_args(args)
        result = att.select_k(
            epochs,
            grid=_parse_grid(args.k_grid),
            val_fraction=float(args.val_frac),
            seed=int(args.seed),
            train_fn=lambda ep: decoder.fit(ep, sched),
            eval_fn=lambda params, ep: ev.score_predictions(
                decoder.predict(params, ep), ep, "window"
            ),
            unit=args.unit,
        )
        k = result.k_selected
        print(
            f"selected k={k} from grid {result.grid} "
            f"(val acc {['%.3f' % a for a in result.val_accuracy]})",
            file=sys.stderr,
        )
    else:
        try:
            k = float(args.k)
        except ValueError as exc:
            raise CliValidationError(f"--k expects a number or 'auto', got {args.k!r}") from exc
    profile = att.build_profile(epochs, k, unit=args.unit)
    profile.save(args.out)
    print(
        f"kept {profile.n_kept}/{profile.n_total} epochs (fence {profile.fence_upper:.4g})",
        file=sys.stderr,
    )
    return 0


def cmd_train(args) -> int:
    in_dir = _require_dir(getattr(args, "in"), "input epochs")
    epochs = _load_epochs_flexible(in_dir)
    if args.mask:
        profile = att.AttentionProfile.load(_require_file(args.mask, "attention mask"))
        epochs = att.apply_mask(epochs, profile)
    sched = _schedule_from_args(args)
    decoder = ev.ReferenceDecoder(l2=float(args.l2))
    model = decoder.fit(epochs, sched)
    model.save(
        args.model,
        extra={"schedule": sched.to_dict(), "feature_layout": _feature_layout(epochs)},
    )
    print(
        f"trained on {len(epochs)} epochs; "
        f"final train acc {model.trace.accuracy[-1]:.3f}",
        file=sys.stderr,
    )
    return 0


def cmd_evaluate(args) -> int:
    model_path = _require_file(args.model, "model file")
    in_dir = _require_dir(getattr(args, "in"), "input epochs")
    model = ev.FittedModel.load(model_path)
    epochs = _load_epochs_flexible(in_dir)
    decoder = ev.ReferenceDecoder(l2=model.params.l2)
    acc = ev.score_predictions(
        decoder.predict(model, epochs), epochs, args.score_unit
    )
    doc = {
        "accuracy": acc,
        "n_epochs": len(epochs),
        "score_unit": args.score_unit,
        "subject_id": epochs.subject_id,
        "session_id": epochs.session_id,
    }
    Path(args.report).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"accuracy {acc:.4f} on {len(epochs)} epochs", file=sys.stderr)
    return 0


def cmd_alphamap(args) -> int:
    in_dir = _require_dir(getattr(args, "in"), "input epochs")
    epochs = _load_epochs_flexible(in_dir)
    if args.attention:
        profile = att.AttentionProfile.load(
            _require_file(args.attention, "attention profile")
        )
    else:
        profile = att.build_profile(epochs, float(args.k), unit="window")
    ev.alpha_map_export(epochs, profile, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _write_experiment_artifacts(cfg, report, out: Path) -> None:
    """Per-subject attention.json and alpha_map.csv for the training session,
    at the first seed's selected fence multiplier."""
    first_seed = str(cfg.seeds[0])
    (out / "attention").mkdir(parents=True, exist_ok=True)
    (out / "alphamap").mkdir(parents=True, exist_ok=True)
    for subject in cfg.subjects:
        rec = eegio.read_recording(Path(cfg.dataset_root) / subject / cfg.train_session)
        epochs = dsp.preprocess_recording(
            rec,
            band=cfg.band,
            order=cfg.order,
            fs_out=cfg.fs_out,
            window_sec=cfg.window_sec,
            scope=cfg.standardize_scope,
            extra_lowpass_hz=cfg.extra_lowpass_hz,
        )
        k = float(report.k_selected[subject][first_seed])
        profile = att.build_profile(epochs, k, unit=cfg.unit)
        profile.save(out / "attention" / f"{subject}.json")
        ev.alpha_map_export(epochs, profile, out / "alphamap" / f"{subject}.csv")


def cmd_experiment(args) -> int:
    path = _require_file(args.config, "experiment config")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliValidationError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        cfg = ev.ExperimentConfig.from_dict(doc)
        cfg.validate()
    except (TypeError, ev.EvalError) as exc:
        raise CliValidationError(f"bad experiment config {path}: {exc}") from exc
    _require_dir(cfg.dataset_root, "dataset root")
    jobs = args.jobs or int(os.environ.get("STATEFILTER_JOBS", "1"))
    report = ev.run_protocol(cfg, jobs=jobs)
    out = Path(args.out)
    report_path, summary_path = ev.emit_report(report, out)
    _write_experiment_artifacts(cfg, report, out)
    print(
        "baseline {:.4f} +/- {:.4f} | proposed {:.4f} +/- {:.4f} | p={} {}".format(
            report.method_mean["baseline"],
            report.method_std["baseline"],
            report.method_mean["proposed"],
            report.method_std["proposed"],
            report.p_value,
            report.stars or "n.s.",
        ),
        file=sys.stderr,
    )
    print(f"report: {report_path}, summary: {summary_path}", file=sys.stderr)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="statefilter",
        description="Attention-aware EEG filtering and cross-session decoding",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth", help="generate a synthetic dataset", formatter_class=fmt)
    p.add_argument("--out", required=True, help="output root directory")
    p.add_argument("--seed", default=0, help="generator seed")
    p.add_argument("--subjects", default=4, help="number of subjects")
    p.add_argument("--sessions", default=2, help="sessions per subject")
    p.add_argument("--trials", default=80, help="trials per session")
    p.add_argument("--channels", default=4, help="EEG channels")
    p.add_argument("--fs", default=250.0, help="sampling rate in Hz")
    p.add_argument("--trial-sec", default=4.0, help="trial length in seconds")
    p.add_argument("--distract-frac", default=0.3, help="fraction of distracted trials")
    p.add_argument("--noise-std", default=0.5, help="white noise level")
    p.add_argument("--config", default=None, help="JSON defaults (flags override)")
    p.set_defaults(func=cmd_synth, subparser=p)

    p = sub.add_parser(
        "preprocess", help="band-pass, decimate, segment, standardize", formatter_class=fmt
    )
    p.add_argument("--in", required=True, help="input session directory")
    p.add_argument("--out", required=True, help="output epochs directory")
    p.add_argument("--band", default="1:40", help="band edges lo:hi in Hz")
    p.add_argument("--order", default=4, help="Butterworth prototype order")
    p.add_argument("--fs-out", default=250.0, help="target sampling rate in Hz")
    p.add_argument("--window-sec", default=2.0, help="epoch window in seconds")
    p.add_argument("--extra-lowpass", default=None,
                   help="dataset-specific lowpass cutoff in Hz, applied after the band-pass")
    p.add_argument(
        "--standardize-scope",
        default="epoch",
        choices=("epoch", "session"),
        help="normalization scope",
    )
    p.add_argument("--config", default=None, help="JSON defaults (flags override)")
    p.set_defaults(func=cmd_preprocess, subparser=p)

    p = sub.add_parser(
        "attention", help="compute the fence mask for one epoch set", formatter_class=fmt
    )
    p.add_argument("--in", required=True, help="epochs directory, or a raw session (preprocessed with defaults)")
    p.add_argument("--out", default="attention.json", help="output profile path")
    p.add_argument("--k", default="auto", help="fence multiplier, or 'auto' to search")
    p.add_argument("--k-grid", default="0:3:0.5", help="search grid lo:hi:step")
    p.add_argument("--val-frac", default=0.2, help="validation fraction for the search")
    p.add_argument(
        "--unit", default="window", choices=("window", "trial"), help="masking unit"
    )
    p.add_argument("--seed", default=0, help="split seed for the search")
    p.add_argument("--curriculum", default="on", choices=("on", "off"),
                   help="curriculum during the search")
    p.add_argument("--q0", default=0.5, help="initial kept fraction")
    p.add_argument("--ramp-frac", default=0.5, help="ramp length fraction")
    p.add_argument("--epochs", default=300, help="training epochs")
    p.add_argument("--lr", default=0.1, help="learning rate")
    p.add_argument("--l2", default=1e-4, help="l2 penalty")
    p.add_argument("--config", default=None, help="JSON defaults (flags override)")
    p.set_defaults(func=cmd_attention, subparser=p)

    p = sub.add_parser("train", help="fit the decoder on one epoch set", formatter_class=fmt)
    p.add_argument("--in", required=True, help="epochs directory, or a raw session (preprocessed with defaults)")
    p.add_argument("--model", required=True, help="output model.json path")
    p.add_argument("--mask", default=None, help="attention.json to filter epochs first")
    p.add_argument("--curriculum", default="on", choices=("on", "off"),
                   help="loss-thresholded sample filtering")
    p.add_argument("--q0", default=0.5, help="initial kept fraction")
    p.add_argument("--ramp-frac", default=0.5, help="ramp length fraction")
    p.add_argument("--epochs", default=300, help="training epochs")
    p.add_argument("--lr", default=0.1, help="learning rate")
    p.add_argument("--l2", default=1e-4, help="l2 penalty")
    p.add_argument("--config", default=None, help="JSON defaults (flags override)")
    p.set_defaults(func=cmd_train, subparser=p)

    p = sub.add_parser("evaluate", help="score a model on one epoch set", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model.json path")
    p.add_argument("--in", required=True, help="epochs directory, or a raw session (preprocessed with defaults)")
    p.add_argument("--report", required=True, help="output JSON path")
    p.add_argument(
        "--score-unit", default="window", choices=("window", "trial"),
        help="accuracy unit (trial = majority vote)",
    )
    p.add_argument("--config", default=None, help="JSON defaults (flags override)")
    p.set_defaults(func=cmd_evaluate, subparser=p)

    p = sub.add_parser(
        "alphamap", help="per-(epoch, channel) alpha power CSV", formatter_class=fmt
    )
    p.add_argument("--in", required=True, help="epochs directory, or a raw session (preprocessed with defaults)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--attention", default=None, help="existing attention.json")
    p.add_argument("--k", default=1.5, help="fence multiplier when no profile given")
    p.add_argument("--config", default=None, help="JSON defaults (flags override)")
    p.set_defaults(func=cmd_alphamap, subparser=p)

    p = sub.add_parser(
        "experiment", help="end-to-end baseline vs proposed comparison", formatter_class=fmt
    )
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel subject workers (default $STATEFILTER_JOBS or 1)")
    p.set_defaults(func=cmd_experiment, subparser=p)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        _load_config_defaults(args, args.subparser, argv)
        return args.func(args)
    except CliValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (
        eegio.EegbError,
        dsp.DspError,
        att.StateFilterError,
        cur.TrainerError,
        ev.EvalError,
        OSError,
        ValueError,
    ) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
