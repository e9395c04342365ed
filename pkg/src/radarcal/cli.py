"""``radarcal`` command line: synth -> preprocess -> train -> calibrate -> evaluate.

Exit codes: 0 success, 1 validation error, 2 I/O error. Every successful run
writes ``<primary output>.manifest.json`` last.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from radarcal import __version__
from radarcal.calibration import (
    DEFAULT_EPSILON,
    apply_correction,
    fit,
    flagged_entries,
    load_model,
    parse_bins,
    save_model,
    split_train_test,
    train_frame_count,
)
from radarcal.datacube import (
    DEFAULT_TRAIN_FRACTION,
    atomic_write_bytes,
    check_paired,
    read_amplitudes,
    read_config,
    read_cube,
    read_temperature_log,
    write_amplitudes,
    write_cube,
    write_temperature_log,
)
from radarcal.errors import ValidationError
from radarcal.evaluation import evaluate, render_report
from radarcal.preprocess import compute_amplitude_profiles
from radarcal.synth import SynthSpec, generate, read_synth_spec, with_seed

log = logging.getLogger("radarcal")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

FLAGS_HEADER = "frame,antenna,bin"


def manifest_path(primary_output: Path) -> Path:
    return primary_output.with_name(primary_output.name + ".manifest.json")


def write_manifest(primary_output, command: str, inputs: dict, outputs: list, config: dict) -> Path:
    path = manifest_path(Path(primary_output))
    manifest = {
        "tool": "radarcal",
        "version": __version__,
        "command": command,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": [str(p) for p in outputs],
        "config": config,
    }
    atomic_write_bytes(path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    return path


def _train_fraction(args) -> float:
    if args.train_fraction is not None:
        return args.train_fraction
    if getattr(args, "config", None):
        return read_config(args.config)[1]
    return DEFAULT_TRAIN_FRACTION


def cmd_synth(args) -> int:
    spec = read_synth_spec(args.spec) if args.spec else SynthSpec()
    if args.seed is not None:
        spec = with_seed(spec, args.seed)
    cube, temps = generate(spec)
    write_cube(cube, args.cube)
    write_temperature_log(temps, args.temps)
    write_manifest(
        args.cube,
        "synth",
        {"spec": args.spec or "<default>"},
        [args.cube, args.temps],
        {"num_frames": spec.num_frames, "seed": spec.seed, "snr_db": spec.snr_db, "target_bin": spec.target_bin},
    )
    log.info("wrote %d synthetic frames to %s", spec.num_frames, args.cube)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    config = read_config(args.config)[0] if args.config else None
    cube = read_cube(args.cube, config)
    ap = compute_amplitude_profiles(cube)
    write_amplitudes(ap, args.ap)
    F, A, B = ap.shape
    write_manifest(
        args.ap, "preprocess", {"cube": args.cube}, [args.ap],
        {"num_frames": F, "num_antennas": A, "num_bins": B, "num_chirps": cube.config.num_chirps},
    )
    return EXIT_OK


def cmd_train(args) -> int:
    ap = read_amplitudes(args.ap)
    temps = read_temperature_log(args.temps)
    fraction = _train_fraction(args)
    (train_ap, train_temps), _ = split_train_test(ap, temps, fraction)
    bins = parse_bins(args.bins) if args.bins else None
    model = fit(train_ap, train_temps, epsilon=args.epsilon, bins=bins, t_ref=args.t_ref, clamp=args.clamp)
    save_model(model, args.model)
    write_manifest(
        args.model, "train", {"ap": args.ap, "temps": args.temps}, [args.model],
        {
            "train_fraction": fraction,
            "train_frames": model.train_frames,
            "test_start_frame": model.train_frames,
            "epsilon": model.epsilon,
            "t_ref": model.t_ref,
            "clamp": model.clamp,
            "bins": args.bins or "default",
        },
    )
    return EXIT_OK


def cmd_calibrate(args) -> int:
    ap = read_amplitudes(args.ap)
    temps = read_temperature_log(args.temps)
    model = load_model(args.model)
    tcap, flags = apply_correction(model, ap, temps)
    flags_path = Path(args.flags) if args.flags else Path(args.tcap).with_name(Path(args.tcap).name + ".flags.csv")
    rows = [FLAGS_HEADER] + [f"{f},{a},{b}" for f, a, b in flagged_entries(flags)]
    write_amplitudes(tcap, args.tcap)
    atomic_write_bytes(flags_path, ("\n".join(rows) + "\n").encode("ascii"))
    write_manifest(
        args.tcap, "calibrate", {"ap": args.ap, "temps": args.temps, "model": args.model},
        [args.tcap, flags_path], {"flagged": int(flags.sum()), "t_ref": model.t_ref},
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ap = read_amplitudes(args.ap)
    tcap = read_amplitudes(args.tcap)
    temps = read_temperature_log(args.temps)
    if ap.shape != tcap.shape:
        raise ValidationError(f"AP shape {ap.shape} differs from TCAP shape {tcap.shape}")
    check_paired(ap.num_frames, temps, "amplitude tensor")
    start = 0
    config = {"test_only": bool(args.test_only)}
    if args.test_only:
        fraction = _train_fraction(args)
        start = train_frame_count(ap.num_frames, fraction)
        if args.model:
            recorded = load_model(args.model).train_frames
            if recorded is not None:
                if args.train_fraction is not None and recorded != start:
                    raise ValidationError(
                        f"--train-fraction {args.train_fraction} puts the split at frame {start}, "
                        f"but the model was trained on {recorded} frames"
                    )
                start = recorded
        config.update(train_fraction=fraction, test_start_frame=start)
        ap, tcap, temps = ap.slice(start), tcap.slice(start), temps.slice(start)
    report = evaluate(ap, tcap, temps, first_frame=start)
    report_path = Path(args.report)
    series = Path(args.series) if args.series else report_path.with_name(report_path.stem + ".series.csv")
    bins = Path(args.bins_table) if args.bins_table else report_path.with_name(report_path.stem + ".bins.csv")
    written = render_report(report, report_path, series_path=series, bins_path=bins)
    inputs = {"ap": args.ap, "tcap": args.tcap, "temps": args.temps}
    if args.model:
        inputs["model"] = args.model
    write_manifest(report_path, "evaluate", inputs, written, config)
    for r in report.antennas:
        log.info("antenna %d bin %d: pr_ap=%s pr_tcap=%s", r.antenna, r.peak_bin, r.pr_ap, r.pr_tcap)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radarcal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"radarcal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cube and temperature log")
    p.add_argument("cube", help="output RDC1 cube file")
    p.add_argument("temps", help="output temperature CSV")
    p.add_argument("--spec", help="synth spec file (key = value); defaults if omitted")
    p.add_argument("--seed", type=int, help="override the seed given in --spec")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="cube -> amplitude profiles (RAP1)")
    p.add_argument("cube")
    p.add_argument("ap", help="output RAP1 file")
    p.add_argument("--config", help="config file the cube dimensions must match")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="fit temperature models on the training slice")
    p.add_argument("ap")
    p.add_argument("temps")
    p.add_argument("model", help="output model JSON")
    p.add_argument("--config")
    p.add_argument("--train-fraction", type=float, default=None,
                   help=f"leading fraction of frames used for training (default {DEFAULT_TRAIN_FRACTION})")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--t-ref", type=float, default=None, help="reference temperature (default: training mean)")
    p.add_argument("--bins", help="bins to model, e.g. '1-15' or '4,7' (default: all but DC)")
    p.add_argument("--clamp", action="store_true", help="clamp prediction temperatures to the training range")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="apply a model to amplitude profiles")
    p.add_argument("ap")
    p.add_argument("temps")
    p.add_argument("model")
    p.add_argument("tcap", help="output RAP1 file with compensated profiles")
    p.add_argument("--flags", help="epsilon-guard sidecar CSV (default: <tcap>.flags.csv)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="Pearson correlation report")
    p.add_argument("ap")
    p.add_argument("tcap")
    p.add_argument("temps")
    p.add_argument("report", help="output report CSV")
    p.add_argument("--config")
    p.add_argument("--test-only", action="store_true", help="evaluate on the held-out frames only")
    p.add_argument("--train-fraction", type=float, default=None)
    p.add_argument("--model", help="model JSON whose recorded split boundary is reused with --test-only")
    p.add_argument("--series", help="per-frame series CSV base path (default: <report>.series.csv)")
    p.add_argument("--bins-table", help="per-bin correlation CSV (default: <report>.bins.csv)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("RADARCAL_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"radarcal {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"radarcal {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def run() -> None:
    sys.exit(main())
