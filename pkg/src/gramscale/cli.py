"""``gramscale`` command line: analyze, pair-from-im, generate, benchmark."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import BenchmarkConfig, BenchmarkConfigError, run_benchmark
from .generator import GeneratorConfig, GeneratorConfigError, generate
from .interaction import InteractionMatrix, Measure, Scaling, UnstableEntryError, build_im
from .lti import DEFAULT_PADE_ORDER, LTIError, PlantFormatError, TransferMatrix, dc_gain
from .pairing import SPARSE_THRESHOLD, NoFeasiblePairingError, max_assignment, pair_with_ni, sparse_structure
from .scaling import SK_TOL, ScalingError, apply_scaling

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_UNSTABLE = 3
EXIT_NO_PAIRING = 4


class InputError(Exception):
    """Unreadable or invalid user input (exit code 2)."""


def _measure(text):
    try:
        return Measure.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown measure {text!r}") from None


def _scaling(text):
    try:
        return Scaling.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown scaling {text!r}") from None


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def _write_manifest(out: Path, command: str, config: dict, inputs, outputs, t0: float, seed=None):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": list(outputs),
        "wall_time_s": round(time.time() - t0, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def _read_gain(path) -> np.ndarray:
    """Steady-state gain matrix from a plant JSON or a plain numeric CSV."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return dc_gain(TransferMatrix.from_json(path.read_text()))
    try:
        rows = [r for r in csv.reader(io.StringIO(path.read_text())) if r]
        return np.array([[float(x) for x in r] for r in rows])
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read gain matrix {path}: {exc}") from exc


def _decide(im, args, G0=None, G=None):
    im = apply_scaling(im, args.scaling, sk_tol=args.sk_tol)
    if args.ni:
        if G0 is None:
            raise InputError("--ni needs the steady-state gain (pass --gain)")
        dec = pair_with_ni(im, G0)
    else:
        dec = max_assignment(im)
    if args.sparse:
        dec = sparse_structure(im, dec, args.rho, G, args.threshold)
    return im, dec


def _emit(im: InteractionMatrix, dec, args, command, inputs, t0):
    doc = dec.to_dict(output_names=im.output_names, input_names=im.input_names)
    text = json.dumps(doc, indent=1) + "\n"
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    im.save(out / "im.csv")
    (out / "pairing.json").write_text(text)
    config = {k: (v.value if hasattr(v, "value") else v) for k, v in vars(args).items()
              if k not in ("func", "out")}
    _write_manifest(out, command, config, inputs, ["im.csv", "im.json", "pairing.json"], t0)


def cmd_analyze(args) -> int:
    t0 = time.time()
    try:
        G = TransferMatrix.load(args.plant)
    except OSError as exc:
        raise InputError(f"cannot read {args.plant}: {exc.strerror}") from exc
    im = build_im(G, args.measure, args.pade)
    im, dec = _decide(im, args, dc_gain(G), G)
    _emit(im, dec, args, "analyze", [args.plant], t0)
    return EXIT_OK


def cmd_pair_from_im(args) -> int:
    t0 = time.time()
    try:
        im = InteractionMatrix.load(args.im)
    except OSError as exc:
        raise InputError(f"cannot read {args.im}: {exc.strerror}") from exc
    except ValueError as exc:
        raise InputError(f"malformed IM CSV {args.im}: {exc}") from exc
    if args.measure is not None:
        im = im.with_values(im.values, measure=args.measure)
    G0 = _read_gain(args.gain) if args.gain else None
    G = TransferMatrix.load(args.gain) if args.gain and Path(args.gain).suffix.lower() == ".json" else None
    im, dec = _decide(im, args, G0, G)
    inputs = [args.im] + ([args.gain] if args.gain else [])
    _emit(im, dec, args, "pair-from-im", inputs, t0)
    return EXIT_OK


def cmd_generate(args) -> int:
    t0 = time.time()
    data = _read_json(args.config) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    if args.max_gain is not None:
        data["max_static_gain"] = args.max_gain
    try:
        cfg = GeneratorConfig.from_dict(data)
    except (TypeError, GeneratorConfigError) as exc:
        raise InputError(f"invalid generator config: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for k in range(args.n):
        name = f"system_{k + 1:04d}.json"
        generate(cfg, k).save(out / name)
        names.append(name)
    _write_manifest(out, "generate", cfg.to_dict(), [args.config] if args.config else [], names, t0, cfg.seed)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    data = _read_json(args.config) if args.config else {}
    if args.n is not None:
        data["n_systems"] = args.n
    try:
        cfg = BenchmarkConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid benchmark config: {exc}") from exc

    def progress(sid):
        if not args.quiet:
            print(f"system {sid + 1} done", file=sys.stderr)

    summary = run_benchmark(cfg, args.out, jobs=args.jobs, progress=progress)
    if not args.quiet:
        print(f"{summary['n_systems']} systems, {summary['n_failed']} failed; report in {args.out}",
              file=sys.stderr)
    return EXIT_OK


def _add_decision_flags(p):
    p.add_argument("--scaling", type=_scaling, default=Scaling.NONE,
                   help="none, row, column, row-or-column, sk")
    p.add_argument("--ni", action="store_true", help="reject pairings with negative Niederlinski index")
    p.add_argument("--sparse", action="store_true", help="add decoupling feedforward edges")
    p.add_argument("--rho", type=float, default=3.0, help="sparse penalty weight (default 3)")
    p.add_argument("--threshold", type=float, default=SPARSE_THRESHOLD,
                   help="cumulative IM budget for sparse selection (default 0.7)")
    p.add_argument("--sk-tol", type=_positive_float, default=SK_TOL, help="Sinkhorn-Knopp tolerance")
    p.add_argument("--out", help="output directory (default: pairing JSON to stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gramscale", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="IM and pairing for a plant JSON")
    p.add_argument("plant")
    p.add_argument("--measure", type=_measure, default=Measure.HIIA, help="pm, hiia, sigma2")
    p.add_argument("--pade", type=int, default=DEFAULT_PADE_ORDER, help="Padé order for delays")
    _add_decision_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("pair-from-im", help="pairing from an IM CSV (tags from its JSON sidecar)")
    p.add_argument("im")
    p.add_argument("--measure", type=_measure, default=None, help="override the sidecar measure tag")
    p.add_argument("--gain", help="plant JSON or gain CSV, needed for --ni")
    _add_decision_flags(p)
    p.set_defaults(func=cmd_pair_from_im)

    p = sub.add_parser("generate", help="write random plants system_0001.json ...")
    p.add_argument("config", nargs="?", help="generator config JSON")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-gain", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("benchmark", help="score measures and scalings on generated plants")
    p.add_argument("config", nargs="?", help="benchmark config JSON")
    p.add_argument("--n", type=int, help="override n_systems")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, PlantFormatError, BenchmarkConfigError, GeneratorConfigError) as exc:
        print(f"gramscale: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except UnstableEntryError as exc:
        print(f"gramscale: error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except NoFeasiblePairingError as exc:
        print(f"gramscale: error: {exc}", file=sys.stderr)
        return EXIT_NO_PAIRING
    except (LTIError, ScalingError, ValueError) as exc:
        print(f"gramscale: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
