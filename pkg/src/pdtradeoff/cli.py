"""Command-line front end.

Exit codes: 0 success, 2 usage or invalid input, 3 numerical flag (some
point did not meet its convergence certificate), 4 input/output failure.
Every run logs its resolved configuration to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .divergence import DivergenceKind
from .errors import InvalidRecord, IoFailure, PDError
from .model import (
    Alphabet,
    ConditionalKernel,
    DegradationModel,
    DiscreteDistribution,
    feature_map_distortion,
    gaussian_noise_channel,
    square_error_measure,
    zero_one_measure,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("pdtradeoff")

EXPLICIT_FIELDS = {"x_labels", "x_values", "y_labels", "prior", "channel", "features"}
GAUSSIAN_FIELDS = {"x_labels", "x_values", "prior", "sigma", "grid", "features"}


class UsageError(Exception):
    """Bad flags or malformed input; maps to exit code 2."""


@dataclass
class RunConfig:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=str)


# --- inputs -----------------------------------------------------------------------

def read_input(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise IoFailure(f"{path}: no such file")
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"{path}: cannot read ({exc.strerror or exc})") from exc
    except UnicodeDecodeError:
        raise UsageError(f"{path}: not valid UTF-8") from None
    if not text.strip():
        raise UsageError(f"{path}: input file is empty")
    return text


def check_output(path: Optional[str]) -> None:
    if path is None or path == "-":
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise IoFailure(f"{path}: directory {parent} does not exist")


def write_output(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"{path}: cannot write ({exc.strerror or exc})") from exc


def model_from_dict(spec: dict, source: str = "<model>"):
    """Build (model, features) from a parsed model file.

    Two layouts are accepted.  Explicit: ``x_labels`` and/or ``x_values``,
    ``prior`` and a ``channel`` table ``[x][y]`` (optional ``y_labels``).
    Gaussian: ``x_values``, ``sigma`` and ``grid`` ``{lo, hi, n_bins}``
    (optional ``prior``).  Either may carry ``features`` for the
    feature-map distortion.  Unknown fields are rejected.
    """
    if not isinstance(spec, dict):
        raise UsageError(f"{source}: top level must be a JSON object")
    keys = set(spec)
    gaussian = "sigma" in spec or "grid" in spec
    allowed = GAUSSIAN_FIELDS if gaussian else EXPLICIT_FIELDS
    unknown = sorted(keys - allowed)
    if unknown:
        raise UsageError(f"{source}: unknown field(s) {', '.join(unknown)}")
    features = spec.get("features")
    if gaussian:
        for k in ("x_values", "sigma", "grid"):
            if k not in spec:
                raise UsageError(f"{source}: gaussian model needs {k!r}")
        grid = spec["grid"]
        if not isinstance(grid, dict) or set(grid) != {"lo", "hi", "n_bins"}:
            raise UsageError(f"{source}: grid must be an object with lo, hi, n_bins")
        model = gaussian_noise_channel(spec["x_values"], float(spec["sigma"]), grid,
                                       prior=spec.get("prior"), x_labels=spec.get("x_labels"))
        return model, features
    for k in ("prior", "channel"):
        if k not in spec:
            raise UsageError(f"{source}: model needs {k!r}")
    if "x_values" in spec:
        x_alph = Alphabet.from_values(np.asarray(spec["x_values"], dtype=float),
                                      spec.get("x_labels"))
    elif "x_labels" in spec:
        x_alph = Alphabet(tuple(spec["x_labels"]))
    else:
        raise UsageError(f"{source}: model needs x_labels or x_values")
    channel = np.asarray(spec["channel"], dtype=float)
    if channel.ndim != 2:
        raise UsageError(f"{source}: channel must be a 2-d table [x][y]")
    y_labels = spec.get("y_labels") or [f"y{j}" for j in range(channel.shape[1])]
    y_alph = Alphabet(tuple(y_labels))
    prior = DiscreteDistribution(x_alph, spec["prior"])
    return DegradationModel(prior, ConditionalKernel(x_alph, y_alph, channel)), features


def load_model(path: str):
    text = read_input(path)
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    try:
        return model_from_dict(spec, path)
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, PDError):
            raise
        raise UsageError(f"{path}: {exc}") from None


def distortion_measure(model: DegradationModel, kind: str, features=None):
    if kind == "square":
        return square_error_measure(model.x_alphabet)
    if kind == "zero-one":
        return zero_one_measure(model.x_alphabet)
    if kind == "feature":
        if features is None:
            raise UsageError("feature distortion needs a 'features' field in the model file")
        return feature_map_distortion(model.x_alphabet, features)
    raise UsageError(f"unknown distortion {kind!r}")


def parse_floats(text: str, what: str) -> list:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise UsageError(f"{what} list is empty")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if any(not math.isfinite(v) for v in vals):
        raise UsageError(f"{what}: values must be finite")
    return vals


def parse_d_grid(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--d-grid must be START:STOP:N, got {text!r}")
    try:
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--d-grid must be START:STOP:N, got {text!r}") from None
    if n < 1 or stop < start:
        raise UsageError("--d-grid needs N >= 1 and STOP >= START")
    return start, stop, n


# --- subcommands ------------------------------------------------------------------

def cmd_curve(args) -> int:
    from .bounds import d_max, d_min
    from .tradeoff import (SolverOptions, TradeoffCurve, curve_csv, default_lambdas,
                           lagrangian_solve, lower_convex_envelope, trace_curve)

    lambdas = default_lambdas() if args.lambdas is None else parse_floats(args.lambdas, "--lambdas")
    if any(v < 0 for v in lambdas):
        raise UsageError("--lambdas must be nonnegative")
    if any(b < a for a, b in zip(lambdas, lambdas[1:])):
        raise UsageError("--lambdas must be sorted ascending")
    check_output(args.out)
    opts = SolverOptions(max_iters=args.max_iters, tol=args.tol)
    cfg = RunConfig("curve", {"model": args.model}, {"csv": args.out or "-"},
                    {"divergence": args.divergence, "distortion": args.distortion,
                     "lambdas": lambdas, "max_iters": opts.max_iters, "tol": opts.tol,
                     "warm_start": not args.no_warm_start, "endpoints": args.endpoints})
    log.info("config %s", cfg.to_json())
    model, features = load_model(args.model)
    dist = distortion_measure(model, args.distortion, features)
    if len(lambdas) == 1 and not args.endpoints:
        pt = lagrangian_solve(model, dist, args.divergence, lambdas[0], opts)
        hull = lower_convex_envelope([(pt.distortion, pt.perception)])
        curve = TradeoffCurve((pt,), DivergenceKind.parse(args.divergence), dist.name,
                              tuple(hull))
    else:
        if len(lambdas) == 1:
            lambdas = [lambdas[0], lambdas[0]]
        curve = trace_curve(model, dist, args.divergence, lambdas, opts,
                            warm_start=not args.no_warm_start, endpoints=args.endpoints)
    write_output(args.out, curve_csv(curve))
    lo = d_min(model, dist).value
    hi = d_max(model, dist).value if dist.xhat_alphabet.labels == model.x_alphabet.labels \
        else float("nan")
    stream = sys.stderr if args.out in (None, "-") else sys.stdout
    print(f"D_min={lo!r} D_max={hi!r} points={len(curve.points)} "
          f"flagged={len(curve.flagged)}", file=stream)
    return EXIT_NUMERICAL if curve.flagged else EXIT_OK


def cmd_gaussian(args) -> int:
    from .gaussian import GaussianSetting, gaussian_csv, linspace_grid

    check_output(args.out)
    try:
        setting = GaussianSetting(args.sigma)
    except PDError as exc:
        raise UsageError(str(exc)) from None
    if args.d_grid is None:
        start, stop, n = setting.d_min, setting.d_0 + (setting.d_0 - setting.d_min), 101
    else:
        start, stop, n = parse_d_grid(args.d_grid)
    cfg = RunConfig("gaussian", {}, {"csv": args.out or "-"},
                    {"sigma": args.sigma, "d_grid": [start, stop, n]})
    log.info("config %s", cfg.to_json())
    write_output(args.out, gaussian_csv(args.sigma, linspace_grid(start, stop, n)))
    return EXIT_OK


def cmd_bounds(args) -> int:
    from .bounds import d_max, d_min, verify_theorem4

    cfg = RunConfig("bounds", {"model": args.model}, {"stdout": "-"},
                    {"distortion": args.distortion})
    log.info("config %s", cfg.to_json())
    model, features = load_model(args.model)
    dist = distortion_measure(model, args.distortion, features)
    lo = d_min(model, dist)
    print(f"D_min = {lo.value!r}")
    if lo.info["ties"]:
        print(f"D_min ties at y = {','.join(lo.info['ties'])}")
    if dist.xhat_alphabet.labels == model.x_alphabet.labels:
        print(f"D_max = {d_max(model, dist).value!r}")
    if args.distortion == "square" and model.x_alphabet.has_values:
        rep = verify_theorem4(model)
        print(f"posterior_sampling_mse = {rep.posterior_sampling_mse!r}")
        print(f"ratio_to_mmse = {rep.ratio!r}")
        print(f"factor_two_identity = {'ok' if rep.identity_holds else 'FAILED'}")
        print(f"d_max_bound = {'ok' if rep.bound_holds else 'FAILED'}")
        if not rep.ok:
            return EXIT_NUMERICAL
    return EXIT_OK


def cmd_estimators(args) -> int:
    from .divergence import compare
    from .estimators import (map_estimator, mmse_estimator, posterior_sampling_estimator,
                             random_draw_estimator)
    from .model import mean_distortion, output_distribution

    check_output(args.out)
    cfg = RunConfig("estimators", {"model": args.model}, {"csv": args.out or "-"},
                    {"which": args.which, "report": args.report})
    log.info("config %s", cfg.to_json())
    model, _ = load_model(args.model)
    makers = {"mmse": mmse_estimator, "map": map_estimator,
              "ps": posterior_sampling_estimator, "rand": random_draw_estimator}
    est = makers[args.which](model)
    lines = ["y," + ",".join(est.outputs.labels)]
    for label, row in zip(est.inputs.labels, est.table):
        lines.append(label + "," + ",".join(repr(float(v)) for v in row))
    write_output(args.out, "\n".join(lines) + "\n")
    if args.report:
        stream = sys.stderr if args.out in (None, "-") else sys.stdout
        out = output_distribution(model, est)
        print(f"estimator = {args.which}", file=stream)
        print("output_distribution = " + ",".join(
            f"{s}:{w!r}" for s, w in zip(out.alphabet.labels, out.weights.tolist())), file=stream)
        if model.x_alphabet.has_values and est.outputs.has_values:
            mse = mean_distortion(model, est, square_error_measure(model.x_alphabet, est.outputs))
            print(f"mse = {mse!r}", file=stream)
        for kind in ("tv", "kl"):
            try:
                val = compare(kind, model.prior, out)
            except PDError:
                continue
            print(f"{kind} = {val!r}", file=stream)
        if est.info.get("ties"):
            print(f"ties = {','.join(map(str, est.info['ties']))}", file=stream)
    return EXIT_OK


def cmd_plane(args) -> int:
    from .plane import admissible_set, emit_scatter, emit_table, parse_records, pareto_front

    for p in (args.out_svg, args.out_csv):
        check_output(p)
    cfg = RunConfig("plane", {"records": args.records},
                    {"svg": args.out_svg, "csv": args.out_csv}, {"weak": args.weak})
    log.info("config %s", cfg.to_json())
    text = read_input(args.records)
    try:
        records = parse_records(text, args.records)
    except InvalidRecord as exc:
        raise UsageError(str(exc)) from None
    adm = admissible_set(records, weak=args.weak)
    if args.out_svg:
        write_output(args.out_svg, emit_scatter(records, pareto_front(records)))
    if args.out_csv:
        write_output(args.out_csv, emit_table(records))
    print("admissible = " + ",".join(r.name for r in adm))
    return EXIT_OK


def cmd_probe(args) -> int:
    from .estimators import stability_probe

    alphas = parse_floats(args.alphas, "--alphas")
    if any(not 0 < a <= 1 for a in alphas):
        raise UsageError("--alphas must lie in (0, 1]")
    cfg = RunConfig("probe", {"model": args.model}, {"stdout": "-"},
                    {"distortion": args.distortion, "alphas": alphas})
    log.info("config %s", cfg.to_json())
    model, features = load_model(args.model)
    dist = distortion_measure(model, args.distortion, features)
    rep = stability_probe(model, dist, alphas)
    print(f"baseline_tv = {rep.baseline_tv!r}")
    if rep.baseline_breaks:
        print("result = baseline optimum is not distribution preserving")
    elif rep.found:
        print(f"result = perturbation breaks preservation (alpha={rep.alpha!r}, "
              f"y={rep.y_label}, tv={rep.tv!r})")
    else:
        print(f"result = no break found among {rep.checked} perturbations")
    return EXIT_OK


# --- entry point ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pdtradeoff", description="Perception-distortion analysis on finite "
                                                "alphabets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-q", "--quiet", action="store_true", help="do not log the run configuration")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("curve", help="trace P(D) by solving the Lagrangian over a schedule")
    c.add_argument("model")
    c.add_argument("--divergence", default="kl",
                   choices=["tv", "kl", "js", "hellinger", "chi2", "w1"])
    c.add_argument("--distortion", default="square", choices=["square", "zero-one", "feature"])
    c.add_argument("--lambdas", help="comma-separated ascending multipliers "
                                     "(default: 24 log-spaced values in [1e-3, 1e3])")
    c.add_argument("--out", help="CSV path (default: standard output)")
    c.add_argument("--max-iters", type=int, default=5000)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--no-warm-start", action="store_true")
    c.add_argument("--endpoints", action="store_true",
                   help="add the D_min-side limit and the exact D_max point")
    c.set_defaults(func=cmd_curve)

    g = sub.add_parser("gaussian", help="closed-form curve of the scalar Gaussian example")
    g.add_argument("--sigma", type=float, required=True)
    g.add_argument("--d-grid", help="START:STOP:N (default: D_min to 2 D_0 - D_min, 101 points)")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gaussian)

    b = sub.add_parser("bounds", help="print D_min and D_max")
    b.add_argument("model")
    b.add_argument("--distortion", default="square", choices=["square", "zero-one", "feature"])
    b.set_defaults(func=cmd_bounds)

    e = sub.add_parser("estimators", help="emit a classical estimator kernel")
    e.add_argument("model")
    e.add_argument("--which", default="mmse", choices=["mmse", "map", "ps", "rand"])
    e.add_argument("--report", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimators)

    pl = sub.add_parser("plane", help="admissible set, SVG scatter and table of score records")
    pl.add_argument("records")
    pl.add_argument("--out-svg")
    pl.add_argument("--out-csv")
    pl.add_argument("--weak", action="store_true", help="use weak dominance")
    pl.set_defaults(func=cmd_plane)

    pr = sub.add_parser("probe", help="search for a perturbation breaking p_Xhat = p_X")
    pr.add_argument("model")
    pr.add_argument("--distortion", default="square", choices=["square", "zero-one", "feature"])
    pr.add_argument("--alphas", default="0.9,0.5,0.1")
    pr.set_defaults(func=cmd_probe)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pdtradeoff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IoFailure as exc:
        print(f"pdtradeoff: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PDError as exc:
        print(f"pdtradeoff: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"pdtradeoff: io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
