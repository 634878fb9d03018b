"""Command-line entry point: ``qgpbo {regress,bayesopt,benchmark}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 benchmark
suite failure. Every output directory receives ``config.json`` with the fully
resolved configuration; identical configuration and seed give byte-identical
files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import experiments
from .benchmark import FAULTS, run_suites
from .errors import ConfigError
from .qkernel import write_gram_csv

log = logging.getLogger("qgpbo")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_BENCHMARK = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="qgpbo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("regress", "1-D quantum GP regression on x sin(x)"),
        ("bayesopt", "Bayesian optimization benchmark"),
        ("benchmark", "oracle-equivalence and invariant suites"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="JSON config file (keys as in config.json outputs)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", type=Path, default=Path("out") / name, help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("regress", "bayesopt"):
            p.add_argument("--shots", type=int, help="shots per kernel entry in SAMPLED mode")
            p.add_argument("--qubits", type=int, help="feature-map qubits")
            p.add_argument("--layers", type=int, help="feature-map layers")
        if name == "regress":
            p.add_argument("--modes", help="comma-separated kernel modes, e.g. EXACT,SAMPLED")
            p.add_argument("--budget", type=int, help="likelihood evaluations for angle training")
            p.add_argument("--no-train", action="store_true", help="keep the random initial angles")
        if name == "bayesopt":
            p.add_argument("--reps", type=int, help="independent repetitions")
            p.add_argument("--iters", type=int, help="BO iterations after the initial design")
            p.add_argument("--surrogate", action="append",
                           help=f"surrogate to run (repeatable): {', '.join(experiments.SURROGATES)}")
            p.add_argument("--objective-cmd", help="external objective command (point in, scalar out)")
            p.add_argument("--bounds", help="bounds for the external objective as JSON, e.g. [[0,1],[0,5]]")
            p.add_argument("--workers", type=int, help="parallel processes for repetitions")
        if name == "benchmark":
            p.add_argument("--inject-fault", action="append", default=[], choices=FAULTS,
                           help=argparse.SUPPRESS)
    return parser


def _overrides(args):
    o = {}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.command in ("regress", "bayesopt"):
        fm = {k: v for k, v in (("num_qubits", args.qubits), ("num_layers", args.layers)) if v is not None}
        if fm:
            o["feature_map"] = fm
        if args.shots is not None:
            o["kernel"] = {"shots": args.shots}
    if args.command == "regress":
        if args.modes:
            o.setdefault("kernel", {})["modes"] = [m.strip().upper() for m in args.modes.split(",")]
        training = {}
        if args.budget is not None:
            training["budget"] = args.budget
        if args.no_train:
            training["enabled"] = False
        if training:
            o["training"] = training
    if args.command == "bayesopt":
        for key, val in (("repetitions", args.reps), ("n_iter", args.iters), ("workers", args.workers)):
            if val is not None:
                o[key] = val
        if args.surrogate:
            o["surrogates"] = [s for item in args.surrogate for s in item.split(",")]
        obj = {}
        if args.objective_cmd:
            obj["command"] = args.objective_cmd
        if args.bounds:
            try:
                obj["bounds"] = json.loads(args.bounds)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--bounds is not valid JSON: {exc}") from None
        if obj:
            o["objective"] = obj
    return o


# -- output helpers -----------------------------------------------------------


def _write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _via_file(writer):
    """Text produced by an object's ``to_csv``/``to_json(path)`` method."""
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "f"
        writer(p)
        return p.read_text()


# -- commands -------------------------------------------------------------------


def cmd_regress(cfg, out):
    res = experiments.run_regression(cfg)
    metrics = {
        "theta": res["theta"],
        "theta0": res["theta0"],
        "loss_history": res["loss_history"],
        "noise_var": res["noise_var"],
        "initial_mse": res.get("initial_mse"),
        "modes": {},
    }
    for mode, entry in res["modes"].items():
        rows = zip(res["x_test"], res["f_test"], entry["mean"], entry["std"])
        _write_atomic(out / f"predictions_{mode.lower()}.csv", _csv_text(["x", "true_f", "mean", "std"], rows))
        _write_atomic(out / f"gram_{mode.lower()}.csv", _via_file(lambda p, g=entry["gram"]: write_gram_csv(g, p)))
        metrics["modes"][mode] = {**entry["metrics"], "model": entry["summary"]}
        log.info("%s: MSE %.4f  R2 %.4f", mode, entry["metrics"]["mse"], entry["metrics"]["r2"])
    _write_atomic(out / "training_data.csv", _csv_text(["x", "y"], zip(res["x_train"], res["y_train"])))
    _write_atomic(out / "metrics.json", _json_text(metrics))


def cmd_bayesopt(cfg, out):
    runs = experiments.run_benchmark_bo(cfg)
    summary = {}
    for name, traces in runs.items():
        tag = name.lower()
        for rep, tr in enumerate(traces):
            _write_atomic(out / "traces" / f"{tag}_run{rep:03d}.csv", _via_file(tr.to_csv))
            _write_atomic(out / "traces" / f"{tag}_run{rep:03d}.json", _via_file(tr.to_json))
        mean, std = experiments.aggregate(traces)
        rows = zip(range(1, mean.size + 1), mean, std)
        _write_atomic(out / f"aggregate_{tag}.csv", _csv_text(["iteration", "mean_best_so_far", "std"], rows))
        summary[name] = {"final_mean_best": float(mean[-1]), "final_std": float(std[-1]), "runs": len(traces)}
        log.info("%s: final mean best-so-far %.4f (std %.4f)", name, mean[-1], std[-1])
    _write_atomic(out / "summary.json", _json_text(summary))


def cmd_benchmark(cfg, out, faults=()):
    report = run_suites(cfg["seed"], faults)
    _write_atomic(out / "report.json", _json_text(report))
    for name, r in report["suites"].items():
        log.info("%-22s %s  max error %.3g", name, "PASS" if r["passed"] else "FAIL", r["max_error"])
    return report["passed"]


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        user = json.loads(args.config.read_text()) if args.config else {}
        user.pop("command", None)
        cfg = experiments.resolve_config(args.command, user, _overrides(args))
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out
    try:
        _write_atomic(out / "config.json", _json_text(cfg))
        if args.command == "regress":
            cmd_regress(cfg, out)
        elif args.command == "bayesopt":
            cmd_bayesopt(cfg, out)
        elif not cmd_benchmark(cfg, out, args.inject_fault):
            failed = [n for n, r in json.loads((out / "report.json").read_text())["suites"].items()
                      if not r["passed"]]
            print(f"benchmark failed: {', '.join(failed)}", file=sys.stderr)
            return EXIT_BENCHMARK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 2
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
