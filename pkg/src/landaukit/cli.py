"""Command-line entry point: ``landaukit <subcommand> [options]``.

Exit codes: 0 success, 1 invalid configuration or refused overwrite,
2 aborted run (non-finite field), 3 failed selftest.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, describe_keys, load_config
from .diagnostics import ExpMomentSpec, TruncationWarning, bimodal, maxwellian, moments
from .dyadic import NormSpec, evaluate_norm
from .experiments import (
    DOMAIN_NOTE,
    PreconditionError,
    RoughDataSpec,
    exp_tailed_data,
    moment_propagation,
    relaxation,
    rough_data,
    rough_fourier_field,
    smoothing_rate,
    write_outputs,
)
from .grid import FieldFormatError, ScalarField, VelocityGrid, load_field, save_field, set_deterministic, set_threads
from .integrator import AbortedRunError, Model, run
from .selftest import CHECKS, run_suite

__all__ = ["main", "build_parser", "initial_data"]

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED, EXIT_SELFTEST = 0, 1, 2, 3

def _quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return fn(*args, **kwargs)


def initial_data(cfg: RunConfig) -> ScalarField:
    """Build the field selected by ``[data] kind`` on the ``[grid]`` grid."""
    d = cfg["data"]
    kind = d["kind"]
    if kind == "checkpoint":
        try:
            return load_field(d["path"])
        except (OSError, FieldFormatError) as exc:
            raise ConfigError(f"data.path: {exc}") from None
    g = VelocityGrid(**cfg["grid"])
    if kind == "maxwellian":
        return _quiet(maxwellian, d["rho"], 0.0, d["T"], g)
    if kind == "bimodal":
        return bimodal(g, d["shift"], d["T"])
    if kind == "rough-fourier":
        return rough_fourier_field(g, d["r"], d["delta"], cfg["run"]["seed"], d["amplitude"])
    if kind == "rough-maxwellian":
        X = rough_fourier_field(g, d["r"], d["delta"], cfg["run"]["seed"]).values
        mu = _quiet(maxwellian, d["rho"], 0.0, d["T"], g).values
        return ScalarField(g, mu * (1.0 + 0.9 * np.tanh(X / np.std(X))))
    if kind == "rough-translate":
        spec = RoughDataSpec(J=d["J"], l=d["l"], eps=d["eps"], alpha=d["alpha"], radius=d["radius"])
        return rough_data(spec, g, besov=False).field
    return exp_tailed_data(g, d["b"], d["beta"], d["weight"])


def _prepare_dir(path: Path, force: bool) -> Path:
    if path.exists() and any(path.iterdir()) and not force:
        raise ConfigError(f"output directory {path} is not empty (use --force to overwrite)")
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------- subcommands


def cmd_run(cfg: RunConfig, args) -> int:
    out = _prepare_dir(Path(cfg["output"]["dir"]), args.force)
    cfg.write_json(out)
    f0 = initial_data(cfg)
    res = run(Model(cfg["run"]["model"]), f0, cfg.scheme_config(), checkpoint_dir=out / "checkpoint")
    res.record.to_csv(out / "series.csv")
    save_field(out / "final.ldnf", res.field)
    norms = [evaluate_norm(NormSpec.parse(s), res.field).to_dict() for s in cfg["diagnostics"]["norms"]]
    report = {"experiment": "run", "domain_note": DOMAIN_NOTE, "t": res.t, "steps": res.steps,
              "flags": res.record.flags, "norms": norms}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    return EXIT_OK


def cmd_norms(cfg: RunConfig, args) -> int:
    try:
        f = load_field(args.field)
    except (OSError, FieldFormatError) as exc:
        raise ConfigError(str(exc)) from None
    specs = args.spec or list(cfg["diagnostics"]["norms"]) or ["m=0,s=0,l=0"]
    for text in specs:
        try:
            spec = NormSpec.parse(text)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        print(evaluate_norm(spec, f, method=args.method).to_json())
    return EXIT_OK


def cmd_rates(cfg: RunConfig, args) -> int:
    out = _prepare_dir(Path(cfg["output"]["dir"]), args.force)
    cfg.write_json(out)
    f0 = initial_data(cfg)
    rc = cfg["rates"]
    r = cfg["data"]["r"]
    specs = [NormSpec(m=n, l=rc["l"] - 1.5 * n + 1.5 * r) for n in rc["orders"]]
    reference = None
    if rc["reference"] == "maxwellian":
        m = moments(f0)
        reference = _quiet(maxwellian, m.rho, m.u, m.T, f0.grid)
    window = tuple(rc["window"])
    smoothing_rate(cfg["run"]["model"], f0, specs, window, r, samples=rc["samples"],
                   tolerance=rc["tolerance"], cfg=cfg.scheme_config(t_end=max(window[1], cfg["scheme"]["t_end"])),
                   reference=reference, out_dir=out)
    return EXIT_OK


def cmd_rough(cfg: RunConfig, args) -> int:
    out = _prepare_dir(Path(cfg["output"]["dir"]), args.force)
    cfg.write_json(out)
    d = cfg["data"]
    spec = RoughDataSpec(J=d["J"], l=d["l"], eps=d["eps"], alpha=d["alpha"], radius=d["radius"])
    rd = rough_data(spec, VelocityGrid(**cfg["grid"]))
    save_field(out / "field.ldnf", rd.field)
    rows = [[j, rd.terms[j], rd.partial_sums[j]] for j in range(len(rd.terms))]
    write_outputs(out, {"experiment": "rough", **rd.to_dict()}, ["J", "term", "S_J"], rows)
    return EXIT_OK


def cmd_moments(cfg: RunConfig, args) -> int:
    out = _prepare_dir(Path(cfg["output"]["dir"]), args.force)
    cfg.write_json(out)
    mc = cfg["moments"]
    moment_propagation(initial_data(cfg), ExpMomentSpec(a=mc["a"], beta=mc["beta"]),
                       tail_rate=cfg["data"]["b"], t_end=cfg["scheme"]["t_end"],
                       cfg=cfg.scheme_config(), model=cfg["run"]["model"], out_dir=out)
    return EXIT_OK


def cmd_relax(cfg: RunConfig, args) -> int:
    out = _prepare_dir(Path(cfg["output"]["dir"]), args.force)
    cfg.write_json(out)
    relaxation(initial_data(cfg), t_end=cfg["scheme"]["t_end"], cfg=cfg.scheme_config(), out_dir=out)
    return EXIT_OK


def cmd_selftest(cfg: RunConfig, args) -> int:
    out = _prepare_dir(Path(cfg["output"]["dir"]), args.force)
    cfg.write_json(out, extra={"selftest": {"fast": args.fast, "only": args.only}})
    checks = run_suite(fast=args.fast, only=args.only)
    failed = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        failed += not c.passed
        print(f"{status} [{c.criterion}] {c.name}: {c.value:.4g} {c.relation} {c.threshold:g}")
    report = {"experiment": "selftest", "domain_note": DOMAIN_NOTE, "fast": args.fast, "failed": failed,
              "checks": [c.to_dict() for c in checks]}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    return EXIT_SELFTEST if failed else EXIT_OK


COMMANDS = {
    "run": (cmd_run, "integrate the configured model and record diagnostics"),
    "norms": (cmd_norms, "evaluate weighted Sobolev norms on a .ldnf field"),
    "rates": (cmd_rates, "fit smoothing rates t^(-n/2 + r/2)"),
    "rough": (cmd_rough, "build rough translate data and its Besov partial sums"),
    "moments": (cmd_moments, "track an exponential moment along a run"),
    "relax": (cmd_relax, "relaxation towards the Maxwellian of the initial data"),
    "selftest": (cmd_selftest, "run the invariant suite (exit 3 on failure)"),
}


def build_parser() -> argparse.ArgumentParser:
    epilog = ("configuration keys (file sections, or --set section.key=value):\n"
              + describe_keys()
              + "\n\nexit codes: 0 ok, 1 invalid config / refused overwrite, 2 aborted run, 3 selftest failure")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI-style configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--force", action="store_true", help="write into a non-empty output directory")
    common.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    common.add_argument("--deterministic", action="store_true",
                        help="single-threaded transforms for bit-identical output")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser = argparse.ArgumentParser(prog="landaukit", description=__doc__.splitlines()[0],
                                     epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}
    for name, (_, helptext) in COMMANDS.items():
        subs[name] = sub.add_parser(name, parents=[common], help=helptext, description=helptext,
                                    epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    subs["norms"].add_argument("field", type=Path, help=".ldnf field file")
    subs["norms"].add_argument("--spec", action="append", help="norm spec m=..,s=..,l=.. (repeatable)")
    subs["norms"].add_argument("--method", choices=("direct", "dyadic"), default="direct")
    subs["selftest"].add_argument("--fast", action="store_true", help="reduced suite for CI")
    subs["selftest"].add_argument("--only", action="append", choices=list(CHECKS),
                                  help="restrict to one check group (repeatable)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        set_threads(args.threads)
        set_deterministic(args.deterministic)
        cfg = load_config(args.config, args.overrides)
        return COMMANDS[args.command][0](cfg, args)
    except (ConfigError, PreconditionError, ValueError) as exc:
        print(f"landaukit: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AbortedRunError as exc:
        print(f"landaukit: run aborted: {exc} (checkpoint: {exc.checkpoint})", file=sys.stderr)
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
