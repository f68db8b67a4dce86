"""Command-line front end.

Every subcommand writes a table to ``--out`` (stdout by default) as CSV or
JSON lines. Lengths are in units of sigma unless ``--sigma`` says otherwise.
Parameters may also come from ``--config FILE`` (``key = value`` lines, keys
spelled like the long flags); a flag on the command line wins over the file.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .detection import (
    PixelDetector,
    alpha_beta_linearization,
    pixel_probabilities,
    split_probabilities,
    split_probabilities_linearized,
)
from .errors import NonConvergence, ValidationError
from .experiments import (
    EXPERIMENT_IDS,
    FIG5_EPSILONS,
    FIG5_NOTE,
    ExperimentRecord,
    _record,
    appendix_a_study,
    crossover_curve,
    qfi_vs_cfi_check,
    random_walk_records,
    run_random_walk,
    scaling_study,
    sweep_npixel_fisher,
)
from .inference import (
    crb_dmin,
    fisher_continuous,
    fisher_discrete,
    fisher_marginal,
    fisher_ratio,
    fisher_split,
    qfi_numeric,
)
from .model import BiphotonModel, make_stream, sample_pairs
from .numerics import QuadratureSpec
from .records_io import RECORD_COLUMNS, write_csv, write_jsonl

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_COMPUTE = 0, 2, 3, 4

STOCHASTIC = {"sample", "random-walk", "scaling", "appendix-a"}

# flag name -> (type, help); every flag is also a valid config-file key
FLAGS = {
    "sigma": (float, "pump waist, sets the unit of length (default 1)"),
    "epsilon": (str, "correlation width; comma-separated list where a sweep is accepted"),
    "d": (str, "displacement; comma-separated list where a sweep is accepted"),
    "pixels": (str, "pixel count(s) of the detector, comma-separated"),
    "extent": (float, "total detector width (default 10)"),
    "nu": (str, "number of events; comma-separated list for 'scaling'"),
    "replications": (int, "Monte Carlo replications"),
    "seed": (int, "RNG seed (required for stochastic subcommands)"),
    "snr": (float, "target signal-to-noise ratio (default 1)"),
    "rel-tol": (float, "quadrature relative tolerance (default 1e-10)"),
    "abs-tol": (float, "quadrature absolute tolerance (default 1e-13)"),
    "max-subdivisions": (int, "quadrature subdivision budget (default 200)"),
    "workers": (int, "threads for Monte Carlo replications (default 1)"),
    "out": (str, "output path (default stdout)"),
    "format": (str, "csv or jsonl (default csv)"),
}

RECORD_HELP = "columns: " + ",".join(RECORD_COLUMNS)

SUBCOMMANDS = {
    "fisher": "closed-form, discrete and quantum Fisher information for one model. " + RECORD_HELP,
    "probabilities": "split (and optional N-pixel) outcome tables with d-derivatives. " + RECORD_HELP,
    "sample": "raw coincidence events. columns: index,x1,x2",
    "random-walk": "net split signal per event (statistic net_signal, nu = event index). " + RECORD_HELP,
    "npixel-sweep": "Fisher information of N-pixel detection over an epsilon grid. " + RECORD_HELP,
    "crossover": "split-detection events needed for a target SNR versus d. " + RECORD_HELP,
    "scaling": "Monte Carlo resolution d_min versus number of events. " + RECORD_HELP,
    "appendix-a": "variance/covariance of averaged single-photon marginal estimators. " + RECORD_HELP,
    "qfi-check": "quantum versus classical Fisher information. " + RECORD_HELP,
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"

    def get(self, key, default=None):
        value = self.params.get(key)
        return default if value is None else value

    def floats(self, key, default):
        return _parse_list(self.get(key, default), float, key)

    def ints(self, key, default):
        return _parse_list(self.get(key, default), int, key)

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(
            rel_tol=float(self.get("rel-tol", 1e-10)),
            abs_tol=float(self.get("abs-tol", 1e-13)),
            max_subdivisions=int(self.get("max-subdivisions", 200)),
        )

    def seed(self) -> int:
        seed = self.params.get("seed")
        if seed is None:
            raise ValidationError(f"'{self.subcommand}' is stochastic and requires --seed")
        return int(seed)


def _parse_list(value, kind, key):
    if isinstance(value, (list, tuple)):
        return [kind(v) for v in value]
    try:
        return [kind(kind(float(v)) if kind is int else v) for v in str(value).split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"--{key}: cannot parse {value!r}") from exc


def read_config(path: str) -> dict:
    params = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("_", "-")
            if not sep or key not in FLAGS:
                raise UsageError(f"{path}:{n}: expected 'key = value' with a known flag name, got {raw.strip()!r}")
            params[key] = FLAGS[key][0](value.strip())
    return params


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for name, (kind, help_) in FLAGS.items():
        common.add_argument(f"--{name}", type=kind, default=None, help=help_)
    common.add_argument("--config", default=None, help="flat key = value file; flags override it")

    parser = argparse.ArgumentParser(prog="biphoton", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_ in SUBCOMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_.split(". ")[0], description=help_)
    return parser


def make_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    params = read_config(args.config) if args.config else {}
    for name in FLAGS:
        value = getattr(args, name.replace("-", "_"))
        if value is not None:
            params[name] = value
    fmt = params.pop("format", None) or "csv"
    if fmt not in ("csv", "jsonl", "json-lines"):
        raise UsageError(f"--format must be csv or jsonl, got {fmt!r}")
    out = params.pop("out", None)
    return RunConfig(args.subcommand, params, out, "jsonl" if fmt == "json-lines" else fmt)


# -- subcommands ------------------------------------------------------------------


def _model(cfg, epsilon=None, d=None, eps_default=1.0, d_default=0.0):
    eps = epsilon if epsilon is not None else cfg.floats("epsilon", eps_default)[0]
    dd = d if d is not None else cfg.floats("d", d_default)[0]
    return BiphotonModel(float(cfg.get("sigma", 1.0)), eps, dd)


def _cmd_fisher(cfg):
    m = _model(cfg)
    spec = cfg.quadrature()
    nu = cfg.ints("nu", 1)[0]
    exp = "fisher"
    rows = [_record(exp, m, statistic="fisher_marginal", value=fisher_marginal(m).value)]
    exact = fisher_discrete(split_probabilities(m, spec))
    rows.append(_record(exp, m, statistic="fisher_split_exact", value=exact.value))
    if not m.is_delta_limit:
        cont = fisher_continuous(m).value
        rows += [
            _record(exp, m, statistic="fisher_continuous", value=cont),
            _record(exp, m, statistic="fisher_split_closed_form", value=fisher_split(m).value),
            _record(exp, m, statistic="qfi_numeric", value=qfi_numeric(m, spec).value),
            _record(exp, m, statistic="ratio_continuous", value=fisher_ratio(m, "continuous")),
            _record(exp, m, statistic="ratio_split", value=fisher_ratio(m, "split")),
            _record(exp, m, statistic="dmin_continuous", value=crb_dmin(cont, nu), nu=nu),
        ]
    for n in cfg.ints("pixels", "") or []:
        det = PixelDetector(n, float(cfg.get("extent", 10.0)))
        value = fisher_discrete(pixel_probabilities(m, det, spec)).value
        rows.append(_record(exp, m, statistic="fisher_pixels", value=value, n_pixels=n))
    alpha, beta = alpha_beta_linearization(m)
    rows += [_record(exp, m, statistic="alpha", value=alpha), _record(exp, m, statistic="beta", value=beta)]
    return rows


def _table_rows(exp, m, tag, dist, n_pixels):
    rows = []
    for label, p, dp in dist.outcomes:
        rows.append(_record(exp, m, statistic=f"{tag}:P[{label}]", value=p, n_pixels=n_pixels))
        rows.append(_record(exp, m, statistic=f"{tag}:dP/dd[{label}]", value=dp, n_pixels=n_pixels))
    return rows


def _cmd_probabilities(cfg):
    m = _model(cfg)
    spec = cfg.quadrature()
    tag = "split_delta" if m.is_delta_limit else "split_exact"
    rows = _table_rows("probabilities", m, tag, split_probabilities(m, spec), 2)
    if not m.is_delta_limit:
        rows += _table_rows("probabilities", m, "split_linearized", split_probabilities_linearized(m), 2)
        for n in cfg.ints("pixels", "") or []:
            det = PixelDetector(n, float(cfg.get("extent", 10.0)))
            rows += _table_rows("probabilities", m, f"pixels{n}", pixel_probabilities(m, det, spec), n)
    return rows


def _cmd_sample(cfg):
    m = _model(cfg)
    nu = cfg.ints("nu", 1000)[0]
    x1, x2 = sample_pairs(m, nu, make_stream(cfg.seed(), EXPERIMENT_IDS["sample"]))
    columns = ("index", "x1", "x2")
    return columns, [dict(index=k, x1=a, x2=b) for k, (a, b) in enumerate(zip(x1.tolist(), x2.tolist()))]


def _cmd_random_walk(cfg):
    seed = cfg.seed()
    nu = cfg.ints("nu", 10_000)[0]
    rows = []
    for eps in cfg.floats("epsilon", "1,0.01"):
        m = _model(cfg, epsilon=eps, d_default=0.1)
        trace = run_random_walk(m, nu, seed)
        rows += random_walk_records(m, trace, seed)
        rows += [
            _record("random-walk", m, statistic="net_signal", value=int(v), nu=k + 1, seed=seed)
            for k, v in enumerate(trace.net.tolist())
        ]
    return rows


def _cmd_npixel_sweep(cfg):
    eps = cfg.floats("epsilon", ",".join(repr(float(e)) for e in np.logspace(-2, 0, 20)))
    return sweep_npixel_fisher(
        float(cfg.get("sigma", 1.0)),
        cfg.floats("d", 0.05)[0],
        cfg.ints("pixels", "2,10,50"),
        float(cfg.get("extent", 10.0)),
        eps,
        cfg.quadrature(),
    )


def _cmd_crossover(cfg):
    d_grid = cfg.floats("d", ",".join(repr(float(x)) for x in np.logspace(-4, 0, 41)))
    eps = cfg.floats("epsilon", ",".join(str(e) for e in FIG5_EPSILONS))
    return crossover_curve(float(cfg.get("sigma", 1.0)), eps, d_grid, float(cfg.get("snr", 1.0)), cfg.quadrature())


def _cmd_scaling(cfg):
    m = _model(cfg, eps_default=0.01)
    nus = cfg.ints("nu", "10,15,20,30,50,100,300,1000,3000,10000")
    return scaling_study(m, nus, int(cfg.get("replications", 2000)), cfg.seed(),
                         workers=int(cfg.get("workers", 1)))


def _cmd_appendix_a(cfg):
    m = _model(cfg, eps_default=0.5, d_default=0.01)
    weights = [round(0.1 * k, 10) for k in range(11)]
    return appendix_a_study(m, cfg.ints("nu", 1000)[0], int(cfg.get("replications", 2000)), weights,
                            cfg.seed(), workers=int(cfg.get("workers", 1)))


def _cmd_qfi_check(cfg):
    sigma = float(cfg.get("sigma", 1.0))
    models = [BiphotonModel(sigma, e, d) for e in cfg.floats("epsilon", "0.25,0.5,1") for d in cfg.floats("d", "0,0.2")]
    return qfi_vs_cfi_check(models, cfg.quadrature())


HANDLERS: dict[str, Callable] = {
    "fisher": _cmd_fisher,
    "probabilities": _cmd_probabilities,
    "sample": _cmd_sample,
    "random-walk": _cmd_random_walk,
    "npixel-sweep": _cmd_npixel_sweep,
    "crossover": _cmd_crossover,
    "scaling": _cmd_scaling,
    "appendix-a": _cmd_appendix_a,
    "qfi-check": _cmd_qfi_check,
}


def dispatch(cfg: RunConfig, stdout=None) -> int:
    """Run one subcommand and write its table; returns the process exit status."""
    stdout = stdout or sys.stdout
    result = HANDLERS[cfg.subcommand](cfg)
    if isinstance(result, tuple):
        columns, rows = result
    else:
        columns, rows = RECORD_COLUMNS, [r.as_dict() for r in result]
    metadata = {"subcommand": cfg.subcommand, "version": __version__}
    metadata.update({k: v for k, v in sorted(cfg.params.items())})
    metadata["format"] = cfg.format
    if cfg.subcommand == "crossover":
        metadata["note"] = FIG5_NOTE
    if cfg.subcommand == "random-walk" and "d" not in cfg.params:
        metadata["d_default"] = "0.1 (drift displacement chosen for the trace)"
    writer = write_csv if cfg.format == "csv" else write_jsonl
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            writer(fh, columns, rows, metadata)
    else:
        writer(stdout, columns, rows, metadata)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
        if cfg.subcommand in STOCHASTIC:
            cfg.seed()
        return dispatch(cfg)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"biphoton: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"biphoton: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NonConvergence as exc:
        print(f"biphoton: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
