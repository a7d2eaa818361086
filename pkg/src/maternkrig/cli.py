"""Command-line interface.

Subcommands::

    maternkrig kernel      evaluate correlations or spectral densities
    maternkrig design      generate a design and report h, q, rho
    maternkrig krige       fit on CSV data and predict at query points
    maternkrig experiment  run convergence-rate studies

Errors exit nonzero with a single stderr line ``maternkrig: error: <kind>: <message>``.
Argument errors exit with status 2 (argparse convention).
"""
import argparse
import csv
from datetime import datetime, timezone
import hashlib
import json
import logging
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .designs import SCHEMES, Domain, design_metrics, make_design, read_design_csv, write_design_csv
from .exceptions import (
    ConfigurationError,
    ContractError,
    DegenerateDesignError,
    ExperimentError,
    IllConditionedError,
)
from .experiments import ExperimentConfig, Table2Row, run_rate_study, table2_configs
from .gp import fit_kriging, power_function, quasi_power
from .kernels import MATERN, KernelSpec, correlation, matern_spectral

log = logging.getLogger("maternkrig")

OUTPUT_DIR_ENV = "MATERNKRIG_OUTPUT_DIR"
REPORT_COLUMNS = [
    "nu0", "nu", "scheme", "n_list", "estimated_slope", "theoretical_slope",
    "relative_difference", "r_squared", "dropped_replications",
]


def fmt(x):
    """Six significant digits for CSV output."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _kernel_from_args(args, parser):
    family = args.family
    if family == MATERN and args.nu is None:
        parser.error("--nu is required for the matern family")
    fields = {"family": family, "phi": args.phi, "sigma2": args.sigma2}
    if args.nu is not None:
        fields["nu"] = args.nu
    if args.kappa is not None:
        fields["kappa"] = args.kappa
    if args.mu is not None:
        fields["mu"] = args.mu
    return KernelSpec(**fields)


def _add_kernel_flags(p, prefix="", required_family=False):
    p.add_argument(f"--{prefix}family", default=MATERN, choices=["matern", "wendland"])
    p.add_argument(f"--{prefix}nu", type=float, default=None, help="Matérn smoothness")
    p.add_argument(f"--{prefix}phi", type=float, default=1.0, help="inverse length-scale")
    p.add_argument(f"--{prefix}kappa", type=float, default=None, help="generalized Wendland kappa")
    p.add_argument(f"--{prefix}mu", type=float, default=None, help="generalized Wendland mu")
    p.add_argument(f"--{prefix}sigma2", type=float, default=1.0, help="process variance")


def cmd_kernel(args, parser):
    spec = _kernel_from_args(args, parser)
    spec.check_dimension(args.dim)
    out = _csv_writer(sys.stdout)
    if args.r:
        out.writerow(["r", "correlation"])
        vals = np.atleast_1d(correlation(spec, np.array(args.r), dim=args.dim))
        for r, v in zip(args.r, vals):
            out.writerow([fmt(r), fmt(v)])
    if args.omega:
        if spec.family != MATERN:
            raise ConfigurationError("spectral densities are only available for the Matérn family")
        out.writerow(["omega", "spectral_density"])
        vals = np.atleast_1d(matern_spectral(spec, np.array(args.omega), dim=args.dim))
        for w, v in zip(args.omega, vals):
            out.writerow([fmt(w), fmt(v)])
    if not args.r and not args.omega:
        parser.error("give at least one --r or --omega value")
    return 0


def _parse_bounds(text, dim):
    if text is None:
        return Domain(dim)
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2 * dim:
        raise ConfigurationError(f"--bounds needs {2 * dim} numbers lo1,hi1,...")
    return Domain(dim, tuple(zip(parts[0::2], parts[1::2])))


def cmd_design(args, parser):
    domain = _parse_bounds(args.bounds, args.dim)
    if args.scheme == "external":
        parser.error("use --scheme random, grid or halton")
    design = make_design(args.scheme, domain, args.n, args.seed)
    if args.out:
        write_design_csv(design, args.out, header=args.header)
        metrics_stream = sys.stdout
    else:
        write_design_csv(design, sys.stdout, header=args.header)
        metrics_stream = sys.stderr
    if design.n >= 2:
        m = design_metrics(design, args.resolution)
        line = f"h={fmt(m.fill_distance)} q={fmt(m.separation_radius)} rho={fmt(m.mesh_ratio)} exact={fmt(m.fill_is_exact)}"
    else:
        line = "h= q= rho= exact="
    print(line, file=metrics_stream)
    return 0


def _read_column(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        return np.array([float(r[-1]) for r in rows])
    except ValueError:
        return np.array([float(r[-1]) for r in rows[1:]])


def cmd_krige(args, parser):
    imposed = _kernel_from_args(args, parser)
    design = read_design_csv(args.design)
    y = _read_column(args.observations)
    query = read_design_csv(args.at, domain=None).points
    model = fit_kriging(design, y, imposed)
    pred = model.predict(query)
    cols = [f"x{i + 1}" for i in range(query.shape[1])] + ["prediction"]
    extra = []
    if args.true_nu is not None:
        true = KernelSpec.matern(args.true_nu, args.true_phi or imposed.phi, args.sigma2)
        extra = [quasi_power(true, imposed, design, query), power_function(true, design, query)]
        cols += ["quasi_power", "power"]
    dest = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        out = _csv_writer(dest)
        out.writerow(cols)
        for i, row in enumerate(query):
            out.writerow([fmt(v) for v in row] + [fmt(pred[i])] + [fmt(e[i]) for e in extra])
    finally:
        if args.out:
            dest.close()
    if model.jitter_used_:
        log.warning("factorization needed jitter %g; interpolation is approximate", model.jitter_used_)
    return 0


def _parse_sizes(text):
    if ":" in text:
        lo, hi, step = (int(v) for v in text.split(":"))
        return tuple(range(lo, hi + 1, step))
    return tuple(int(v) for v in text.split(","))


def _norm_fields(name, p):
    name = name.lower()
    if name == "sup":
        return {"norm": "sup"}
    if name in ("l1", "l2"):
        return {"norm": "lp", "p": float(name[1])}
    if name == "lp":
        return {"norm": "lp", "p": p}
    raise ConfigurationError(f"unknown norm {name!r}")


def resolve_experiment_configs(args):
    """Build the list of ExperimentConfig from a config file, a preset, or inline flags.

    Command-line flags override values from the file.
    """
    file_data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_data, dict):
            raise ConfigurationError("config file must hold a JSON object")
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.sample_sizes is not None:
        overrides["sample_sizes"] = _parse_sizes(args.sample_sizes)
    if args.phi is not None:
        overrides["phi"] = args.phi
    if args.phi_imposed is not None:
        overrides["phi_imposed"] = args.phi_imposed
    if args.sigma2 is not None:
        overrides["sigma2"] = args.sigma2
    if args.eval_points is not None:
        overrides["eval_points"] = args.eval_points
    if args.norm is not None:
        overrides.update(_norm_fields(args.norm, args.p))

    preset = args.preset or file_data.get("preset")
    defaults = {k: v for k, v in file_data.items() if k not in ("preset", "experiments", "threads")}
    if preset is not None:
        if preset != "table2":
            raise ConfigurationError(f"unknown preset {preset!r}")
        base = {**defaults, **overrides}
        return table2_configs(**base)
    entries = file_data.get("experiments")
    if entries is None:
        entry = {}
        if args.nu0 is not None:
            entry["nu0"] = args.nu0
        if args.nu is not None:
            entry["nu"] = args.nu
        if args.scheme is not None:
            entry["scheme"] = args.scheme
        entries = [entry]
    configs = []
    for entry in entries:
        merged = {**defaults, **entry, **overrides}
        if args.scheme is not None:
            merged["scheme"] = args.scheme
        if "nu0" not in merged or "nu" not in merged:
            raise ConfigurationError("experiment needs nu0 and nu (or --preset table2)")
        configs.append(ExperimentConfig.from_dict(merged))
    return configs


def configs_hash(configs):
    blob = json.dumps([c.to_dict() for c in configs], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_report(rows, dest):
    out = _csv_writer(dest)
    out.writerow(REPORT_COLUMNS)
    for r in rows:
        out.writerow([
            fmt(r.nu0), fmt(r.nu), r.scheme, ";".join(str(n) for n in r.sample_sizes),
            fmt(r.estimated_slope), fmt(r.theoretical.value), fmt(r.relative_difference),
            fmt(r.r_squared), fmt(r.dropped_replications),
        ])


def write_plot_data(fits, dest):
    out = _csv_writer(dest)
    out.writerow(["nu0", "nu", "scheme", "log_inv_n", "log_mean_error"])
    for fit in fits:
        cfg = fit.config
        for x, y in fit.plot_data():
            out.writerow([fmt(cfg.nu0), fmt(cfg.nu), cfg.scheme, repr(x), repr(y)])


def write_svg(fits, path):
    try:
        import matplotlib
    except ImportError:
        raise ConfigurationError("--svg needs matplotlib (pip install maternkrig[plot])") from None

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    pairs = sorted({(f.config.nu0, f.config.nu) for f in fits})
    fig, axes = plt.subplots(1, len(pairs), figsize=(4 * len(pairs), 3.5), squeeze=False)
    for ax, pair in zip(axes[0], pairs):
        for fit in fits:
            if (fit.config.nu0, fit.config.nu) != pair:
                continue
            xy = np.array(fit.plot_data())
            pts = ax.plot(xy[:, 0], xy[:, 1], "o", label=f"{fit.config.scheme} (slope {fit.slope:.3f})")
            ax.plot(xy[:, 0], fit.slope * xy[:, 0] + fit.intercept, "-", color=pts[0].get_color())
        ax.set_title(f"nu0={pair[0]:g}, nu={pair[1]:g}")
        ax.set_xlabel("log(1/n)")
        ax.set_ylabel("log mean error")
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_experiment(args, parser):
    configs = resolve_experiment_configs(args)
    out_dir = Path(args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    started = datetime.now(timezone.utc).isoformat()
    fits = []
    for cfg in configs:
        log.info("running nu0=%g nu=%g scheme=%s", cfg.nu0, cfg.nu, cfg.scheme)
        fits.append(run_rate_study(cfg, n_jobs=threads))
    rows = [Table2Row.from_fit(f) for f in fits]
    finished = datetime.now(timezone.utc).isoformat()

    with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as fh:
        write_report(rows, fh)
    audit = {"tool_version": __version__, "results": [f.to_dict() for f in fits]}
    with open(out_dir / "audit.json", "w", encoding="utf-8") as fh:
        json.dump(audit, fh, indent=1, sort_keys=True)
        fh.write("\n")
    manifest = {
        "config_hash": configs_hash(configs),
        "tool_version": __version__,
        "base_seed": sorted({c.base_seed for c in configs}),
        "started": started,
        "finished": finished,
        "threads": threads,
        "configs": [c.to_dict() for c in configs],
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if args.plot_data:
        with open(out_dir / "plot_data.csv", "w", newline="", encoding="utf-8") as fh:
            write_plot_data(fits, fh)
    if args.svg:
        write_svg(fits, out_dir / "regression.svg")
    write_report(rows, sys.stdout)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="maternkrig", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="evaluate a correlation function")
    _add_kernel_flags(p)
    p.add_argument("--r", type=float, nargs="+", help="distances")
    p.add_argument("--omega", type=float, nargs="+", help="frequency norms (Matérn spectral density)")
    p.add_argument("--dim", type=int, default=1)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("design", help="generate a design and its space-filling metrics")
    p.add_argument("--scheme", required=True, choices=[s for s in SCHEMES if s != "external"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--bounds", help="lo1,hi1,lo2,hi2,... (default unit cube)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="points CSV path (default stdout)")
    p.add_argument("--header", action="store_true", help="write a header row")
    p.add_argument("--resolution", type=int, default=101, help="lattice nodes per axis for d > 1")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("krige", help="fit a kriging interpolant on CSV data and predict")
    _add_kernel_flags(p)
    p.add_argument("--design", required=True, help="design points CSV")
    p.add_argument("--observations", required=True, help="CSV with one observation per row")
    p.add_argument("--at", required=True, help="query points CSV")
    p.add_argument("--true-nu", type=float, help="also report power and quasi-power for this true smoothness")
    p.add_argument("--true-phi", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_krige)

    p = sub.add_parser("experiment", help="run convergence-rate studies")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--preset", choices=["table2"])
    p.add_argument("--nu0", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--scheme", choices=["random", "grid", "halton"])
    p.add_argument("--phi", type=float)
    p.add_argument("--phi-imposed", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--replications", type=int)
    p.add_argument("--sample-sizes", help="comma list or lo:hi:step")
    p.add_argument("--eval-points", type=int)
    p.add_argument("--norm", help="sup, l1, l2 or lp")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    p.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--plot-data", action="store_true", help="write plot_data.csv")
    p.add_argument("--svg", action="store_true", help="write regression.svg")
    p.set_defaults(func=cmd_experiment)
    return parser


_ERROR_KINDS = (
    (IllConditionedError, "ill-conditioned"),
    (DegenerateDesignError, "degenerate-design"),
    (ContractError, "contract"),
    (ConfigurationError, "config"),
    (ExperimentError, "experiment"),
    (OSError, "io"),
    (ValueError, "value"),
)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args, parser)
    except Exception as exc:
        for cls, kind in _ERROR_KINDS:
            if isinstance(exc, cls):
                msg = str(exc).replace("\n", " ")
                print(f"maternkrig: error: {kind}: {msg}", file=sys.stderr)
                return 1
        raise
