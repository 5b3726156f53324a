"""Main entry point for the entrofact command line."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import TYPE_CHECKING

from rich.console import Console
from rich.table import Table

from .config import ExperimentConfig, parse_range
from .errors import EXIT_OK, EXIT_USAGE, ConfigError, EntrofactError
from .runner import ExperimentRunner, setup_logging

if TYPE_CHECKING:
    from .checks.base import CheckReport

STATUS_STYLE = {"pass": "green", "fail": "red", "skipped": "yellow", "error": "bold red"}


def _common_flags() -> argparse.ArgumentParser:
    """Flags accepted both before and after the subcommand; absent flags leave the config alone."""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", "-c", type=Path, help="Path to configuration file")
    common.add_argument("--seed", type=int, help="Seed for every stochastic step")
    common.add_argument("--threads", type=int, help="Worker count (falls back to ENTROFACT_THREADS)")
    common.add_argument("--cap-states", type=int, dest="cap_states", help="State-space cap for exact tables")
    common.add_argument("--out", type=Path, help="Output directory for run artifacts")
    common.add_argument("--model", choices=("ising", "potts", "hardcore", "colorings"), help="Model name")
    common.add_argument("--beta", type=float, help="Inverse temperature")
    common.add_argument("--field", type=float, help="External field (Ising)")
    common.add_argument("--q", type=int, help="Number of spin values (Potts, colorings)")
    common.add_argument("--lam", type=float, help="Fugacity (hard-core)")
    common.add_argument("--chain", help="Chain length, or a range such as 2..8")
    common.add_argument("--shape", help="Rectangle shape such as 3x3")
    common.add_argument("--log-level", dest="log_level", help="Console log level")
    return common


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Build the CLI argument parser and return parsed arguments."""
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="entrofact",
        description="Exact checks of entropy factorization and block dynamics for lattice spin systems",
        parents=[common],
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    verify_parser = subparsers.add_parser("verify", parents=[common], help="Run verification checks")
    verify_parser.add_argument("--preset", action="append", default=[], help="Named check preset (repeatable)")
    verify_parser.add_argument("--check", action="append", default=[], help="Single check name (repeatable)")

    subparsers.add_parser("run", parents=[common], help="Run the checks listed in the config file")

    constants_parser = subparsers.add_parser("constants", parents=[common], help="Estimate factorization constants")
    constants_parser.add_argument("--scales", type=int, default=0, help="Also compute delta(k) for k = 1..N")

    ssm_parser = subparsers.add_parser("ssm", parents=[common], help="Fit strong spatial mixing constants")
    ssm_parser.add_argument(
        "--condition", nargs=2, type=float, metavar=("K", "A"), default=None, help="Also check the condition"
    )

    subparsers.add_parser("dynamics", parents=[common], help="Spectral gap and mixing curve of the block dynamics")

    geometry_parser = subparsers.add_parser("geometry", parents=[common], help="Verify the decomposition geometry")
    geometry_parser.add_argument("--dim", type=int, default=2, help="Lattice dimension")
    geometry_parser.add_argument("--k", type=int, action="append", default=[], help="Scale index (repeatable)")

    simulate_parser = subparsers.add_parser("simulate", parents=[common], help="Monte Carlo block dynamics")
    simulate_parser.add_argument("--scaling", default=None, help="Chain lengths for the mixing-time table, e.g. 2..8")

    config_parser = subparsers.add_parser("config", parents=[common], help="Configuration management")
    config_parser.add_argument("--init", action="store_true", help="Create default configuration file")
    config_parser.add_argument("--show", action="store_true", help="Show current configuration")

    return parser.parse_args(argv)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Load the config file and let command-line flags win."""
    config = ExperimentConfig.load(getattr(args, "config", None))
    if hasattr(args, "model"):
        config.model_name = args.model
    for flag, attr in (("beta", "beta"), ("field", "external_field"), ("q", "q"), ("lam", "lam")):
        if hasattr(args, flag):
            setattr(config, attr, getattr(args, flag))
    if hasattr(args, "chain"):
        config.region_kind = "chain"
        config.region_size = parse_range(args.chain)[-1]
    if hasattr(args, "shape"):
        try:
            config.region_shape = [int(s) for s in args.shape.lower().split("x")]
        except ValueError as exc:
            msg = f"Invalid shape '{args.shape}', expected e.g. 3x3"
            raise ConfigError(msg) from exc
        config.region_kind = "rectangle"
    if hasattr(args, "log_level"):
        config.log_level = args.log_level.upper()
    config.apply_overrides(
        seed=getattr(args, "seed", None),
        threads=getattr(args, "threads", None),
        cap_states=getattr(args, "cap_states", None),
        output_dir=getattr(args, "out", None),
    )
    return config


def _require_seed(config: ExperimentConfig) -> int:
    if config.seed is None:
        msg = "This command needs --seed (or seed in the config file)"
        raise ConfigError(msg)
    return config.seed


def _fmt(value: float | None, digits: int = 6) -> str:
    if value is None:
        return "-"
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return f"{value:.{digits}g}"


def _print_reports(reports: list[CheckReport], console: Console, run_dir: Path) -> None:
    table = Table(title=f"Verification ({run_dir})")
    table.add_column("Check", style="cyan")
    table.add_column("Status")
    table.add_column("Detail", style="dim")
    for report in reports:
        style = STATUS_STYLE.get(report.status, "")
        table.add_row(report.check, f"[{style}]{report.status}[/{style}]", report.detail)
    console.print(table)


def cmd_verify(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Run the requested presets and checks through the experiment runner."""
    requested = [*getattr(args, "preset", []), *getattr(args, "check", [])]
    if requested:
        config.checks = requested
    runner = ExperimentRunner(config)
    code = runner.run()
    _print_reports(runner.reports, Console(), runner.run_dir)
    return code


def cmd_constants(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Tabulate delta_hat, C_hat, gap, MLSI and LSI estimates over chain lengths or the configured region."""
    from .dynamics import BlockDynamics, lsi_constant, mlsi_constant, spectral_gap
    from .gibbs import gibbs_table
    from .inequalities import estimate_best_constant, even_odd_delta, recursion_consistency, scale_delta
    from .lattice import Region

    _require_seed(config)
    console = Console()
    model = config.build_model()
    optimizer = config.optimizer_config()
    sizes = parse_range(args.chain) if hasattr(args, "chain") else [None]

    table = Table(title=f"Factorization constants ({model.name})")
    for column in ("|V|", "boundary", "delta_hat", "rough", "C_hat", "gap", "rho_hat", "s_hat"):
        table.add_column(column, justify="right")
    for n in sizes:
        region = config.build_region() if n is None else Region.chain(n)
        weights = config.build_weights(region)
        for i, tau in enumerate(config.build_boundaries(region)):
            gt = gibbs_table(model, region, tau, config.cap_states)
            delta = even_odd_delta(gt, optimizer)
            dyn = BlockDynamics(gt, weights)
            table.add_row(
                str(len(region)),
                str(i),
                _fmt(delta.delta_hat),
                _fmt(delta.rough_bound),
                _fmt(estimate_best_constant(gt, weights, optimizer).value),
                _fmt(spectral_gap(dyn).gap),
                _fmt(mlsi_constant(dyn, optimizer).rho_hat),
                _fmt(lsi_constant(dyn, optimizer).s_hat),
            )
    console.print(table)

    if args.scales > 0:
        scales = Table(title="delta(k) over chains in F_k")
        for column in ("k", "delta_hat", "regions", "recursion bound", "holds"):
            scales.add_column(column, justify="right")
        previous = None
        for k in range(1, args.scales + 1):
            current = scale_delta(model, k, optimizer, config.cap_states)
            bound, holds = "-", "-"
            if previous is not None:
                rec = recursion_consistency(previous.delta_hat, current.delta_hat, k)
                bound, holds = _fmt(rec.bound), str(rec.holds)
            scales.add_row(str(k), _fmt(current.delta_hat), str(current.regions), bound, holds)
            previous = current
        console.print(scales)
    return EXIT_OK


def cmd_ssm(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Fit (K_hat, a_hat) on a chain sweep and compare with the transfer-matrix rate."""
    from .mixing import chain_sweep, check_condition, fit_ssm
    from .transfer import ChainTransferMatrix

    console = Console()
    model = config.build_model()
    n_max = parse_range(args.chain)[-1] if hasattr(args, "chain") else config.ssm_max_distance
    plan = chain_sweep(n_max, config.boundary_spin, config.boundary_spin)
    estimate = fit_ssm(model, plan, config.cap_states, config.optimizer_config().threads)

    table = Table(title=f"Strong spatial mixing ({plan.name})")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("K_hat", _fmt(estimate.k_hat))
    table.add_row("a_hat", _fmt(estimate.a_hat))
    table.add_row("fit residual", _fmt(estimate.residual))
    table.add_row("excluded distances", str(estimate.excluded))
    table.add_row("transfer-matrix rate", _fmt(ChainTransferMatrix(model).decay_rate()))
    console.print(table)

    if args.condition is not None:
        big_k, a = args.condition
        relax = config.fat_side if config.ssm_relax_hard else None
        report = check_condition(
            model, config.build_region(), big_k, a, seed=config.seed, relax_side=relax, cap=config.cap_states
        )
        style = "green" if report.passed else "red"
        console.print(f"[{style}]Condition K={big_k:g}, a={a:g}: {'holds' if report.passed else 'fails'}[/{style}]")
        console.print(f"[dim]worst margin {_fmt(report.worst_margin)} over {report.evaluated} pairs[/dim]")
        return EXIT_OK if report.passed else 1
    return EXIT_OK


def cmd_dynamics(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Spectral gap and worst-case TV curve of the configured block dynamics."""
    from .dynamics import BlockDynamics, spectral_gap, tv_mixing_curve
    from .gibbs import gibbs_table

    seed = _require_seed(config)
    console = Console()
    region = config.build_region()
    weights = config.build_weights(region)
    model = config.build_model()
    for i, tau in enumerate(config.build_boundaries(region)):
        dyn = BlockDynamics(gibbs_table(model, region, tau, config.cap_states), weights)
        gap = spectral_gap(dyn, seed=seed)
        curve = tv_mixing_curve(dyn, config.tv_times)
        table = Table(title=f"Block dynamics, boundary {i}: gap={_fmt(gap.gap)} ({gap.method})")
        table.add_column("t", justify="right")
        table.add_column("worst TV", justify="right")
        for t, tv in zip(curve.times, curve.tv, strict=True):
            table.add_row(_fmt(float(t)), _fmt(float(tv)))
        console.print(table)
        suffix = "" if curve.exact else " (extremal starts only)"
        console.print(f"t_mix(1/4) = {_fmt(curve.t_mix_quarter)}{suffix}")
    return EXIT_OK


def cmd_geometry(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Sweep admissible rectangles and verify the decomposition properties."""
    from .lattice import admissible_rectangles, cesi_decomposition, smallest_nontrivial_scales, verify_geo

    console = Console()
    scales = args.k or smallest_nontrivial_scales(args.dim)
    table = Table(title=f"Decomposition geometry, d={args.dim}")
    table.add_column("k", justify="right")
    table.add_column("rectangles", justify="right")
    table.add_column("r (max)", justify="right")
    table.add_column("failures", justify="right")
    failed = 0
    for k in scales:
        rectangles = admissible_rectangles(args.dim, k)
        reports = [verify_geo(cesi_decomposition(rect, k)) for rect in rectangles]
        failures = sum(len(r.failures) for r in reports)
        failed += failures
        r_max = max((r.r for r in reports), default=0)
        table.add_row(str(k), str(len(rectangles)), str(r_max), str(failures))
    console.print(table)
    return EXIT_OK if failed == 0 else 1


def cmd_simulate(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Monte Carlo replicas on the configured region, or a mixing-time scaling table."""
    from .artifacts import ArtifactWriter
    from .lattice import Region
    from .simulation import (
        TMIX_KIND,
        integrated_autocorrelation_time,
        mc_standard_error,
        mixing_time_scaling,
        run_replicas,
    )

    seed = _require_seed(config)
    console = Console()
    model = config.build_model()
    config_hash = config.config_hash()
    writer = ArtifactWriter(config.output_dir / config_hash[:12], config.to_dict(), config_hash)

    if args.scaling:
        regions = [Region.chain(n) for n in parse_range(args.scaling)]
        scaling = mixing_time_scaling(
            model,
            regions,
            config.build_weights,
            seed,
            replicas=config.replicas,
            horizon=config.horizon,
            threads=config.optimizer_config().threads,
        )
        writer.write_series(
            "scaling",
            {
                "size": [r.size for r in scaling.rows],
                "log_size": [math.log(r.size) for r in scaling.rows],
                "value": [r.value for r in scaling.rows],
                "gamma": [r.gamma for r in scaling.rows],
                "exact": [1.0 if r.kind == TMIX_KIND else 0.0 for r in scaling.rows],
            },
        )
        writer.write_json("scaling_fit", scaling.to_dict())
        table = Table(title="Mixing time against log |V|")
        table.add_column("|V|", justify="right")
        table.add_column("value", justify="right")
        table.add_column("kind")
        table.add_column("gamma", justify="right")
        for row in scaling.rows:
            table.add_row(str(row.size), _fmt(row.value), row.kind, _fmt(row.gamma))
        console.print(table)
        for fit in scaling.fits:
            console.print(f"{fit.kind}: slope = {_fmt(fit.slope)}, intercept = {_fmt(fit.intercept)}")
        return EXIT_OK

    region = config.build_region()
    tau = config.build_boundaries(region)[0]
    runs = run_replicas(
        model,
        region,
        tau,
        config.build_weights(region),
        config.horizon,
        seed,
        config.replicas,
        interval=config.interval,
        threads=config.optimizer_config().threads,
    )
    table = Table(title=f"Monte Carlo, |V|={len(region)}, horizon {config.horizon:g}")
    for column in ("replica", "events", "mean magnetization", "std. error", "tau_int"):
        table.add_column(column, justify="right")
    for run in runs:
        values = run.column("magnetization")
        writer.write_series(f"simulate_replica_{run.replica}", {"t": run.times, "magnetization": values})
        table.add_row(
            str(run.replica),
            str(run.events),
            _fmt(float(values.mean())),
            _fmt(mc_standard_error(values)),
            _fmt(integrated_autocorrelation_time(values)),
        )
    console.print(table)
    return EXIT_OK


def cmd_config(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Initialize or display the configuration file."""
    console = Console()

    if args.init:
        config_path = getattr(args, "config", None) or ExperimentConfig.get_config_path()
        if config_path.exists():
            console.print(f"[yellow]Config already exists: {config_path}[/yellow]")
            return 1
        config.save(config_path)
        console.print(f"[green]Created config: {config_path}[/green]")
        return EXIT_OK

    if args.show:
        return _print_config(config, console)

    console.print("[yellow]Use --init or --show[/yellow]")
    return 1


def _print_config(config: ExperimentConfig, console: Console) -> int:
    """Print the current configuration as a table."""
    table = Table(title="Current Configuration")
    table.add_column("Setting", style="cyan")
    table.add_column("Value", style="green")

    table.add_row("Model", f"{config.model_name} (beta={config.beta:g}, field={config.external_field:g}, q={config.q})")
    table.add_row("Region", f"{config.region_kind} {config.region_size if config.region_kind == 'chain' else ''}")
    table.add_row("Boundary", f"{config.boundary_kind} (symbol {config.boundary_spin})")
    table.add_row("Weights", config.weights_preset)
    table.add_row("Checks", ", ".join(config.checks) or "default suite")
    table.add_row("Disabled checks", ", ".join(config.checks_disabled) or "none")
    table.add_row("Seed", str(config.seed))
    table.add_row("State cap", str(config.cap_states))
    table.add_row("Output directory", str(config.output_dir))
    table.add_row("Config hash", config.config_hash()[:12])

    console.print(table)
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "run": cmd_verify,
    "constants": cmd_constants,
    "ssm": cmd_ssm,
    "dynamics": cmd_dynamics,
    "geometry": cmd_geometry,
    "simulate": cmd_simulate,
    "config": cmd_config,
}


def main(argv: list[str] | None = None) -> int:
    """Dispatch CLI arguments to the appropriate subcommand handler."""
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    command = args.command or "verify"
    try:
        config = build_config(args)
        if command not in ("verify", "run"):
            setup_logging(config.log_level)
        return COMMANDS[command](config, args)
    except EntrofactError as exc:
        Console(stderr=True).print(f"[red]{type(exc).__name__}: {exc}[/red]")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
