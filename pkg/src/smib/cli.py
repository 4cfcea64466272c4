"""Command-line front end: ``run`` scenarios, ``verify`` the acceptance suite, ``plot`` trajectories.

Exit codes: 0 success, 1 bad input (unknown scenario or channel, invalid config),
2 design failure, 3 simulation divergence, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import acceptance, scenarios
from .linearize import EquilibriumError
from .numlin import DesignFailure
from .params import ParameterError, load_config
from .plotting import UnknownChannel, plot_csv
from .sim import SimulationDiverged

EXIT_OK, EXIT_INPUT, EXIT_DESIGN, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the bad-input code rather than argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="smib", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one scenario or all of them")
    r.add_argument("name", nargs="?", help="scenario name (same as --scenario)")
    r.add_argument("--scenario", help="scenario name")
    r.add_argument("--all", action="store_true", help="run every registered scenario")
    r.add_argument("--list", action="store_true", help="list scenario names and exit")
    r.add_argument("--config", help="parameter file (defaults to the bundled values)")
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--integrator", choices=("rk4", "rk45", "lsoda"), help="override the scenario integrator")
    r.add_argument("--dt", type=float, help="rk4 step size")
    r.add_argument("--seed", type=int, default=0, help="seed for randomized pole-placement restarts")
    r.add_argument("--no-limits", action="store_true", help="disable the E_FD and G_V limits")
    r.add_argument("--jobs", type=int, default=None, help="worker processes for --all")

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--config", help="parameter file (defaults to the bundled values)")

    pl = sub.add_parser("plot", help="SVG line plots of trajectory channels")
    pl.add_argument("csv", help="trajectory.csv written by run")
    pl.add_argument("channels", nargs="*", help="channels to plot (default: all)")
    pl.add_argument("--out", help="directory for the SVG files (default: next to the CSV)")
    return p


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _run_one(name: str, config: str | None, out: str, opts: dict) -> tuple[str, int, str]:
    """Run a scenario and map its failure mode to an exit code; safe to call in a worker process."""
    try:
        cfg = load_config(config)
        res = scenarios.run(name, cfg, out, **opts)
    except scenarios.UnknownScenario as exc:
        return name, EXIT_INPUT, str(exc)
    except ParameterError as exc:
        return name, EXIT_INPUT, f"invalid parameters: {exc}"
    except (DesignFailure, EquilibriumError) as exc:
        return name, EXIT_DESIGN, f"design failure: {exc}"
    except SimulationDiverged as exc:
        return name, EXIT_DIVERGED, f"simulation diverged: {exc}"
    return name, EXIT_OK, _summary(res)


def _summary(res: scenarios.RunResult) -> str:
    if res.trajectory is None:
        eig = ", ".join(f"{z:.4g}" for z in res.metrics["eig"])
        return f"eigenvalues: {eig}"
    parts = []
    for ch in ("V_t", "delta", "omega", "d_V_t", "d_delta", "d_omega"):
        if ch in res.metrics:
            parts.append(f"{ch}={res.metrics[ch].final:.6g}")
    return "final " + " ".join(parts)


def cmd_run(args) -> int:
    if args.list:
        print("\n".join(scenarios.SCENARIOS))
        return EXIT_OK
    name = args.scenario or args.name
    if args.all == bool(name):
        _err("give exactly one of a scenario name or --all")
        return EXIT_INPUT
    try:
        load_config(args.config)
    except (ParameterError, OSError) as exc:
        _err(f"invalid config: {exc}")
        return EXIT_INPUT
    opts = {"integrator": args.integrator, "dt": args.dt, "seed": args.seed, "limits": not args.no_limits}
    if not args.all:
        name, code, msg = _run_one(name, args.config, args.out, opts)
        (print if code == EXIT_OK else _err)(f"{name}: {msg}")
        return code

    names = list(scenarios.SCENARIOS)
    worst = EXIT_OK
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futures = [pool.submit(_run_one, n, args.config, args.out, opts) for n in names]
        for fut in futures:
            n, code, msg = fut.result()
            (print if code == EXIT_OK else _err)(f"{n}: {msg}")
            worst = max(worst, code)
    return worst


def cmd_verify(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ParameterError, OSError) as exc:
        _err(f"invalid config: {exc}")
        return EXIT_INPUT
    results = acceptance.run_all(cfg)
    sys.stdout.write(acceptance.report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_plot(args) -> int:
    path = Path(args.csv)
    if not path.is_file():
        _err(f"no such trajectory file: {path}")
        return EXIT_INPUT
    try:
        written = plot_csv(path, args.channels, args.out)
    except UnknownChannel as exc:
        _err(str(exc))
        return EXIT_INPUT
    except ValueError as exc:
        _err(f"not a trajectory CSV: {exc}")
        return EXIT_INPUT
    for w in written:
        print(w)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return {"run": cmd_run, "verify": cmd_verify, "plot": cmd_plot}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
