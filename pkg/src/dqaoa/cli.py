"""``dqaoa`` command line: generate, solve, sweep, profile.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from dqaoa.decomposition import ConfigError, DecompositionConfig, Strategy
from dqaoa.experiments import (
    CYCLE_COLUMNS,
    PROFILE_COLUMNS,
    SWEEP_COLUMNS,
    ProblemSpec,
    ReferenceUnavailable,
    SweepSpec,
    first_plan,
    resolve_num_sub,
    resolve_reference,
    run_campaign,
    run_profile,
    run_sweep,
    write_csv,
    write_json,
)
from dqaoa.formats import FormatError, write_maxcut, write_qubo
from dqaoa.orchestrator import DqaoaAborted, DqaoaConfig
from dqaoa.pool import WorkerFailure
from dqaoa.qaoa import QaoaConfig
from dqaoa.qubo import generate_dense_qubo, generate_maxcut

log = logging.getLogger("dqaoa")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

DEFAULTS = {
    "problem": None,
    "strategy": "ifd",
    "sub_size": "12",
    "num_sub": "30",
    "workers": "1",
    "trials": 10,
    "seed": 0,
    "reference": "auto",
    "max_cycles": 200,
    "ar_tol": 0.1,
    "ar_window": 5,
    "shots": 1024,
    "budget": 200,
    "optimizer": "cobyla",
    "transport": "auto",
    "edge_threshold": None,
    "stride": 1,
    "sizes": None,
    "dump_plan": None,
    "out": "results",
}
RUN_KEYS = tuple(DEFAULTS)


class UsageError(Exception):
    pass


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    # defaults are resolved later so that --config values sit between them and the flags
    d = argparse.SUPPRESS
    p.add_argument("--config", help="JSON file with run settings (same keys as the flags)")
    p.add_argument("--problem", default=d, help="QUBO/MAXCUT file, or dense:<n>[:<seed>] / maxcut:<n>[:<seed>]")
    p.add_argument("--strategy", default=d, help="random, ifd, bfs, pfs (comma list allowed)")
    p.add_argument("--sub-size", dest="sub_size", default=d, help="sub-QUBO size k (comma list for sweeps)")
    p.add_argument("--num-sub", dest="num_sub", default=d, help="sub-QUBOs per cycle, int or N%% (comma list for sweeps)")
    p.add_argument("--workers", default=d, help="worker count (comma list for sweeps)")
    p.add_argument("--trials", type=int, default=d)
    p.add_argument("--seed", type=int, default=d, help="master seed; trial t uses seed + t")
    p.add_argument("--reference", default=d, help="reference energy, or auto/brute/sa")
    p.add_argument("--max-cycles", dest="max_cycles", type=int, default=d)
    p.add_argument("--ar-tol", dest="ar_tol", type=float, default=d, help="A.R. tolerance in percentage points")
    p.add_argument("--ar-window", dest="ar_window", type=int, default=d)
    p.add_argument("--shots", type=int, default=d)
    p.add_argument("--budget", type=int, default=d, help="optimizer evaluation budget")
    p.add_argument("--optimizer", default=d, choices=["cobyla", "nelder-mead"])
    p.add_argument("--transport", default=d, choices=["auto", "inproc", "socket"])
    p.add_argument("--edge-threshold", dest="edge_threshold", type=float, default=d)
    p.add_argument("--stride", type=int, default=d, help="IFD window stride")
    p.add_argument("--sizes", default=d, help="profile: comma list of problem sizes")
    p.add_argument("--dump-plan", dest="dump_plan", default=d, help="write the first-cycle decomposition plan here")
    p.add_argument("--out", default=d, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqaoa", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a random dense or Max-Cut instance")
    gen.add_argument("kind", choices=["dense", "maxcut"])
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output file")

    for name, text in (
        ("solve", "multi-trial runs for one or more strategies"),
        ("sweep", "grid over sub-QUBO size, count and workers"),
        ("profile", "per-phase timing across problem sizes"),
    ):
        _add_run_flags(sub.add_parser(name, help=text))
    return parser


def load_settings(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
        unknown = set(data) - set(RUN_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        settings.update({k.replace("-", "_"): v for k, v in data.items()})
    settings.update({k: v for k, v in vars(args).items() if k in RUN_KEYS})
    if settings["problem"] is None:
        raise UsageError("--problem is required")
    return settings


def _split(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _ints(value, what: str) -> list[int]:
    try:
        return [int(v) for v in _split(value)]
    except ValueError:
        raise UsageError(f"{what} must be integers, got {value!r}") from None


def _single(values: list, what: str):
    if len(values) != 1:
        raise UsageError(f"{what} takes a single value for this command")
    return values[0]


def base_config(settings: dict, q, strategy: str, k: int, m: int, workers: int) -> DqaoaConfig:
    ref = resolve_reference(q, settings["reference"], seed=settings["seed"])
    log.info("reference energy %.10g (%s)", ref.energy, ref.method)
    return DqaoaConfig(
        decomposition=DecompositionConfig(
            strategy=Strategy.parse(strategy), num_sub=m, sub_size=k,
            edge_threshold=settings["edge_threshold"], stride=int(settings["stride"]),
        ),
        qaoa=QaoaConfig(shots=int(settings["shots"]), budget=int(settings["budget"]),
                        optimizer=settings["optimizer"]),
        max_cycles=int(settings["max_cycles"]),
        ar_tolerance=float(settings["ar_tol"]),
        ar_window=int(settings["ar_window"]),
        workers=workers,
        reference_energy=ref.energy,
        ar_shift=ref.shift,
        master_seed=int(settings["seed"]),
        transport=settings["transport"],
    )


def _meta(settings: dict, q, cfg: DqaoaConfig) -> dict:
    return {
        "problem": settings["problem"],
        "n": q.n,
        "reference_energy": cfg.reference_energy,
        "ar_shift": cfg.ar_shift,
        "settings": {k: v for k, v in settings.items() if k != "dump_plan"},
    }


def cmd_generate(args) -> int:
    try:
        if args.kind == "dense":
            q = generate_dense_qubo(args.n, args.seed)
            write_qubo(q, args.out)
            summary = {"n": q.n, "nonzeros": q.nonzeros()}
        else:
            inst, q = generate_maxcut(args.n, args.seed)
            write_maxcut(inst, args.out)
            summary = {"n": q.n, "edges": len(inst.edges), "nonzeros": q.nonzeros()}
    except OSError as exc:
        print(f"dqaoa: cannot write {args.out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    pairs = q.n * (q.n - 1) // 2
    offdiag = q.nonzeros() - int((q.diag != 0).sum())
    summary["density_pct"] = 100.0 * offdiag / pairs if pairs else 100.0
    print(json.dumps(summary))
    return EXIT_OK


def cmd_solve(settings: dict) -> int:
    problem = ProblemSpec.parse(str(settings["problem"]))
    q = problem.load()
    k = _single(_ints(settings["sub_size"], "--sub-size"), "--sub-size")
    m = resolve_num_sub(_single(_split(settings["num_sub"]), "--num-sub"), q.n)
    workers = _single(_ints(settings["workers"], "--workers"), "--workers")
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    summary = {"campaigns": []}
    plans = []
    for strategy in _split(settings["strategy"]):
        cfg = base_config(settings, q, strategy, k, m, workers)
        plans.append(first_plan(q, cfg))
        campaign = run_campaign(q, cfg, int(settings["trials"]))
        write_csv(out / f"cycles_{campaign.strategy}.csv", CYCLE_COLUMNS, campaign.cycle_rows())
        summary["campaigns"].append(campaign.summary())
        summary.update(_meta(settings, q, cfg))
        log.info("%s: mean final A.R. %.3f%%", campaign.strategy, summary["campaigns"][-1]["final_ar_pct_mean"])
    if settings["dump_plan"]:
        write_json(settings["dump_plan"], plans[0] if len(plans) == 1 else plans)
    write_json(out / "summary.json", summary)
    for c in summary["campaigns"]:
        print(f"{c['strategy']}: A.R. {c['final_ar_pct_mean']:.3f} +/- {c['final_ar_pct_std']:.3f} %, "
              f"cycles {c['cycles_mean']:.1f}, converged {c['converged_trials']}/{c['trials']}")
    return EXIT_OK


def cmd_sweep(settings: dict) -> int:
    q = ProblemSpec.parse(str(settings["problem"])).load()
    sweep = SweepSpec(
        sub_sizes=tuple(_ints(settings["sub_size"], "--sub-size")),
        num_subs=tuple(v if v.endswith("%") else int(v) for v in _split(settings["num_sub"])),
        workers=tuple(_ints(settings["workers"], "--workers")),
        strategies=tuple(_split(settings["strategy"])),
    )
    base = base_config(settings, q, sweep.strategies[0], sweep.sub_sizes[0], 1, 1)
    rows = run_sweep(q, base, sweep, int(settings["trials"]))
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    print(f"{len(rows)} rows -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_profile(settings: dict) -> int:
    problem = ProblemSpec.parse(str(settings["problem"]))
    sizes = _ints(settings["sizes"], "--sizes") if settings["sizes"] else [problem.n]
    k = _single(_ints(settings["sub_size"], "--sub-size"), "--sub-size")
    m = _single(_split(settings["num_sub"]), "--num-sub")
    workers = _single(_ints(settings["workers"], "--workers"), "--workers")
    strategy = _single(_split(settings["strategy"]), "--strategy")
    rows = []
    for n in sizes:
        q = problem.with_n(n).load()
        base = base_config({**settings, "reference": settings["reference"]}, q, strategy, k,
                           resolve_num_sub(m, n), workers)
        rows.extend(run_profile(problem, [n], base, int(settings["trials"])))
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "profile.csv", PROFILE_COLUMNS, rows)
    for r in rows:
        print(f"n={r['n']}: decompose {r['t_decompose_ms']:.3f} ms, solve {r['t_solve_ms']:.3f} ms, "
              f"aggregate {r['t_aggregate_ms']:.3f} ms")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "profile": cmd_profile}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        return COMMANDS[args.command](load_settings(args))
    except (UsageError, ConfigError, FormatError, ReferenceUnavailable) as exc:
        print(f"dqaoa: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"dqaoa: configuration error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"dqaoa: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DqaoaAborted, WorkerFailure) as exc:
        print(f"dqaoa: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        where = f"{exc.filename}: " if exc.filename else ""
        print(f"dqaoa: I/O failure: {where}{exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
