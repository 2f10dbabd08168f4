"""Command-line front end.

Every command writes one run directory::

    <out>/config.json     fully resolved parameters of the run
    <out>/outputs/...     result files
    <out>/trace/...       step-by-step diagnostics

Exit status is 0 on success, 2 for usage errors and 1 for errors raised
while running.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__, glm
from .dataset import Dataset, standardize, stratified_split
from .embedding import EmbeddingTable, aggregate_up
from .errors import HierCatError
from .experiment import ExperimentConfig, run_experiment, worker_count
from .hierarchy import Hierarchy
from .nnet import HIDDEN_ACTIVATIONS, NetConfig, leaf_embeddings, train
from .reducer import reduce, write_trace
from .simgen import SimConfig, simulate, truth_for, write_truth

log = logging.getLogger("hiercat")

NET_FIELDS = ("q_e", "hidden_sizes", "hidden_activation", "epochs", "batch_size",
              "learning_rate", "patience", "min_delta")


class UsageError(Exception):
    """Bad arguments detected after parsing; reported with exit status 2."""


# argument helpers ----------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _si(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not -1.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"si_star must lie in [-1, 1], got {v}")
    return v


def _si_grid(text: str) -> list[float]:
    values = _float_list(text)
    if not values:
        raise argparse.ArgumentTypeError("empty grid")
    for v in values:
        if not -1.0 <= v <= 1.0:
            raise argparse.ArgumentTypeError(f"si_star must lie in [-1, 1], got {v}")
    return values


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, type=Path, help="run directory to create or reuse")
    p.add_argument("--config", type=Path, help="JSON file with default values for this command")


def _add_net(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("network")
    g.add_argument("--q-e", dest="q_e", type=int, help="embedding dimension (default 2)")
    g.add_argument("--hidden", dest="hidden_sizes", type=_int_list,
                   help="hidden layer widths, e.g. 2 or 8,4 (default 2)")
    g.add_argument("--hidden-activation", choices=HIDDEN_ACTIVATIONS)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--patience", type=int)
    g.add_argument("--min-delta", type=float)


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, type=Path, help="CSV with y, h_leaf and covariates")
    p.add_argument("--hierarchy", required=True, type=Path, help="CSV with level_1..level_R")
    p.add_argument("--family", choices=("gaussian", "poisson"), default="gaussian")
    p.add_argument("--drop-cols", type=lambda s: [c for c in s.split(",") if c.strip()],
                   default=[], help="covariate columns to ignore, comma-separated")


def _net_kwargs(args) -> dict:
    out = {}
    for name in NET_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            out[name] = tuple(v) if name == "hidden_sizes" else v
    return out


def _net_config(args, family: str) -> NetConfig:
    try:
        return NetConfig.for_family(family, seed=args.seed, **_net_kwargs(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _sim_config(args) -> SimConfig:
    try:
        if args.per_leaf_range is not None:
            return SimConfig.from_name(args.scenario, per_leaf_range=tuple(args.per_leaf_range),
                                       seed=args.seed)
        return SimConfig.from_name(args.scenario, per_leaf=args.per_leaf, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# run directory -------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _start_run(args, extra: dict | None = None) -> tuple[Path, Path]:
    out: Path = args.out
    (out / "outputs").mkdir(parents=True, exist_ok=True)
    (out / "trace").mkdir(parents=True, exist_ok=True)
    record = {k: _jsonable(v) for k, v in sorted(vars(args).items())
              if k not in ("func", "out", "config", "verbose")}
    record["hiercat_version"] = __version__
    if extra:
        record.update(extra)
    (out / "config.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return out / "outputs", out / "trace"


def _write_loss(path: Path, trace: Sequence[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(trace, start=1):
            w.writerow([i, repr(float(v))])


def _si_tag(si: float) -> str:
    return f"{si:g}".replace("-", "m")


# commands ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    sim = _sim_config(args)
    outputs, _ = _start_run(args, {"sim": sim.to_dict()})
    d = simulate(sim)
    d.hierarchy.write_csv(outputs / "hierarchy.csv")
    d.write_csv(outputs / "data.csv")
    write_truth(outputs / "truth.json", d.hierarchy, truth_for(sim, d.hierarchy))
    if args.test_per_leaf:
        test_sim = replace(sim, per_leaf=args.test_per_leaf, per_leaf_range=None)
        simulate(test_sim, d.hierarchy, stream=1).write_csv(outputs / "test.csv")
    print(f"wrote {d.n} observations over {d.hierarchy.n_leaves} leaves to {outputs}")
    return 0


def _load(args) -> tuple[Hierarchy, Dataset]:
    h = Hierarchy.read_csv(args.hierarchy)
    d = Dataset.read_csv(args.data, h, args.family, args.drop_cols)
    return h, d


def _train_embeddings(args, d: Dataset, h: Hierarchy, trace_dir: Path):
    cfg = _net_config(args, args.family)
    result = train(cfg, d, h)
    _write_loss(trace_dir / "loss.csv", result.loss_trace)
    return cfg, result, aggregate_up(leaf_embeddings(result.network, h), h)


def cmd_train_embed(args) -> int:
    h, d = _load(args)
    cfg = _net_config(args, args.family)
    outputs, trace = _start_run(args, {"net": cfg.to_dict()})
    scaler = None
    if args.standardize and d.p:
        d, scaler = standardize(d)
    _, result, table = _train_embeddings(args, d, h, trace)
    table.write_csv(outputs / "embeddings.csv", h)
    result.network.save(outputs / "network.json")
    if scaler is not None:
        payload = {"columns": [d.covariate_names[c] for c in scaler.columns],
                   "mean": scaler.mean.tolist(), "sd": scaler.sd.tolist()}
        (outputs / "standardizer.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(f"trained {result.epochs_run} epochs, final loss {result.loss_trace[-1]:.6g}")
    return 0


def cmd_reduce(args) -> int:
    h = Hierarchy.read_csv(args.hierarchy)
    table = EmbeddingTable.read_csv(args.embeddings)
    if table.coverage == (h.num_levels,):
        table = aggregate_up(table, h)
    outputs, trace = _start_run(args)
    red, steps = reduce(h, table, args.si_star, seed=args.seed, max_k=args.max_k)
    red.write_json(outputs / "reduced.json")
    red.write_groups_csv(outputs / "groups.csv")
    write_trace(trace / "steps.jsonl", steps)
    print(f"reduced sizes {list(h.sizes)} -> {list(red.sizes)}, {red.n_groups} leaf groups")
    return 0


def _reduce_task(task):
    h, table, si, seed, max_k = task
    return reduce(h, table, si, seed=seed, max_k=max_k)


def _reduce_grid(h, table, grid, seed, max_k):
    tasks = [(h, table, si, seed, max_k) for si in grid]
    n = worker_count(len(tasks))
    if n == 1:
        return [_reduce_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_reduce_task, tasks))


def cmd_sweep_si(args) -> int:
    h = Hierarchy.read_csv(args.hierarchy)
    table = EmbeddingTable.read_csv(args.embeddings)
    if table.coverage == (h.num_levels,):
        table = aggregate_up(table, h)
    outputs, trace = _start_run(args)
    results = _reduce_grid(h, table, args.grid, args.seed, args.max_k)
    with open(outputs / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["si_star", "num_levels", "sizes", "n_groups"])
        for si, (red, steps) in zip(args.grid, results):
            tag = _si_tag(si)
            red.write_json(outputs / f"reduced_si{tag}.json")
            red.write_groups_csv(outputs / f"groups_si{tag}.csv")
            write_trace(trace / f"steps_si{tag}.jsonl", steps)
            w.writerow([repr(si), red.num_levels, "-".join(map(str, red.sizes)), red.n_groups])
            print(f"SI*={si:g}: sizes {list(red.sizes)}, {red.n_groups} leaf groups")
    return 0


def cmd_evaluate(args) -> int:
    h, d = _load(args)
    if args.test is not None and args.split is not None:
        raise UsageError("give either --test or --split, not both")
    test = None
    if args.test is not None:
        test = Dataset.read_csv(args.test, h, args.family, args.drop_cols)
    elif args.split is not None:
        stratum = args.stratum or h.num_levels
        d, test = stratified_split(d, args.split, stratum, args.split_seed)
    cfg = _net_config(args, args.family)
    outputs, trace = _start_run(args, {"net": cfg.to_dict()})
    if args.standardize and d.p:
        d, scaler = standardize(d)
        if test is not None:
            test = scaler.apply(test)
    if test is None:
        warnings.warn("no test data (--test or --split); the RMSE column is omitted", stacklevel=1)

    if args.embeddings is not None:
        table = EmbeddingTable.read_csv(args.embeddings)
        if table.coverage == (h.num_levels,):
            table = aggregate_up(table, h)
    else:
        _, _, table = _train_embeddings(args, d, h, trace)
    table.write_csv(outputs / "embeddings.csv", h)

    def row(label, si, grouping):
        builder = glm.GroupedDesign(grouping, h)
        fit_ = glm.fit(args.family, d.y, builder(d))
        out = {"model": label, "si_star": si, "n_groups": builder.n_groups,
               "aic": fit_.aic, "bic": fit_.bic,
               "rmse": glm.rmse(fit_, test, builder) if test is not None else None}
        glm.write_fit_report(outputs / f"fit_{label}.json", fit_, out["rmse"])
        return out

    rows = [row("h", None, glm.identity_grouping(h))]
    for si, (red, steps) in zip(args.grid, _reduce_grid(h, table, args.grid, args.seed, args.max_k)):
        tag = _si_tag(si)
        red.write_json(outputs / f"reduced_si{tag}.json")
        red.write_groups_csv(outputs / f"groups_si{tag}.csv")
        write_trace(trace / f"steps_si{tag}.jsonl", steps)
        rows.append(row(f"si{tag}", si, red.leaf_group))
    glm.write_comparison_csv(outputs / "comparison.csv", rows, with_rmse=test is not None)

    print(f"{'model':<10}{'groups':>7}{'AIC':>14}{'BIC':>14}" + (f"{'RMSE':>10}" if test is not None else ""))
    for r in rows:
        line = f"{r['model']:<10}{r['n_groups']:>7}{r['aic']:>14.2f}{r['bic']:>14.2f}"
        if test is not None:
            line += f"{r['rmse']:>10.4f}"
        print(line)
    return 0


def cmd_experiment(args) -> int:
    sim = _sim_config(args)
    net = _net_kwargs(args)
    try:
        config = ExperimentConfig(sim, args.replicates, args.inits, args.si_star, net,
                                  args.test_per_leaf)
        config.net_config(0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    outputs, _ = _start_run(args, {"experiment": config.to_dict()})
    report = run_experiment(config)
    report.write(outputs)
    s = report.summary()
    print(f"{sim.name}: {s['runs']} runs")
    for key in ("retrieval_pct", "aic_win_pct", "bic_win_pct", "rmse_win_pct", "collapsed_pct"):
        print(f"  {key:<15}{s[key]:8.1f}")
    print(f"  {'structures':<15}{s['structure_count']:8d}")
    return 0


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiercat",
        description="Entity embeddings and top-down reduction of hierarchical categorical variables.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def sim_args(p):
        p.add_argument("--scenario", required=True,
                       help="<none|h_only|h_and_x>-<gaussian|poisson>, e.g. h_only-gaussian")
        size = p.add_mutually_exclusive_group()
        size.add_argument("--per-leaf", type=int, default=1000)
        size.add_argument("--per-leaf-range", type=int, nargs=2, metavar=("LO", "HI"))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--test-per-leaf", type=int, default=None,
                       help="also draw a held-out set with this many observations per leaf")

    p = sub.add_parser("simulate", help="generate a simulation dataset and its true structure")
    sim_args(p)
    _add_out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-embed", help="train the network and export class embeddings")
    _add_data(p)
    _add_net(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-standardize", dest="standardize", action="store_false",
                   help="use covariates as given")
    _add_out(p)
    p.set_defaults(func=cmd_train_embed)

    p = sub.add_parser("reduce", help="reduce a hierarchy from its embeddings")
    p.add_argument("--embeddings", required=True, type=Path)
    p.add_argument("--hierarchy", required=True, type=Path)
    p.add_argument("--si-star", required=True, type=_si)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-k", type=int, default=None)
    _add_out(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("sweep-si", help="reduce for every value in a grid of thresholds")
    p.add_argument("--embeddings", required=True, type=Path)
    p.add_argument("--hierarchy", required=True, type=Path)
    p.add_argument("--grid", required=True, type=_si_grid)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-k", type=int, default=None)
    _add_out(p)
    p.set_defaults(func=cmd_sweep_si)

    p = sub.add_parser("evaluate", help="compare GLMs on the original and reduced groupings")
    _add_data(p)
    p.add_argument("--grid", required=True, type=_si_grid)
    p.add_argument("--test", type=Path, help="held-out CSV for the RMSE column")
    p.add_argument("--split", type=float, help="train fraction of a stratified split")
    p.add_argument("--stratum", type=int, help="level to stratify on (default: leaves)")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--embeddings", type=Path, help="reuse an embedding CSV instead of training")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-k", type=int, default=None)
    p.add_argument("--no-standardize", dest="standardize", action="store_false")
    _add_net(p)
    _add_out(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a replicated simulation study")
    sim_args(p)
    p.set_defaults(per_leaf=200)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--inits", type=int, default=1)
    p.add_argument("--si-star", type=_si, default=0.7)
    _add_net(p)
    _add_out(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        defaults = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read --config {args.config}: {exc}")
    if not isinstance(defaults, dict):
        parser.error("--config must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    known = {a.dest for a in sub._actions}  # noqa: SLF001
    unknown = sorted(set(defaults) - known)
    if unknown:
        parser.error(f"--config has unknown keys: {unknown}")
    # values from the file become defaults; explicit flags still win
    for action in sub._actions:  # noqa: SLF001
        if action.dest in defaults:
            value = defaults[action.dest]
            if isinstance(value, str) and action.type is not None and action.type is not str:
                value = action.type(value)
            action.default = value
            action.required = False
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config_file(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hiercat {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (HierCatError, OSError, ValueError) as exc:
        print(f"hiercat {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
