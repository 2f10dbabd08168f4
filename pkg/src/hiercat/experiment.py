"""Simulation studies: generate, embed, reduce and compare, over many replicates.

Each run is one (replicate, initialisation) pair. The replicate fixes the
simulated training and test data; the initialisation fixes the network's
starting weights and shuffle order. Every run derives its random streams
from ``(master seed, replicate, initialisation)`` alone, so results do not
depend on how runs are spread over worker processes.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import glm
from .dataset import standardize
from .embedding import aggregate_up
from .nnet import NetConfig, leaf_embeddings, train
from .reducer import reduce
from .simgen import SimConfig, simulate, truth_for

log = logging.getLogger(__name__)

THREADS_ENV = "HIERCAT_THREADS"
TEST_STREAM = 1


def worker_count(n_tasks: int | None = None) -> int:
    """Pool size: ``HIERCAT_THREADS`` if set, else the CPU count, never above ``n_tasks``."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    else:
        n = os.cpu_count() or 1
    return max(1, min(n, n_tasks)) if n_tasks is not None else n


def derived_seed(*keys: int) -> int:
    """A 32-bit seed determined by the integer keys only."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """A simulation study.

    Parameters
    ----------
    sim : SimConfig
        Scenario and sample size; ``sim.seed`` is the master seed.
    replicates : int
        Number of simulated datasets.
    inits : int
        Network initialisations per dataset.
    si_star : float
        Silhouette threshold handed to the reducer.
    net : dict
        Overrides for the family's default ``NetConfig`` (seed excluded).
    test_per_leaf : int or None
        Observations per leaf in the held-out set; ``None`` reuses the
        training design (fixed count or count range).
    """

    sim: SimConfig = field(default_factory=SimConfig)
    replicates: int = 1
    inits: int = 1
    si_star: float = 0.7
    net: dict = field(default_factory=dict)
    test_per_leaf: int | None = None

    def __post_init__(self):
        if self.replicates < 1 or self.inits < 1:
            raise ValueError("replicates and inits must be positive")
        if not -1.0 <= self.si_star <= 1.0:
            raise ValueError("si_star must lie in [-1, 1]")
        if "seed" in self.net:
            raise ValueError("network seeds are derived per run; do not set net['seed']")

    def net_config(self, seed: int) -> NetConfig:
        return NetConfig.for_family(self.sim.family, seed=seed, **self.net)

    def to_dict(self) -> dict:
        return {
            "sim": self.sim.to_dict(),
            "replicates": self.replicates,
            "inits": self.inits,
            "si_star": self.si_star,
            "net": dict(self.net),
            "net_resolved": self.net_config(0).to_dict() | {"seed": "derived"},
            "test_per_leaf": self.test_per_leaf,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        sim = dict(d["sim"])
        sim.pop("link", None)
        if sim.get("per_leaf_range") is not None:
            sim["per_leaf_range"] = tuple(sim["per_leaf_range"])
        for key in ("gammas", "beta_x"):
            if sim.get(key) is not None:
                sim[key] = tuple(sim[key])
        net = {k: v for k, v in d.get("net", {}).items() if k != "seed"}
        return cls(SimConfig(**sim), d.get("replicates", 1), d.get("inits", 1),
                   d.get("si_star", 0.7), net, d.get("test_per_leaf"))


@dataclass
class RunResult:
    replicate: int
    init: int
    data_seed: int
    net_seed: int
    sizes: tuple[int, ...]
    n_groups: int
    retrieved: bool
    aic_h: float
    aic_reduced: float
    bic_h: float
    bic_reduced: float
    rmse_h: float
    rmse_reduced: float
    epochs: int
    structure: object = field(repr=False, default=None)

    @property
    def collapsed(self) -> bool:
        """One remaining level with at most two classes."""
        return len(self.sizes) == 1 and self.sizes[0] <= 2

    def row(self) -> dict:
        return {
            "replicate": self.replicate, "init": self.init,
            "data_seed": self.data_seed, "net_seed": self.net_seed,
            "sizes": "-".join(str(s) for s in self.sizes), "n_groups": self.n_groups,
            "retrieved": int(self.retrieved), "collapsed": int(self.collapsed),
            "aic_h": repr(self.aic_h), "aic_reduced": repr(self.aic_reduced),
            "bic_h": repr(self.bic_h), "bic_reduced": repr(self.bic_reduced),
            "rmse_h": repr(self.rmse_h), "rmse_reduced": repr(self.rmse_reduced),
            "epochs": self.epochs,
        }


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    runs: list[RunResult]

    @property
    def n_runs(self) -> int:
        return len(self.runs)

    def _rate(self, flags) -> float:
        flags = list(flags)
        return 100.0 * sum(flags) / len(flags) if flags else float("nan")

    def summary(self) -> dict:
        runs = self.runs
        counts: dict[str, int] = {}
        for r in runs:
            key = "-".join(map(str, r.sizes))
            counts[key] = counts.get(key, 0) + 1
        return {
            "runs": self.n_runs,
            "retrieval_pct": self._rate(r.retrieved for r in runs),
            "structure_count": len({r.structure for r in runs}),
            "aic_win_pct": self._rate(r.aic_reduced < r.aic_h for r in runs),
            "bic_win_pct": self._rate(r.bic_reduced < r.bic_h for r in runs),
            "rmse_win_pct": self._rate(r.rmse_reduced < r.rmse_h for r in runs),
            "collapsed_pct": self._rate(r.collapsed for r in runs),
            "sizes": dict(sorted(counts.items())),
        }

    def write(self, directory: str | Path) -> None:
        """``runs.csv`` (one row per run) and ``summary.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        rows = [r.row() for r in self.runs]
        with open(directory / "runs.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["replicate"])
            writer.writeheader()
            writer.writerows(rows)
        payload = {"config": self.config.to_dict(), "summary": self.summary()}
        (directory / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True),
                                                encoding="utf-8")


def run_one(config: ExperimentConfig, replicate: int, init: int) -> RunResult:
    """Simulate, train, reduce and compare for a single (replicate, init) pair."""
    master = config.sim.seed
    data_seed = derived_seed(master, replicate)
    net_seed = derived_seed(master, replicate, init, 1)
    sim = replace(config.sim, seed=data_seed)
    train_d = simulate(sim)
    h = train_d.hierarchy
    test_sim = sim if config.test_per_leaf is None else replace(
        sim, per_leaf=config.test_per_leaf, per_leaf_range=None)
    test_d = simulate(test_sim, h, stream=TEST_STREAM)

    scaled, _ = standardize(train_d)
    result = train(config.net_config(net_seed), scaled)
    table = aggregate_up(leaf_embeddings(result.network, h), h)
    reduced, _ = reduce(h, table, config.si_star, seed=net_seed)

    family = sim.family
    full = glm.GroupedDesign(glm.identity_grouping(h), h)
    small = glm.GroupedDesign(reduced.leaf_group, h)
    fit_h = glm.fit(family, train_d.y, full(train_d))
    fit_r = glm.fit(family, train_d.y, small(train_d))
    return RunResult(
        replicate, init, data_seed, net_seed, reduced.sizes, reduced.n_groups,
        reduced.same_structure(truth_for(sim, h)),
        fit_h.aic, fit_r.aic, fit_h.bic, fit_r.bic,
        glm.rmse(fit_h, test_d, full), glm.rmse(fit_r, test_d, small),
        result.epochs_run, reduced.key(),
    )


def _run_task(args) -> RunResult:
    return run_one(*args)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """All ``replicates x inits`` runs, in a fixed order regardless of ``workers``."""
    tasks = [(config, rep, init) for rep in range(config.replicates) for init in range(config.inits)]
    n = worker_count(len(tasks)) if workers is None else max(1, min(workers, len(tasks)))
    log.info("running %d simulation runs on %d worker(s)", len(tasks), n)
    if n == 1:
        runs = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            runs = list(pool.map(_run_task, tasks))
    return ExperimentReport(config, runs)
