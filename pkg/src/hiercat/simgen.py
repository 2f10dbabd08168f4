"""Simulated data with a known reduced structure.

The hierarchy has 5, 20 and 86 classes on its three levels. Sixteen of the
second-level classes have four children; ``2.5`` and ``2.6`` have seven.
The conditional mean is an effect-coded GLM in which only some indicator
columns carry a coefficient, so classes with equal paths of nonzero
coefficients share their mean. The generating structure reduces to 2, 4
and 5 classes per level.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .glm import effect_design
from .hierarchy import Hierarchy, NodeId

SCENARIOS = ("none", "h_only", "h_and_x")
FAMILIES = ("gaussian", "poisson")

# (level, class index, gamma number, multiplier) for every nonzero indicator term
_G4 = (1, 2, 3, 5, 6, 7, 17, 18, 19, 20, 21, 22, 24, 25, 26, 27, 28, 29)
_G5 = (39, 40, 41, 43, 44, 45, 55, 56, 57, 59, 60, 61)
EFFECT_TERMS: tuple[tuple[int, int, int, float], ...] = (
    (1, 1, 1, 1.0), (1, 2, 1, 1.0), (1, 3, 1, -2.0 / 3.0), (1, 4, 1, -2.0 / 3.0),
    (2, 1, 2, 1.0), (2, 2, 2, 1.0), (2, 3, 2, -1.0),
    (2, 5, 2, 1.0), (2, 6, 2, 1.0), (2, 7, 2, -1.0),
    (2, 9, 3, 1.0), (2, 10, 3, 1.0), (2, 11, 3, -1.0),
    (2, 13, 3, 1.0), (2, 14, 3, 1.0), (2, 15, 3, -1.0),
    *((3, s, 4, 1.0) for s in _G4),
    *((3, s, 5, 1.0) for s in _G5),
)

# mu, gammas 1..5, covariate coefficients, per scenario and family
PARAMETERS = {
    ("none", "gaussian"): (20.0, (0.0, 0.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
    ("h_only", "gaussian"): (20.0, (0.6, 0.4, 0.3, 0.3, 0.2), (0.0, 0.0, 0.0)),
    ("h_and_x", "gaussian"): (20.0, (0.6, 0.4, 0.3, 0.3, 0.2), (6.0, 0.8, 0.5)),
    ("none", "poisson"): (0.0, (0.0, 0.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
    ("h_only", "poisson"): (0.0, (0.6, 0.4, 0.3, 0.3, 0.2), (0.0, 0.0, 0.0)),
    ("h_and_x", "poisson"): (0.0, (0.6, 0.4, 0.3, 0.3, 0.2), (6.0, 0.8, 0.5)),
}
SIGMA = 1.5


@dataclass(frozen=True)
class SimConfig:
    scenario: str = "h_only"
    family: str = "gaussian"
    per_leaf: int | None = 1000
    per_leaf_range: tuple[int, int] | None = None
    sigma: float = SIGMA
    seed: int = 0
    mu: float | None = None
    gammas: tuple[float, ...] | None = None
    beta_x: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.per_leaf_range is not None:
            lo, hi = (int(v) for v in self.per_leaf_range)
            if not 1 <= lo <= hi:
                raise ValueError("per_leaf_range needs 1 <= lo <= hi")
            object.__setattr__(self, "per_leaf_range", (lo, hi))
            object.__setattr__(self, "per_leaf", None)
        elif self.per_leaf is None or self.per_leaf < 1:
            raise ValueError("give per_leaf >= 1 or per_leaf_range")
        mu, gammas, beta_x = PARAMETERS[(self.scenario, self.family)]
        if self.mu is None:
            object.__setattr__(self, "mu", mu)
        if self.gammas is None:
            object.__setattr__(self, "gammas", gammas)
        if self.beta_x is None:
            object.__setattr__(self, "beta_x", beta_x)
        if len(self.gammas) != 5 or len(self.beta_x) != 3:
            raise ValueError("five gammas and three covariate coefficients expected")

    @classmethod
    def from_name(cls, name: str, **kwargs) -> "SimConfig":
        """Parse ``"<scenario>-<family>"``, e.g. ``"h_only-poisson"``."""
        scenario, _, family = name.rpartition("-")
        return cls(scenario=scenario, family=family, **kwargs)

    @property
    def name(self) -> str:
        return f"{self.scenario}-{self.family}"

    @property
    def link(self) -> str:
        return "log" if self.family == "poisson" else "identity"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario, "family": self.family, "per_leaf": self.per_leaf,
            "per_leaf_range": None if self.per_leaf_range is None else list(self.per_leaf_range),
            "sigma": self.sigma, "seed": self.seed, "mu": self.mu,
            "gammas": list(self.gammas), "beta_x": list(self.beta_x), "link": self.link,
        }


@lru_cache(maxsize=1)
def sim_hierarchy() -> Hierarchy:
    """The fixed three-level simulation hierarchy, read from the packaged file."""
    path = resources.files("hiercat").joinpath("data/sim_hierarchy.csv")
    with resources.as_file(path) as p:
        return Hierarchy.read_csv(p)


def leaf_effects(hierarchy: Hierarchy, gammas: Sequence[float]) -> np.ndarray:
    """Contribution of the hierarchy to the linear predictor, one value per leaf."""
    X, columns = effect_design(hierarchy)
    where = {c: j for j, c in enumerate(columns)}
    beta = np.zeros(len(columns))
    for level, index, g, mult in EFFECT_TERMS:
        beta[where[NodeId(level, index)]] = mult * gammas[g - 1]
    return X @ beta


def class_effects(hierarchy: Hierarchy, gammas: Sequence[float]) -> dict[int, np.ndarray]:
    """Effect of every class at every level: the unweighted mean over its children."""
    R = hierarchy.num_levels
    out = {R: leaf_effects(hierarchy, gammas)}
    for r in range(R - 1, 0, -1):
        out[r] = np.array([np.mean([out[r + 1][c.index - 1] for c in hierarchy.children(n)])
                           for n in hierarchy.level(r)])
    return out


# true reduced structure ----------------------------------------------------

@dataclass
class TrueStructure:
    """Reduced classes per level as sets of original classes, plus leaf groups."""

    classes: dict[int, list[tuple[NodeId, ...]]]
    leaf_group: dict[NodeId, tuple[int, int]] = field(default_factory=dict)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(self.classes[r]) for r in sorted(self.classes) if self.classes[r])

    @property
    def num_levels(self) -> int:
        return len(self.sizes)


def true_structure(hierarchy: Hierarchy, gammas: Sequence[float], decimals: int = 9) -> TrueStructure:
    """Reduce by exact equality of class effects.

    Top down, the active children of each reduced class (or collapsed set)
    are merged when their effects are equal, and children whose effect
    equals their parent's are collapsed into it.
    """
    eff = class_effects(hierarchy, gammas)

    def value(node: NodeId) -> float:
        return round(float(eff[node.level][node.index - 1]), decimals)

    R = hierarchy.num_levels
    classes: dict[int, list[tuple[NodeId, ...]]] = {r: [] for r in range(1, R + 1)}
    owner: dict[NodeId, tuple[int, int]] = {}
    # units: (members, parent value, target reduced class, is_pseudo)
    groups: dict[float, list[NodeId]] = {}
    for node in hierarchy.level(1):
        groups.setdefault(value(node), []).append(node)
    units = []
    for members in groups.values():
        classes[1].append(tuple(members))
        rid = (1, len(classes[1]))
        for m in members:
            owner[m] = rid
        units.append((members, value(members[0]), rid, False))
    for r in range(1, R):
        next_units = []
        for members, val, target, _ in units:
            kids = [c for m in members for c in hierarchy.children(m)]
            collapsed = [c for c in kids if value(c) == val]
            active = [c for c in kids if value(c) != val]
            if collapsed:
                next_units.append((collapsed, val, target, True))
            by_val: dict[float, list[NodeId]] = {}
            for c in active:
                by_val.setdefault(value(c), []).append(c)
            for v, cs in by_val.items():
                classes[r + 1].append(tuple(cs))
                rid = (r + 1, len(classes[r + 1]))
                for c in cs:
                    owner[c] = rid
                next_units.append((cs, v, rid, False))
        units = next_units

    leaf_group = {}
    for leaf in hierarchy.level(R):
        group = None
        for node in hierarchy.leaf_path(leaf):
            group = owner.get(node, group)
        leaf_group[leaf] = group
    return TrueStructure(classes, leaf_group)


# generators ----------------------------------------------------------------

def gen_covariates(n: int, rng: np.random.Generator | int) -> np.ndarray:
    """``x1 = sin(U(0, 5))``, ``x2 ~ N(0, 1)``, ``x3 = U(1, 2) ** 2``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(rng)
    a1 = rng.uniform(0.0, 5.0, size=n)
    x2 = rng.standard_normal(n)
    a3 = rng.uniform(1.0, 2.0, size=n)
    return np.column_stack([np.sin(a1), x2, a3 ** 2])


def leaf_counts(config: SimConfig, n_leaves: int, rng: np.random.Generator) -> np.ndarray:
    if config.per_leaf_range is not None:
        lo, hi = config.per_leaf_range
        return rng.integers(lo, hi + 1, size=n_leaves)
    return np.full(n_leaves, config.per_leaf, dtype=np.int64)


def conditional_mean(config: SimConfig, hierarchy: Hierarchy, leaves: np.ndarray,
                     x: np.ndarray) -> np.ndarray:
    eta = config.mu + leaf_effects(hierarchy, config.gammas)[leaves] + x @ np.asarray(config.beta_x)
    return np.exp(eta) if config.family == "poisson" else eta


def gen_response(config: SimConfig, hierarchy: Hierarchy, leaves: np.ndarray, x: np.ndarray,
                 rng: np.random.Generator | int) -> np.ndarray:
    rng = np.random.default_rng(rng)
    mean = conditional_mean(config, hierarchy, leaves, x)
    if config.family == "poisson":
        return rng.poisson(mean).astype(float)
    return rng.normal(mean, config.sigma)


def simulate(config: SimConfig, hierarchy: Hierarchy | None = None,
             stream: int = 0) -> Dataset:
    """Generate one dataset; ``stream`` separates e.g. training and test draws."""
    hierarchy = hierarchy or sim_hierarchy()
    rng = np.random.default_rng([config.seed, stream])
    counts = leaf_counts(config, hierarchy.n_leaves, rng)
    leaves = np.repeat(np.arange(hierarchy.n_leaves), counts)
    x = gen_covariates(len(leaves), rng)
    y = gen_response(config, hierarchy, leaves, x, rng)
    return Dataset(y, leaves, x, hierarchy, config.family, ("x1", "x2", "x3"))


def build_sim_hierarchy() -> tuple[Hierarchy, TrueStructure]:
    """The simulation hierarchy and the structure its effects reduce to."""
    h = sim_hierarchy()
    return h, true_structure(h, PARAMETERS[("h_only", "gaussian")][1])


def write_truth(path, hierarchy: Hierarchy, truth: TrueStructure) -> None:
    payload = {
        "sizes": list(truth.sizes),
        "classes": {str(r): [[hierarchy.label(n) for n in members] for members in cls]
                    for r, cls in truth.classes.items()},
        "leaf_group": {hierarchy.label(leaf): f"{g[0]}.{g[1]}" for leaf, g in truth.leaf_group.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def truth_for(config: SimConfig, hierarchy: Hierarchy | None = None) -> TrueStructure:
    hierarchy = hierarchy or sim_hierarchy()
    return true_structure(hierarchy, config.gammas)


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    return replace(config, seed=seed)
