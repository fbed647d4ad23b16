"""Shared domain types and the reference-table data model.

A reference table is the prior-predictive sample every analysis starts
from: rows of (model label, parameter vector, summary-statistic vector).
Row ``i`` of a table is a pure function of ``(root_seed, i)``: the row seed
is ``child_seed(root_seed, i)``, parameter values are inverse-CDF draws
from one uniform each (stream ``child_seed(row_seed, 0)``), and the
simulator receives ``child_seed(row_seed, 1)``. Tables are therefore
identical whether rows are generated serially, in parallel, or in any
partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from . import rng


class RowSimulationError(RuntimeError):
    """A simulator produced an invalid summary for one table row."""

    def __init__(self, message: str, *, row: int, seed: int):
        super().__init__(f"row {row} (seed {seed:#018x}): {message}")
        self.row = row
        self.seed = seed


@dataclass(frozen=True)
class Transform:
    """Support transform mapping a parameter to an unconstrained scale."""

    kind: str  # "identity" | "log" | "logit"
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "log", "logit"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == "logit" and not self.b > self.a:
            raise ValueError("logit transform requires b > a")

    def contains(self, x: float) -> bool:
        if self.kind == "log":
            return x > 0.0
        if self.kind == "logit":
            return self.a < x < self.b
        return math.isfinite(x)

    def forward(self, x):
        """Natural scale -> unconstrained scale."""
        if self.kind == "log":
            return np.log(x)
        if self.kind == "logit":
            p = (np.asarray(x, dtype=float) - self.a) / (self.b - self.a)
            return np.log(p) - np.log1p(-p)
        return np.asarray(x, dtype=float)

    def inverse(self, z):
        """Unconstrained scale -> natural scale (always inside the support)."""
        if self.kind == "log":
            return np.exp(z)
        if self.kind == "logit":
            return self.a + (self.b - self.a) / (1.0 + np.exp(-np.asarray(z, dtype=float)))
        return np.asarray(z, dtype=float)

    def to_json(self) -> dict:
        if self.kind == "logit":
            return {"kind": "logit", "a": self.a, "b": self.b}
        return {"kind": self.kind}

    @staticmethod
    def from_json(obj: dict) -> "Transform":
        if obj["kind"] == "logit":
            return Transform("logit", float(obj["a"]), float(obj["b"]))
        return Transform(obj["kind"])


IDENTITY = Transform("identity")
LOG = Transform("log")


def logit(a: float, b: float) -> Transform:
    return Transform("logit", a, b)


@dataclass(frozen=True)
class SummaryVector:
    """Named, finite, real-valued summary statistics."""

    names: tuple
    values: np.ndarray

    def __init__(self, names: Sequence[str], values: Sequence[float]):
        names = tuple(names)
        values = np.asarray(values, dtype=float)
        if len(names) < 1 or len(names) != values.shape[0] or values.ndim != 1:
            raise ValueError("names and values must be equal-length, non-empty")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"non-finite summary statistic: {dict(zip(names, values))}")
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.names, self.values)}


@dataclass(frozen=True)
class ParamVector:
    """Named parameter values with per-parameter support transforms."""

    names: tuple
    values: np.ndarray
    transforms: tuple

    def __init__(self, names: Sequence[str], values: Sequence[float],
                 transforms: Sequence[Transform]):
        names = tuple(names)
        transforms = tuple(transforms)
        values = np.asarray(values, dtype=float)
        if not (len(names) == values.shape[0] == len(transforms)):
            raise ValueError("names, values and transforms must have equal length")
        for n, v, t in zip(names, values, transforms):
            if not t.contains(v):
                raise ValueError(f"parameter {n}={v} outside {t.kind} support")
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "transforms", transforms)

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.names, self.values)}


@dataclass(frozen=True)
class ParamDef:
    """One model parameter: prior, support transform, optional draw map.

    ``quantile`` maps a uniform variate to a parameter draw; by default it
    is the prior's inverse CDF. Models whose recorded parameter is a
    deterministic function of a prior draw (e.g. a variance recorded from a
    scale draw) override it.
    """

    name: str
    prior: "object"  # distributions.PriorSpec; untyped to avoid an import cycle
    transform: Transform = IDENTITY
    quantile: Optional[Callable] = None

    def draw(self, u):
        if self.quantile is not None:
            return self.quantile(u)
        return self.prior.quantile(u)


@dataclass(frozen=True)
class ModelSpec:
    """A named generative model: priors plus a seeded stochastic simulator.

    ``simulate(params, seed) -> SummaryVector`` must be a pure function of
    its arguments. ``simulate_batch(theta_matrix, seeds) -> (n, d) array``
    is an optional fast path that must agree bit-for-bit with ``simulate``;
    heavy pipelines use it, the row-level contract is unchanged.
    """

    label: str
    params: tuple
    stat_names: tuple
    simulate: Callable
    simulate_batch: Optional[Callable] = None

    @property
    def param_names(self) -> tuple:
        return tuple(p.name for p in self.params)

    @property
    def transforms(self) -> tuple:
        return tuple(p.transform for p in self.params)

    def param_vector(self, values) -> ParamVector:
        return ParamVector(self.param_names, values, self.transforms)

    def draw_params(self, uniforms: np.ndarray) -> np.ndarray:
        """Map an (n, p) block of uniforms to an (n, p) block of draws."""
        out = np.empty_like(uniforms)
        for j, p in enumerate(self.params):
            out[:, j] = p.draw(uniforms[:, j])
        return out


@dataclass(frozen=True)
class TableBlock:
    """All rows of one model, in row-index order."""

    label: str
    param_names: tuple
    transforms: tuple
    row_index: np.ndarray  # global row indices, int64
    params: np.ndarray     # (n, p)
    stats: np.ndarray      # (n, d)

    @property
    def n_rows(self) -> int:
        return int(self.row_index.shape[0])


@dataclass(frozen=True)
class ReferenceTable:
    """Prior-predictive rows pooled across models.

    Stored columnwise per model block; ``stats`` is the pooled (N, d)
    statistics matrix in global row order.
    """

    stat_names: tuple
    root_seed: int
    blocks: tuple

    def __post_init__(self):
        if not self.blocks or all(b.n_rows == 0 for b in self.blocks):
            raise ValueError("empty table")

    @property
    def labels(self) -> tuple:
        return tuple(b.label for b in self.blocks)

    @property
    def n_rows(self) -> int:
        return sum(b.n_rows for b in self.blocks)

    @property
    def stats(self) -> np.ndarray:
        return np.vstack([b.stats for b in self.blocks])

    @property
    def row_labels(self) -> np.ndarray:
        return np.concatenate([np.repeat(b.label, b.n_rows) for b in self.blocks])

    @property
    def row_index(self) -> np.ndarray:
        return np.concatenate([b.row_index for b in self.blocks])

    def block(self, label: str) -> TableBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(f"no model {label!r} in table (have {self.labels})")

    def rows(self) -> Iterator[tuple]:
        """Yield (row_index, label, ParamVector, SummaryVector) per row."""
        for b in self.blocks:
            for i in range(b.n_rows):
                yield (int(b.row_index[i]), b.label,
                       ParamVector(b.param_names, b.params[i], b.transforms),
                       SummaryVector(self.stat_names, b.stats[i]))

    @staticmethod
    def from_rows(rows, stat_names, root_seed) -> "ReferenceTable":
        """Rebuild a table from (index, label, ParamVector, SummaryVector) rows.

        Rows are sorted by their row index, so a shuffled row list restores
        the original table exactly.
        """
        rows = sorted(rows, key=lambda r: r[0])
        by_label: dict = {}
        order: list = []
        for idx, label, pv, sv in rows:
            if tuple(sv.names) != tuple(stat_names):
                raise ValueError(f"row {idx}: stat names {sv.names} != {stat_names}")
            if label not in by_label:
                by_label[label] = []
                order.append(label)
            by_label[label].append((idx, pv, sv))
        blocks = []
        for label in order:
            items = by_label[label]
            pv0 = items[0][1]
            blocks.append(TableBlock(
                label=label,
                param_names=pv0.names,
                transforms=pv0.transforms,
                row_index=np.array([i for i, _, _ in items], dtype=np.int64),
                params=np.array([pv.values for _, pv, _ in items], dtype=float),
                stats=np.array([sv.values for _, _, sv in items], dtype=float),
            ))
        return ReferenceTable(tuple(stat_names), int(root_seed), tuple(blocks))


def row_seed(root_seed: int, row: int) -> int:
    return int(rng.child_seed(rng.as_seed(root_seed), row))


def build_reference_table(models: Sequence[ModelSpec], n_per_model: int,
                          root_seed: int) -> ReferenceTable:
    """Simulate ``n_per_model`` prior-predictive rows from each model.

    Rows are laid out model-by-model with global indices
    ``i = m * n_per_model + j``. Content is bit-reproducible from
    ``root_seed`` alone.
    """
    if n_per_model < 1:
        raise ValueError("n_per_model must be >= 1")
    if not models:
        raise ValueError("at least one model required")
    stat_names = tuple(models[0].stat_names)
    for m in models:
        if tuple(m.stat_names) != stat_names:
            raise ValueError(f"model {m.label} emits {m.stat_names}, expected {stat_names}")

    root = rng.as_seed(root_seed)
    blocks = []
    for mi, model in enumerate(models):
        base = mi * n_per_model
        seeds = rng.child_seeds(root, base, n_per_model)
        # one uniform per parameter, from the row's parameter stream
        p = len(model.params)
        u = np.empty((n_per_model, p))
        for j in range(n_per_model):
            st = rng.seed_state(rng.child_seed(seeds[j], 0))
            for kk in range(p):
                u[j, kk] = rng.next_double(st)
        theta = model.draw_params(u)
        sim_seeds = np.array([rng.child_seed(s, 1) for s in seeds], dtype=np.uint64)

        if model.simulate_batch is not None:
            stats = np.asarray(model.simulate_batch(theta, sim_seeds), dtype=float)
            if stats.shape != (n_per_model, len(stat_names)):
                raise ValueError(f"model {model.label}: batch simulator returned "
                                 f"shape {stats.shape}")
            bad = ~np.all(np.isfinite(stats), axis=1)
            if np.any(bad):
                j = int(np.nonzero(bad)[0][0])
                raise RowSimulationError(
                    f"non-finite statistics {stats[j]}",
                    row=base + j, seed=int(seeds[j]))
        else:
            stats = np.empty((n_per_model, len(stat_names)))
            for j in range(n_per_model):
                pv = model.param_vector(theta[j])
                try:
                    sv = model.simulate(pv, int(sim_seeds[j]))
                except Exception as exc:  # simulator failure is a row error
                    raise RowSimulationError(str(exc), row=base + j,
                                             seed=int(seeds[j])) from exc
                if tuple(sv.names) != stat_names:
                    raise RowSimulationError(
                        f"stat names {sv.names} != {stat_names}",
                        row=base + j, seed=int(seeds[j]))
                stats[j] = sv.values

        blocks.append(TableBlock(
            label=model.label,
            param_names=model.param_names,
            transforms=model.transforms,
            row_index=np.arange(base, base + n_per_model, dtype=np.int64),
            params=theta,
            stats=stats,
        ))
    return ReferenceTable(stat_names, int(root_seed), tuple(blocks))
