"""Construction of normalized, thresholded directed trade networks.

Three network kinds are built from a flow table: exports (X), imports (I),
and net exports (NX). Each country's row of raw flows is normalized to sum
to one, then ties below the cutoff fraction are removed. Row normalization
uses the pre-threshold row sum; removed mass is recorded, never
redistributed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ingest import (
    DIRECTION_EXPORTS,
    DIRECTION_IMPORTS,
    DIRECTION_NET_EXPORTS,
    FlowMatrix,
    FlowTable,
    yearly_flow_matrix,
)

log = logging.getLogger(__name__)

DEFAULT_TAU = 0.05
ROW_SUM_TOL = 1e-12

KIND_EXPORTS = "X"
KIND_IMPORTS = "I"
KIND_NET_EXPORTS = "NX"
ALL_KINDS = (KIND_EXPORTS, KIND_IMPORTS, KIND_NET_EXPORTS)

_KIND_FOR_DIRECTION = {
    DIRECTION_EXPORTS: KIND_EXPORTS,
    DIRECTION_IMPORTS: KIND_IMPORTS,
    DIRECTION_NET_EXPORTS: KIND_NET_EXPORTS,
}


@dataclass
class WeightedNet:
    """Row-normalized (optionally thresholded) weighted net for one year.

    ``active`` marks nodes whose raw out-flow row was positive; those rows
    sum to one before thresholding. ``pre_threshold`` keeps the normalized
    weights before cutoff so tie censuses can be reconstructed; ``tau`` is
    None until a threshold has been applied.
    """

    weights: np.ndarray
    year: int
    kind: str
    active: np.ndarray
    raw_strength: np.ndarray | None = None
    pre_threshold: np.ndarray | None = None
    removed_count: np.ndarray | None = None
    removed_mass: np.ndarray | None = None
    tau: float | None = None

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]


@dataclass
class TemporalNetwork:
    """Ordered yearly network slices over a fixed node universe.

    ``presence[t, i]`` is True iff node i has at least one retained tie
    (in or out) at slice t, or the build kept isolated nodes.
    """

    slices: list[WeightedNet]
    universe: tuple[str, ...]
    presence: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.universe)

    @property
    def n_steps(self) -> int:
        return len(self.slices)

    @property
    def years(self) -> list[int]:
        return [s.year for s in self.slices]

    @property
    def kind(self) -> str:
        return self.slices[0].kind

    def year_index(self, year: int) -> int:
        try:
            return self.years.index(year)
        except ValueError:
            raise ValueError(f"year {year} not in network (have {self.years})") from None


def net_exports(exports: FlowMatrix, imports: FlowMatrix) -> FlowMatrix:
    """Clamped bilateral net exports: cell (i, j) = max(X(i,j) - I(i,j), 0)."""
    if exports.universe != imports.universe:
        raise ValueError("universe mismatch between export and import matrices")
    if exports.year != imports.year:
        raise ValueError(f"year mismatch: {exports.year} vs {imports.year}")
    values = np.maximum(exports.values - imports.values, 0)
    return FlowMatrix(
        values=values, year=exports.year, direction=DIRECTION_NET_EXPORTS, universe=exports.universe
    )


def normalize_rows(flows: FlowMatrix) -> WeightedNet:
    """Divide each positive row by its sum; zero rows stay zero and inactive.

    The sum of all weights afterwards equals the number of active nodes.
    """
    row_sums = flows.values.sum(axis=1, dtype=np.int64)
    if not np.any(row_sums > 0):
        raise ValueError(f"no positive flows in {flows.year} ({flows.direction}): no network that year")
    active = row_sums > 0
    weights = np.zeros(flows.values.shape, dtype=np.float64)
    weights[active] = flows.values[active] / row_sums[active, None].astype(np.float64)
    raw_strength = (flows.values.sum(axis=1) + flows.values.sum(axis=0)).astype(np.float64)
    return WeightedNet(
        weights=weights,
        year=flows.year,
        kind=_KIND_FOR_DIRECTION[flows.direction],
        active=active,
        raw_strength=raw_strength,
    )


def threshold(net: WeightedNet, tau: float = DEFAULT_TAU) -> WeightedNet:
    """Zero every weight strictly below ``tau``; weights >= tau are kept as-is.

    Removed-tie counts and removed weight mass are recorded per node for the
    census metrics.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    if net.tau is not None:
        raise ValueError("network is already thresholded")
    removed = (net.weights > 0.0) & (net.weights < tau)
    weights = np.where(removed, 0.0, net.weights)
    return WeightedNet(
        weights=weights,
        year=net.year,
        kind=net.kind,
        active=net.active.copy(),
        raw_strength=None if net.raw_strength is None else net.raw_strength.copy(),
        pre_threshold=net.weights.copy(),
        removed_count=removed.sum(axis=1).astype(np.int64),
        removed_mass=(net.weights * removed).sum(axis=1),
        tau=tau,
    )


def slice_presence(net: WeightedNet, keep_isolated: bool = False) -> np.ndarray:
    """Node presence for one slice: any retained tie in or out."""
    has_tie = (net.weights.sum(axis=1) > 0) | (net.weights.sum(axis=0) > 0)
    if keep_isolated:
        return has_tie | net.active
    return has_tie


def build_networks(
    table: FlowTable,
    years: list[int] | tuple[int, ...] | range,
    kinds: tuple[str, ...] = ALL_KINDS,
    tau: float = DEFAULT_TAU,
    keep_isolated: bool = False,
) -> dict[str, TemporalNetwork]:
    """Build the requested temporal networks over a year range.

    Per year and kind the pipeline is: yearly flow matrix, net-export
    difference for NX, row normalization, thresholding. All kinds share the
    table's universe and index order.
    """
    years = sorted(years)
    if not years:
        raise ValueError("empty year range")
    missing = [y for y in years if y not in table.years]
    if missing:
        raise ValueError(f"years not in table: {missing}")
    bad = [k for k in kinds if k not in ALL_KINDS]
    if bad:
        raise ValueError(f"unknown network kinds: {bad}")
    if not kinds:
        raise ValueError("no network kinds requested")

    slices: dict[str, list[WeightedNet]] = {k: [] for k in kinds}
    for year in years:
        need_x = KIND_EXPORTS in kinds or KIND_NET_EXPORTS in kinds
        need_i = KIND_IMPORTS in kinds or KIND_NET_EXPORTS in kinds
        x_mat = yearly_flow_matrix(table, year, DIRECTION_EXPORTS) if need_x else None
        i_mat = yearly_flow_matrix(table, year, DIRECTION_IMPORTS) if need_i else None
        for kind in kinds:
            if kind == KIND_EXPORTS:
                mat = x_mat
            elif kind == KIND_IMPORTS:
                mat = i_mat
            else:
                mat = net_exports(x_mat, i_mat)
            slices[kind].append(threshold(normalize_rows(mat), tau=tau))

    out: dict[str, TemporalNetwork] = {}
    for kind in kinds:
        presence = np.stack([slice_presence(s, keep_isolated=keep_isolated) for s in slices[kind]])
        out[kind] = TemporalNetwork(
            slices=slices[kind],
            universe=table.universe,
            presence=presence,
            meta={"tau": tau, "keep_isolated": keep_isolated},
        )
        n_ties = int(sum((s.weights > 0).sum() for s in slices[kind]))
        log.info("built %s network: %d years, %d nodes, %d retained ties", kind, len(years), len(table.universe), n_ties)
    return out
