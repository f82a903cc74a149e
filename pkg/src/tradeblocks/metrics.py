"""Topographic indicators of the thresholded trade networks.

Missing values are represented as None and serialized as empty CSV fields,
never as zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netbuild import TemporalNetwork, WeightedNet

UNWEIGHTED = "unweighted"
TRADE_WEIGHTED = "trade-weighted"


@dataclass(frozen=True)
class TieCensus:
    """Outgoing-tie census of one country in one yearly slice.

    ``m`` counts all pre-threshold out-ties, ``delta`` the ones below the
    cutoff; the weight multisets hold the normalized weights on each side.
    """

    country: str
    year: int
    kind: str
    m: int
    delta: int
    retained_weights: tuple[float, ...]
    removed_weights: tuple[float, ...]


def tie_census(net: WeightedNet, universe: tuple[str, ...]) -> list[TieCensus]:
    """Per-country censuses for a thresholded slice (active countries only)."""
    if net.tau is None or net.pre_threshold is None:
        raise ValueError("tie census needs a thresholded slice with pre-threshold weights")
    out = []
    for i in np.flatnonzero(net.active):
        row = net.pre_threshold[i]
        ties = row[row > 0.0]
        removed = ties[ties < net.tau]
        retained = ties[ties >= net.tau]
        out.append(
            TieCensus(
                country=universe[i],
                year=net.year,
                kind=net.kind,
                m=int(ties.size),
                delta=int(removed.size),
                retained_weights=tuple(sorted(retained.tolist())),
                removed_weights=tuple(sorted(removed.tolist())),
            )
        )
    return out


def minor_major_ratio(census: TieCensus) -> float | None:
    """Retained share of a country's out-tie count: (m - delta) / m."""
    if census.m == 0:
        return None
    return (census.m - census.delta) / census.m


def concentration_index(weights) -> float | None:
    """Herfindahl-Hirschman index of the weight shares; None if empty."""
    w = np.asarray(list(weights), dtype=np.float64)
    if w.size == 0:
        return None
    shares = w / w.sum()
    return float(np.sum(shares**2))


def world_average(
    per_country_values: dict[str, float | None],
    weighting: str = UNWEIGHTED,
    weights: dict[str, float] | None = None,
) -> float:
    """Mean of the non-missing country values, optionally trade-weighted."""
    items = [(c, v) for c, v in per_country_values.items() if v is not None]
    if not items:
        raise ValueError("no non-missing values to average")
    if weighting == UNWEIGHTED:
        return float(np.mean([v for _, v in items]))
    if weighting == TRADE_WEIGHTED:
        if weights is None:
            raise ValueError("trade-weighted average needs per-country weights")
        ws = np.array([weights[c] for c, _ in items], dtype=np.float64)
        vs = np.array([v for _, v in items])
        if ws.sum() <= 0:
            raise ValueError("trade weights sum to zero")
        return float(np.sum(ws * vs) / ws.sum())
    raise ValueError(f"unknown weighting {weighting!r}")


def country_deviation(country_value: float, world: float) -> float | None:
    """Percent deviation of a country value from the world average."""
    if world == 0:
        return None
    return 100.0 * (country_value - world) / world


def metrics_rows(nets: dict[str, TemporalNetwork]) -> list[tuple]:
    """Long-format metric rows ``(year, country, kind, metric, value)``.

    Per country: minor/major ratio and the concentration indexes of retained
    and removed ties. Per year: unweighted world averages (empty country
    field) and per-country percent deviations from them.
    """
    rows: list[tuple] = []
    for kind, tn in sorted(nets.items()):
        for sl in tn.slices:
            censuses = tie_census(sl, tn.universe)
            ratios: dict[str, float | None] = {}
            for c in censuses:
                ratio = minor_major_ratio(c)
                ratios[c.country] = ratio
                rows.append((c.year, c.country, kind, "minor_major_ratio", ratio))
                rows.append((c.year, c.country, kind, "hhi_retained", concentration_index(c.retained_weights)))
                rows.append((c.year, c.country, kind, "hhi_removed", concentration_index(c.removed_weights)))
            if any(v is not None for v in ratios.values()):
                world = world_average(ratios)
                rows.append((sl.year, "", kind, "minor_major_ratio_world_avg", world))
                for country, value in sorted(ratios.items()):
                    dev = None if value is None else country_deviation(value, world)
                    rows.append((sl.year, country, kind, "minor_major_ratio_dev_pct", dev))
    return rows
