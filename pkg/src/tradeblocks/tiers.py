"""Core / semi-periphery / periphery tiers over fitted clusters.

Clusters are ranked by the mean trade strength of their member countries and
coarsened into three tiers by cumulative membership share at two configurable
cut fractions. The boundaries are an explicit, arbitrary choice; they are
echoed in all outputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netbuild import TemporalNetwork
from .sbm import FitResult

TIER_CORE = "core"
TIER_SEMI = "semi-periphery"
TIER_PERIPHERY = "periphery"
TIERS = (TIER_CORE, TIER_SEMI, TIER_PERIPHERY)

STRENGTH_RAW_SHARE = "raw_share"
STRENGTH_RETAINED_DEGREE = "retained_degree"


@dataclass
class ClusterRanking:
    """Clusters of one year ordered by descending member-mean strength."""

    year: int
    entries: list[tuple[int, float]]            # (cluster id, strength score)
    members: dict[int, list[str]]
    empty: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class TierSpec:
    """Two cut fractions partitioning the ranked clusters into three tiers.

    Walking the ranking in descending order, a cluster is core while the
    cumulative membership share before it is below ``c1``, semi-peripheral
    while below ``c2``, peripheral after. ``overrides`` pins specific
    clusters to a tier regardless of rank.
    """

    c1: float = 0.15
    c2: float = 0.55
    overrides: dict[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError(f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")
        for tier in self.overrides.values():
            if tier not in TIERS:
                raise ValueError(f"unknown tier {tier!r} in overrides")


@dataclass
class TierAssignment:
    """Per (country, year) cluster and tier labels; -1 / None when absent."""

    universe: tuple[str, ...]
    years: list[int]
    cluster: np.ndarray        # (T, N) int, -1 where absent
    tier: np.ndarray           # (T, N) object, None where absent
    spec: TierSpec


def _strengths(net: TemporalNetwork, t: int, mode: str) -> np.ndarray:
    sl = net.slices[t]
    if mode == STRENGTH_RAW_SHARE:
        if sl.raw_strength is None:
            raise ValueError("network slices carry no raw strength; use retained_degree")
        s = sl.raw_strength.astype(np.float64)
        total = s.sum()
        return s / total if total > 0 else s
    if mode == STRENGTH_RETAINED_DEGREE:
        return sl.weights.sum(axis=1) + sl.weights.sum(axis=0)
    raise ValueError(f"unknown strength mode {mode!r}")


def rank_clusters(
    result: FitResult,
    net: TemporalNetwork,
    year: int,
    strength: str = STRENGTH_RAW_SHARE,
) -> ClusterRanking:
    """Rank one year's clusters by the mean strength of their present members.

    Clusters with no present member are excluded from the ranking and listed
    separately. Score ties break toward the lower cluster id.
    """
    t = net.year_index(year)
    labels = result.map_labels[:, t]
    present = net.presence[t]
    node_strength = _strengths(net, t, strength)

    members: dict[int, list[str]] = {}
    scores: dict[int, float] = {}
    for cluster in range(1, result.model.q + 1):
        mask = (labels == cluster) & present
        if mask.any():
            members[cluster] = [net.universe[i] for i in np.flatnonzero(mask)]
            scores[cluster] = float(node_strength[mask].mean())
    entries = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    empty = [c for c in range(1, result.model.q + 1) if c not in scores]
    return ClusterRanking(year=year, entries=entries, members=members, empty=empty)


def assign_tiers(ranking: ClusterRanking, spec: TierSpec) -> dict[int, str]:
    """Map each ranked cluster to a tier by the cumulative-membership walk."""
    if not ranking.entries:
        raise ValueError(f"no ranked clusters in {ranking.year}")
    total = sum(len(ranking.members[c]) for c, _ in ranking.entries)
    tiers: dict[int, str] = {}
    cum_before = 0.0
    for cluster, _ in ranking.entries:
        if cum_before < spec.c1:
            tiers[cluster] = TIER_CORE
        elif cum_before < spec.c2:
            tiers[cluster] = TIER_SEMI
        else:
            tiers[cluster] = TIER_PERIPHERY
        cum_before += len(ranking.members[cluster]) / total
    for cluster, tier in spec.overrides.items():
        if cluster in tiers:
            tiers[cluster] = tier
    return tiers


def assign_all(
    result: FitResult,
    net: TemporalNetwork,
    spec: TierSpec | None = None,
    strength: str = STRENGTH_RAW_SHARE,
) -> TierAssignment:
    """Tier every present country in every year."""
    spec = spec or TierSpec()
    t_len, n = net.n_steps, net.n_nodes
    cluster = np.full((t_len, n), -1, dtype=np.int64)
    tier = np.full((t_len, n), None, dtype=object)
    for t, year in enumerate(net.years):
        ranking = rank_clusters(result, net, year, strength=strength)
        tier_of = assign_tiers(ranking, spec)
        present = net.presence[t]
        labels = result.map_labels[:, t]
        for i in np.flatnonzero(present):
            cluster[t, i] = labels[i]
            tier[t, i] = tier_of[labels[i]]
    return TierAssignment(universe=net.universe, years=list(net.years), cluster=cluster, tier=tier, spec=spec)


@dataclass(frozen=True)
class TrajectoryPoint:
    year: int
    cluster: int | None
    tier: str | None

    @property
    def absent(self) -> bool:
        return self.cluster is None


def trajectory(assignments: TierAssignment, country: str) -> list[TrajectoryPoint]:
    """Chronological (year, cluster, tier) entries; absent years are marked."""
    try:
        i = assignments.universe.index(country)
    except ValueError:
        raise ValueError(f"unknown country {country!r}") from None
    points = []
    for t, year in enumerate(assignments.years):
        c = int(assignments.cluster[t, i])
        if c < 0:
            points.append(TrajectoryPoint(year=year, cluster=None, tier=None))
        else:
            points.append(TrajectoryPoint(year=year, cluster=c, tier=assignments.tier[t, i]))
    return points


@dataclass
class TransitionReport:
    rows: list[tuple[str, int, str, str]]       # (country, year, from_tier, to_tier)
    counts: dict[tuple[str, str], int]


def transition_report(assignments: TierAssignment) -> TransitionReport:
    """One row per tier change; countries with a stable tier do not appear.

    Absence gaps are carried over: a change is reported in the year a country
    reappears with a different tier than it last held.
    """
    if len(assignments.years) < 2:
        raise ValueError("transition report needs at least two years")
    rows: list[tuple[str, int, str, str]] = []
    counts: dict[tuple[str, str], int] = {}
    for i, country in enumerate(assignments.universe):
        prev: str | None = None
        for t, year in enumerate(assignments.years):
            tier = assignments.tier[t, i]
            if tier is None:
                continue
            if prev is not None and tier != prev:
                rows.append((country, year, prev, tier))
                counts[(prev, tier)] = counts.get((prev, tier), 0) + 1
            prev = tier
    return TransitionReport(rows=rows, counts=counts)


def intercluster_matrix(result: FitResult, net: TemporalNetwork, year: int) -> np.ndarray:
    """Summed retained weights between clusters at one year (Q x Q)."""
    t = net.year_index(year)
    labels = result.map_labels[:, t]
    q = result.model.q
    w = net.slices[t].weights
    out = np.zeros((q, q))
    src, dst = np.nonzero(w)
    np.add.at(out, (labels[src] - 1, labels[dst] - 1), w[src, dst])
    return out


def cluster_composition(result: FitResult, net: TemporalNetwork) -> dict:
    """Cluster membership lists per year, for the JSON composition report."""
    out: dict[str, dict[str, list[str]]] = {}
    for t, year in enumerate(net.years):
        present = net.presence[t]
        labels = result.map_labels[:, t]
        per_cluster: dict[str, list[str]] = {}
        for cluster in range(1, result.model.q + 1):
            mask = (labels == cluster) & present
            if mask.any():
                per_cluster[str(cluster)] = [net.universe[i] for i in np.flatnonzero(mask)]
        out[str(year)] = per_cluster
    return out
