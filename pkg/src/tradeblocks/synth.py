"""Synthetic fixtures: planted-partition temporal networks and random flow tables.

These generators provide the ground truth used by the recovery, switch, and
model-selection checks, and fast randomized inputs for construction
invariants.
"""
from __future__ import annotations

import math

import numpy as np

from .ingest import FlowRecord, FlowTable, table_from_records
from .netbuild import DEFAULT_TAU, TemporalNetwork, WeightedNet, slice_presence

MIN_LOG_WEIGHT = math.log(DEFAULT_TAU)


def planted_network(
    n_nodes: int,
    n_steps: int,
    n_groups: int,
    p_in: float = 0.6,
    p_out: float = 0.05,
    mu_in: float = math.log(0.45),
    mu_out: float = math.log(0.10),
    sigma: float = 0.25,
    switch_nodes: tuple[int, ...] = (),
    switch_time: int | None = None,
    switch_to: int = 0,
    seed: int = 0,
    kind: str = "X",
) -> tuple[TemporalNetwork, np.ndarray]:
    """Directed weighted temporal network with known block memberships.

    Nodes are split into ``n_groups`` contiguous blocks. A directed tie
    between groups (q, l) appears with probability ``p_in`` (q == l) or
    ``p_out``; tie log-weights are Gaussian around ``mu_in``/``mu_out``,
    clipped into [tau, 1]. ``switch_nodes`` move to group ``switch_to`` from
    ``switch_time`` on. Returns the network and the planted 0-based labels
    with shape (n_nodes, n_steps).
    """
    if n_groups < 1 or n_nodes < n_groups:
        raise ValueError("need at least one node per group")
    rng = np.random.default_rng(seed)
    base = np.repeat(np.arange(n_groups), int(np.ceil(n_nodes / n_groups)))[:n_nodes]
    labels = np.repeat(base[:, None], n_steps, axis=1)
    if switch_time is not None:
        labels[list(switch_nodes), switch_time:] = switch_to

    p = np.full((n_groups, n_groups), p_out)
    mu = np.full((n_groups, n_groups), mu_out)
    np.fill_diagonal(p, p_in)
    np.fill_diagonal(mu, mu_in)

    slices = []
    for t in range(n_steps):
        z = labels[:, t]
        present_p = p[z[:, None], z[None, :]]
        ties = rng.random((n_nodes, n_nodes)) < present_p
        np.fill_diagonal(ties, False)
        logw = np.clip(rng.normal(mu[z[:, None], z[None, :]], sigma), MIN_LOG_WEIGHT, 0.0)
        weights = np.where(ties, np.exp(logw), 0.0)
        slices.append(
            WeightedNet(
                weights=weights,
                year=t,
                kind=kind,
                active=ties.any(axis=1),
                raw_strength=weights.sum(axis=1) + weights.sum(axis=0),
                pre_threshold=weights.copy(),
                removed_count=np.zeros(n_nodes, dtype=np.int64),
                removed_mass=np.zeros(n_nodes),
                tau=DEFAULT_TAU,
            )
        )
    presence = np.stack([slice_presence(s) for s in slices])
    universe = tuple(f"N{i:03d}" for i in range(n_nodes))
    net = TemporalNetwork(slices=slices, universe=universe, presence=presence)
    return net, labels


def tiered_network(
    block_strengths: tuple[float, ...],
    n_per_block: int,
    n_steps: int,
    shock_block: int | None = None,
    shock_time: int | None = None,
    shock_factor: float = 0.2,
    seed: int = 0,
) -> tuple[TemporalNetwork, np.ndarray]:
    """Blocks with deterministic raw trade strengths, optionally shocked.

    Every member of block b carries raw strength ``block_strengths[b]``;
    from ``shock_time`` on, members of ``shock_block`` have theirs multiplied
    by ``shock_factor``. Tie structure is a fixed within-block ring so every
    node is present. Returns the network and constant 0-based labels.
    """
    n_groups = len(block_strengths)
    n_nodes = n_groups * n_per_block
    labels = np.repeat(np.arange(n_groups), n_per_block)
    slices = []
    for t in range(n_steps):
        weights = np.zeros((n_nodes, n_nodes))
        strengths = np.empty(n_nodes)
        for b in range(n_groups):
            members = np.flatnonzero(labels == b)
            s = block_strengths[b]
            if b == shock_block and shock_time is not None and t >= shock_time:
                s *= shock_factor
            strengths[members] = s
            for k, i in enumerate(members):
                weights[i, members[(k + 1) % len(members)]] = 0.5
        slices.append(
            WeightedNet(
                weights=weights,
                year=t,
                kind="X",
                active=np.ones(n_nodes, dtype=bool),
                raw_strength=strengths,
                pre_threshold=weights.copy(),
                removed_count=np.zeros(n_nodes, dtype=np.int64),
                removed_mass=np.zeros(n_nodes),
                tau=DEFAULT_TAU,
            )
        )
    presence = np.stack([slice_presence(s) for s in slices])
    universe = tuple(f"C{i:03d}" for i in range(n_nodes))
    net = TemporalNetwork(slices=slices, universe=universe, presence=presence)
    return net, np.repeat(labels[:, None], n_steps, axis=1)


def random_flow_table(
    seed: int,
    max_countries: int = 30,
    max_years: int = 5,
    density: float = 0.4,
    max_cents: int = 10_000_000,
    mirrored: bool = False,
) -> FlowTable:
    """Random bilateral flow table with integer-cent values."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, max_countries + 1))
    n_years = int(rng.integers(1, max_years + 1))
    first = int(rng.integers(1990, 2016))
    codes = [f"C{i:02d}" for i in range(n)]
    records = []
    for year in range(first, first + n_years):
        mask = rng.random((n, n)) < density
        np.fill_diagonal(mask, False)
        if not mask.any():
            mask[0, 1] = True
        values = rng.integers(1, max_cents, size=(n, n))
        for i, j in zip(*np.nonzero(mask)):
            v = int(values[i, j])
            records.append(FlowRecord(codes[i], codes[j], year, v, 0))
            if mirrored:
                records.append(FlowRecord(codes[j], codes[i], year, 0, v))
    return table_from_records(records)
