"""Experiment driver: builds data/network/engine from a config and runs it.

Also provides the closed-form point-to-point message counts and the
socket-transport diagnostic round trip.
"""

from __future__ import annotations

import os

import numpy as np

from . import datagen, estimators, linalg, netgraph
from .config import ExperimentConfig
from .consensus import FixedSchedule, Schedule, parse_schedule
from .engine import InProcessEngine, SocketEngine, StragglerSpec
from .errors import ConfigError
from .netgraph import Topology, WeightMatrix
from .trace import RunTrace


def p2p_expected(topology: Topology, schedule: Schedule, t_outer: int,
                 extra_rounds_per_iter: int = 0) -> tuple[np.ndarray, float]:
    """Closed-form cumulative sends per node: deg(i) * total consensus rounds.

    One message per neighbor per consensus round; ``extra_rounds_per_iter``
    accounts for per-iteration distributed-QR rounds in feature-wise runs.
    """
    total_rounds = sum(schedule.rounds_for(t) + extra_rounds_per_iter
                       for t in range(t_outer))
    counts = topology.degrees() * total_rounds
    return counts, float(counts.mean())


def build_topology(cfg: ExperimentConfig) -> Topology:
    net = cfg.network
    if net.topology == "erdos-renyi":
        if net.seed is None:
            raise ConfigError("network.seed", "required for erdos-renyi topologies")
        return netgraph.gen_erdos_renyi(net.n, net.p, net.seed)
    if net.topology == "ring":
        return netgraph.gen_ring(net.n)
    if net.topology == "star":
        return netgraph.gen_star(net.n)
    if net.topology == "complete":
        return netgraph.gen_complete(net.n)
    raise ConfigError("network.topology", f"unknown topology {net.topology!r}")


def build_data(cfg: ExperimentConfig) -> np.ndarray:
    """The global d-by-n data matrix described by the config."""
    data = cfg.data
    if data.source == "synthetic":
        spec = datagen.SpectrumSpec(
            d=data.d, r=cfg.algorithm.r, gap=data.gap,
            top_profile=data.top_profile, tail_ratio=data.tail_ratio,
        )
        m, _ = datagen.make_covariance(spec, (data.seed, 0))
        n = data.n_per_node * cfg.network.n
        x = datagen.sample_gaussian(m, n, (data.seed, 1))
    elif data.source == "csv":
        if not os.path.exists(data.path):
            raise ConfigError("data.path", f"file not found: {data.path}")
        x = datagen.load_csv(data.path)
    else:
        if not os.path.exists(data.path):
            raise ConfigError("data.path", f"file not found: {data.path}")
        x = datagen.load_binary(data.path)
    if data.center:
        x = datagen.center_columns(x)
    return x


def build_engine(cfg: ExperimentConfig, weights: WeightMatrix):
    straggler = StragglerSpec(
        enabled=cfg.harness.straggler,
        delay_seconds=cfg.harness.straggler_delay,
        seed=cfg.harness.straggler_seed,
    )
    if cfg.harness.transport == "sockets":
        return SocketEngine(weights, base_port=cfg.harness.base_port,
                            straggler=straggler)
    return InProcessEngine(weights, straggler=straggler)


def build_estimator(cfg: ExperimentConfig, weights: WeightMatrix | None):
    alg = cfg.algorithm
    common = dict(n_components=alg.r, seed=alg.init_seed)
    if alg.name == "oi":
        return estimators.OrthogonalIteration(
            n_outer=alg.t_outer, tol=alg.tol, **common)
    if alg.name == "seq-pm":
        return estimators.SequentialPowerMethod(
            iters_per_vector=alg.iters_per_vector,
            tol=alg.tol if alg.tol > 0 else 1e-12, **common)
    if alg.name == "s-dot":
        schedule = parse_schedule(alg.schedule)
        if not isinstance(schedule, FixedSchedule):
            raise ConfigError("algorithm.schedule",
                              "s-dot takes a fixed budget; use sa-dot for affine schedules")
        return estimators.DistributedOrthogonalIteration(
            weights=weights, consensus_rounds=schedule.rounds,
            n_outer=alg.t_outer, tol=alg.tol,
            track_centralized=cfg.harness.track_centralized, **common)
    if alg.name == "sa-dot":
        return estimators.AdaptiveDistributedOrthogonalIteration(
            weights=weights, schedule=alg.schedule,
            n_outer=alg.t_outer, tol=alg.tol,
            track_centralized=cfg.harness.track_centralized, **common)
    if alg.name == "f-dot":
        return estimators.FeatureDistributedOrthogonalIteration(
            weights=weights, schedule=alg.schedule, qr_rounds=alg.qr_rounds,
            n_outer=alg.t_outer, tol=alg.tol,
            track_centralized=cfg.harness.track_centralized, **common)
    if alg.name == "seq-dist-pm":
        return estimators.SequentialDistributedPowerMethod(
            weights=weights, rounds_per_iter=alg.rounds_per_iter,
            iters_per_vector=alg.iters_per_vector, tol=alg.tol, **common)
    raise ConfigError("algorithm.name", f"unknown algorithm {alg.name!r}")


def run_experiment(cfg: ExperimentConfig):
    """Execute the configured experiment.

    Returns ``(estimator, trace, summary)`` where summary is a flat dict of
    the headline numbers (final errors, message totals, simulated clock,
    measured eigengap).
    """
    cfg.validate()
    x = build_data(cfg)
    alg = cfg.algorithm
    gram = x @ x.T
    ground_truth = "auto" if cfg.harness.ground_truth == "auto" else None

    centralized = alg.name in ("oi", "seq-pm")
    if centralized:
        est = build_estimator(cfg, None)
        est.fit_gram(gram, ground_truth=ground_truth)
        trace = getattr(est, "trace_", RunTrace(n_nodes=1))
    else:
        topo = build_topology(cfg)
        weights = netgraph.metropolis_weights(topo)
        mode = datagen.FEATURE_WISE if alg.name == "f-dot" else datagen.SAMPLE_WISE
        ds = datagen.partition(x, mode, topo.n)
        est = build_estimator(cfg, weights)
        with build_engine(cfg, weights) as engine:
            est.fit(ds, ground_truth=ground_truth, engine=engine)
        trace = est.trace_

    lam, _ = linalg.sym_eig(gram)
    r = alg.r
    delta_r = float(lam[r] / lam[r - 1]) if r < len(lam) and lam[r - 1] != 0 else float("nan")
    summary = {
        "final_mean_error": trace.final_mean_error if len(trace) else float("nan"),
        "final_max_error": trace.final_max_error if len(trace) else float("nan"),
        "total_p2p": trace.total_p2p if len(trace) else 0,
        "mean_p2p_per_node": trace.mean_p2p if len(trace) else 0.0,
        "simulated_seconds": trace.simulated_seconds,
        "delta_r": delta_r,
    }
    return est, trace, summary


def socket_transport_roundtrip(n_nodes: int = 4, rounds: int = 2,
                               base_port: int = 56801, seed: int = 0) -> dict:
    """Diagnostic: one consensus exchange over real processes vs in-process.

    Returns a report with the echo check (payloads survive framing bit
    for bit) and the cross-transport equivalence check.
    """
    topo = netgraph.gen_complete(n_nodes)
    weights = netgraph.metropolis_weights(topo)
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((6, 3)) for _ in range(n_nodes)]

    reference = InProcessEngine(weights)
    expected = reference.run_rounds([m.copy() for m in mats], rounds)

    with SocketEngine(weights, base_port=base_port) as engine:
        got = engine.run_rounds([m.copy() for m in mats], rounds)
        p2p_match = bool((engine.p2p == reference.p2p).all())

    identical = all((a == b).all() for a, b in zip(expected, got))
    max_diff = max(float(np.max(np.abs(a - b))) for a, b in zip(expected, got))
    return {
        "nodes": n_nodes,
        "rounds": rounds,
        "bit_identical": identical,
        "max_abs_diff": max_diff,
        "p2p_match": p2p_match,
    }
