"""Principal-subspace estimators with a scikit-learn style API.

Every estimator follows the fit/transform convention: ``fit`` accepts
either an ``(n_samples, n_features)`` array or a pre-built
:class:`~dpsa.datagen.PartitionedDataset`, and leaves ``components_``
(shape ``(n_components, n_features)``), ``state_``, ``trace_`` and
``n_iter_`` behind.  ``transform(X)`` projects rows onto the estimated
subspace.  Hyperparameters are stored verbatim so ``get_params`` /
``set_params`` / ``clone`` work as usual.

Distributed estimators communicate only through a consensus engine
(defaulting to the in-process transport), which owns message counting and
the simulated clock.

``fit`` keyword arguments shared by the estimators:

ground_truth : None, "auto", or array
    Reference basis used for the error columns of the trace.  "auto"
    computes the top eigenvectors of the (global) Gram matrix and also
    verifies the eigengap precondition.
engine : consensus engine, optional
    Transport override; a fresh in-process engine is used when omitted.
on_iteration : callable ``(t, bases) -> None``, optional
    Hook invoked after each outer iteration (distributed estimators).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import consensus, linalg
from .consensus import FixedSchedule, Schedule, parse_schedule
from .datagen import FEATURE_WISE, SAMPLE_WISE, PartitionedDataset, partition
from .engine import InProcessEngine
from .errors import (
    DimensionMismatch,
    EigengapError,
    NotPositiveDefinite,
    RankCollapse,
    RankDeficient,
    ShapeMismatch,
    SlowConvergence,
)
from .netgraph import WeightMatrix
from .trace import RunTrace, TraceRow
from .validation import check_matrix, check_orthonormal, check_symmetric

CENTRALIZED = "centralized"


@dataclass
class EstimatorState:
    """Per-node bases and progress counters at the end of a run."""

    mode: str
    bases: list[np.ndarray]
    outer_iterations: int
    consensus_rounds_total: int

    def stacked(self) -> np.ndarray:
        """Concatenate the per-node bases by rows (feature-wise runs)."""
        return np.vstack(self.bases)


def _resolve_ground_truth(gram: np.ndarray, r: int, ground_truth):
    """None, 'auto' (eigensolve + gap check), or an explicit basis."""
    if ground_truth is None:
        return None
    if isinstance(ground_truth, str):
        if ground_truth != "auto":
            raise ValueError(f"unknown ground_truth mode {ground_truth!r}")
        lam, vec = linalg.sym_eig(gram)
        gap = lam[r - 1] - lam[r] if r < len(lam) else np.inf
        if gap <= 1e-12 * max(abs(lam[0]), 1e-300):
            raise EigengapError(
                f"eigenvalues {r} and {r + 1} coincide; the target subspace is ill-defined"
            )
        return vec[:, :r].copy()
    gt = check_orthonormal(ground_truth, name="ground_truth")
    if gt.shape[1] != r:
        raise DimensionMismatch(
            f"ground_truth has {gt.shape[1]} columns, expected {r}"
        )
    return gt


def _check_initial_angle(gt, q) -> None:
    # The initial basis must not be orthogonal to the target subspace; for
    # a random start this fails with probability zero.
    if gt is None:
        return
    sv = np.linalg.svd(gt.T @ q, compute_uv=False)
    if sv[-1] <= 0.0:
        raise ValueError("initial basis is orthogonal to the target subspace")


def _node_errors(gt, bases) -> tuple[float, float]:
    if gt is None:
        return float("nan"), float("nan")
    errs = [linalg.subspace_error(gt, b) for b in bases]
    return float(np.mean(errs)), float(np.max(errs))


def _scaled(z: np.ndarray, scale: float) -> np.ndarray:
    # [W^t e_1]_i is zero for nodes the walk has not reached yet.  The QR
    # subspace update is invariant to positive per-node scalars, so skipping
    # the division there loses nothing (the node has no global sum anyway).
    return z / scale if scale > 0.0 else z


class _SubspaceEstimator(BaseEstimator, TransformerMixin):
    """Common transform/bookkeeping for all subspace estimators."""

    def _require_fitted(self) -> None:
        if not hasattr(self, "components_"):
            raise NotFittedError(
                f"{type(self).__name__} is not fitted yet; call fit first"
            )

    def transform(self, X) -> np.ndarray:
        self._require_fitted()
        X = check_matrix(X, "X")
        if X.shape[1] != self.components_.shape[1]:
            raise DimensionMismatch(
                f"X has {X.shape[1]} features, estimator was fitted with "
                f"{self.components_.shape[1]}"
            )
        return X @ self.components_.T

    def _initial_basis(self, d: int) -> np.ndarray:
        r = self.n_components
        if not 1 <= r <= d:
            raise DimensionMismatch(f"need 1 <= n_components <= {d}, got {r}")
        if self.q_init is not None:
            q = check_orthonormal(self.q_init, name="q_init")
            if q.shape != (d, r):
                raise DimensionMismatch(
                    f"q_init has shape {q.shape}, expected {(d, r)}"
                )
            return q.copy()
        return linalg.random_orthonormal(d, r, self.seed)


class OrthogonalIteration(_SubspaceEstimator):
    """Centralized orthogonal iteration (block power method).

    Repeats ``V = M Q`` followed by a QR factorization of ``V`` until the
    iteration budget is exhausted or successive iterates move less than
    ``tol`` in projection distance.  Converges to the dominant
    ``n_components``-dimensional eigenspace of ``M`` at a linear rate
    governed by the eigenvalue ratio across the subspace boundary.

    Parameters
    ----------
    n_components : target subspace dimension r.
    n_outer : iteration budget.
    tol : optional early-stop threshold on successive projection distance.
    q_init : explicit orthonormal d-by-r start; seeded random when None.
    seed : seed for the random start.

    Attributes
    ----------
    components_ : (n_components, n_features) basis, rows orthonormal.
    trace_ : per-iteration RunTrace (error columns need ground_truth).
    n_iter_ : iterations actually run.
    """

    def __init__(self, n_components=2, n_outer=200, tol=0.0, q_init=None, seed=0):
        self.n_components = n_components
        self.n_outer = n_outer
        self.tol = tol
        self.q_init = q_init
        self.seed = seed

    def fit(self, X, y=None, ground_truth=None):
        X = check_matrix(X, "X")
        return self.fit_gram(X.T @ X, ground_truth=ground_truth)

    def fit_gram(self, gram, ground_truth=None):
        """Fit directly on a symmetric (e.g. Gram or covariance) matrix."""
        gram = check_symmetric(gram, linalg.SYMMETRY_RTOL_EIG, "gram")
        gt = _resolve_ground_truth(gram, self.n_components, ground_truth)
        q = self._initial_basis(gram.shape[0])
        _check_initial_angle(gt, q)
        trace = RunTrace(n_nodes=1)
        wall0 = time.perf_counter()
        for t in range(self.n_outer):
            try:
                q_new, r_up = linalg.qr_factor(gram @ q)
            except RankDeficient as exc:
                raise RankCollapse(f"iteration {t}: {exc}") from exc
            step = linalg.projection_distance(q, q_new) if self.tol > 0 else 1.0
            q = q_new
            trace.r_factors.append(r_up)
            err = linalg.subspace_error(gt, q) if gt is not None else float("nan")
            trace.append(TraceRow(t, 0, err, err, float("nan"), float("nan"),
                                  (0,), 0.0, time.perf_counter() - wall0))
            if self.tol > 0 and step < self.tol:
                break
        self.components_ = q.T.copy()
        self.state_ = EstimatorState(CENTRALIZED, [q], len(trace), 0)
        self.trace_ = trace
        self.n_iter_ = len(trace)
        self.ground_truth_ = gt
        return self


def _as_dataset(X, mode: str, weights: WeightMatrix) -> PartitionedDataset:
    if isinstance(X, PartitionedDataset):
        if X.mode != mode:
            raise ShapeMismatch(f"expected a {mode} partition, got {X.mode}")
        if X.n_nodes != weights.n:
            raise ShapeMismatch(
                f"dataset has {X.n_nodes} shards for a {weights.n}-node network"
            )
        return X
    X = check_matrix(X, "X")  # (n_samples, n_features)
    return partition(X.T, mode, weights.n)


class _SamplewiseEstimator(_SubspaceEstimator):
    """Shared loop for the sample-wise distributed orthogonal iterations."""

    def _fit_samplewise(self, X, schedule: Schedule, ground_truth, engine,
                        on_iteration):
        if self.weights is None:
            raise ValueError("weights must be set before fitting")
        w = self.weights
        ds = _as_dataset(X, SAMPLE_WISE, w)
        covs = ds.local_covariances()
        gram = sum(covs[1:], covs[0].copy())
        gt = _resolve_ground_truth(gram, self.n_components, ground_truth)
        q0 = self._initial_basis(ds.global_dims[0])
        _check_initial_angle(gt, q0)
        engine = engine if engine is not None else InProcessEngine(w)
        bases = [q0.copy() for _ in range(w.n)]
        track = self.track_centralized
        q_c = q0.copy()
        trace = RunTrace(n_nodes=w.n)
        wall0 = time.perf_counter()
        rounds_total = 0
        for t in range(self.n_outer):
            rounds = schedule.rounds_for(t)
            z = [covs[i] @ bases[i] for i in range(w.n)]
            z = engine.run_rounds(z, rounds)
            engine.charge_compute()
            scales = consensus.scale_vector(w, rounds)
            rounds_total += rounds
            try:
                new_bases = [linalg.qr_factor(_scaled(z[i], scales[i]))[0]
                             for i in range(w.n)]
                if track:
                    q_c, r_c = linalg.qr_factor(gram @ q_c)
            except RankDeficient as exc:
                raise RankCollapse(f"outer iteration {t}: {exc}") from exc
            if track:
                trace.r_factors.append(r_c)
                drifts = [float(np.linalg.norm(q_c - b)) for b in new_bases]
                mean_drift, max_drift = float(np.mean(drifts)), float(np.max(drifts))
            else:
                mean_drift = max_drift = float("nan")
            mean_err, max_err = _node_errors(gt, new_bases)
            step = (max(linalg.projection_distance(a, b)
                        for a, b in zip(bases, new_bases))
                    if self.tol > 0 else 1.0)
            bases = new_bases
            trace.append(TraceRow(t, rounds, mean_err, max_err,
                                  mean_drift, max_drift,
                                  tuple(int(c) for c in engine.p2p),
                                  engine.simulated_seconds,
                                  time.perf_counter() - wall0))
            if on_iteration is not None:
                on_iteration(t, bases)
            if self.tol > 0 and step < self.tol:
                break
        self.components_ = bases[0].T.copy()
        self.state_ = EstimatorState(SAMPLE_WISE, bases, len(trace), rounds_total)
        self.trace_ = trace
        self.n_iter_ = len(trace)
        self.ground_truth_ = gt
        return self


class DistributedOrthogonalIteration(_SamplewiseEstimator):
    """Orthogonal iteration for sample-wise partitioned data.

    Per outer iteration every node multiplies its local Gram against its
    basis, the network runs a fixed number of averaging-consensus rounds,
    each node divides by the known scale ``[W^rounds e_1]_i`` to recover
    the network-wide sum, and re-orthonormalizes locally by QR.  With
    enough consensus rounds every node tracks the centralized iteration.

    Parameters
    ----------
    n_components : target subspace dimension r.
    weights : WeightMatrix of the connected node network.
    consensus_rounds : fixed consensus budget per outer iteration.
    n_outer : outer iteration budget.
    tol : optional early stop on successive projection distance (max over
        nodes).
    q_init, seed : shared initial basis for every node (and the lockstep
        centralized reference).
    track_centralized : also advance a lockstep centralized iterate and
        record per-node drift against it in the trace.

    After fitting, ``components_`` holds node 0's basis (all nodes agree
    up to consensus error); the full per-node set is in ``state_.bases``.
    """

    def __init__(self, n_components=2, weights=None, consensus_rounds=50,
                 n_outer=200, tol=0.0, q_init=None, seed=0,
                 track_centralized=True):
        self.n_components = n_components
        self.weights = weights
        self.consensus_rounds = consensus_rounds
        self.n_outer = n_outer
        self.tol = tol
        self.q_init = q_init
        self.seed = seed
        self.track_centralized = track_centralized

    def fit(self, X, y=None, ground_truth=None, engine=None, on_iteration=None):
        schedule = FixedSchedule(self.consensus_rounds)
        return self._fit_samplewise(X, schedule, ground_truth, engine, on_iteration)


class AdaptiveDistributedOrthogonalIteration(_SamplewiseEstimator):
    """Sample-wise distributed orthogonal iteration with a growing
    consensus budget.

    Early outer iterations carry large subspace error anyway, so they get
    few consensus rounds; the budget grows affinely (``min(ceil(a*t+b),
    cap)``, 0-based t) toward the cap.  Same loop as the fixed-budget
    variant otherwise.

    ``schedule`` accepts an AffineCappedSchedule, a FixedSchedule, or
    schedule text such as ``"min(2t+1,50)"``.
    """

    def __init__(self, n_components=2, weights=None, schedule="min(2t+1,50)",
                 n_outer=200, tol=0.0, q_init=None, seed=0,
                 track_centralized=True):
        self.n_components = n_components
        self.weights = weights
        self.schedule = schedule
        self.n_outer = n_outer
        self.tol = tol
        self.q_init = q_init
        self.seed = seed
        self.track_centralized = track_centralized

    def fit(self, X, y=None, ground_truth=None, engine=None, on_iteration=None):
        schedule = (parse_schedule(self.schedule)
                    if isinstance(self.schedule, str) else self.schedule)
        return self._fit_samplewise(X, schedule, ground_truth, engine, on_iteration)


def distributed_qr(v_parts, weights: WeightMatrix, rounds: int, engine=None):
    """Orthonormalize a row-partitioned tall matrix without collating it.

    Each node forms its local Gram ``V_i^T V_i``; a consensus sum gives
    every node (an estimate of) the global Gram ``K = V^T V``; its
    Cholesky factor ``R`` (upper, positive diagonal) then yields
    ``Q_i = V_i R^{-1}``.  Under exact consensus the stacked result equals
    the centralized QR factor with the same sign convention.

    Returns per-node ``(q_parts, r_factors)``; the r factors agree across
    nodes up to consensus error.
    """
    parts = [check_matrix(v, f"v_parts[{i}]") for i, v in enumerate(v_parts)]
    if len(parts) != weights.n:
        raise ShapeMismatch(
            f"{len(parts)} shards for a {weights.n}-node network"
        )
    r = parts[0].shape[1]
    if any(p.shape[1] != r for p in parts):
        raise ShapeMismatch("all shards must share the column count")
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    grams = [p.T @ p for p in parts]
    if engine is None:
        final = consensus.iterate_rounds(grams, weights, rounds)
    else:
        final = engine.run_rounds(grams, rounds)
    scales = consensus.scale_vector(weights, rounds)
    q_parts, r_factors = [], []
    for i in range(weights.n):
        if scales[i] <= 0.0:
            raise NotPositiveDefinite(
                f"node {i} has zero recovery scale after {rounds} rounds; "
                "increase the distributed QR consensus budget"
            )
        r_up = linalg.cholesky(final[i] / scales[i])
        q_parts.append(np.linalg.solve(r_up.T, parts[i].T).T)
        r_factors.append(r_up)
    return q_parts, r_factors


class FeatureDistributedOrthogonalIteration(_SubspaceEstimator):
    """Orthogonal iteration for feature-wise partitioned data.

    Node i holds a horizontal slice ``X_i`` (some features of every
    sample) and estimates the matching rows of the global basis.  The
    update exploits ``M Q = X (sum_i X_i^T Q_i)``: each node computes its
    ``X_i^T Q_i`` (n-by-r), a consensus sum distributes the inner sum,
    each node multiplies by its own slice, and the stack is
    re-orthonormalized with the consensus-Cholesky distributed QR.

    Parameters mirror the sample-wise variants; ``qr_rounds`` is the
    consensus budget of each distributed QR (r-by-r payloads).
    """

    def __init__(self, n_components=2, weights=None, schedule=50, qr_rounds=50,
                 n_outer=200, tol=0.0, q_init=None, seed=0,
                 track_centralized=True):
        self.n_components = n_components
        self.weights = weights
        self.schedule = schedule
        self.qr_rounds = qr_rounds
        self.n_outer = n_outer
        self.tol = tol
        self.q_init = q_init
        self.seed = seed
        self.track_centralized = track_centralized

    def fit(self, X, y=None, ground_truth=None, engine=None, on_iteration=None):
        if self.weights is None:
            raise ValueError("weights must be set before fitting")
        w = self.weights
        if isinstance(self.schedule, str):
            schedule = parse_schedule(self.schedule)
        elif isinstance(self.schedule, int):
            schedule = FixedSchedule(self.schedule)
        else:
            schedule = self.schedule
        ds = _as_dataset(X, FEATURE_WISE, w)
        shards = list(ds.shards)
        d = ds.global_dims[0]
        full = ds.stack()
        gram = full @ full.T
        gt = _resolve_ground_truth(gram, self.n_components, ground_truth)
        q0 = self._initial_basis(d)
        _check_initial_angle(gt, q0)
        sizes = [s.shape[0] for s in shards]
        bounds = np.cumsum([0] + sizes)
        parts = [q0[bounds[i]:bounds[i + 1]].copy() for i in range(w.n)]
        engine = engine if engine is not None else InProcessEngine(w)
        track = self.track_centralized
        q_c = q0.copy()
        stacked = q0.copy()
        trace = RunTrace(n_nodes=w.n)
        wall0 = time.perf_counter()
        rounds_total = 0
        for t in range(self.n_outer):
            rounds = schedule.rounds_for(t)
            z = [shards[i].T @ parts[i] for i in range(w.n)]
            z = engine.run_rounds(z, rounds)
            engine.charge_compute()
            scales = consensus.scale_vector(w, rounds)
            rounds_total += rounds
            v_parts = [shards[i] @ _scaled(z[i], scales[i]) for i in range(w.n)]
            parts, r_facts = distributed_qr(v_parts, w, self.qr_rounds, engine=engine)
            rounds_total += self.qr_rounds
            new_stacked = np.vstack(parts)
            if track:
                try:
                    q_c, r_c = linalg.qr_factor(gram @ q_c)
                except RankDeficient as exc:
                    raise RankCollapse(f"outer iteration {t}: {exc}") from exc
                trace.r_factors.append(r_c)
                drift = float(np.linalg.norm(q_c - new_stacked))
            else:
                drift = float("nan")
            err = (linalg.subspace_error(gt, new_stacked)
                   if gt is not None else float("nan"))
            step = (linalg.projection_distance(stacked, new_stacked)
                    if self.tol > 0 else 1.0)
            stacked = new_stacked
            trace.append(TraceRow(t, rounds + self.qr_rounds, err, err,
                                  drift, drift,
                                  tuple(int(c) for c in engine.p2p),
                                  engine.simulated_seconds,
                                  time.perf_counter() - wall0))
            if on_iteration is not None:
                on_iteration(t, parts)
            if self.tol > 0 and step < self.tol:
                break
        self.components_ = stacked.T.copy()
        self.state_ = EstimatorState(FEATURE_WISE, parts, len(trace), rounds_total)
        self.trace_ = trace
        self.n_iter_ = len(trace)
        self.ground_truth_ = gt
        return self


class SequentialPowerMethod(_SubspaceEstimator):
    """Deflated power iteration: basis vectors estimated one at a time.

    Vector k is re-orthogonalized against the already-found vectors after
    every multiply, which realizes deflation without estimating
    eigenvalues.  Needs the top eigenvalues to be distinct; a repeated top
    eigenvalue shows up as SlowConvergence or a seed-dependent basis
    within the repeated eigenspace.
    """

    def __init__(self, n_components=2, iters_per_vector=1000, tol=1e-12,
                 q_init=None, seed=0):
        self.n_components = n_components
        self.iters_per_vector = iters_per_vector
        self.tol = tol
        self.q_init = q_init
        self.seed = seed

    def fit(self, X, y=None, ground_truth=None):
        X = check_matrix(X, "X")
        return self.fit_gram(X.T @ X, ground_truth=ground_truth)

    def fit_gram(self, gram, ground_truth=None):
        gram = check_symmetric(gram, linalg.SYMMETRY_RTOL_EIG, "gram")
        gt = _resolve_ground_truth(gram, self.n_components, ground_truth)
        q0 = self._initial_basis(gram.shape[0])
        basis = q0.copy()
        total_iters = 0
        trace = RunTrace(n_nodes=1)
        wall0 = time.perf_counter()
        for k in range(self.n_components):
            v = basis[:, k].copy()
            converged = False
            for _ in range(self.iters_per_vector):
                v_new = gram @ v
                for c in range(k):
                    u = basis[:, c]
                    v_new -= (u @ v_new) * u
                norm = np.linalg.norm(v_new)
                if norm <= 1e-300:
                    raise RankCollapse(f"vector {k} deflated to zero")
                v_new /= norm
                align = min(1.0, abs(float(v @ v_new)))
                v = v_new
                total_iters += 1
                if math.sqrt(max(0.0, 1.0 - align * align)) < self.tol:
                    converged = True
                    break
            if not converged:
                raise SlowConvergence(
                    f"vector {k} did not converge within {self.iters_per_vector} iterations"
                )
            basis[:, k] = v
            # one trace row per completed vector: error of the partial basis
            # (later columns still hold their initial values)
            err = (linalg.subspace_error(gt, linalg.qr_factor(basis)[0])
                   if gt is not None else float("nan"))
            trace.append(TraceRow(k, 0, err, err, float("nan"), float("nan"),
                                  (0,), 0.0, time.perf_counter() - wall0))
        q, _ = linalg.qr_factor(basis)
        self.components_ = q.T.copy()
        self.state_ = EstimatorState(CENTRALIZED, [q], total_iters, 0)
        self.trace_ = trace
        self.n_iter_ = total_iters
        self.ground_truth_ = gt
        return self


class SequentialDistributedPowerMethod(_SubspaceEstimator):
    """Distributed power method estimating the basis one vector at a time.

    For each vector the nodes run consensus sums of their local
    matrix-vector products, normalize, and project out the vectors they
    already hold.  The trace records the error of the full partially-built
    basis, so the curve stays high until the last vector's phase: the
    not-yet-estimated columns still sit at their random initial values.

    ``tol > 0`` enables per-vector early stopping (and raises
    SlowConvergence when a vector misses the cap); the default runs the
    fixed budget.
    """

    def __init__(self, n_components=2, weights=None, rounds_per_iter=50,
                 iters_per_vector=100, tol=0.0, q_init=None, seed=0):
        self.n_components = n_components
        self.weights = weights
        self.rounds_per_iter = rounds_per_iter
        self.iters_per_vector = iters_per_vector
        self.tol = tol
        self.q_init = q_init
        self.seed = seed

    def fit(self, X, y=None, ground_truth=None, engine=None):
        if self.weights is None:
            raise ValueError("weights must be set before fitting")
        w = self.weights
        ds = _as_dataset(X, SAMPLE_WISE, w)
        covs = ds.local_covariances()
        gram = sum(covs[1:], covs[0].copy())
        gt = _resolve_ground_truth(gram, self.n_components, ground_truth)
        q0 = self._initial_basis(ds.global_dims[0])
        _check_initial_angle(gt, q0)
        engine = engine if engine is not None else InProcessEngine(w)
        bases = [q0.copy() for _ in range(w.n)]
        trace = RunTrace(n_nodes=w.n)
        wall0 = time.perf_counter()
        step_index = 0
        rounds_total = 0
        for k in range(self.n_components):
            converged = False
            for _ in range(self.iters_per_vector):
                z = [covs[i] @ bases[i][:, k:k + 1] for i in range(w.n)]
                z = engine.run_rounds(z, self.rounds_per_iter)
                engine.charge_compute()
                scales = consensus.scale_vector(w, self.rounds_per_iter)
                rounds_total += self.rounds_per_iter
                max_change = 0.0
                for i in range(w.n):
                    v = _scaled(z[i].ravel(), scales[i])
                    for c in range(k):
                        u = bases[i][:, c]
                        v -= (u @ v) * u
                    norm = np.linalg.norm(v)
                    if norm <= 1e-300:
                        raise RankCollapse(f"vector {k} deflated to zero at node {i}")
                    v /= norm
                    align = min(1.0, abs(float(bases[i][:, k] @ v)))
                    max_change = max(max_change,
                                     math.sqrt(max(0.0, 1.0 - align * align)))
                    bases[i][:, k] = v
                if gt is not None:
                    errs = [linalg.subspace_error(gt, linalg.qr_factor(b)[0])
                            for b in bases]
                    mean_err, max_err = float(np.mean(errs)), float(np.max(errs))
                else:
                    mean_err = max_err = float("nan")
                trace.append(TraceRow(step_index, self.rounds_per_iter,
                                      mean_err, max_err,
                                      float("nan"), float("nan"),
                                      tuple(int(c) for c in engine.p2p),
                                      engine.simulated_seconds,
                                      time.perf_counter() - wall0))
                step_index += 1
                if self.tol > 0 and max_change < self.tol:
                    converged = True
                    break
            if self.tol > 0 and not converged:
                raise SlowConvergence(
                    f"vector {k} did not converge within {self.iters_per_vector} iterations"
                )
        bases = [linalg.qr_factor(b)[0] for b in bases]
        self.components_ = bases[0].T.copy()
        self.state_ = EstimatorState(SAMPLE_WISE, bases, step_index, rounds_total)
        self.trace_ = trace
        self.n_iter_ = step_index
        self.ground_truth_ = gt
        return self


@dataclass
class ConvergenceDiagnostics:
    """Constants and per-iteration drift bound checks for a sample-wise run.

    ``alpha`` is the sum of per-node spectral norms, ``gamma`` the root of
    their squared sum (so gamma <= alpha <= sqrt(N) * gamma), and ``beta``
    the running maximum spectral norm of the inverse triangular factors of
    the lockstep centralized run.  ``inequality_held[t]`` reports whether
    the drift-contraction premise held at iteration t for the supplied
    consensus accuracy ``delta``.
    """

    alpha: float
    gamma: float
    beta: float
    delta: float
    beta_running: np.ndarray
    max_drift: np.ndarray
    inequality_held: np.ndarray

    def all_held(self) -> bool:
        return bool(np.all(self.inequality_held))


def convergence_diagnostics(dataset: PartitionedDataset, trace: RunTrace,
                            delta: float) -> ConvergenceDiagnostics:
    """Diagnostics for a sample-wise run fitted with track_centralized=True."""
    covs = dataset.local_covariances()
    norms = np.array([linalg.spectral_norm(m) for m in covs])
    alpha = float(norms.sum())
    gamma = float(np.sqrt((norms ** 2).sum()))
    if not trace.r_factors:
        raise ValueError("trace carries no centralized factors; "
                         "fit with track_centralized=True")
    inv_norms = np.array([linalg.spectral_norm(np.linalg.inv(r))
                          for r in trace.r_factors])
    beta_running = np.maximum.accumulate(inv_norms)
    beta = float(beta_running[-1])
    n = dataset.n_nodes
    r = trace.r_factors[0].shape[0]
    max_drift = trace.column("max_drift")
    slack = delta * gamma * math.sqrt(n * r) / alpha
    rhs = 1.0 / (2.0 * alpha ** 2 * beta ** 3 * math.sqrt(r)
                 * (2.0 * alpha * math.sqrt(r) + delta * gamma * math.sqrt(n * r)))
    held = (max_drift + slack) <= rhs
    return ConvergenceDiagnostics(alpha, gamma, beta, delta, beta_running,
                                  max_drift, held)
