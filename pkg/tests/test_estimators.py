import numpy as np
import pytest

from dpsa import consensus, datagen, linalg, netgraph
from dpsa.errors import (
    EigengapError,
    NotPositiveDefinite,
    ShapeMismatch,
    SlowConvergence,
)
from dpsa.estimators import (
    AdaptiveDistributedOrthogonalIteration,
    DistributedOrthogonalIteration,
    FeatureDistributedOrthogonalIteration,
    OrthogonalIteration,
    SequentialDistributedPowerMethod,
    SequentialPowerMethod,
    convergence_diagnostics,
    distributed_qr,
)


def sample_problem(d, r, gap, n, seed, top_profile=datagen.DISTINCT_GEOMETRIC):
    spec = datagen.SpectrumSpec(d=d, r=r, gap=gap, top_profile=top_profile)
    m, q_pop = datagen.make_covariance(spec, (seed, 0))
    x = datagen.sample_gaussian(m, n, (seed, 1))
    return x, q_pop


def er10():
    return netgraph.metropolis_weights(netgraph.gen_erdos_renyi(10, 0.5, 11))


class TestOrthogonalIteration:
    def test_power_iteration_rate_on_diagonal(self):
        est = OrthogonalIteration(n_components=1, n_outer=40, seed=2)
        est.fit_gram(np.diag([4.0, 2.0, 1.0]), ground_truth="auto")
        err = est.trace_.column("mean_error")
        window = err[5:12]
        ratios = window[1:] / window[:-1]
        assert np.allclose(ratios, 0.25, rtol=0.05)
        assert abs(abs(est.components_[0, 0]) - 1.0) <= 1e-8

    def test_true_eigenbasis_is_fixed_point(self):
        est = OrthogonalIteration(n_components=2, n_outer=30,
                                  q_init=np.eye(4)[:, :2])
        est.fit_gram(np.diag([5.0, 4.0, 1.0, 0.5]), ground_truth="auto")
        assert est.trace_.column("mean_error").max() <= 1e-12

    def test_no_eigengap_rejected_when_truth_requested(self):
        est = OrthogonalIteration(n_components=2, n_outer=5)
        with pytest.raises(EigengapError):
            est.fit_gram(np.eye(4), ground_truth="auto")

    def test_fit_from_samples_matches_fit_gram(self):
        x, _ = sample_problem(6, 2, 0.5, 40, 1)
        a = OrthogonalIteration(n_components=2, n_outer=25, seed=3).fit(x.T)
        b = OrthogonalIteration(n_components=2, n_outer=25, seed=3).fit_gram(x @ x.T)
        assert np.allclose(a.components_, b.components_, atol=1e-12)

    def test_transform_projects(self):
        x, _ = sample_problem(5, 2, 0.5, 30, 2)
        est = OrthogonalIteration(n_components=2, n_outer=30, seed=1).fit(x.T)
        out = est.transform(x.T)
        assert out.shape == (30, 2)
        assert np.allclose(out, x.T @ est.components_.T)

    def test_sklearn_params_round_trip(self):
        est = OrthogonalIteration(n_components=3, n_outer=10, tol=1e-9, seed=5)
        params = est.get_params()
        clone = OrthogonalIteration(**params)
        assert clone.get_params() == params

    def test_sklearn_clone_of_distributed_estimator(self):
        from sklearn.base import clone

        est = DistributedOrthogonalIteration(
            n_components=2, weights=er10(), consensus_rounds=9, n_outer=4)
        twin = clone(est)
        assert twin.consensus_rounds == 9
        assert (twin.weights.w == est.weights.w).all()
        x, _ = sample_problem(6, 2, 0.5, 60, 20)
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 10)
        twin.fit(ds)
        assert hasattr(twin, "components_") and not hasattr(est, "components_")


class TestSamplewiseDistributed:
    def test_single_node_equals_centralized(self):
        x, _ = sample_problem(8, 2, 0.5, 50, 3)
        w = netgraph.metropolis_weights(netgraph.single_node())
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 1)
        dist = DistributedOrthogonalIteration(
            n_components=2, weights=w, consensus_rounds=1, n_outer=40, seed=4)
        dist.fit(ds)
        central = OrthogonalIteration(n_components=2, n_outer=40, seed=4)
        central.fit_gram(x @ x.T)
        assert np.linalg.norm(dist.components_ - central.components_) <= 1e-12
        assert dist.trace_.column("max_drift").max() <= 1e-12

    def test_complete_graph_tracks_centralized(self):
        x, _ = sample_problem(12, 3, 0.5, 120, 5)
        w = netgraph.metropolis_weights(netgraph.gen_complete(3))
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 3)
        est = DistributedOrthogonalIteration(
            n_components=3, weights=w, consensus_rounds=1, n_outer=100, seed=1)
        est.fit(ds)
        assert est.trace_.column("max_drift").max() <= 1e-10

    def test_converges_on_random_graph(self):
        x, _ = sample_problem(20, 5, 0.4, 5000, 21)
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 10)
        est = DistributedOrthogonalIteration(
            n_components=5, weights=er10(), consensus_rounds=50, n_outer=200,
            seed=3)
        est.fit(ds, ground_truth="auto")
        assert est.trace_.final_mean_error <= 1e-8
        assert est.trace_.column("max_drift").max() <= 1e-6

    def test_orthonormal_every_iteration(self):
        x, _ = sample_problem(10, 3, 0.5, 200, 6)
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 10)
        defects = []

        def hook(t, bases):
            defects.extend(
                float(np.linalg.norm(q.T @ q - np.eye(3))) for q in bases)

        est = AdaptiveDistributedOrthogonalIteration(
            n_components=3, weights=er10(), schedule="min(2t+1,50)",
            n_outer=30, seed=2)
        est.fit(ds, on_iteration=hook)
        assert max(defects) <= 1e-10

    def test_zero_slope_schedule_degenerates_to_fixed(self):
        x, _ = sample_problem(8, 2, 0.5, 100, 7)
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 10)
        w = er10()
        adaptive = AdaptiveDistributedOrthogonalIteration(
            n_components=2, weights=w,
            schedule=consensus.AffineCappedSchedule(0, 7, 50),
            n_outer=20, seed=5)
        adaptive.fit(ds)
        fixed = DistributedOrthogonalIteration(
            n_components=2, weights=w, consensus_rounds=7, n_outer=20, seed=5)
        fixed.fit(ds)
        for a, b in zip(adaptive.state_.bases, fixed.state_.bases):
            assert (a == b).all()
        assert (adaptive.trace_.p2p_per_node == fixed.trace_.p2p_per_node).all()

    def test_adaptive_saves_messages_at_same_error(self):
        x, _ = sample_problem(10, 5, 0.7, 400, 22)
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 20)
        w = netgraph.metropolis_weights(netgraph.gen_erdos_renyi(20, 0.25, 9))
        fixed = DistributedOrthogonalIteration(
            n_components=5, weights=w, consensus_rounds=50, n_outer=200,
            seed=3, track_centralized=False)
        fixed.fit(ds, ground_truth="auto")
        adaptive = AdaptiveDistributedOrthogonalIteration(
            n_components=5, weights=w, schedule="min(2t+1,50)", n_outer=200,
            seed=3, track_centralized=False)
        adaptive.fit(ds, ground_truth="auto")
        assert adaptive.trace_.mean_p2p <= 0.94 * fixed.trace_.mean_p2p
        e_fixed = fixed.trace_.final_mean_error
        e_adaptive = adaptive.trace_.final_mean_error
        floor = 1e-12
        assert (e_adaptive <= 2 * e_fixed) or (e_adaptive <= floor and e_fixed <= floor)

    def test_consensus_floor_drops_with_budget(self):
        # too few rounds leaves an error plateau well above the centralized
        # floor; each extra mixing_time*ln(10) rounds buys roughly a decade
        topo = netgraph.gen_erdos_renyi(10, 0.2, 4)
        w = netgraph.metropolis_weights(topo)
        x, _ = sample_problem(12, 3, 0.5, 600, 2)
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 10)
        tau = netgraph.mixing_time(w)
        bump = int(np.ceil(tau * np.log(10)))
        floors = []
        for rounds in (3, 3 + bump, 3 + 2 * bump):
            est = DistributedOrthogonalIteration(
                n_components=3, weights=w, consensus_rounds=rounds, n_outer=80,
                seed=1, track_centralized=False)
            est.fit(ds, ground_truth="auto")
            floors.append(est.trace_.column("mean_error")[-20:].mean())
        central = OrthogonalIteration(n_components=3, n_outer=80, seed=1)
        central.fit_gram(x @ x.T, ground_truth="auto")
        central_floor = central.trace_.column("mean_error")[-20:].mean()
        assert floors[0] > 100 * central_floor
        assert floors[0] >= 3 * floors[1]
        assert floors[1] >= 3 * floors[2]

    def test_dataset_mode_mismatch_rejected(self):
        x, _ = sample_problem(8, 2, 0.5, 40, 8)
        ds = datagen.partition(x, datagen.FEATURE_WISE, 4)
        est = DistributedOrthogonalIteration(
            n_components=2,
            weights=netgraph.metropolis_weights(netgraph.gen_complete(4)))
        with pytest.raises(ShapeMismatch):
            est.fit(ds)


class TestDistributedQR:
    def test_single_node_matches_qr(self):
        v = np.random.default_rng(0).standard_normal((7, 3))
        w = netgraph.metropolis_weights(netgraph.single_node())
        q_parts, r_parts = distributed_qr([v], w, rounds=1)
        q, r = linalg.qr_factor(v)
        assert np.allclose(q_parts[0], q, atol=1e-10)
        assert np.allclose(r_parts[0], r, atol=1e-10)

    def test_complete_graph_matches_centralized(self):
        rng = np.random.default_rng(1)
        parts = [rng.standard_normal((4, 3)) for _ in range(3)]
        w = netgraph.metropolis_weights(netgraph.gen_complete(3))
        q_parts, r_parts = distributed_qr(parts, w, rounds=1)
        stacked = np.vstack(q_parts)
        assert np.linalg.norm(stacked.T @ stacked - np.eye(3)) <= 1e-10
        q, r = linalg.qr_factor(np.vstack(parts))
        assert np.linalg.norm(stacked - q) <= 1e-10
        assert np.linalg.norm(r_parts[0] - r) <= 1e-10 * np.linalg.norm(r)

    def test_random_graph_defect_small(self):
        rng = np.random.default_rng(2)
        parts = [rng.standard_normal((2, 3)) for _ in range(10)]
        q_parts, _ = distributed_qr(parts, er10(), rounds=50)
        stacked = np.vstack(q_parts)
        assert np.linalg.norm(stacked.T @ stacked - np.eye(3)) <= 1e-6

    def test_rank_deficient_stack_rejected(self):
        parts = [np.ones((3, 2)) for _ in range(3)]
        w = netgraph.metropolis_weights(netgraph.gen_complete(3))
        with pytest.raises(NotPositiveDefinite):
            distributed_qr(parts, w, rounds=1)


class TestFeaturewiseDistributed:
    def test_single_node_equals_centralized(self):
        x, _ = sample_problem(8, 2, 0.5, 60, 9)
        w = netgraph.metropolis_weights(netgraph.single_node())
        ds = datagen.partition(x, datagen.FEATURE_WISE, 1)
        est = FeatureDistributedOrthogonalIteration(
            n_components=2, weights=w, schedule=1, qr_rounds=1, n_outer=40, seed=4)
        est.fit(ds)
        central = OrthogonalIteration(n_components=2, n_outer=40, seed=4)
        central.fit_gram(x @ x.T)
        assert np.linalg.norm(est.components_ - central.components_) <= 1e-10

    def test_exact_consensus_tracks_centralized(self):
        x, _ = sample_problem(12, 3, 0.5, 120, 5)
        w = netgraph.metropolis_weights(netgraph.gen_complete(3))
        ds = datagen.partition(x, datagen.FEATURE_WISE, 3)
        est = FeatureDistributedOrthogonalIteration(
            n_components=3, weights=w, schedule=1, qr_rounds=1, n_outer=100, seed=1)
        est.fit(ds)
        assert est.trace_.column("max_drift").max() <= 1e-8

    def test_one_feature_per_node(self):
        x, _ = sample_problem(10, 4, 0.4, 500, 10)
        ds = datagen.partition(x, datagen.FEATURE_WISE, 10)
        assert all(s.shape[0] == 1 for s in ds.shards)
        est = FeatureDistributedOrthogonalIteration(
            n_components=4, weights=er10(), schedule=50, qr_rounds=50,
            n_outer=200, seed=6, track_centralized=False)
        est.fit(ds, ground_truth="auto")
        assert est.trace_.final_mean_error <= 1e-6

    def test_message_accounting_includes_qr_rounds(self):
        x, _ = sample_problem(9, 2, 0.5, 60, 11)
        topo = netgraph.gen_complete(3)
        w = netgraph.metropolis_weights(topo)
        ds = datagen.partition(x, datagen.FEATURE_WISE, 3)
        est = FeatureDistributedOrthogonalIteration(
            n_components=2, weights=w, schedule=4, qr_rounds=2, n_outer=10,
            seed=3, track_centralized=False)
        est.fit(ds)
        expected = topo.degrees() * (4 + 2) * 10
        assert (est.trace_.p2p_per_node == expected).all()


class TestSequentialPowerMethod:
    def test_diagonal_closed_form(self):
        est = SequentialPowerMethod(n_components=2, iters_per_vector=3000,
                                    tol=1e-13, seed=0)
        est.fit_gram(np.diag([4.0, 2.0, 1.0]))
        comp = np.abs(est.components_)
        assert np.allclose(comp, np.eye(3)[:2], atol=1e-5)

    def test_agrees_with_eigensolver(self):
        x, _ = sample_problem(10, 3, 0.4, 400, 12)
        gram = x @ x.T
        est = SequentialPowerMethod(n_components=3, iters_per_vector=5000,
                                    tol=1e-14, seed=1)
        est.fit_gram(gram)
        lam, vec = linalg.sym_eig(gram)
        assert linalg.subspace_error(vec[:, :3], est.components_.T) <= 1e-8

    def test_repeated_top_eigenvalue_surfaces(self):
        # either the cap is hit or the result is a seed-dependent vector
        # inside the repeated eigenspace
        gram = np.diag([3.0, 3.0, 1.0])
        est = SequentialPowerMethod(n_components=1, iters_per_vector=200,
                                    tol=1e-14, seed=3)
        try:
            est.fit_gram(gram)
        except SlowConvergence:
            return
        v = est.components_[0]
        assert abs(v[2]) <= 1e-6  # converged into span(e1, e2)

    def test_slow_convergence_raised_on_tiny_budget(self):
        x, _ = sample_problem(12, 2, 0.9, 100, 13)
        est = SequentialPowerMethod(n_components=2, iters_per_vector=2,
                                    tol=1e-14, seed=1)
        with pytest.raises(SlowConvergence):
            est.fit_gram(x @ x.T)


class TestSequentialDistributedPM:
    def test_single_vector_matches_centralized_power_method(self):
        x, _ = sample_problem(8, 1, 0.5, 90, 14)
        w = netgraph.metropolis_weights(netgraph.gen_complete(3))
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 3)
        est = SequentialDistributedPowerMethod(
            n_components=1, weights=w, rounds_per_iter=1, iters_per_vector=60,
            seed=2)
        est.fit(ds, ground_truth="auto")
        # exact consensus: every node runs the centralized power method
        central = SequentialPowerMethod(n_components=1, iters_per_vector=60,
                                        tol=1e-13, seed=2)
        central.fit_gram(x @ x.T)
        assert linalg.subspace_error(central.components_.T,
                                     est.components_.T) <= 1e-10

    def test_error_curve_is_step_shaped(self):
        x, _ = sample_problem(20, 4, 0.4, 1000, 13)
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 10)
        est = SequentialDistributedPowerMethod(
            n_components=4, weights=er10(), rounds_per_iter=30,
            iters_per_vector=50, seed=5)
        est.fit(ds, ground_truth="auto")
        err = est.trace_.column("mean_error")
        assert err[3 * 50 - 1] >= 10 * err[-1]

    def test_final_subspace_matches_eigensolver(self):
        x, _ = sample_problem(10, 3, 0.4, 300, 15)
        w = netgraph.metropolis_weights(netgraph.gen_complete(4))
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 4)
        est = SequentialDistributedPowerMethod(
            n_components=3, weights=w, rounds_per_iter=1, iters_per_vector=400,
            seed=3)
        est.fit(ds)
        lam, vec = linalg.sym_eig(x @ x.T)
        assert linalg.subspace_error(vec[:, :3], est.components_.T) <= 1e-6


class TestConvergenceDiagnostics:
    def test_single_identity_node(self):
        ds = datagen.PartitionedDataset(
            datagen.SAMPLE_WISE, (np.eye(3),), (3, 3))
        # alpha = gamma = 1 for a single identity shard
        covs = ds.local_covariances()
        assert linalg.spectral_norm(covs[0]) == pytest.approx(1.0)
        x, _ = sample_problem(3, 1, 0.5, 30, 16)
        ds1 = datagen.partition(x, datagen.SAMPLE_WISE, 1)
        w = netgraph.metropolis_weights(netgraph.single_node())
        est = DistributedOrthogonalIteration(
            n_components=1, weights=w, consensus_rounds=1, n_outer=10, seed=1)
        est.fit(ds1)
        diag = convergence_diagnostics(ds1, est.trace_, delta=1e-9)
        assert diag.gamma <= diag.alpha <= diag.gamma * 1.0000001

    def test_two_equal_nodes_norm_identities(self):
        shards = (np.eye(4), np.eye(4))
        ds = datagen.PartitionedDataset(datagen.SAMPLE_WISE, shards, (4, 8))
        norms = [linalg.spectral_norm(m) for m in ds.local_covariances()]
        alpha = sum(norms)
        gamma = float(np.sqrt(sum(n ** 2 for n in norms)))
        assert alpha == pytest.approx(2.0)
        assert gamma == pytest.approx(np.sqrt(2.0))
        assert alpha == pytest.approx(np.sqrt(2) * gamma)  # right edge of the band

    def test_inequality_holds_under_exact_consensus(self):
        x, _ = sample_problem(12, 3, 0.5, 120, 5)
        w = netgraph.metropolis_weights(netgraph.gen_complete(3))
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 3)
        est = DistributedOrthogonalIteration(
            n_components=3, weights=w, consensus_rounds=1, n_outer=40, seed=1)
        est.fit(ds)
        diag = convergence_diagnostics(ds, est.trace_, delta=1e-300)
        # shared initialization + exact consensus: drift stays at round-off,
        # so the premise holds at every iteration for a tiny delta
        assert diag.all_held()
        assert len(diag.beta_running) == 40
        assert (np.diff(diag.beta_running) >= 0).all()

    def test_requires_centralized_tracking(self):
        x, _ = sample_problem(8, 2, 0.5, 80, 17)
        ds = datagen.partition(x, datagen.SAMPLE_WISE, 4)
        w = netgraph.metropolis_weights(netgraph.gen_complete(4))
        est = DistributedOrthogonalIteration(
            n_components=2, weights=w, consensus_rounds=1, n_outer=5, seed=1,
            track_centralized=False)
        est.fit(ds)
        with pytest.raises(ValueError, match="track_centralized"):
            convergence_diagnostics(ds, est.trace_, delta=1e-6)
