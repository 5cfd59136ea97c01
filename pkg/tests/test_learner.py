import math

import numpy as np
import pytest

from mixlearn.learner import (
    LearnerConstants,
    Matching,
    MatchingFailure,
    OracleInputs,
    SampledInputs,
    learn_mixture,
    match_spikes,
    simplex_project_l1,
    simplex_project_l1_lp,
    solve_direction_program,
)
from mixlearn.model import MixtureSource, mixture_transport, width_report
from mixlearn.sampling import RngStream, draw_snapshots
from mixlearn.spectral import estimate_A, random_basis

from conftest import two_block_source


class TestDirectionProgram:
    def test_single_coordinate(self):
        a = solve_direction_program(np.array([1.0, 0.0, 0.0]), delta=1e-3, zeta=0.5)
        assert np.allclose(a, [1.0, 0.0, 0.0], atol=1e-9)

    def test_flat_vector_is_fixed_point(self):
        n = 9
        v = np.full(n, 1.0 / math.sqrt(n))
        a = solve_direction_program(v, delta=1e-3, zeta=0.5)
        assert np.allclose(np.abs(a), 1.0 / math.sqrt(n), atol=1e-8)

    def test_matches_grid_oracle_within_factor_two(self):
        v = np.array([0.8, 0.6])
        delta, zeta = 0.01, 0.6
        c = 1.0 - 4 * delta / zeta**2
        xs = np.linspace(-1.0, 1.0, 2001)
        xg, yg = np.meshgrid(xs, xs)
        feas = (v[0] * xg + v[1] * yg >= c) & (xg**2 + yg**2 <= 1.0)
        grid_opt = np.maximum(np.abs(xg), np.abs(yg))[feas].min()
        # recover the solver's pre-normalization optimizer by re-deriving its cap
        a = solve_direction_program(v, delta, zeta)
        # a is x*/||x*||; x* attains v.x >= c with the minimal cap, so the
        # scaled-back cap is ||x*||_inf <= 2x the grid optimum
        scale_back = np.abs(a).max() * c  # |x*| >= c since v.x* >= c, ||x*||<=1
        assert scale_back <= 2.0 * grid_opt + 1e-6

    def test_unit_norm_required(self):
        from mixlearn.model import InputError

        with pytest.raises(InputError):
            solve_direction_program(np.array([2.0, 0.0]), 1e-3, 0.5)

    def test_helper_invariants_on_wide_source(self):
        # oracle regime: a stays flat (|a|_inf <= H) and separates the
        # constituents (|a.(p-q)| >= L/2) for directions in col(A)
        src = two_block_source(n=16, c=0.8)
        rep = width_report(src)
        consts = LearnerConstants(n=src.n, k=2, zeta=rep.zeta, omega=4.0, delta=1e-8,
                                  w_min=src.w_min)
        sub = estimate_A(src.second_moment_matrix(), src.mean(), rep.zeta)
        for i in range(10):
            v = random_basis(sub, RngStream(50 + i))[:, 0]
            a = solve_direction_program(v, consts.delta, consts.zeta)
            assert np.abs(a).max() <= consts.H
            gap = abs(float(a @ (src.constituents[0] - src.constituents[1])))
            assert gap >= consts.L / 2


class TestMatchSpikes:
    def _consts(self):
        return LearnerConstants(n=25, k=3, zeta=0.4, omega=2.0, delta=1e-8, w_min=0.2)

    def test_trivial_single_direction(self):
        consts = self._consts()
        m = match_spikes(np.array([[0.1, 0.5, 0.9]]), np.zeros((0, 3)), 0.3, consts)
        assert m.assignments.shape == (0, 3)

    def test_genuine_grid_recovers_permutations(self, rng):
        # exact projections of known points onto two directions, independently
        # permuted; the matching must recover sigma_j o sigma_last^-1
        consts = self._consts()
        k = 3
        proj = rng.random((2, k))  # rows: direction j=0 and the last direction
        perm0 = rng.permutation(k)
        perm_last = rng.permutation(k)
        alpha = np.vstack([proj[0][np.argsort(perm0)], proj[1][np.argsort(perm_last)]])
        theta = 0.7
        zhat = np.array([proj[0] * math.cos(theta) + proj[1] * math.sin(theta)])
        m = match_spikes(alpha, zhat, theta, consts)
        for t in range(k):
            assert m.assignments[0, perm_last[t]] == perm0[t]

    def test_fake_grid_point_not_matched(self):
        consts = self._consts()
        theta = 0.9
        # two points whose grid has well-separated genuine combinations
        proj = np.array([[0.1, 0.6], [0.2, 0.8]])
        alpha = proj.copy()
        zhat = np.array([proj[0] * math.cos(theta) + proj[1] * math.sin(theta)])
        m = match_spikes(alpha, zhat, theta, consts)
        assert np.array_equal(m.assignments[0], [0, 1])
        # displace one test value far off the genuine grid: matching must fail
        bad = zhat.copy()
        bad[0, 1] += consts.L / (0.4 + consts.T) + 0.3
        with pytest.raises(MatchingFailure):
            match_spikes(alpha, bad, theta, consts)

    def test_ambiguous_assignment_fails(self):
        consts = self._consts()
        alpha = np.array([[0.5, 0.5 + 1e-12], [0.1, 0.9]])
        zhat = np.array([[0.5, 0.5]])
        with pytest.raises(MatchingFailure):
            match_spikes(alpha, zhat, 0.0, consts, tol=0.2)


class TestSimplexProjectL1:
    def test_already_in_simplex(self):
        p = np.array([0.2, 0.3, 0.5])
        assert np.allclose(simplex_project_l1(p), p)

    def test_surplus_example(self):
        p = np.array([0.6, 0.6])
        x = simplex_project_l1(p)
        assert np.abs(x - p).sum() == pytest.approx(0.2, abs=1e-12)
        assert x.sum() == pytest.approx(1.0, abs=1e-12)

    def test_negative_entry_example(self):
        p = np.array([-0.2, 0.5])
        x = simplex_project_l1(p)
        assert np.abs(x - p).sum() == pytest.approx(0.7, abs=1e-12)

    def test_matches_lp_cost(self, rng):
        for _ in range(120):
            n = int(rng.integers(2, 7))
            p = rng.standard_normal(n) * rng.uniform(0.2, 2.0)
            fast = simplex_project_l1(p)
            lp = simplex_project_l1_lp(p)
            assert fast.min() >= -1e-12
            assert fast.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.abs(fast - p).sum() == pytest.approx(np.abs(lp - p).sum(), abs=1e-9)


class TestLearnMixture:
    def test_degenerate_k1_returns_mean(self):
        src = MixtureSource(np.array([1.0]), np.array([[0.3, 0.2, 0.5]]))
        res = learn_mixture(OracleInputs(src), k=1, zeta=0.5, omega=4.0, delta=1e-8,
                            w_min=1.0, rng=RngStream(1))
        assert res.degenerate and res.kprime == 0
        assert np.allclose(res.source.constituents[0], src.constituents[0])
        assert res.source.weights[0] == 1.0

    def test_oracle_k2(self):
        src = two_block_source(n=20, c=0.9, w=(0.45, 0.55))
        rep = width_report(src)
        res = learn_mixture(OracleInputs(src), k=2, zeta=rep.zeta, omega=4.0, delta=1e-8,
                            w_min=src.w_min, rng=RngStream(7))
        assert res.kprime == 1
        assert mixture_transport(src, res.source).cost <= 1e-4

    def test_oracle_k3_exercises_matching(self):
        from mixlearn.cli import ExperimentConfig, generate_source

        src = generate_source(ExperimentConfig(n=30, k=3, seed=5, zeta=0.2))
        rep = width_report(src)
        res = learn_mixture(OracleInputs(src), k=3, zeta=rep.zeta, omega=4.0, delta=1e-8,
                            w_min=src.w_min, rng=RngStream(12))
        assert res.kprime == 2
        assert res.attempts >= 1
        assert mixture_transport(src, res.source).cost <= 2e-2

    def test_reconstruction_identity_exact_projections(self, rng):
        # with exact gammas and exact matching the assembled point is
        # rtilde + Pi_basis (p - rtilde)
        src = two_block_source(n=12, c=0.7)
        rep = width_report(src)
        sub = estimate_A(src.second_moment_matrix(), src.mean(), rep.zeta)
        basis = random_basis(sub, RngStream(3))
        r = src.mean()
        for t in range(2):
            p = src.constituents[t]
            coeffs = basis.T @ p - basis.T @ r
            phat = r + basis @ coeffs
            proj = r + basis @ (basis.T @ (p - r))
            assert np.abs(phat - proj).max() < 1e-10

    def test_sampled_direction_accuracy_monte_carlo(self):
        # n=50, k=2: learned direction projections track v.p^t across seeds
        from mixlearn.cli import ExperimentConfig, generate_source
        from mixlearn.learner import LearnerConstants, _SampledStats, learn_direction

        src = generate_source(ExperimentConfig(n=50, k=2, seed=21, zeta=0.5))
        rep = width_report(src)
        consts = LearnerConstants(n=50, k=2, zeta=rep.zeta, omega=4.0, delta=1e-8,
                                  w_min=src.w_min)
        sub = estimate_A(src.second_moment_matrix(), src.mean(), rep.zeta)
        v = sub.basis[:, 0]
        true_projs = np.sort(src.constituents @ v)
        errors = []
        for seed in range(10):
            rng = RngStream(9_000 + seed)
            batch = draw_snapshots(src, 3, 200000, rng.child(1))
            stats = _SampledStats(SampledInputs(batch, batch, batch, n=50))
            res = learn_direction(v, consts, stats, batch.rows, rng.child(2))
            errors.append(np.abs(np.sort(res.gammas) - true_projs).max())
        assert np.median(errors) < 0.01
        assert np.quantile(errors, 0.9) < 0.05

    def test_sampled_determinism(self):
        src = two_block_source(n=10, c=0.8)
        rep = width_report(src)

        def run():
            rng = RngStream(77)
            b1 = draw_snapshots(src, 1, 20000, rng.child(1))
            b2 = draw_snapshots(src, 2, 20000, rng.child(2))
            bh = draw_snapshots(src, 3, 20000, rng.child(3))
            res = learn_mixture(SampledInputs(b1, b2, bh, n=10), k=2, zeta=rep.zeta,
                                omega=4.0, delta=1e-8, w_min=src.w_min, rng=rng.child(5))
            return res.source

        a, b = run(), run()
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.constituents, b.constituents)

    def test_threads_do_not_change_results(self):
        from mixlearn.cli import ExperimentConfig, generate_source

        src = generate_source(ExperimentConfig(n=30, k=3, seed=5, zeta=0.2))
        rep = width_report(src)

        def run(threads):
            return learn_mixture(OracleInputs(src), k=3, zeta=rep.zeta, omega=4.0,
                                 delta=1e-8, w_min=src.w_min, rng=RngStream(12),
                                 threads=threads)

        a, b = run(None), run(3)
        assert np.array_equal(a.source.constituents, b.source.constituents)

    def test_oracle_k1_direction_learns_the_mean_projection(self):
        # single-constituent source: the 1-D learner recovers v . p exactly
        from mixlearn.learner import LearnerConstants, learn_direction
        from mixlearn.learner import _OracleStats

        p = np.full(8, 1.0 / 8)
        src = MixtureSource(np.ones(1), p[None, :])
        consts = LearnerConstants(n=8, k=1, zeta=0.5, omega=2.0, delta=1e-8, w_min=1.0)
        v = np.zeros(8)
        v[0] = 1.0
        res = learn_direction(v, consts, _OracleStats(src), None, RngStream(4))
        assert res.gammas[0] == pytest.approx(float(v @ p), abs=1e-8)

    def test_matching_failure_raises_after_retries(self):
        from mixlearn.cli import ExperimentConfig, generate_source

        src = generate_source(ExperimentConfig(n=30, k=3, seed=5, zeta=0.2))
        rep = width_report(src)
        with pytest.raises(MatchingFailure):
            learn_mixture(OracleInputs(src), k=3, zeta=rep.zeta, omega=4.0, delta=1e-8,
                          w_min=src.w_min, rng=RngStream(12), match_tol=1e-15, retries=2)

    def test_degenerate_parameters_rejected(self):
        from mixlearn.model import InputError

        with pytest.raises(InputError):
            LearnerConstants(n=10, k=2, zeta=0.0, omega=4.0, delta=1e-8, w_min=0.5)
        with pytest.raises(InputError):
            LearnerConstants(n=10, k=2, zeta=0.5, omega=0.5, delta=1e-8, w_min=0.5)
        with pytest.raises(InputError):
            LearnerConstants(n=10, k=2, zeta=0.5, omega=4.0, delta=0.0, w_min=0.5)

    def test_manifest_records_constants(self):
        src = two_block_source(n=10, c=0.8)
        rep = width_report(src)
        res = learn_mixture(OracleInputs(src), k=2, zeta=rep.zeta, omega=4.0, delta=1e-8,
                            w_min=src.w_min, rng=RngStream(1))
        consts = res.manifest["constants"]
        assert consts["T"] == 3 * 4.0 * 2**4
        assert consts["H"] == pytest.approx(4.0 / (src.w_min**2 * rep.zeta * math.sqrt(10)))
        assert "match_tol" in consts and res.manifest["kprime"] == 1
