import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latentcause.dynamics import (
    ConsensusParams,
    GenerationError,
    InstabilityError,
    LatentLinearSystem,
    consensus_matrix,
    draw_consensus_weights,
    generate_consensus,
    intro_system,
    latent_is_acyclic,
    nilpotency_index,
    nonlinear_step,
    random_nilpotent_system,
    reduced_var_coeffs,
    simulate_consensus,
    simulate_linear,
    simulate_nonlinear_example,
    true_support,
)

from conftest import noiseless


def scalar_system(a11, a12=None, a21=None, a22=None, noise=0.0, z0=None):
    if a22 is None:
        return LatentLinearSystem([[a11]], np.zeros((1, 0)), np.zeros((0, 1)),
                                  np.zeros((0, 0)), [noise])
    return LatentLinearSystem([[a11]], [[a12]], [[a21]], [[a22]], [noise], z0=z0)


class TestSimulateLinear:
    def test_identity_zero_noise_is_constant(self):
        traj = simulate_linear(scalar_system(1.0), 5, x0=[3.0], seed=0)
        assert traj.data.shape == (6, 1)
        assert np.all(traj.data == 3.0)

    def test_intro_first_step(self):
        traj = simulate_linear(noiseless(intro_system()), 1, x0=[1.0, 1.0], seed=0)
        np.testing.assert_allclose(traj.data[1], [0.0, 0.6], atol=1e-15)

    def test_hand_rollout_through_latent(self):
        system = scalar_system(0.0, 1.0, 1.0, 0.0, z0=[2.0])
        traj = simulate_linear(system, 3, x0=[5.0], seed=0)
        assert traj.data[:, 0].tolist() == [5.0, 2.0, 5.0, 2.0]

    def test_same_seed_bit_identical(self):
        system = intro_system(0.5)
        a = simulate_linear(system, 200, seed=11).data
        b = simulate_linear(system, 200, seed=11).data
        c = simulate_linear(system, 200, seed=12).data
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, c)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="x0"):
            simulate_linear(intro_system(), 3, x0=[1.0], seed=0)
        with pytest.raises(ValueError):
            simulate_linear(intro_system(), 0, seed=0)

    def test_divergence_names_the_step(self):
        # x doubles each step from 1: exceeds 1e12 at step 40
        with pytest.raises(InstabilityError) as info:
            simulate_linear(scalar_system(2.0), 1000, x0=[1.0], seed=0)
        assert info.value.step == 40
        assert "40" in str(info.value)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 5), st.integers(0, 10_000))
    def test_latent_rollout_matches_reduced_form(self, n, m, seed):
        rng = np.random.default_rng(seed)
        base = random_nilpotent_system(n, m, seed, radius=0.9)
        # non-nilpotent latent block as well, to exercise the Z(0) drift term
        a22 = base.a22 + 0.3 * rng.normal(size=(m, m)) if m else base.a22
        system = LatentLinearSystem(base.a11, base.a12, base.a21, a22,
                                    noise_var=np.zeros(n), z0=rng.normal(size=m))
        x0 = rng.normal(size=n)
        steps = 12
        X = simulate_linear(system, steps, x0=x0, seed=0).data
        for t in range(1, steps + 1):
            expected = system.a11 @ X[t - 1]
            for k in range(1, t):
                a_k = system.a12 @ np.linalg.matrix_power(system.a22, k - 1) @ system.a21
                expected = expected + a_k @ X[t - 1 - k]
            expected = expected + system.a12 @ np.linalg.matrix_power(system.a22, t - 1) @ system.z0
            np.testing.assert_allclose(X[t], expected, atol=1e-9, rtol=1e-9)


class TestConsensus:
    def test_zero_probabilities_give_empty_network(self):
        net = generate_consensus(ConsensusParams(n=4, m=3, p=0.0, q=0.0), seed=5)
        assert net.tries == 1
        assert np.all(net.system.a11 == 0)
        assert np.all(net.system.a22 == 0)

    def test_latent_cycle_exhausts_tries(self):
        # seed 0: the first latent draw has a 2-cycle (checked independently below)
        params = ConsensusParams(n=2, m=3, p=0.1, q=0.5, max_tries=1)
        w = draw_consensus_weights(params, np.random.default_rng(0))
        pattern = (w[2:, 2:] != 0).astype(float)
        assert np.any(pattern * pattern.T != 0)
        with pytest.raises(GenerationError) as info:
            generate_consensus(params, seed=0)
        assert info.value.tries == 1

    def test_paper_settings(self):
        params = ConsensusParams(n=10, m=10, p=0.1, q=0.1, a=0.2, b=0.7, sigma2=0.1)
        for seed in range(5):
            system, traj = simulate_consensus(params, 100, seed)
            assert nilpotency_index(system.a22) is not None
            off = system.a11[~np.eye(10, dtype=bool)]
            assert set(np.unique(off)) <= {-0.2, 0.0, 0.2}
            assert set(np.unique(system.a22)) <= {-0.7, 0.0, 0.7}
            np.testing.assert_array_equal(system.noise_var, 0.1)
            assert traj.data.shape == (101, 10)

    def test_diagonal_rule_bit_exact(self):
        params = ConsensusParams(n=6, m=6, p=0.3, q=0.2)
        for seed in range(10):
            net = generate_consensus(params, seed)
            A = net.system.full_matrix
            w = net.weights
            size = w.shape[0]
            for i in range(size):
                edges = [j for j in range(size) if j != i and w[i, j] != 0]
                w_ii = sum(w[i, j] for j in edges)
                diag = w_ii - sum(w[i, j] for j in range(size) if j != i)
                assert A[i, i] == diag
                for k in range(size):
                    if k != i:
                        assert A[i, k] == w[i, k]
            # edge set = nonzero weights, so every diagonal entry vanishes
            assert np.all(np.diag(A) == 0)

    def test_accepted_latent_support_is_acyclic(self):
        params = ConsensusParams(n=3, m=8, p=0.1, q=0.15)
        for seed in range(40):
            net = generate_consensus(params, seed)
            pattern = (net.system.a22 != 0).astype(float)
            assert nilpotency_index(pattern) is not None

    def test_weight_frequencies(self):
        params = ConsensusParams(n=101, m=0, p=0.1, a=0.2)
        w = draw_consensus_weights(params, np.random.default_rng(2024))
        vals = w[~np.eye(101, dtype=bool)]
        assert vals.size >= 10_000
        freq = [np.mean(vals == v) for v in (-0.2, 0.0, 0.2)]
        np.testing.assert_allclose(freq, [0.1, 0.8, 0.1], atol=0.02)

    def test_consensus_matrix_uses_offdiagonal_weights(self):
        w = np.array([[9.0, 0.5, 0.0], [0.0, 0.0, -0.25], [0.1, 0.2, 0.0]])
        A = consensus_matrix(w)
        np.testing.assert_array_equal(A, [[0.0, 0.5, 0.0], [0.0, 0.0, -0.25], [0.1, 0.2, 0.0]])

    def test_cycle_detection(self):
        assert latent_is_acyclic(np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]]))
        assert not latent_is_acyclic(np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]]))
        assert latent_is_acyclic(np.zeros((0, 0)))

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ConsensusParams(p=0.6)
        with pytest.raises(ValueError):
            ConsensusParams(a=0.0)
        with pytest.raises(ValueError):
            ConsensusParams(max_tries=0)

    def test_deterministic(self):
        params = ConsensusParams(n=5, m=5)
        s1, t1 = simulate_consensus(params, 50, 3)
        s2, t2 = simulate_consensus(params, 50, 3)
        assert s1 == s2 and t1 == t2


class TestNonlinear:
    def test_zero_fixed_point(self):
        assert nonlinear_step(0.0, 0.0, 0.0) == (0.0, 0.0, 0.0)

    def test_single_step(self):
        x1, x2, z = nonlinear_step(1.0, 0.0, 0.0)
        assert (float(x1), float(x2), float(z)) == pytest.approx((0.2, 0.5, 0.9))

    def test_samples_shape_and_determinism(self):
        a = simulate_nonlinear_example(1000, 0.1, seed=4)
        b = simulate_nonlinear_example(1000, 0.1, seed=4)
        assert a.samples.shape == (1000, 4)
        assert a.samples.tobytes() == b.samples.tobytes()

    def test_noiseless_samples_follow_dynamics(self):
        s = simulate_nonlinear_example(50, 0.0, seed=1).samples
        np.testing.assert_allclose(s[:, 2], 0.2 * s[:, 0])
        np.testing.assert_allclose(s[:, 3], 0.5 * s[:, 0] ** 2)

    def test_invalid(self):
        with pytest.raises(ValueError):
            simulate_nonlinear_example(0, 0.1, seed=0)


class TestNilpotency:
    def test_identity(self):
        assert nilpotency_index(np.eye(3)) is None

    def test_shift(self):
        assert nilpotency_index(np.triu(np.ones((3, 3)), k=1)) == 3

    def test_zero(self):
        assert nilpotency_index(np.zeros((4, 4))) == 1

    def test_tolerance(self):
        assert nilpotency_index(np.array([[1e-12]]), tol=1e-9) == 1
        with pytest.raises(ValueError):
            nilpotency_index(np.ones((2, 3)))


class TestSupportAndReduction:
    def test_zero_a11(self):
        system = LatentLinearSystem(np.zeros((3, 3)), np.zeros((3, 0)), np.zeros((0, 3)),
                                    np.zeros((0, 0)), np.ones(3))
        assert true_support(system).entries.sum() == 0

    def test_intro_support(self):
        np.testing.assert_array_equal(true_support(intro_system()).entries, [[0, 0], [1, 1]])

    def test_below_tolerance(self):
        system = scalar_system(1e-12)
        assert true_support(system, tol=1e-9).entries[0, 0] == 0

    def test_no_latent(self):
        system = LatentLinearSystem([[0.4, 0.1], [0.0, 0.2]], np.zeros((2, 0)),
                                    np.zeros((0, 2)), np.zeros((0, 0)), [1, 1])
        coeffs = reduced_var_coeffs(system, 3)
        np.testing.assert_array_equal(coeffs[0], system.a11)
        assert all(np.all(c == 0) for c in coeffs[1:])

    def test_scalar_latent(self):
        coeffs = reduced_var_coeffs(scalar_system(0.3, 2.0, 0.5, 0.0), 2)
        assert [float(c[0, 0]) for c in coeffs] == [0.3, 1.0, 0.0]

    def test_intro_reduction(self):
        coeffs = reduced_var_coeffs(intro_system(), 3)
        np.testing.assert_allclose(coeffs[1], [[0.45, 0.0], [0.81, 0.0]], atol=1e-15)
        np.testing.assert_allclose(coeffs[2], 0.5 * coeffs[1], atol=1e-15)
        np.testing.assert_allclose(coeffs[3], 0.25 * coeffs[1], atol=1e-15)


def test_system_validation():
    with pytest.raises(ValueError):
        LatentLinearSystem(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1)), [1.0])
    with pytest.raises(ValueError):
        LatentLinearSystem(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1)), [1.0, -1.0])
    with pytest.raises(ValueError):
        LatentLinearSystem(np.eye(2), np.zeros((2, 1)), np.zeros((2, 2)), np.zeros((1, 1)), [1.0, 1.0])


def test_random_nilpotent_system():
    for seed in range(10):
        system = random_nilpotent_system(4, 5, seed, radius=0.9)
        assert nilpotency_index(system.a22, tol=1e-12) is not None
        assert system.spectral_radius() == pytest.approx(0.9) or system.spectral_radius() == 0
