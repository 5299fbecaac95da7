import numpy as np
import pytest
import scipy.stats

from icereg import LogisticModel, ProblemSpec, make_problem
from icereg.io import load_problem, save_problem
from icereg.synthetic import (ProblemGenerationError, adjust_intercept, bernoulli_entropy, derive_seed,
                              generate_responses, generate_true_params, random_covariance, sample_regressors)


def recheck(problem, rng, n=100_000):
    """Balance and entropy of the truth on an independent regressor sample."""
    x = np.column_stack([np.ones(n), sample_regressors(n, problem.mu, problem.sigma, rng)])
    prob = LogisticModel().prob(x, problem.theta0)
    return prob.mean(), bernoulli_entropy(prob).mean()


class TestSeeds:
    def test_known_value(self):
        # first 8 bytes, little endian, of sha256(b"0|cov|0")
        import hashlib
        expected = int.from_bytes(hashlib.sha256(b"0|cov|0").digest()[:8], "little")
        assert derive_seed(0, "cov") == expected

    def test_tags_give_distinct_streams(self):
        tags = ["cov", "mu", "theta0", "train-x", "train-y", "test-x", "test-y"]
        assert len({derive_seed(7, t) for t in tags}) == len(tags)


class TestCovariance:
    def test_scalar(self):
        sigma, eig = random_covariance(1, 1e-4, 0.1, np.random.default_rng(0))
        assert sigma.shape == (1, 1) and 1e-4 <= sigma[0, 0] <= 0.1 and sigma[0, 0] == pytest.approx(eig[0])

    @pytest.mark.parametrize("p", [2, 5, 10, 20])
    def test_spectrum_recovered(self, p):
        sigma, eig = random_covariance(p, 1e-4, 0.1, np.random.default_rng(p))
        assert np.max(np.abs(sigma - sigma.T)) < 1e-12
        np.testing.assert_allclose(np.linalg.eigvalsh(sigma), np.sort(eig), rtol=1e-8)
        assert np.linalg.cond(sigma) <= 1000 * (1 + 1e-8)

    def test_invalid(self):
        with pytest.raises(ValueError):
            random_covariance(3, 0.1, 0.1, np.random.default_rng(0))


class TestRegressors:
    def test_isotropic(self):
        rng = np.random.default_rng(1)
        x = sample_regressors(10_000, np.zeros(3), 0.5 * np.eye(3), rng)
        c = np.cov(x, rowvar=False)
        se = np.sqrt((0.25 + 0.25 * np.eye(3)) / 10_000)
        assert np.all(np.abs(c - 0.5 * np.eye(3)) < 4 * se)

    def test_mean(self):
        rng = np.random.default_rng(2)
        mu = np.array([1.0, -2.0, 0.5])
        x = sample_regressors(10_000, mu, np.diag([0.1, 0.2, 0.3]), rng)
        se = np.sqrt(np.array([0.1, 0.2, 0.3]) / 10_000)
        assert np.all(np.abs(x.mean(axis=0) - mu) < 4 * se)

    def test_full_pipeline_covariance(self):
        rng = np.random.default_rng(3)
        sigma, _ = random_covariance(4, 1e-4, 0.1, rng)
        n = 50_000
        x = sample_regressors(n, rng.standard_normal(4), sigma, rng)
        d = np.diag(sigma)
        se = np.sqrt((np.outer(d, d) + sigma ** 2) / n)
        assert np.all(np.abs(np.cov(x, rowvar=False) - sigma) < 4 * se)


class TestTrueParams:
    def test_counts(self):
        rng = np.random.default_rng(4)
        assert np.count_nonzero(generate_true_params(6, 5, rng)[1:]) == 1
        assert np.count_nonzero(generate_true_params(6, 0, rng)[1:]) == 6
        t = generate_true_params(10, 4, rng)
        assert t[0] == 0.0 and np.sum(t[1:] == 0.0) == 4

    def test_zero_slots_uniform(self):
        counts = np.zeros(5)
        for s in range(10_000):
            counts += generate_true_params(5, 2, np.random.default_rng(s))[1:] == 0.0
        assert scipy.stats.chisquare(counts).pvalue > 0.001

    def test_invalid(self):
        with pytest.raises(ValueError):
            generate_true_params(3, 3, np.random.default_rng(0))


class TestAdjustIntercept:
    def spec(self):
        return ProblemSpec(p=2, m=0, n_train=10)

    def test_all_zero_slopes(self):
        x = np.column_stack([np.ones(100), np.random.default_rng(5).standard_normal((100, 2))])
        theta = adjust_intercept(np.zeros(3), LogisticModel(), x, self.spec())
        np.testing.assert_array_equal(theta, np.zeros(3))

    def test_mean_probability_decreases_in_intercept(self):
        rng = np.random.default_rng(6)
        x = np.column_stack([np.ones(500), rng.standard_normal((500, 2))])
        theta = np.array([0.0, 1.0, -0.5])
        means = []
        for t in np.linspace(-5, 5, 21):
            theta[0] = t
            means.append(LogisticModel().prob(x, theta).mean())
        assert np.all(np.diff(means) < 0)

    def test_balances_to_half(self):
        rng = np.random.default_rng(7)
        x = np.column_stack([np.ones(5000), 1.0 + rng.standard_normal((5000, 2))])
        theta = adjust_intercept(np.array([0.0, 1.0, 0.7]), LogisticModel(), x, self.spec())
        assert abs(LogisticModel().prob(x, theta).mean() - 0.5) < 1e-6

    def test_low_entropy_is_rejected(self):
        rng = np.random.default_rng(8)
        x = np.column_stack([np.ones(5000), rng.standard_normal((5000, 2))])
        assert adjust_intercept(np.array([0.0, 200.0, 0.0]), LogisticModel(), x, self.spec()) is None


class TestResponses:
    def test_degenerate(self):
        x = np.ones((50, 1))
        assert np.all(generate_responses(x, np.array([-800.0]), np.random.default_rng(0)) == 1.0)

    def test_concentration_and_determinism(self):
        rng = np.random.default_rng(9)
        x = np.column_stack([np.ones(10_000), rng.standard_normal((10_000, 2))])
        theta = np.array([0.2, 1.0, -1.0])
        y = generate_responses(x, theta, np.random.default_rng(1))
        prob = LogisticModel().prob(x, theta)
        se = np.sqrt(np.mean(prob * (1 - prob)) / x.shape[0])
        assert abs(y.mean() - prob.mean()) < 4 * se
        np.testing.assert_array_equal(y, generate_responses(x, theta, np.random.default_rng(1)))


class TestMakeProblem:
    def test_deterministic(self):
        spec = ProblemSpec(p=5, m=2, n_train=300, n_test=2000, seed=11)
        a, b = make_problem(spec), make_problem(spec)
        for field in ("theta0", "mu", "sigma"):
            np.testing.assert_array_equal(getattr(a, field), getattr(b, field))
        np.testing.assert_array_equal(a.train.x, b.train.x)
        np.testing.assert_array_equal(a.test.y, b.test.y)

    def test_invariants(self):
        spec = ProblemSpec(p=10, m=4, n_train=500, seed=12)
        prob = make_problem(spec)
        assert np.sum(prob.theta0[1:] == 0.0) == 4
        eig = np.linalg.eigvalsh(prob.sigma)
        assert eig.min() >= 1e-4 * (1 - 1e-8) and eig.max() <= 0.1 * (1 + 1e-8)
        assert prob.train.n == 500 and prob.test.n == 100_000
        assert not np.array_equal(prob.train.x[:10], prob.test.x[:10])
        balance, entropy = recheck(prob, np.random.default_rng(99))
        assert 0.35 < balance < 0.65 and entropy > 0.2

    @pytest.mark.parametrize("p,m", [(5, 2), (10, 4), (20, 8)])
    @pytest.mark.parametrize("n", [500, 1000, 2000, 5000])
    def test_table_grid_constructs(self, p, m, n):
        prob = make_problem(ProblemSpec(p=p, m=m, n_train=n, n_test=20_000, seed=0))
        assert prob.train.p == p + 1

    @pytest.mark.slow
    def test_acceptance_predicate_on_many_seeds(self):
        discarded = 0
        for s in range(100):
            prob = make_problem(ProblemSpec(p=10, m=4, n_train=10, seed=s))
            discarded += prob.discarded_attempts
            balance, entropy = recheck(prob, np.random.default_rng(1000 + s))
            assert 0.35 < balance < 0.65 and entropy > 0.2
        print(f"acceptance rate {100 / (100 + discarded):.3f}")

    def test_budget_exhausted(self):
        spec = ProblemSpec(p=2, m=0, n_train=10, n_test=500, entropy_floor=0.7)
        with pytest.raises(ProblemGenerationError):
            make_problem(spec)

    def test_directory_round_trip(self, tmp_path):
        prob = make_problem(ProblemSpec(p=3, m=1, n_train=50, n_test=200, seed=4))
        save_problem(prob, tmp_path / "prob")
        back = load_problem(tmp_path / "prob")
        assert back.spec == prob.spec and back.attempt_seed == prob.attempt_seed
        for field in ("theta0", "mu", "sigma"):
            np.testing.assert_array_equal(getattr(back, field), getattr(prob, field))
        np.testing.assert_array_equal(back.train.x, prob.train.x)
        np.testing.assert_array_equal(back.test.y, prob.test.y)
