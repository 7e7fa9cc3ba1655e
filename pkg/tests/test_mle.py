import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tomocg import mle, qops, randgen, sampler
from tomocg.mle import LikelihoodSpec, SolverOptions
from tomocg.randgen import SeedSpec
from tomocg.sampler import Counts
import oracles
from conftest import random_state


@pytest.fixture(scope="module")
def pom():
    return randgen.random_rank1_pom(4, 16, SeedSpec(21))


def noisy_instance(pom, mu, seed, m_well=0, gamma=0.0, n=8000):
    rho = qops.admix(randgen.haar_pure_state(4, SeedSpec(seed, (0,))), gamma)
    setup = randgen.perturb_pom(pom, m_well, mu, SeedSpec(seed, (1,)))
    counts = sampler.simulate_counts(rho, setup, n, SeedSpec(seed, (2,)))
    return rho, setup, counts


class TestProbabilities:
    def test_complete_pom(self, pom, rng):
        p, eta = mle.probabilities(random_state(rng, 4), pom)
        assert eta == pytest.approx(1, abs=1e-12)

    def test_maximally_mixed(self, pom):
        p, _ = mle.probabilities(qops.maximally_mixed(4), pom)
        assert np.allclose(p, [np.trace(e).real / 4 for e in pom], atol=1e-14)

    def test_linearity(self, pom, rng):
        setup = randgen.perturb_pom(pom, 3, 0.4, SeedSpec(1))
        rho = random_state(rng, 4)
        _, eta = mle.probabilities(rho, setup.actual_outcomes())
        assert eta == pytest.approx(np.trace(rho @ sum(setup.actual_outcomes())).real, abs=1e-12)

    def test_dim_mismatch(self, pom):
        with pytest.raises(ValueError):
            mle.probabilities(np.eye(2) / 2, pom)


class TestLogLikelihood:
    def test_certain_outcome(self):
        spec = LikelihoodSpec(np.array([np.diag([1.0, 0]), np.diag([0, 1.0])]), [5, 0])
        assert mle.log_likelihood(spec, np.diag([1.0, 0])) == 0.0

    def test_support_violation_flagged(self):
        spec = LikelihoodSpec(np.array([np.diag([1.0, 0]), np.diag([0, 1.0])]), [5, 1])
        assert mle.log_likelihood(spec, np.diag([1.0, 0])) == -np.inf

    def test_linear_in_counts(self, pom, rng):
        rho = random_state(rng, 4)
        n = rng.integers(0, 50, 16)
        a = mle.log_likelihood(LikelihoodSpec(np.array(pom), n), rho)
        b = mle.log_likelihood(LikelihoodSpec(np.array(pom), 2 * n), rho)
        assert b == pytest.approx(2 * a, rel=1e-14)

    def test_against_direct_product(self, pom, rng):
        setup = randgen.perturb_pom(pom, 2, 0.5, SeedSpec(3))
        ops = setup.actual_outcomes()
        rho = random_state(rng, 4)
        n = rng.integers(0, 30, len(ops))
        mpmath.mp.dps = 50
        p = [mpmath.mpf(float(np.trace(rho @ e).real)) for e in ops]
        eta = sum(p)
        prod = mpmath.mpf(1)
        for pk, nk in zip(p, n):
            prod *= (pk / eta) ** int(nk)
        got = mle.log_likelihood(LikelihoodSpec(np.array(ops), n), rho)
        assert got == pytest.approx(float(mpmath.log(prod)), abs=1e-12 * max(1, abs(got)))


class TestMlEstimate:
    def test_recovers_exact_frequencies(self, pom, rng):
        target = random_state(rng, 4)
        p, _ = mle.probabilities(target, pom)
        # exact data: a tight tolerance turns into a tight distance to the target
        res = mle.ml_estimate(LikelihoodSpec(np.array(pom), 8000 * p), SolverOptions(tol=1e-12))
        assert res.converged
        assert qops.trace_distance(res.rho_hat, target) < 1e-6
        p_hat, _ = mle.probabilities(res.rho_hat, pom)
        assert np.max(np.abs(p_hat - p)) < 1e-8

    @pytest.mark.parametrize("seed", [1002, 1054, 1061, 1080])
    def test_no_stall_on_the_boundary(self, seed):
        # draws where an earlier iteration pinned an eigenvalue at zero and
        # stopped with R sigma = sigma at a non-maximal point
        pom = randgen.random_rank1_pom(4, 16, SeedSpec(seed))
        target = randgen.hs_random_state(4, SeedSpec(seed, (1,)))
        p, _ = mle.probabilities(target, pom)
        spec = LikelihoodSpec(np.array(pom), 8000 * p)
        res = mle.ml_estimate(spec)
        assert res.converged
        assert res.log_likelihood >= mle.log_likelihood(spec, target) - 1e-6
        assert np.linalg.eigvalsh(res.rho_hat)[0] > 1e-6

    def test_flat_likelihood_returns_start(self):
        res = mle.ml_estimate(LikelihoodSpec(np.eye(4)[None], [10.0]))
        assert res.converged
        assert np.allclose(res.rho_hat, np.eye(4) / 4, atol=1e-14)

    def test_matches_cholesky_oracle(self, pom):
        _, setup, counts = noisy_instance(pom, 0.3, 5)
        spec = LikelihoodSpec(np.array(setup.actual_outcomes()), counts.as_array())
        res = mle.ml_estimate(spec)
        assert res.converged and res.residual < 1e-8
        _, ll_oracle = oracles.cholesky_ml(spec.outcomes, spec.counts)
        assert res.log_likelihood >= ll_oracle - 1e-6
        assert abs(res.log_likelihood - ll_oracle) < 1e-6

    def test_monotone_history(self, pom):
        for seed in range(20):
            _, setup, counts = noisy_instance(pom, 0.4, 100 + seed, n=500)
            spec = LikelihoodSpec(np.array(setup.actual_outcomes()), counts.as_array())
            res = mle.ml_estimate(spec, SolverOptions(record_history=True))
            h = np.array(res.history)
            assert len(h) == res.iterations + 1
            assert np.all(np.diff(h) >= -1e-12)
            # the accumulated gains agree with a fresh evaluation
            assert h[-1] == pytest.approx(res.log_likelihood, rel=1e-10)

    def test_reduction_is_exact(self, pom, rng):
        setup = randgen.perturb_pom(pom, 5, 0.5, SeedSpec(7))
        ops = np.array(setup.actual_outcomes())
        n = rng.integers(1, 100, len(ops)).astype(float)
        spec = LikelihoodSpec(ops, n)
        g = ops.sum(axis=0)
        w, v = np.linalg.eigh(g)
        g_half, g_mhalf = (v * np.sqrt(w)) @ v.conj().T, (v / np.sqrt(w)) @ v.conj().T
        reduced = g_mhalf @ ops @ g_mhalf
        for _ in range(20):
            rho = random_state(rng, 4)
            sigma = g_half @ rho @ g_half
            sigma /= np.trace(sigma).real
            q = np.einsum("ij,lji->l", sigma, reduced).real
            assert mle.log_likelihood(spec, rho) == pytest.approx(np.sum(n * np.log(q)), abs=1e-10)

    def test_singular_outcome_sum(self):
        with pytest.raises(np.linalg.LinAlgError):
            mle.ml_estimate(LikelihoodSpec(np.diag([1.0, 0])[None], [3.0]))

    def test_non_convergence_is_reported(self, pom):
        _, setup, counts = noisy_instance(pom, 0.3, 9)
        spec = LikelihoodSpec(np.array(setup.actual_outcomes()), counts.as_array())
        res = mle.ml_estimate(spec, SolverOptions(max_iters=2))
        assert not res.converged and res.iterations == 2
        qops.density_matrix(res.rho_hat)


class TestStrategies:
    def test_noise_free_strategy1_is_reference(self, pom):
        _, setup, counts = noisy_instance(pom, 0.0, 11)
        a = mle.strategy1(counts, setup)
        b = mle.reference_estimate(counts, setup)
        assert qops.trace_distance(a.rho_hat, b.rho_hat) < 1e-6

    def test_uniform_ill_counts(self, pom):
        setup = randgen.perturb_pom(pom, 4, 0.2, SeedSpec(12))
        counts = Counts((100, 300, 50, 80), (250,) * 12)
        a = mle.strategy1(counts, setup)
        b = mle.strategy3(counts, setup)
        assert qops.trace_distance(a.rho_hat, b.rho_hat) < 1e-9

    def test_all_converge(self, pom):
        _, setup, counts = noisy_instance(pom, 0.3, 13, m_well=4)
        for res in (
            mle.strategy1(counts, setup),
            mle.strategy2(counts, setup),
            mle.strategy3(counts, setup, 0.5),
            mle.reference_estimate(counts, setup),
        ):
            assert res.converged and res.residual < 1e-8
            qops.density_matrix(res.rho_hat)

    def test_strategy2_needs_well_outcomes(self, pom):
        _, setup, counts = noisy_instance(pom, 0.3, 14)
        with pytest.raises(mle.StrategyInapplicable):
            mle.strategy2(counts, setup)

    def test_strategy2_flags_incomplete(self, pom):
        _, setup, counts = noisy_instance(pom, 0.3, 15, m_well=6)
        res = mle.strategy2(counts, setup)
        assert res.possibly_non_unique
        _, setup, counts = noisy_instance(pom, 0.3, 15, m_well=16)
        assert not mle.strategy2(counts, setup).possibly_non_unique


@given(st.lists(st.integers(0, 300), min_size=16, max_size=16).filter(lambda c: sum(c) > 0),
       st.floats(0.0, 0.6), st.integers(0, 15))
@settings(max_examples=30)
def test_ascent_and_optimality_property(counts, mu, m_well):
    pom = randgen.random_rank1_pom(4, 16, SeedSpec(77))
    setup = randgen.perturb_pom(pom, m_well, mu, SeedSpec(78))
    spec = LikelihoodSpec(np.array(setup.actual_outcomes()), counts)
    res = mle.ml_estimate(spec, SolverOptions(record_history=True))
    assert res.converged
    assert np.all(np.diff(res.history) >= -1e-12)
    qops.density_matrix(res.rho_hat)
    # no state in a small neighbourhood does better
    rng = np.random.default_rng(sum(counts))
    for _ in range(5):
        other = 0.999 * res.rho_hat + 0.001 * random_state(rng, 4)
        assert mle.log_likelihood(spec, other) <= res.log_likelihood + 1e-9
