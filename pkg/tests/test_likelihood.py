import numpy as np
import pytest

from conftest import diag_pom, disc_data, ic_pom, random_density
from tomoset.config import DEFAULT
from tomoset.core import hilbert_schmidt_distance, require_density
from tomoset.harness import random_pom
from tomoset.likelihood import (
    CountData,
    Pom,
    _update_operator,
    log_likelihood,
    ml_estimate,
    probabilities,
)
from tomoset.sampling import random_wishart


def test_pom_validation():
    pom = diag_pom()
    assert pom.dim == 2
    assert pom.n_outcomes == 2
    with pytest.raises(ValueError):
        Pom.from_matrices([np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])])
    with pytest.raises(ValueError):
        Pom.from_matrices([np.diag([1.0, 0.0]), np.diag([0.0, 0.9])])
    with pytest.raises(ValueError):
        Pom.from_matrices([np.array([[0.5, 0.3], [0.0, 0.5]]), np.eye(2) * 0.5])


def test_count_data_validation():
    pom = diag_pom()
    data = CountData(counts=np.array([3.0, 7.0]), pom=pom)
    assert data.total == 10.0
    assert np.allclose(data.frequencies, [0.3, 0.7])
    with pytest.raises(ValueError):
        CountData(counts=np.array([1.0, 2.0, 3.0]), pom=pom)
    with pytest.raises(ValueError):
        CountData(counts=np.array([-1.0, 2.0]), pom=pom)
    with pytest.raises(ValueError):
        CountData(counts=np.array([0.0, 0.0]), pom=pom)


def test_probabilities_frozen():
    rho = np.diag([0.3, 0.7]).astype(complex)
    assert np.allclose(probabilities(rho, diag_pom()), [0.3, 0.7], atol=1e-15)


def test_log_likelihood_frozen_and_sentinel():
    counts = np.array([3.0, 7.0])
    val = log_likelihood(counts, np.array([0.3, 0.7]))
    assert val == pytest.approx(-6.1086430205489354, abs=1e-12)
    assert log_likelihood(counts, np.array([0.0, 1.0])) == float("-inf")
    # unobserved outcomes contribute nothing even at zero probability
    assert log_likelihood(np.array([0.0, 5.0]), np.array([0.0, 1.0])) == 0.0


def test_ml_disc_model_reaches_diagonal_fixed_point():
    data = disc_data(0.3)
    sol = ml_estimate(data)
    assert sol.converged
    assert sol.certificate <= DEFAULT.ml_cert_tol
    assert hilbert_schmidt_distance(sol.rho, np.diag([0.3, 0.7])) < 1e-8
    assert np.allclose(sol.probabilities, [0.3, 0.7], atol=1e-9)
    expect = 0.3 * np.log(0.3) + 0.7 * np.log(0.7)
    assert sol.log_likelihood == pytest.approx(expect, abs=1e-9)


def test_ml_recovers_state_from_complete_exact_data():
    rng = np.random.default_rng(40)
    pom = ic_pom(2, rng)
    rho_true = random_density(2, rng)
    data = CountData(counts=probabilities(rho_true, pom), pom=pom, exact=True)
    sol = ml_estimate(data)
    assert sol.converged
    assert hilbert_schmidt_distance(sol.rho, rho_true) < 1e-5


def test_ml_rejects_start_with_zero_observed_probability():
    data = CountData(counts=np.array([0.0, 5.0]), pom=diag_pom())
    with pytest.raises(ValueError):
        ml_estimate(data, rho0=np.diag([1.0, 0.0]).astype(complex))


def random_instance(rng, complete=False):
    d = 2 if rng.uniform() < 0.8 else 3
    k = d * d if complete else int(rng.integers(2, d * d))
    pom = random_pom(d, k, rng)
    rho_true = random_density(d, rng)
    shots = int(rng.integers(200, 5000))
    p = np.clip(probabilities(rho_true, pom), 0.0, None)
    counts = rng.multinomial(shots, p / p.sum()).astype(float)
    if counts.sum() == 0.0:
        counts[0] = 1.0
    return CountData(counts=counts, pom=pom)


@pytest.fixture(scope="module")
def solved_pool():
    rng = np.random.default_rng(41)
    pool = []
    for _ in range(1000):
        data = random_instance(rng)
        pool.append((data, ml_estimate(data)))
    return pool


@pytest.mark.invariants
def test_iteration_stays_in_state_space(solved_pool):
    """Outputs of the fixed-point ascent are valid states, run after run."""
    for data, sol in solved_pool:
        require_density(sol.rho)
        assert sol.iterations >= 1
        assert np.all(sol.probabilities > 0.0)


@pytest.mark.invariants
def test_likelihood_is_monotone_in_iteration_budget():
    """Truncating the iteration never yields a higher likelihood than running longer."""
    rng = np.random.default_rng(42)
    for _ in range(1000):
        data = random_instance(rng)
        k1 = int(rng.integers(1, 30))
        k2 = k1 + int(rng.integers(1, 100))
        short = ml_estimate(data, config=DEFAULT.replace(ml_max_iter=k1))
        long = ml_estimate(data, config=DEFAULT.replace(ml_max_iter=k2))
        slack = 1e-10 * (abs(short.log_likelihood) + 1.0)
        assert long.log_likelihood >= short.log_likelihood - slack


@pytest.mark.invariants
def test_complete_data_stationarity_on_support():
    """With informationally complete data, R acts as the identity on the support."""
    rng = np.random.default_rng(43)
    for _ in range(1000):
        data = random_instance(rng, complete=True)
        sol = ml_estimate(data)
        r = _update_operator(data.frequencies, sol.probabilities, data.pom)
        w, v = np.linalg.eigh(sol.rho)
        support = v[:, w > 1e-7]
        res = support.conj().T @ (r - np.eye(data.pom.dim)) @ support
        assert np.linalg.norm(res) < 1e-6


@pytest.mark.invariants
def test_ml_probabilities_unique_across_starts():
    """Two different mixed starts land on the same outcome probabilities."""
    rng = np.random.default_rng(44)
    for _ in range(1000):
        data = random_instance(rng)
        a = ml_estimate(data)
        b = ml_estimate(data, rho0=random_wishart(data.pom.dim, rng))
        assert np.max(np.abs(a.probabilities - b.probabilities)) < 1e-7
