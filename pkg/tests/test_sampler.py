import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

import gdpnhpp.sampler as sampler
from gdpnhpp.diagnostics import batch_means_se
from gdpnhpp.errors import ConfigError
from gdpnhpp.model import Hyperparams, LatentState, ModelData, NIWParams, SufficientStats, draw_prior_state
from gdpnhpp.sampler import (
    Checkpoint,
    SamplerConfig,
    Tuning,
    allocation_probabilities,
    dirichlet_independence_move,
    log_target_alpha,
    log_target_beta_row,
    psi_conditionals,
    run_chain_data,
    salt_move,
    sweep,
    update_alpha,
    update_beta_interior,
    update_beta_terminal,
    update_gamma,
    update_psi,
    update_z,
)

from helpers import oracle_psi, random_data, random_state, small_hyper


def empty_data(P, lengths=None):
    lengths = np.ones(P) if lengths is None else lengths
    return ModelData(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), lengths)


# ---------------------------------------------------------------- gamma


def _gamma_draws(hyper, data, n, seed=0):
    rng = np.random.default_rng(seed)
    state = random_state(rng, data.P, hyper.L, data.N)
    out = np.empty((n, data.P))
    for i in range(n):
        out[i] = update_gamma(state, data, hyper, rng).gamma
    return out


@pytest.mark.parametrize(
    "gamma0,k,n_p,length",
    [(70.0, 0.1, 0, 1.25), (1.0, 0.01, 100, 1000.0)],
)
def test_update_gamma_matches_conjugate_moments(gamma0, k, n_p, length):
    hyper = small_hyper(1, 2, gamma0=gamma0, k=k)
    data = ModelData(np.zeros((n_p, 2)), np.zeros(n_p, dtype=np.int64), [length])
    shape, rate = gamma0 * k + n_p, k + length
    x = _gamma_draws(hyper, data, 100_000)[:, 0]
    mean, var = shape / rate, shape / rate**2
    se_mean = math.sqrt(var / x.size)
    assert abs(x.mean() - mean) < 3 * se_mean
    # variance of the sample variance for a Gamma: (mu4 - var^2)/n with mu4 = 3 var^2 (1 + 2/shape)
    se_var = math.sqrt((3 * var**2 * (1 + 2 / shape) - var**2) / x.size)
    assert abs(x.var() - var) < 3 * se_var


def test_update_gamma_example_means():
    assert 7 / 1.35 == pytest.approx(5.185, abs=1e-3)
    assert 100.01 / 1000.01 == pytest.approx(0.1, abs=1e-4)


# ---------------------------------------------------------------- psi


def _check_psi(data, z, hyper, tol=1e-10):
    stats_ = SufficientStats.compute(data, z, hyper.L)
    for l, (mu_n, eta_n, sigma_n, nu_n) in enumerate(psi_conditionals(stats_, hyper)):
        mu_o, eta_o, sigma_o, nu_o = oracle_psi(data.xy[z == l], hyper.niw)
        np.testing.assert_allclose(mu_n, mu_o, rtol=tol, atol=tol)
        np.testing.assert_allclose(sigma_n, sigma_o, rtol=tol, atol=tol)
        assert eta_n == pytest.approx(eta_o, rel=tol)
        assert nu_n == pytest.approx(nu_o, rel=tol)


def test_psi_two_point_example():
    niw = NIWParams((1.0, 1.0), 0.1, ((1.0, 0.0), (0.0, 1.0)), 3.0)
    hyper = small_hyper(1, 1, niw=niw)
    data = ModelData([[0.0, 0.0], [2.0, 2.0]], [0, 0], [1.0])
    (mu_n, eta_n, sigma_n, nu_n), = psi_conditionals(SufficientStats.compute(data, np.zeros(2, int), 1), hyper)
    np.testing.assert_allclose(mu_n, [1.0, 1.0], atol=1e-14)
    assert eta_n == pytest.approx(2.1)
    assert nu_n == 5.0
    np.testing.assert_allclose(sigma_n, [[3.0, 2.0], [2.0, 3.0]], atol=1e-14)


def test_psi_single_point_at_prior_mean():
    niw = NIWParams((0.3, -1.2), 0.1, ((2.0, 0.5), (0.5, 1.0)), 4.0)
    hyper = small_hyper(1, 1, niw=niw)
    data = ModelData([[0.3, -1.2]], [0], [1.0])
    (mu_n, eta_n, sigma_n, nu_n), = psi_conditionals(SufficientStats.compute(data, np.zeros(1, int), 1), hyper)
    np.testing.assert_allclose(mu_n, niw.mu0, atol=1e-15)
    assert eta_n == pytest.approx(1.1)
    assert nu_n == 5.0
    np.testing.assert_allclose(sigma_n, niw.sigma0, atol=1e-15)


def test_psi_empty_component_returns_prior():
    hyper = small_hyper(1, 3)
    data = ModelData([[0.0, 1.0], [1.0, 2.0]], [0, 0], [1.0])
    post = psi_conditionals(SufficientStats.compute(data, np.array([0, 0]), 3), hyper)
    for mu_n, eta_n, sigma_n, nu_n in post[1:]:
        np.testing.assert_array_equal(mu_n, hyper.niw.mu0)
        np.testing.assert_array_equal(sigma_n, hyper.niw.sigma0)
        assert (eta_n, nu_n) == (hyper.niw.eta, hyper.niw.nu)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 30), L=st.integers(1, 4))
def test_psi_matches_oracle_on_fuzzed_data(seed, n, L):
    rng = np.random.default_rng(seed)
    data = random_data(rng, 1, n)
    _check_psi(data, rng.integers(0, L, n), small_hyper(1, L))


def test_update_psi_sample_mean_matches_posterior():
    # E[mu] = mu_n and E[Sigma] = Sigma_n / (nu_n - 3) under the posterior NIW
    rng = np.random.default_rng(3)
    hyper = small_hyper(1, 1)
    data = random_data(rng, 1, 6)
    z = np.zeros(6, dtype=np.int64)
    st_ = SufficientStats.compute(data, z, 1)
    (mu_n, eta_n, sigma_n, nu_n), = psi_conditionals(st_, hyper)
    state = random_state(rng, 1, 1, 6)
    n = 40_000
    mus = np.empty((n, 2))
    covs = np.empty((n, 2, 2))
    for i in range(n):
        update_psi(state, st_, hyper, rng)
        mus[i], covs[i] = state.mu[0], state.cov[0]
    se = mus.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(mus.mean(axis=0) - mu_n) < 4 * se)
    exp_cov = sigma_n / (nu_n - 3)
    se_c = covs.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(covs.mean(axis=0) - exp_cov) < 4 * se_c)


# ---------------------------------------------------------------- z


def _two_component_state(beta, covs):
    mu = np.zeros((2, 2))
    cov = np.array([c * np.eye(2) for c in covs])
    return LatentState(np.ones(1), np.array([beta], dtype=float), np.ones(1), mu, cov, np.zeros(1, dtype=np.int64))


def test_allocation_probabilities_hand_example():
    # densities 2 and 1 at the common mean: cov = I/(4 pi) and I/(2 pi)
    state = _two_component_state([0.3, 0.7], [1 / (4 * math.pi), 1 / (2 * math.pi)])
    data = ModelData([[0.0, 0.0]], [0], [1.0])
    np.testing.assert_allclose(allocation_probabilities(state, data)[0], [6 / 13, 7 / 13], rtol=1e-12)


def test_allocation_symmetric_and_degenerate():
    data = ModelData([[0.0, 0.0]], [0], [1.0])
    sym = _two_component_state([0.5, 0.5], [1.0, 1.0])
    np.testing.assert_allclose(allocation_probabilities(sym, data)[0], [0.5, 0.5], rtol=1e-14)
    with np.errstate(divide="ignore"):
        deg = _two_component_state([1.0, 0.0], [1.0, 1.0])
        np.testing.assert_array_equal(allocation_probabilities(deg, data)[0], [1.0, 0.0])
        rng = np.random.default_rng(0)
        for _ in range(50):
            update_z(deg, data, rng)
            assert deg.z[0] == 0


def test_update_z_empirical_frequency_and_stats():
    state = _two_component_state([0.3, 0.7], [1 / (4 * math.pi), 1 / (2 * math.pi)])
    data = ModelData(np.zeros((20_000, 2)), np.zeros(20_000, dtype=np.int64), [1.0])
    state.z = np.zeros(data.N, dtype=np.int64)
    st_ = update_z(state, data, np.random.default_rng(1))
    frac = np.mean(state.z == 0)
    assert abs(frac - 6 / 13) < 4 * math.sqrt((6 / 13) * (7 / 13) / data.N)
    assert st_.equals(SufficientStats.compute(data, state.z, 2))


# ---------------------------------------------------------------- beta rows


def test_terminal_beta_dirichlet_moments():
    rng = np.random.default_rng(5)
    data = ModelData(np.zeros((4, 2)), [1, 1, 1, 1], [1.0, 1.0])
    z = np.array([0, 0, 0, 1])
    st_ = SufficientStats.compute(data, z, 2)
    state = random_state(rng, 2, 2, 4)
    state.alpha[1] = 2.0
    state.beta[0] = [0.5, 0.5]
    n = 50_000
    draws = np.array([update_beta_terminal(state, st_, rng).beta[1, 0] for _ in range(n)])
    # Dirichlet(4, 2): mean 2/3, variance 4*2 / (36*7)
    var = 8 / (36 * 7)
    assert abs(draws.mean() - 2 / 3) < 3 * math.sqrt(var / n)


def test_terminal_beta_no_events_is_conditional_prior():
    rng = np.random.default_rng(6)
    data = empty_data(2)
    st_ = SufficientStats.compute(data, np.zeros(0, dtype=np.int64), 3)
    state = random_state(rng, 2, 3, 0)
    state.alpha[1] = 5.0
    state.beta[0] = [0.2, 0.3, 0.5]
    n = 40_000
    draws = np.array([update_beta_terminal(state, st_, rng).beta[1].copy() for _ in range(n)])
    a = 5.0 * np.array([0.2, 0.3, 0.5])
    mean = a / a.sum()
    var = mean * (1 - mean) / (a.sum() + 1)
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 3.5 * np.sqrt(var / n))


def test_terminal_beta_single_component():
    rng = np.random.default_rng(0)
    data = ModelData([[0.0, 0.0]], [0], [1.0])
    state = random_state(rng, 1, 1, 1)
    state.z[:] = 0
    update_beta_terminal(state, SufficientStats.compute(data, state.z, 1), rng)
    np.testing.assert_array_equal(state.beta, [[1.0]])


def test_salt_move_identity():
    x = np.array([0.2, 0.5, 0.3])
    prop, corr = salt_move(x, 1, 0.0)
    np.testing.assert_array_equal(prop, x)
    assert corr == 0.0


def test_salt_move_rejects_boundary():
    with pytest.raises(ValueError):
        salt_move(np.array([0.0, 1.0]), 0, 0.1)


simplex = st.integers(2, 6).flatmap(
    lambda L: st.lists(st.floats(0.01, 10.0), min_size=L, max_size=L).map(lambda v: np.array(v) / np.sum(v))
)


@settings(max_examples=200, deadline=None)
@given(x=simplex, j=st.integers(0, 5), step=st.floats(-8, 8))
def test_salt_move_closure_and_reversibility(x, j, step):
    j = j % x.size
    prop, corr = salt_move(x, j, step)
    assert np.all(prop > 0)
    assert abs(prop.sum() - 1.0) < 1e-12
    back, corr_back = salt_move(prop, j, -step)
    np.testing.assert_allclose(back, x, rtol=1e-9)
    assert corr_back == pytest.approx(-corr, abs=1e-9)


def _numeric_log_jac(x, j):
    """log |det d(logit x_j, rest-ratios)/d(free coords)| by central differences."""
    L = x.size
    free = [i for i in range(L) if i != L - 1] if j != L - 1 else list(range(1, L))
    drop = L - 1 if j != L - 1 else 0

    def F(v):
        full = np.empty(L)
        full[free] = v
        full[drop] = 1 - v.sum()
        others = [i for i in free if i != j]
        return np.concatenate([[math.log(full[j] / (1 - full[j]))], full[others] / (1 - full[j])])

    v0 = x[free]
    h = 1e-6
    J = np.empty((L - 1, L - 1))
    for c in range(L - 1):
        e = np.zeros(L - 1)
        e[c] = h
        J[:, c] = (F(v0 + e) - F(v0 - e)) / (2 * h)
    return math.log(abs(np.linalg.det(J)))


@pytest.mark.parametrize("seed", range(5))
def test_salt_correction_matches_numeric_jacobian(seed):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(2, 6))
    x = rng.dirichlet(np.full(L, 2.0))
    j = int(rng.integers(L))
    prop, corr = salt_move(x, j, rng.normal())
    # the proposal is symmetric in the transformed coordinates, so the correction is
    # the log-Jacobian of the inverse transform at the proposal minus that at the current point
    expected = _numeric_log_jac(x, j) - _numeric_log_jac(prop, j)
    assert corr == pytest.approx(expected, abs=1e-6)


def _tiny_instance(seed=0):
    rng = np.random.default_rng(seed)
    data = ModelData(rng.normal(size=(5, 2)), [0, 0, 0, 1, 1], [1.0, 2.0])
    state = random_state(rng, 2, 2, 5)
    return rng, data, state, SufficientStats.compute(data, state.z, 2)


def test_beta_first_row_acceptance_ratio_oracle():
    rng, data, state, st_ = _tiny_instance()
    cur = state.beta[0].copy()
    prop, corr = salt_move(cur, 0, 0.7)
    got = log_target_beta_row(state, st_.counts, 0, prop) - log_target_beta_row(state, st_.counts, 0, cur) + corr

    def oracle(b1):
        m = st_.counts[0]
        a1 = state.alpha[0]
        own = float(np.sum((m + a1 / 2 - 1) * np.log(b1)))
        down = stats.dirichlet.logpdf(state.beta[1], state.alpha[1] * b1)
        return own + down

    jac = math.log(prop[0] * prop[1]) - math.log(cur[0] * cur[1])
    assert got == pytest.approx(oracle(prop) - oracle(cur) + jac, abs=1e-10)


def test_beta_interior_zero_step_always_accepts():
    rng, data, state, st_ = _tiny_instance(1)
    acc, prop = update_beta_interior(state, st_, 0, rng, "exact-mh", scale=1e-300, n_moves=200)
    assert prop.sum() == 200
    assert acc.sum() == 200


def test_beta_interior_modes_and_errors():
    rng = np.random.default_rng(2)
    data = random_data(rng, 3, 12)
    state = random_state(rng, 3, 3, 12)
    st_ = SufficientStats.compute(data, state.z, 3)
    with pytest.raises(ValueError):
        update_beta_interior(state, st_, 0, rng, mode="bogus")
    with pytest.raises(ValueError):
        update_beta_interior(state, st_, 2, rng)
    # paper-gibbs: row 1 drawn from Dirichlet(m + alpha_1 beta_0), ignoring row 2
    state.alpha[1] = 3.0
    n = 20_000
    draws = np.array([update_beta_interior(state, st_, 1, rng, "paper-gibbs") or state.beta[1].copy() for _ in range(n)])
    a = st_.counts[1] + 3.0 * state.beta[0]
    mean = a / a.sum()
    var = mean * (1 - mean) / (a.sum() + 1)
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * np.sqrt(var / n))
    # row 0 is always Metropolis, even in paper-gibbs mode
    assert update_beta_interior(state, st_, 0, rng, "paper-gibbs") is not None


# ---------------------------------------------------------------- alpha


def test_dirichlet_move_leaves_middle_row_conditional_invariant():
    # P=3, L=2: the exact conditional of beta[1] is one-dimensional; integrate it directly
    rng = np.random.default_rng(4)
    data = ModelData(rng.normal(size=(6, 2)), [0, 1, 1, 1, 2, 2], [1.0, 1.0, 1.0])
    state = random_state(rng, 3, 2, 6)
    state.z = np.array([1, 0, 0, 1, 0, 1])
    state.alpha = np.array([2.0, 1.5, 3.0])
    state.beta[0], state.beta[2] = np.array([0.3, 0.7]), np.array([0.2, 0.8])
    st_ = SufficientStats.compute(data, state.z, 2)
    own = st_.counts[1] + 1.5 * state.beta[0]

    def density(b):
        return math.exp(stats.dirichlet.logpdf([b, 1 - b], own) + stats.dirichlet.logpdf(state.beta[2], 3.0 * np.array([b, 1 - b])))

    norm = integrate.quad(density, 0, 1)[0]
    m1 = integrate.quad(lambda b: b * density(b), 0, 1)[0] / norm
    m2 = integrate.quad(lambda b: b * b * density(b), 0, 1)[0] / norm

    n = 40_000
    trace = np.empty(n)
    for i in range(n):
        dirichlet_independence_move(state, st_, 1, rng)
        trace[i] = state.beta[1, 0]
    x = np.column_stack([trace, trace**2])
    z = (x.mean(axis=0) - [m1, m2]) / batch_means_se(x)
    assert np.all(np.abs(z) < 4), z
    with pytest.raises(ValueError):
        dirichlet_independence_move(state, st_, 2, rng)


def test_alpha_target_oracle():
    rng, data, state, st_ = _tiny_instance(3)
    a0 = 2.5
    L = state.L

    def oracle_first(a):
        return (
            stats.gamma.logpdf(a, a0)
            + stats.gamma.logpdf(state.alpha[1], a)
            + stats.dirichlet.logpdf(state.beta[0], np.full(L, a / L))
            + stats.dirichlet.logpdf(state.beta[1], state.alpha[1] * state.beta[0])
            + math.log(a)
        )

    def oracle_last(a):
        return (
            stats.gamma.logpdf(a, state.alpha[0])
            + stats.dirichlet.logpdf(state.beta[1], a * state.beta[0])
            + math.log(a)
        )

    for p, oracle in ((0, oracle_first), (1, oracle_last)):
        x, y = 0.7, 3.4
        got = log_target_alpha(state, a0, p, x) - log_target_alpha(state, a0, p, y)
        assert got == pytest.approx(oracle(x) - oracle(y), abs=1e-10)
    assert log_target_alpha(state, a0, 0, 0.0) == -math.inf


def test_alpha_zero_step_always_accepts():
    rng, data, state, st_ = _tiny_instance(4)
    hyper = small_hyper(2, 2)
    before = state.alpha.copy()
    for _ in range(20):
        acc = update_alpha(state, hyper, rng, np.full(2, math.log(1e-300)))
        assert np.all(acc == 1.0)
    np.testing.assert_array_equal(state.alpha, before)


# ---------------------------------------------------------------- sweeps and chains


def test_sweep_deterministic_given_seed():
    rng = np.random.default_rng(9)
    hyper = small_hyper(3, 3)
    data = random_data(rng, 3, 15)
    state = draw_prior_state(hyper, data, rng)
    cfg = SamplerConfig(sweeps=10, burn_in=5, thin=1)
    a, b = state.copy(), state.copy()
    ra, rb = np.random.default_rng(42), np.random.default_rng(42)
    for _ in range(2):
        sweep(a, data, hyper, cfg, ra)
        sweep(b, data, hyper, cfg, rb)
    assert a == b


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), P=st.integers(1, 3), L=st.integers(1, 4), N=st.integers(0, 15),
       mode=st.sampled_from(["exact-mh", "paper-gibbs"]))
def test_sweep_preserves_invariants(seed, P, L, N, mode):
    rng = np.random.default_rng(seed)
    hyper = small_hyper(P, L)
    data = random_data(rng, P, N, lengths=rng.uniform(0.5, 3, P))
    state = random_state(rng, P, L, N)
    cfg = SamplerConfig(sweeps=2, burn_in=1, interior_beta=mode)
    tuning = Tuning.initial(P, L, cfg)
    for _ in range(3):
        sweep(state, data, hyper, cfg, rng, tuning)
        state.check()
        assert np.all(state.beta > 0)


def test_draw_count_and_config_validation():
    rng = np.random.default_rng(0)
    hyper = small_hyper(2, 2)
    data = random_data(rng, 2, 8)
    cfg = SamplerConfig(sweeps=100, burn_in=50, thin=5, progress_every=0)
    draws = run_chain_data(data, hyper, cfg)
    assert len(draws) == cfg.n_draws == 10
    assert draws.sweep_index == list(range(54, 100, 5))
    for d in draws.draws:
        d.check()
    for bad in (dict(burn_in=100), dict(thin=0), dict(alpha_step=0.0), dict(beta_step=-1.0), dict(interior_beta="x"),
                dict(sweeps=0), dict(target_accept=1.0)):
        with pytest.raises(ConfigError):
            SamplerConfig(**{**dict(sweeps=100, burn_in=10), **bad})


def test_identical_seeds_identical_chains():
    rng = np.random.default_rng(1)
    hyper = small_hyper(2, 3)
    data = random_data(rng, 2, 10)
    cfg = SamplerConfig(sweeps=60, burn_in=20, thin=4, seed=11, progress_every=0)
    a, b = run_chain_data(data, hyper, cfg), run_chain_data(data, hyper, cfg)
    assert all(x == y for x, y in zip(a.draws, b.draws))
    assert a.log_post == b.log_post


def _chain_setup():
    rng = np.random.default_rng(2)
    hyper = small_hyper(2, 3)
    data = random_data(rng, 2, 12)
    cfg = SamplerConfig(sweeps=80, burn_in=30, thin=3, seed=5, progress_every=0)
    return hyper, data, cfg


def test_checkpoint_resume_is_bit_identical(tmp_path):
    hyper, data, cfg = _chain_setup()
    full = run_chain_data(data, hyper, cfg)
    ck = tmp_path / "ck.json"
    run_chain_data(data, hyper, cfg, checkpoint_path=ck, stop_after=47)
    resumed = run_chain_data(data, hyper, cfg, resume=Checkpoint.load(ck))
    assert len(resumed) == len(full)
    assert all(x == y for x, y in zip(full.draws, resumed.draws))
    assert resumed.log_post == full.log_post
    assert resumed.acceptance == full.acceptance


def test_interrupted_chain_checkpoint_resumes_exactly(tmp_path, monkeypatch):
    hyper, data, cfg = _chain_setup()
    full = run_chain_data(data, hyper, cfg)
    calls = {"n": 0}
    real = sampler.update_gamma

    def flaky(*args):
        calls["n"] += 1
        if calls["n"] == 41:
            raise KeyboardInterrupt
        return real(*args)

    monkeypatch.setattr(sampler, "update_gamma", flaky)
    ck = tmp_path / "ck.json"
    with pytest.raises(KeyboardInterrupt):
        run_chain_data(data, hyper, cfg, checkpoint_path=ck)
    monkeypatch.setattr(sampler, "update_gamma", real)
    saved = Checkpoint.load(ck)
    assert saved.next_sweep == 40
    resumed = run_chain_data(data, hyper, cfg, resume=saved)
    assert all(x == y for x, y in zip(full.draws, resumed.draws))


def test_resume_rejects_other_hyperparameters(tmp_path):
    hyper, data, cfg = _chain_setup()
    ck = tmp_path / "ck.json"
    run_chain_data(data, hyper, cfg, checkpoint_path=ck, stop_after=10)
    with pytest.raises(ConfigError):
        run_chain_data(data, small_hyper(2, 3, alpha0=9.0), cfg, resume=Checkpoint.load(ck))


def _prior_moments(hyper, n, seed):
    rng = np.random.default_rng(seed)
    data = empty_data(hyper.P)
    out = []
    for _ in range(n):
        s = draw_prior_state(hyper, data, rng)
        out.append(np.concatenate([s.alpha, s.beta[:, 0]]))
    return np.array(out)


@pytest.mark.parametrize("L", [1, 3])
def test_no_data_chain_recovers_prior(L):
    hyper = Hyperparams(NIWParams((0.0, 0.0), 1.0, ((1.0, 0.0), (0.0, 1.0)), 5.0), 4.0, 2.0, 1.0, L, 2)
    data = empty_data(2)
    cfg = SamplerConfig(sweeps=30_000, burn_in=2_000, thin=1, seed=3, alpha_step=0.8, progress_every=0)
    chain = run_chain_data(data, hyper, cfg)
    x = np.array([np.concatenate([d.alpha, d.beta[:, 0]]) for d in chain.draws])
    ref = _prior_moments(hyper, 20_000, 4)
    cols = [0, 1] if L == 1 else [0, 1, 2, 3]
    for f in (lambda v: v, lambda v: v**2):
        a, b = f(x[:, cols]), f(ref[:, cols])
        z = (a.mean(axis=0) - b.mean(axis=0)) / np.sqrt(batch_means_se(a) ** 2 + b.var(axis=0) / b.shape[0])
        assert np.all(np.abs(z) < 4), z
