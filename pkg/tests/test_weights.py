" 内置模块 "
import math
import threading

" 第三方模块 "
import numpy as np
import pandas as pd
import pytest

" 自定义模块 "
from errors import ConfigError, DomainError
from quadrature import integrate_disc
from weights import (classify, default_grid, disc_mass_profile, format_weight, load_weight_table, log_power,
                     moment, moments, omega_hat, parse_weight, standard, tabulated, weight_disc_mass, weight_eval,
                     weight_rule)
import global_vars


def test_weight_eval_examples(std0, std1):
    assert weight_eval(std0, 0.3) == 1.0
    assert weight_eval(std1, 0.5) == pytest.approx(1.5)
    assert weight_eval(log_power(0, 1, normalization=3.0), 0.0) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        weight_eval(std0, 1.0)
    with pytest.raises(DomainError):
        weight_eval(std0, -0.1)


def test_eval_gap_matches_direct_evaluation(std1, logpow):
    r = np.linspace(0, 0.99, 30)
    for w in (std1, logpow, log_power(-0.5, 1.5)):
        np.testing.assert_allclose(w.eval_gap(1 - r * r), w(r), rtol=1e-12)


def test_omega_hat_examples(std0, std1):
    assert omega_hat(std0, 0.3) == pytest.approx(0.7, rel=1e-12)
    for r in (0.0, 0.4, 0.9, 0.999):
        assert omega_hat(std1, r) == pytest.approx(2 / 3 * (1 - r) ** 2 * (r + 2), rel=1e-10)
    assert omega_hat(std1, 0.0) == pytest.approx(4 / 3)


@pytest.mark.parametrize('w', [standard(0.5), log_power(-0.5, 0), log_power(-0.5, 1.5), log_power(1, -2)])
def test_omega_hat_additivity_and_decay(w):
    from scipy import integrate
    r = np.array([0.1, 0.5, 0.9, 0.99, 0.9999])
    hat = omega_hat(w, r)
    assert np.all(np.diff(hat) < 0)
    assert np.all(hat > 0)
    head = integrate.quad(lambda s: float(w(s)), 0, 0.5, epsrel=1e-12)[0]
    assert omega_hat(w, 0.0) - head == pytest.approx(omega_hat(w, 0.5), rel=1e-9)


def test_moment_examples(std0, std1):
    for n in range(6):
        assert moment(std0, 2 * n + 1) == pytest.approx(1 / (2 * n + 2), rel=1e-12)
        assert moment(std1, 2 * n + 1) == pytest.approx(1 / ((n + 1) * (n + 2)), rel=1e-12)
    assert moment(std1, 3) == pytest.approx(1 / 6)
    with pytest.raises(DomainError):
        moment(std0, -1)


@pytest.mark.parametrize('w', [log_power(-0.5, 0), log_power(-0.5, 1.5), log_power(0.5, -1)])
def test_moments_are_positive_and_decreasing(w):
    xs = np.array([0, 0.5, 1, 3, 11, 51, 401])
    mu = moments(w, xs)
    assert np.all(mu > 0)
    assert np.all(np.diff(mu) < 0)


def test_logpow_moments_match_quadrature():
    from scipy import integrate
    w = log_power(-0.5, 1.5)
    for x in (1, 7):
        direct = integrate.quad(lambda s: s ** x * float(w(s)), 0, 1, limit=200)[0]
        assert moment(w, x) == pytest.approx(direct, rel=1e-6)


def test_moment_table_is_shared_between_threads(logpow):
    xs = np.arange(1, 200, 2, dtype=float)
    results = []

    def work():
        results.append(logpow.moments.get_many(xs))

    threads = [threading.Thread(target=work) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for res in results[1:]:
        np.testing.assert_array_equal(res, results[0])


def test_moment_cache_round_trip(tmp_path, monkeypatch):
    monkeypatch.setattr(global_vars, 'cache_dir', str(tmp_path))
    w = log_power(-0.5, 1.0)
    value = moment(w, 5)
    w.moments.save()
    files = list(tmp_path.glob('moments_*.csv'))
    assert len(files) == 1
    again = log_power(-0.5, 1.0)
    assert again.moments.cache[float(5).hex()] == value


def test_disc_mass_examples(std0, disc_rule):
    t = math.atanh(0.5)
    assert weight_disc_mass(std0, 0, t, disc_rule) == pytest.approx(0.25, rel=1e-10)
    assert weight_disc_mass(std0, 0.5, t, disc_rule) == pytest.approx(0.16, rel=1e-10)


def test_classify_standard_weights():
    report = classify(standard(0))
    assert report['dhat']['witness_C'] == pytest.approx(2.0, rel=1e-9)
    assert report['regular']['ratio_min'] == pytest.approx(1.0, rel=1e-9)
    assert report['regular']['ratio_max'] == pytest.approx(1.0, rel=1e-9)
    assert report['d_class']

    report = classify(standard(1))
    assert report['regular']['holds']
    assert report['regular']['ratio_min'] >= 0.5 - 1e-9
    assert report['regular']['ratio_max'] <= 2 / 3 + 1e-9

    for eta in (0.5, 2):
        assert classify(standard(eta))['regular']['holds']


def test_classify_logpow_and_smoothness(logpow):
    report = classify(logpow)
    assert report['regular']['holds']
    assert report['dhat']['holds']
    for value in report['smoothness'].values():
        assert value < 100


def test_classify_rejects_coarse_grid(std0):
    with pytest.raises(ConfigError):
        classify(std0, np.linspace(0, 0.9, 8))
    with pytest.raises(ConfigError):
        classify(std0, default_grid(20)[::-1])


def test_disc_mass_profile_is_bounded(std1, disc_rule):
    profile = disc_mass_profile(std1, [0, 0.5, 0.9, 0.99], math.atanh(0.5), disc_rule)
    low, high = profile['hat_ratio']
    assert 0 < low <= high < 10


def test_tabulated_weight(tmp_path):
    r = np.linspace(0, 0.9995, 400)
    w = tabulated(r, np.ones_like(r))
    assert weight_eval(w, 0.3) == pytest.approx(1.0)
    assert omega_hat(w, 0.25) == pytest.approx(0.75, rel=1e-9)
    assert moment(w, 1) == pytest.approx(0.5, rel=1e-8)

    path = tmp_path / 'w.csv'
    pd.DataFrame({'r': r, 'omega': 2 * (1 - r * r)}).to_csv(path, index=False)
    w = load_weight_table(str(path))
    assert weight_eval(w, 0.5) == pytest.approx(1.5, rel=1e-4)
    with pytest.raises(ConfigError):
        tabulated(np.linspace(0, 0.9, 50), np.ones(50))


def test_weight_grammar():
    w = parse_weight('logpow:alpha=-0.5,beta=0')
    assert w.kind == 'logpow' and w.params == {'alpha': -0.5, 'beta': 0.0}
    assert format_weight(parse_weight('standard:eta=1,norm=2')) == 'standard:eta=1,norm=2'
    assert parse_weight('standard:eta=1,norm=2').normalization == 2.0
    for bad in ('gauss:s=1', 'standard:eta=x', 'standard:alpha=1', 'standard:eta=-2', 'table:'):
        with pytest.raises(ConfigError):
            parse_weight(bad)


def test_disc_mass_with_default_rule(std0, logpow):
    t = math.atanh(0.5)
    assert weight_disc_mass(std0, 0, t) == pytest.approx(0.25, rel=1e-10)
    assert weight_disc_mass(logpow, 0.3j, t) > 0


def test_weight_rule_handles_endpoint_singularity(logpow):
    assert logpow.endpoint_exponent == -0.5
    assert standard(2).endpoint_exponent == 0
    assert standard(0.5).endpoint_exponent == 0.5
    for w in (logpow, standard(0.5)):
        # ∫_𝔻 ω dA = 2 μ_1
        value = integrate_disc(lambda z: w(np.abs(z)), weight_rule(w, 32, 4))
        assert value.real == pytest.approx(2 * moment(w, 1), rel=1e-10)
