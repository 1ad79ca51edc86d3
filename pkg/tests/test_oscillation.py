" 内置模块 "
import json
import math

" 第三方模块 "
import numpy as np
import pandas as pd
import pytest

" 自定义模块 "
from errors import ConfigError
from geometry import disc_params, lattice_generate
from oscillation import (MOProfile, Variant, averaging_ratio, avg, berezin, berezin_series, extrapolate_tail,
                         global_variant, local_variant, mo_global, mo_global_many, mo_local, mo_local_many,
                         mo_lp_integral, mo_lp_lattice, mo_profile)
from symbols import BUILTIN_FAMILY, as_symbol, monomial, parse_symbol

ZBAR = parse_symbol('zbar')
Z = parse_symbol('z')


def zbar_mo_sq(z) -> float:
    """
    A² 上 z̄ 的整体平均振荡平方：(1−x)²(−log(1−x)−x)/x²，x=|z|²。
    """
    x = abs(z) ** 2
    if x == 0:
        return 0.5
    return (1 - x) ** 2 * (-math.log1p(-x) - x) / x ** 2


def local_mo_of_z(z, r) -> float:
    # ω=1 时 D(z,r) 上 ζ 的方差就是欧氏圆盘半径平方的一半
    return disc_params(z, r).euclid_radius / math.sqrt(2)


def test_variant_validation():
    assert global_variant(4).label == 'global(eta=4)'
    assert local_variant(0.5).label == 'local(r=0.5)'
    with pytest.raises(ConfigError):
        Variant('other', 1.0)
    with pytest.raises(ConfigError):
        local_variant(0)


def test_berezin_reproduces_analytic_symbols(std0):
    for z in (0, 0.4 - 0.3j, 0.9j):
        assert berezin_series(monomial(3, 0), std0, 0, z) == pytest.approx(z ** 3, abs=1e-12)
        assert berezin_series(ZBAR, std0, 0, z) == pytest.approx(np.conj(z), abs=1e-12)


@pytest.mark.parametrize('f', BUILTIN_FAMILY)
def test_berezin_series_matches_quadrature(f, std1):
    for z in (0.1, 0.3 + 0.2j, -0.5j):
        series = berezin(f, std1, 2, z, method='series')
        quad = berezin(f, std1, 2, z, method='quadrature')
        assert series == pytest.approx(quad, rel=1e-8, abs=1e-12)
    with pytest.raises(ConfigError):
        berezin(f, std1, 2, 0, method='exact')


def test_mo_global_closed_form(std0):
    zs = np.array([0, 0.2, 0.5j, -0.6 + 0.3j, 0.95])
    expected = np.sqrt([zbar_mo_sq(z) for z in zs])
    np.testing.assert_allclose(mo_global_many(ZBAR, std0, 0, zs), expected, rtol=1e-10)
    np.testing.assert_allclose(mo_global_many(Z, std0, 0, zs), expected, rtol=1e-10)
    assert mo_global(ZBAR, std0, 0, 0) == pytest.approx(math.sqrt(0.5))


def test_mo_global_of_constant_is_zero(logpow):
    np.testing.assert_array_equal(mo_global_many(as_symbol(2 + 1j), logpow, 4, [0, 0.5, 0.99]), 0)


def random_points(seed: int, count: int, radius: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return radius * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count))


@pytest.mark.parametrize('f', BUILTIN_FAMILY)
def test_mo_global_forms_agree(f, std1):
    for z in random_points(11, 20, 0.7):
        exact = mo_global(f, std1, 2, z)
        assert mo_global(f, std1, 2, z, method='e1') == pytest.approx(exact, rel=1e-6, abs=1e-10)
        assert mo_global(f, std1, 2, z, method='e2', double_rule=(32, 64)) == pytest.approx(exact, rel=1e-6,
                                                                                            abs=1e-10)
    with pytest.raises(ConfigError):
        mo_global(f, std1, 2, 0, method='e3')


def test_avg_of_z_is_euclidean_centre(std0):
    for z in (0, 0.5, 0.3 + 0.6j):
        d = disc_params(z, 0.5)
        assert avg(Z, std0, 0.5, z) == pytest.approx(d.euclid_center, abs=1e-10)


def test_mo_local_closed_form(std0):
    zs = np.array([0, 0.5, 0.3 + 0.6j, 0.9])
    expected = [local_mo_of_z(z, 0.5) for z in zs]
    np.testing.assert_allclose(mo_local_many(Z, std0, 0.5, zs), expected, rtol=1e-8)
    np.testing.assert_allclose(mo_local_many(ZBAR, std0, 0.5, zs), expected, rtol=1e-8)
    assert mo_local(Z, std0, 0.5, 0) == pytest.approx(math.tanh(0.5) / math.sqrt(2), rel=1e-10)
    for z in zs[:3]:
        assert mo_local(Z, std0, 0.5, z, method='e3') == pytest.approx(local_mo_of_z(z, 0.5), rel=1e-6)
    with pytest.raises(ConfigError):
        mo_local(Z, std0, 0.5, 0, method='e1')


@pytest.mark.parametrize('f', BUILTIN_FAMILY)
def test_mo_local_forms_agree(f, logpow):
    for z in random_points(12, 20, 0.9):
        average = mo_local(f, logpow, 0.7, z)
        assert mo_local(f, logpow, 0.7, z, method='e3', double_rule=(24, 48)) == pytest.approx(average, rel=1e-6)
        # 默认的二重求积规模更小
        assert mo_local(f, logpow, 0.7, z, method='e3') == pytest.approx(average, rel=1e-4)


def test_lattice_sum(std0):
    lattice = lattice_generate(1.0, 0.9)
    res = mo_lp_lattice(Z, std0, local_variant(0.5), 2, lattice, R_max=0.6)
    inside = lattice.points[np.abs(lattice.points) <= 0.6]
    expected = sum(local_mo_of_z(a, 0.5) ** 2 for a in inside)
    assert res.points == inside.size
    assert res.sum == pytest.approx(expected, rel=1e-8)
    assert res.value == pytest.approx(math.sqrt(expected), rel=1e-8)
    assert mo_lp_lattice(as_symbol(1), std0, global_variant(0), 2, lattice).value == 0


def test_integral_closed_form(std0):
    r = math.atanh(0.5)
    R = 0.995
    res = mo_lp_integral(Z, std0, local_variant(r), 2, R)
    expected = 0.125 * R * R / (1 - 0.25 * R * R)
    assert res.value == pytest.approx(expected, rel=1e-6)
    assert res.norm == pytest.approx(math.sqrt(expected), rel=1e-6)
    assert not res.divergent


def test_extrapolate_tail():
    radii = np.array([0.9, 0.95, 0.99])
    assert extrapolate_tail(3 - 2 * (1 - radii), radii) == pytest.approx(3)
    with pytest.raises(ConfigError):
        extrapolate_tail([1.0], [0.9])


def test_averaging_ratio_is_finite(std1):
    res = averaging_ratio(Z, std1, 0.3, 12, np.random.default_rng(0))
    assert res['pairs'] == 12
    assert 0 < res['difference_ratio_max'] < 50
    assert 0 < res['square_ratio_max'] < 50


def test_profile_to_csv(tmp_path, std0):
    lattice = lattice_generate(1.0, 0.6)
    profile = mo_profile(Z, std0, local_variant(0.5), lattice, [2], 0.99, rule=(12, 24))
    assert isinstance(profile, MOProfile)
    path = str(tmp_path / 'mo.csv')
    profile.to_csv(path)
    df = pd.read_csv(path)
    assert list(df.columns) == ['re', 'im', 'value']
    assert len(df) == len(lattice)
    with open(tmp_path / 'mo.json', encoding='utf-8') as fp:
        summary = json.load(fp)
    assert summary['variant'] == 'local(r=0.5)'
    assert summary['p_norms']['2']['tail_flag'] == 'convergent'


def test_local_mo_at_origin_for_several_radii(std0):
    for t in (0.25, 0.5, 0.75):
        assert mo_local(ZBAR, std0, math.atanh(t), 0) == pytest.approx(t / math.sqrt(2), abs=1e-8)


def test_extrapolated_integral_of_local_mo(std0):
    radii = [0.98, 0.995]
    variant = local_variant(math.atanh(0.5))
    values = [mo_lp_integral(ZBAR, std0, variant, 2, R).value for R in radii]
    assert extrapolate_tail(values, radii) == pytest.approx(1 / 6, rel=0.02)
