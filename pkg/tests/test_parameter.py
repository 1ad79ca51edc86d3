" 内置模块 "
import json
import os

" 第三方模块 "
import pytest

" 自定义模块 "
from errors import ConfigError
from parameter import ExperimentConfig, apply_overrides, load_parameter, save_parameter

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def write(tmp_path, data) -> str:
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


def test_shipped_parameter_file_matches_defaults():
    shipped = load_parameter(os.path.join(ROOT, 'parameter.json')).to_dict()
    defaults = load_parameter().to_dict()
    assert shipped.pop('r') == pytest.approx(defaults.pop('r'))
    assert shipped == defaults


def test_partial_file_keeps_defaults(tmp_path):
    config = load_parameter(write(tmp_path, {'N': 64, 'lattice': {'R_max': 0.9}}))
    assert config.N == 64
    assert config.lattice.R_max == 0.9
    assert config.lattice.r == 0.5
    assert config.p == [1.0, 2.0, 4.0]


@pytest.mark.parametrize('data, field', [
    ({'colour': 1}, 'colour'),
    ({'lattice': {'spacing': 1}}, 'lattice.spacing'),
    ({'lattice': {'R_max': 1.0}}, 'lattice.R_max'),
    ({'lattice': {'r': 3}}, 'lattice.r'),
    ({'N': 513}, 'N'),
    ({'N': 1.5}, 'N'),
    ({'p': [1, -2]}, 'p'),
    ({'p': []}, 'p'),
    ({'eta': [-1]}, 'eta'),
    ({'weights': ['gauss:s=1']}, 'weights[0]'),
    ({'symbols': ['zbar', 'w']}, 'symbols[1]'),
    ({'quadrature': {'local': [24]}}, 'quadrature.local'),
    ({'trend': {'integral_radii': [0.99, 0.98]}}, 'trend.integral_radii'),
    ({'lemmas': {'synthesis_R_max': 0}}, 'lemmas.synthesis_R_max'),
    ({'workers': 0}, 'workers'),
    ({'seed': True}, 'seed'),
])
def test_invalid_fields_are_named(tmp_path, data, field):
    with pytest.raises(ConfigError) as info:
        load_parameter(write(tmp_path, data))
    assert info.value.field == field


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError, match='不存在'):
        load_parameter(str(tmp_path / 'missing.json'))
    bad = tmp_path / 'bad.json'
    bad.write_text('{"N": ', encoding='utf-8')
    with pytest.raises(ConfigError):
        load_parameter(str(bad))
    with pytest.raises(ConfigError):
        load_parameter(write(tmp_path, [1, 2]))


def test_overrides():
    config = apply_overrides(load_parameter(), {'N': 32, 'lattice.R_max': 0.9, 'eta': None, 'p': [2]})
    assert config.N == 32
    assert config.lattice.R_max == 0.9
    assert config.eta == [4.0]
    assert config.p == [2.0]
    with pytest.raises(ConfigError) as info:
        apply_overrides(config, {'lattice.r': 0})
    assert info.value.field == 'lattice.r'


def test_save_round_trip(tmp_path):
    config = apply_overrides(ExperimentConfig(), {'weights': ['standard:eta=2'], 'seed': 7})
    path = str(tmp_path / 'saved.json')
    save_parameter(config, path)
    with open(path, encoding='utf-8') as fp:
        assert json.load(fp)['seed'] == 7
    assert load_parameter(path).to_dict() == config.to_dict()
