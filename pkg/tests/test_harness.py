" 内置模块 "
import json
import queue
import threading

" 第三方模块 "
import numpy as np
import pandas as pd
import pytest

" 自定义模块 "
from cell_manager_thread import cell_manager_thread
from errors import NumericalError
from harness import (REPORT_COLUMNS, EquivalenceContext, grid_points, json_default, oscillation_lower_ratio,
                     run_cells, run_equivalence, run_lemma_suite, weight_integral_ratio)
from parameter import ExperimentConfig, apply_overrides
from quadrature import make_rule
from symbols import parse_symbol
import global_vars

# 常数符号的四元组写法
CONSTANT = '0,0,1,0'


@pytest.fixture
def tiny_config(tmp_path):
    return apply_overrides(ExperimentConfig(), {
        'weights': ['standard:eta=0'],
        'symbols': ['zbar', CONSTANT],
        'p': [1, 2],
        'eta': [1.0],
        'r': [0.5],
        'N': 32,
        'lattice.r': 1.0,
        'lattice.R_max': 0.9,
        'quadrature.disc': [32, 64],
        'quadrature.local': [8, 16],
        'quadrature.invariant': [8, 16],
        'trend.integral_radii': [0.9, 0.95],
        'trend.lattice_radii': [0.9, 0.95],
        'lemmas.grid_radii': [0.0, 0.5],
        'lemmas.grid_angles': 4,
        'lemmas.kernel_norm_r': [1.0],
        'lemmas.synthesis_r': [1.0],
        'lemmas.synthesis_R_max': 0.6,
        'lemmas.pairs': 4,
        'classify_points': 128,
        'output': str(tmp_path / 'out'),
        'workers': 2,
    })


def test_grid_points():
    pts = grid_points([0.0, 0.5], 4)
    assert pts.size == 5
    np.testing.assert_allclose(np.abs(pts[1:]), 0.5)


def test_run_cells_keeps_going_after_a_failure():
    def compute(cell):
        if cell == 'bad':
            raise NumericalError('节点取值不是有限数')
        return {'value': cell}

    results = run_cells(['a', 'bad', 'c'], compute, 2)
    assert results[0]['value'] == 'a' and results[2]['value'] == 'c'
    assert results[1]['error']['kind'] == 'NumericalError'
    assert all('runtime' in res for res in results.values())


def test_cell_thread_stops_on_finished_event():
    task_queue = queue.Queue()
    task_queue.put((0, 'cell'))
    results = {}
    global_vars.s_finished_event.set()
    cell_manager_thread(task_queue, results, threading.Lock(), lambda cell: {})
    assert results == {}
    assert task_queue.qsize() == 1


def test_context_rows(tiny_config):
    context = EquivalenceContext(tiny_config)
    assert context.cells() == [('standard:eta=0', 'zbar', 1.0, 0.5), ('standard:eta=0', CONSTANT, 1.0, 0.5)]

    rows = context.compute(context.cells()[0])['rows']
    assert rows[1.0]['schatten_flag'] == 'divergent'
    assert rows[2.0]['schatten_flag'] == 'convergent'
    assert rows[1.0]['ratio_gs'] is None
    assert rows[2.0]['mo_local_sums'][0] < rows[2.0]['mo_local_sums'][1]

    rows = context.compute(context.cells()[1])['rows']
    for row in rows.values():
        assert row['schatten_sum'] == pytest.approx(0, abs=1e-10)
        assert row['mo_global'] == 0 and row['mo_local_sum'] == 0
        assert row['agree']
        assert row['ratio_gl'] is None


def test_run_equivalence_writes_reports(tiny_config):
    report = run_equivalence(tiny_config)
    assert report['failures'] == 0
    assert len(report['rows']) == 4
    assert report['lattice']['points'] > 0
    assert report['environment']['peak_rss_mb'] > 0

    df = pd.read_csv(f"{tiny_config.output}/report.csv")
    assert list(df.columns) == REPORT_COLUMNS
    assert len(df) == 4
    assert set(df['symbol']) == {'zbar', CONSTANT}

    with open(f"{tiny_config.output}/report.json", encoding='utf-8') as fp:
        saved = json.load(fp)
    assert saved['config']['N'] == 32
    assert saved['failures'] == 0


def test_json_default():
    assert json.loads(json.dumps({'z': 1 + 2j, 'x': np.float64(0.5), 'a': np.arange(2)}, default=json_default)) == {
        'z': {'re': 1.0, 'im': 2.0}, 'x': 0.5, 'a': [0, 1]}
    with pytest.raises(TypeError):
        json.dumps({'s': {1, 2}}, default=json_default)


def test_weight_integral_ratio_is_bounded(std1):
    res = weight_integral_ratio(std1, 4, 0.0, [0.0, 0.5, 0.9, 0.99], make_rule(64, 128))
    assert 0 < res['min'] <= res['max'] < 100


def test_oscillation_lower_ratio(std0):
    rule = make_rule(12, 24)
    ratio = oscillation_lower_ratio(parse_symbol('zbar'), std0, 0.5, 0.3, rule)
    assert ratio is not None and 0 < ratio < 100
    assert oscillation_lower_ratio(parse_symbol(CONSTANT), std0, 0.5, 0.3, rule) is None


def test_run_lemma_suite(tiny_config):
    report = run_lemma_suite(tiny_config)
    assert report['failures'] == 0
    assert report['lattice']['covering'] and report['lattice']['separated']
    entry = report['weights']['standard:eta=0']
    assert entry['classify']['regular']['holds']
    case = entry['cases'][0]
    bound = case['symbols']['zbar']['hankel_bound']
    assert bound['violations'] == 0
    assert bound['origin_tight']
    assert case['synthesis'][0]['operator_norm'] >= 1 - 1e-6
    assert [a['p'] for a in case['symbols']['zbar']['atomic']] == [1.0, 2.0]
    with open(f"{tiny_config.output}/lemmas.json", encoding='utf-8') as fp:
        assert json.load(fp)['failures'] == 0


# 内置符号族在默认参数（N=128、格点 r=0.5、趋势半径 0.98/0.995）下的完整网格
FAMILY = ['zbar', 'zbar2', 'absz2', 'rez', 'zbar_zbar2']


@pytest.fixture(scope='module')
def family_report(tmp_path_factory):
    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(global_vars, 'cache_dir', None)
        global_vars.s_finished_event.clear()
        config = apply_overrides(ExperimentConfig(), {
            'symbols': FAMILY,
            'output': str(tmp_path_factory.mktemp('family')),
        })
        assert config.trend.integral_radii == [0.98, 0.995]
        assert config.trend.lattice_radii == [0.98, 0.995]
        return run_equivalence(config)


def test_family_grid_verdicts_agree(family_report):
    rows = family_report['rows']
    assert family_report['failures'] == 0
    assert len(rows) == 3 * len(FAMILY) * 3
    for row in rows:
        flags = (row['schatten_flag'], row['mo_global_flag'], row['mo_local_flag'])
        assert row['agree'], (row['weight'], row['symbol'], row['p'], flags)
    assert family_report['all_agree']


def test_family_grid_p1_is_divergent(family_report):
    for row in family_report['rows']:
        if row['p'] == 1.0:
            assert row['schatten_flag'] == row['mo_global_flag'] == row['mo_local_flag'] == 'divergent'


def test_family_grid_ratio_bracket(family_report):
    for row in family_report['rows']:
        if row['p'] == 1.0:
            continue
        for key in ('ratio_gl', 'ratio_gs', 'ratio_ls'):
            assert row[key] is not None, (row['weight'], row['symbol'], row['p'], key)
            assert 1e-2 <= row[key] <= 1e2, (row['weight'], row['symbol'], row['p'], key, row[key])
    low, high = family_report['ratio_bracket']
    assert 1e-2 <= low <= high <= 1e2


def test_family_grid_schatten_over_local_integral(family_report):
    row = next(r for r in family_report['rows']
               if r['weight'] == 'standard:eta=0' and r['symbol'] == 'zbar' and r['p'] == 2.0)
    assert 3 <= row['ratio_li'] <= 12
