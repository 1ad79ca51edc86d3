"""
该模块是实验运行器：

- run_equivalence：对每个 (权函数, 符号, η, r) 单元计算三个量（Hankel 算子的 Schatten 和、整体平均振荡的
  dλ 积分、局部平均振荡的格点和），给出发散判定和两两比值，写出 report.csv 与 report.json。
- run_lemma_suite：逐条检验辅助不等式的比值剖面（核积分估计、Hankel 核范数与整体平均振荡的精确一侧不等式、
  局部振荡的核积分下界、平均函数的差分估计），并附带格点、综合算子、核范数渐近、圆盘质量的检查。
单元由多个 cell_manager_thread 线程并行计算，报告按配置顺序由单个写者组装。
"""

" 内置模块 "
import json
import os
import queue
import threading
import time

" 第三方模块 "
import numpy as np
import pandas as pd
import psutil
import scipy

" 自定义模块 "
from cell_manager_thread import cell_manager_thread
from errors import BergmanError
from geometry import lattice_cell_measure, lattice_generate, lattice_validate
from kernels import kernel_coefficients, kernel_eval_many, kernel_norm_profile
from oscillation import (extrapolate_tail, averaging_ratio, mo_global_many, mo_local_many, mo_values,
                         global_variant)
from operators import divergence_verdict, hankel_gram, hankel_kernel_norm, schatten_norm, synthesis_matrix
from parameter import ExperimentConfig
from quadrature import bergman_disc_nodes, invariant_nodes, make_rule, sum_invariant
from symbols import SymbolPoly, parse_symbol, sym_eval
from weights import RadialWeight, classify, default_grid, disc_mass_profile, omega_hat, parse_weight, weight_rule
import global_vars

REPORT_COLUMNS = ['weight', 'symbol', 'eta', 'r', 'p', 'schatten_sum', 'schatten_flag', 'mo_global',
                  'mo_global_flag', 'mo_local_sum', 'mo_local_flag', 'mo_local_integral', 'ratio_gl', 'ratio_gs',
                  'ratio_ls', 'ratio_li', 'agree', 'error']

# 原点处比值与 1 的容差，反解析符号在原点取等
TIGHT_TOL = 1e-6

# 精确一侧不等式的相对余量
SHARP_TOL = 1e-4


def _flag(divergent: bool) -> str:
    return 'divergent' if divergent else 'convergent'


def _growth_divergent(values: list, growth: float) -> bool:
    """
    截断值从第一个半径到最后一个半径的相对增长超过 growth 时判为发散。
    """
    first, last = values[0], values[-1]
    if first <= 0:
        return last > 0
    return (last - first) / first > growth


def _ratio(a: float, b: float) -> float | None:
    if b > 0 and a > 0:
        return a / b
    return None


def grid_points(radii, angles: int) -> np.ndarray:
    """
    检验用的极坐标网格，半径为 0 时只取一个点。
    """
    points = []
    for x in radii:
        if x == 0:
            points.append(0j)
        else:
            points.extend(x * np.exp(2j * np.pi * np.arange(angles) / angles))
    return np.asarray(points, dtype=complex)


class EquivalenceContext:
    """
    一次等价性实验的共享数据：解析后的权函数、符号、格点以及各类求积规模。
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.weights = {spec: parse_weight(spec) for spec in config.weights}
        self.symbols = {spec: parse_symbol(spec) for spec in config.symbols}
        R_lat = max(config.lattice.R_max, config.trend.lattice_radii[-1])
        self.lattice = lattice_generate(config.lattice.r, R_lat, config.lattice.max_points)
        # 格点和乘以每个格点占有的 λ 测度，与两个积分同量纲
        self.cell_measure = lattice_cell_measure(self.lattice, config.trend.lattice_radii[-1])
        self.invariant = config.quadrature.invariant
        self.local_rule = make_rule(*config.quadrature.local)

    def cells(self) -> list[tuple]:
        c = self.config
        return [(w, s, eta, r) for w in c.weights for s in c.symbols for eta in c.eta for r in c.r]

    def compute(self, cell: tuple) -> dict:
        """
        计算一个单元的全部 p 行。共享数据（Gram 矩阵、节点上的平均振荡值）只算一次。
        """
        w_spec, s_spec, eta, r = cell
        w = self.weights[w_spec]
        f = self.symbols[s_spec]
        c = self.config
        fbar = f.conj()

        grams = [hankel_gram(f, w, c.N), hankel_gram(fbar, w, c.N)]

        global_nodes = [invariant_nodes(R, *self.invariant) for R in c.trend.integral_radii]
        global_values = [mo_global_many(f, w, eta, nodes.points) for nodes in global_nodes]
        local_values_int = [mo_local_many(f, w, r, nodes.points, self.local_rule) for nodes in global_nodes]

        lattice_abs = np.abs(self.lattice.points)
        lattice_values = mo_local_many(f, w, r, self.lattice.points, self.local_rule)

        rows = {}
        for p in c.p:
            try:
                rows[p] = self._row(p, grams, global_nodes, global_values, local_values_int, lattice_abs,
                                    lattice_values)
            except BergmanError as e:
                rows[p] = {'error': {'kind': type(e).__name__, 'message': str(e)}}
        return {'rows': rows, 'lattice_points': int(np.count_nonzero(lattice_abs <= c.trend.lattice_radii[-1]))}

    def _row(self, p, grams, global_nodes, global_values, local_values_int, lattice_abs, lattice_values) -> dict:
        c = self.config
        reports = [schatten_norm(g, p) for g in grams]
        schatten_sum = sum(rep.norm_p ** p for rep in reports)
        schatten_div = any(divergence_verdict(rep) for rep in reports if rep.norm_p > 0)

        glob = [sum_invariant(v ** p, nodes) for v, nodes in zip(global_values, global_nodes)]
        glob_vals = [g.value for g in glob]
        glob_div = _growth_divergent(glob_vals, c.trend.growth)

        loc_int = [sum_invariant(v ** p, nodes).value for v, nodes in zip(local_values_int, global_nodes)]

        lat_sums = [float(np.sum(lattice_values[lattice_abs <= R] ** p)) for R in c.trend.lattice_radii]
        lat_div = _growth_divergent(lat_sums, c.trend.growth)
        lat_weighted = lat_sums[-1] * self.cell_measure

        verdicts = [schatten_div, glob_div, lat_div]
        convergent = not any(verdicts)
        glob_value = extrapolate_tail(glob_vals, c.trend.integral_radii) if convergent else glob_vals[-1]
        loc_value = extrapolate_tail(loc_int, c.trend.integral_radii) if convergent else loc_int[-1]
        row = {
            'schatten_sum': schatten_sum,
            'schatten_flag': _flag(schatten_div),
            'schatten': [rep.to_dict() | {'singular_values': None} for rep in reports],
            'mo_global': glob_value,
            'mo_global_flag': _flag(glob_div),
            'mo_global_truncated': glob_vals,
            'mo_global_tail_ratio': glob[-1].tail_ratio,
            'mo_local_sum': lat_sums[-1],
            'mo_local_flag': _flag(lat_div),
            'mo_local_sums': lat_sums,
            'lattice_cell_measure': self.cell_measure,
            'mo_local_weighted': lat_weighted,
            'mo_local_integral': loc_value,
            'mo_local_integral_truncated': loc_int,
            'agree': len(set(verdicts)) == 1,
        }
        if convergent:
            row.update({
                'ratio_gl': _ratio(glob_value, lat_weighted),
                'ratio_gs': _ratio(schatten_sum, glob_value),
                'ratio_ls': _ratio(schatten_sum, lat_weighted),
                'ratio_li': _ratio(schatten_sum, loc_value),
            })
        else:
            row.update({'ratio_gl': None, 'ratio_gs': None, 'ratio_ls': None, 'ratio_li': None})
        return row


def run_cells(cells: list, compute, workers: int) -> dict:
    """
    用 workers 个 cell_manager_thread 线程并行计算所有单元，返回 {序号: 结果}。
    """
    task_queue = queue.Queue()
    for index, cell in enumerate(cells):
        task_queue.put((index, cell))
    results = {}
    lock = threading.Lock()
    threads = [threading.Thread(target=cell_manager_thread,
                                kwargs={'task_queue': task_queue, 'results': results, 'results_lock': lock,
                                        'compute': compute, 'name': f'单元线程{k}'})
               for k in range(max(1, min(workers, len(cells))))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return results


def environment_record(started: float) -> dict:
    return {
        'versions': {'numpy': np.__version__, 'scipy': scipy.__version__, 'pandas': pd.__version__},
        'runtime': time.perf_counter() - started,
        'peak_rss_mb': psutil.Process().memory_info().rss / 2 ** 20,
    }


def _save_moment_caches(weights) -> None:
    for w in weights:
        try:
            w.moments.save()
        except OSError as e:
            global_vars.lq.push(('矩缓存', 'Warning', f'{w.label}: {e}'))


def run_equivalence(config: ExperimentConfig) -> dict:
    """
    对配置中的全部单元计算三方等价性报告，写出 report.csv 与 report.json。
    :return: 报告字典，failures 为失败的 (单元, p) 行数
    """
    started = time.perf_counter()
    os.makedirs(config.output, exist_ok=True)
    context = EquivalenceContext(config)
    cells = context.cells()
    global_vars.lq.push(('等价性实验', 'Info', f'共 {len(cells)} 个单元，{config.workers} 个工作线程'))
    results = run_cells(cells, context.compute, config.workers)

    rows, cell_records, failures = [], [], 0
    for index, (w_spec, s_spec, eta, r) in enumerate(cells):
        result = results.get(index, {'error': {'kind': 'Interrupted', 'message': '单元没有被计算'}})
        cell_records.append({'weight': w_spec, 'symbol': s_spec, 'eta': eta, 'r': r,
                             'runtime': result.get('runtime'), 'result': result})
        for p in config.p:
            base = {'weight': w_spec, 'symbol': s_spec, 'eta': eta, 'r': r, 'p': p}
            row = result['rows'].get(p, {}) if 'rows' in result else {'error': result['error']}
            if 'error' in row:
                failures += 1
                rows.append(base | {'error': f"{row['error']['kind']}: {row['error']['message']}"})
            else:
                rows.append(base | {k: row.get(k) for k in REPORT_COLUMNS if k in row} | {'error': ''})

    df = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    df.to_csv(os.path.join(config.output, 'report.csv'), index=False, float_format='%.10g')

    convergent = [x for row in rows for x in (row.get('ratio_gl'), row.get('ratio_gs'), row.get('ratio_ls'))
                  if x is not None]
    report = {
        'config': config.to_dict(),
        'cells': cell_records,
        'rows': rows,
        'all_agree': all(row.get('agree', False) for row in rows if not row.get('error')),
        'ratio_bracket': [min(convergent), max(convergent)] if convergent else None,
        'failures': failures,
        'lattice': {'r': context.lattice.separation_r, 'R_max': context.lattice.R_max,
                    'points': len(context.lattice)},
        'environment': environment_record(started),
    }
    with open(os.path.join(config.output, 'report.json'), 'w', encoding='utf-8') as f:
        json.dump(report, f, indent=4, ensure_ascii=False, default=json_default)
    _save_moment_caches(context.weights.values())
    global_vars.lq.push(('等价性实验', 'Success' if failures == 0 else 'Warning',
                         f"完成 {len(rows)} 行，失败 {failures} 行，判定一致: {report['all_agree']}"))
    return report


def json_default(value):
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"无法序列化 {type(value).__name__}")


def weight_integral_ratio(w: RadialWeight, eta: float, c: float, radii, rule) -> dict:
    """
    核积分估计：∫|K^η_z(ζ)|β(z,ζ)^c ω(ζ)dA(ζ) 与 ω̂(z)/(1−|z|)^{η−1} 之比在径向网格上的范围。
    换元 ζ=φ_z(w) 后左边为 (1−|z|²)^{2−η}∫|1−z̄w|^{η−4} arctanh(|w|)^c ω(φ_z(w)) dA(w)。
    """
    rule = weight_rule(w, rule.radial_count, rule.angular_count)
    ratios = []
    for x in radii:
        one_minus = 1 - x * x
        wn = rule.nodes
        denom = np.abs(1 - x * wn)
        gap = one_minus * (1 - np.abs(wn) ** 2) / denom ** 2
        integrand = denom ** (eta - 4) * np.arctanh(np.abs(wn)) ** c * w.eval_gap(gap)
        lhs = one_minus ** (2 - eta) * float(np.sum(rule.weights * integrand))
        rhs = omega_hat(w, x) / (1 - x) ** (eta - 1)
        ratios.append(lhs / rhs)
    return {'c': c, 'radii': list(map(float, radii)), 'ratios': ratios,
            'max': float(np.max(ratios)), 'min': float(np.min(ratios))}


def oscillation_lower_ratio(f: SymbolPoly, w: RadialWeight, r: float, z: complex, rule) -> float | None:
    """
    MO_{ω,r}(f)(z)² 与 ω(D)^{−1}∫_D|∫_D (f(u)−f(ζ))B^ω_u(ζ)ω(ζ)dA(ζ)|²ω(u)dA(u) 之比。两边都为 0 时返回 None。
    """
    nodes = bergman_disc_nodes(complex(z), r, rule)
    pts = nodes.points[0]
    m = nodes.weights[0] * w.eval_gap(nodes.gap[0])
    vals = sym_eval(f, pts)
    mass = float(np.sum(m))
    mean = np.sum(m * vals) / mass
    lhs = float(np.sum(m * np.abs(vals - mean) ** 2) / mass)
    kernel = kernel_eval_many(w, pts[:, None], pts[None, :])
    inner = np.sum((vals[:, None] - vals[None, :]) * kernel * m[None, :], axis=1)
    rhs = float(np.sum(m * np.abs(inner) ** 2) / mass)
    if rhs <= 0:
        return None
    return lhs / rhs


def run_lemma_suite(config: ExperimentConfig) -> dict:
    """
    对每个权函数、η、r 组合运行辅助不等式的检验，写出 lemmas.json。
    """
    started = time.perf_counter()
    os.makedirs(config.output, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    disc_rule = make_rule(*config.quadrature.disc)
    local_rule = make_rule(*config.quadrature.local)
    double_rule = make_rule(*config.quadrature.double)
    lem = config.lemmas
    points = grid_points(lem.grid_radii, lem.grid_angles)
    radial = np.asarray(lem.grid_radii, dtype=float)
    symbols = {spec: parse_symbol(spec) for spec in config.symbols}

    lattice = lattice_generate(config.lattice.r, config.lattice.R_max, config.lattice.max_points)
    report = {'lattice': lattice_validate(lattice.points, config.lattice.r, config.lattice.R_max,
                                          seed=config.seed),
              'weights': {}, 'failures': 0}

    for w_spec in config.weights:
        w = parse_weight(w_spec)
        entry = {'classify': None, 'kernel_norm': None, 'disc_mass': {}, 'cases': []}
        try:
            entry['classify'] = classify(w, default_grid(config.classify_points))
            entry['kernel_norm'] = kernel_norm_profile(w, radial, lem.kernel_norm_r, disc_rule)
            for r in lem.kernel_norm_r:
                entry['disc_mass'][str(r)] = disc_mass_profile(w, radial, r, disc_rule)
        except BergmanError as e:
            entry['error'] = f"{type(e).__name__}: {e}"
            report['failures'] += 1

        for eta in config.eta:
            for r in config.r:
                try:
                    entry['cases'].append(_lemma_case(w, eta, r, symbols, points, radial, config, rng,
                                                      disc_rule, local_rule, double_rule))
                except BergmanError as e:
                    entry['cases'].append({'eta': eta, 'r': r, 'error': f"{type(e).__name__}: {e}"})
                    report['failures'] += 1
        report['weights'][w_spec] = entry
        _save_moment_caches([w])

    report['environment'] = environment_record(started)
    with open(os.path.join(config.output, 'lemmas.json'), 'w', encoding='utf-8') as f:
        json.dump(report, f, indent=4, ensure_ascii=False, default=json_default)
    global_vars.lq.push(('引理检验', 'Success' if report['failures'] == 0 else 'Warning',
                         f"完成，失败 {report['failures']} 项"))
    return report


def _lemma_case(w, eta, r, symbols, points, radial, config, rng, disc_rule, local_rule, double_rule) -> dict:
    lem = config.lemmas
    case = {'eta': eta, 'r': r, 'symbols': {},
            'kernel_integral': [weight_integral_ratio(w, eta, c, radial, disc_rule) for c in lem.c]}

    for spec, f in symbols.items():
        fbar = f.conj()
        mo_eta = mo_global_many(f, w, eta, points)
        lhs_f = np.array([hankel_kernel_norm(f, w, eta, z) for z in points])
        lhs_fbar = np.array([hankel_kernel_norm(fbar, w, eta, z) for z in points])
        with np.errstate(divide='ignore', invalid='ignore'):
            sharp = np.where(mo_eta > 1e-14, np.maximum(lhs_f, lhs_fbar) / mo_eta, 0.0)
        origin = int(np.argmin(np.abs(points)))
        sym = {
            'hankel_bound': {
                'max_ratio': float(np.max(sharp)),
                'violations': int(np.count_nonzero(sharp > 1 + SHARP_TOL)),
                'sum_ratio_max': float(np.max(np.where(mo_eta > 1e-14, (lhs_f + lhs_fbar) / mo_eta, 0.0))),
                'origin_ratio': float(sharp[origin]),
                'origin_tight': bool(mo_eta[origin] <= 1e-14 or abs(sharp[origin] - 1) <= TIGHT_TOL),
            },
        }

        mo_r = mo_local_many(f, w, r, points, local_rule)
        with np.errstate(divide='ignore', invalid='ignore'):
            pointwise = np.where(mo_eta > 1e-14, mo_r / mo_eta, np.nan)
        finite = pointwise[np.isfinite(pointwise)]
        sym['local_over_global'] = [float(np.min(finite)), float(np.max(finite))] if finite.size else None

        lower = [oscillation_lower_ratio(f, w, r, complex(x), double_rule) for x in radial]
        lower = [x for x in lower if x is not None] or [0.0]
        sym['oscillation_lower'] = {'max_ratio': max(lower), 'min_ratio': min(lower)}

        sym['averaging'] = averaging_ratio(f, w, r, lem.pairs, rng, local_rule)

        sym['atomic'] = _atomic_sums(f, fbar, w, eta, config)
        case['symbols'][spec] = sym

    case['synthesis'] = []
    for r_syn in lem.synthesis_r:
        lattice = lattice_generate(r_syn, lem.synthesis_R_max, config.lattice.max_points)
        n_basis = max(config.N, kernel_coefficients(w, eta, complex(lattice.R_max)).terms)
        syn = synthesis_matrix(w, eta, lattice, n_basis)
        case['synthesis'].append({'r': r_syn, 'points': syn.points, 'N': n_basis,
                                  'operator_norm': syn.operator_norm, 'min_capture': syn.min_capture})
    return case


def _atomic_sums(f, fbar, w, eta, config) -> list:
    """
    格点上的原子和 Σ_j ‖H_f k_{a_j}‖^p+‖H_{f̄} k_{a_j}‖^p 与 ∫MO_{ω,η}(f)^p dλ 的比较（0<p≤2），
    截断在 synthesis_R_max。
    """
    R = config.lemmas.synthesis_R_max
    lattice = lattice_generate(config.lattice.r, R, config.lattice.max_points)
    a = lattice.points
    hk = np.array([hankel_kernel_norm(f, w, eta, z) for z in a])
    hkbar = np.array([hankel_kernel_norm(fbar, w, eta, z) for z in a])
    nodes = invariant_nodes(R, *config.quadrature.invariant)
    mo = mo_values(f, w, global_variant(eta), nodes.points)
    out = []
    for p in config.p:
        if p > 2:
            continue
        atomic = float(np.sum(hk ** p + hkbar ** p))
        integral = sum_invariant(mo ** p, nodes).value
        out.append({'p': p, 'atomic_sum': atomic, 'integral': integral, 'ratio': _ratio(atomic, integral)})
    return out
