"""
该模块计算 Berezin 型变换与平均振荡：

- B_{ω,η}(g)(z)=⟨g k, k⟩_{L²_ω}，k=k^{η+2}_{ω,z}。多项式符号可以由矩精确计算（级数路径），
  也可以经 Möbius 换元后用圆盘求积计算（求积路径），两者互相校验。
- 整体平均振荡 MO_{ω,η}(f)(z)=(B(|f|²)−|B(f)|²)^{1/2}，以及两种等价表示（e1：加权方差，e2：二重积分）。
- 平均函数 f̂_{ω,r}(z) 与局部平均振荡 MO_{ω,r}(f)(z)，以及二重积分表示 e3。
- 平均振荡在 L^p(dλ) 中的量：格点和与截断积分（带尾部趋势标记），以及向 R→1 的外推。
"""

" 内置模块 "
import json
import math
from dataclasses import dataclass, field

" 第三方模块 "
import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

" 自定义模块 "
from errors import ConfigError, NumericalError
from geometry import Lattice, mobius
from kernels import MATRIX_CHUNK, basis_norms_sq, kernel_coefficient_rows, kernel_coefficients
from quadrature import DiscRule, bergman_disc_nodes, invariant_nodes, make_rule, sum_invariant
from symbols import SymbolPoly, sym_eval
from weights import RadialWeight
import global_vars

# 方差为负时的容忍度
VARIANCE_TOL = 1e-10

# 各类求积的默认规模（径向 × 角度）
BEREZIN_RULE = (32, 64)
LOCAL_RULE = (24, 48)
DOUBLE_RULE = (12, 24)
INVARIANT_RULE = (24, 48)


@dataclass(frozen=True)
class Variant:
    """
    平均振荡的种类：kind='global' 时 param 是 η，kind='local' 时 param 是双曲半径 r。
    """
    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ('global', 'local'):
            raise ConfigError('variant', f"未知的平均振荡种类 {self.kind}")
        if self.kind == 'local' and not self.param > 0:
            raise ConfigError('r', f"局部平均振荡的半径必须为正，收到 {self.param}")

    @property
    def label(self) -> str:
        return f"global(eta={self.param:g})" if self.kind == 'global' else f"local(r={self.param:g})"


def global_variant(eta: float) -> Variant:
    return Variant('global', float(eta))


def local_variant(r: float) -> Variant:
    return Variant('local', float(r))


def _rule(rule, default) -> DiscRule:
    if rule is None:
        return make_rule(*default)
    if isinstance(rule, DiscRule):
        return rule
    return make_rule(*rule)


def _is_constant(f: SymbolPoly) -> bool:
    return f.is_zero() or (len(f.terms) == 1 and (0, 0) in f.terms)


def _clip_variance(var, where):
    var = np.asarray(var, dtype=float)
    if np.any(var < -VARIANCE_TOL):
        raise NumericalError(f"平均振荡的方差为负：{float(np.min(var)):.3g}（{where}）")
    return np.sqrt(np.clip(var, 0.0, None))


def _term_berezin(kappa: np.ndarray, h: np.ndarray, a: int, b: int) -> np.ndarray:
    """
    B(z^a z̄^b)=Σ_n κ_n conj(κ_{n+a−b}) h_{a+n}，对 kappa 的每一行。
    """
    count = kappa.shape[1]
    s = a - b
    n = np.arange(max(0, -s), count - max(0, s))
    if n.size == 0:
        return np.zeros(kappa.shape[0], dtype=complex)
    return (kappa[:, n] * np.conj(kappa[:, n + s])) @ h[a + n]


def berezin_series_many(symbols: list[SymbolPoly], w: RadialWeight, eta: float, zs) -> list[np.ndarray]:
    """
    在一批点上用矩级数计算若干多项式符号的 Berezin 变换。点按模长排序后分块，每块的截断项数由块内最大模长决定。
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex)).ravel()
    out = [np.zeros(zs.size, dtype=complex) for _ in symbols]
    if zs.size == 0:
        return out
    order = np.argsort(np.abs(zs))
    deg = max(s.deg_z + s.deg_zbar for s in symbols)
    longest = kernel_coefficients(w, eta, complex(abs(zs[order[-1]]))).terms
    step = max(1, MATRIX_CHUNK // longest)
    for start in range(0, zs.size, step):
        idx = order[start:start + step]
        kappa, _ = kernel_coefficient_rows(w, eta, zs[idx])
        h = basis_norms_sq(w, kappa.shape[1] + deg + 1)
        for k, f in enumerate(symbols):
            acc = np.zeros(idx.size, dtype=complex)
            for (a, b), c in f.terms.items():
                acc += c * _term_berezin(kappa, h, a, b)
            out[k][idx] = acc
    return out


def berezin_series(f: SymbolPoly, w: RadialWeight, eta: float, z: complex) -> complex:
    """
    用矩精确计算 B_{ω,η}(f)(z)。
    """
    return complex(berezin_series_many([f], w, eta, [z])[0][0])


def _berezin_measure(w: RadialWeight, eta: float, z: complex, rule: DiscRule) -> tuple[np.ndarray, np.ndarray]:
    """
    换元 ζ=φ_z(w) 之后 |k(ζ)|²ω(ζ)dA(ζ) 在节点上的离散测度（已归一化为总和 1）。
    换元后密度正比于 |1−z̄w|^{2η} ω(φ_z(w))。
    """
    wn = rule.nodes
    one_minus = 1 - abs(z) ** 2
    denom = np.abs(1 - np.conj(z) * wn) ** 2
    zeta = mobius(z, wn)
    gap = one_minus * (1 - np.abs(wn) ** 2) / denom
    m = rule.weights * denom ** eta * w.eval_gap(gap)
    total = np.sum(m)
    if not np.isfinite(total) or total <= 0:
        raise NumericalError(f"Berezin 测度在 z={z} 处不是有限正数")
    return np.asarray(zeta), m / total


def berezin(f: SymbolPoly, w: RadialWeight, eta: float, z: complex, rule=None, method: str = 'quadrature') -> complex:
    """
    B_{ω,η}(f)(z)=⟨f k^{η+2}_{ω,z}, k^{η+2}_{ω,z}⟩_{L²_ω}。
    :param method: 'quadrature' 换元后圆盘求积；'series' 由矩精确计算
    """
    if method == 'series':
        return berezin_series(f, w, eta, z)
    if method != 'quadrature':
        raise ConfigError('method', f"未知的 Berezin 计算方法 {method}")
    zeta, m = _berezin_measure(w, eta, complex(z), _rule(rule, BEREZIN_RULE))
    return complex(np.sum(m * sym_eval(f, zeta)))


def _double_variance(values: np.ndarray, m: np.ndarray) -> float:
    """
    ½ Σ_i Σ_j m_i m_j |v_i − v_j|²，按行分块。
    """
    total = 0.0
    step = max(1, MATRIX_CHUNK // values.size)
    for start in range(0, values.size, step):
        sl = slice(start, start + step)
        diff = np.abs(values[sl, None] - values[None, :]) ** 2
        total += float(np.sum(m[sl, None] * m[None, :] * diff))
    return total / 2


def mo_global(f: SymbolPoly, w: RadialWeight, eta: float, z: complex, method: str = 'variance',
              rule=None, double_rule=None) -> float:
    """
    整体平均振荡 MO_{ω,η}(f)(z)。
    :param method: 'variance' 定义式 B(|f|²)−|B(f)|²（矩级数精确计算）；
                   'e1' ‖f k−B(f)(z)k‖² 的求积；'e2' ½∫∫|f(u)−f(ζ)|²|k(u)|²|k(ζ)|²ω(u)ω(ζ) 的二重求积
    """
    z = complex(z)
    if method == 'variance':
        return float(mo_global_many(f, w, eta, [z])[0])
    if method == 'e1':
        zeta, m = _berezin_measure(w, eta, z, _rule(rule, BEREZIN_RULE))
        vals = sym_eval(f, zeta)
        mean = np.sum(m * vals)
        return float(_clip_variance(np.sum(m * np.abs(vals - mean) ** 2), f"e1, z={z}"))
    if method == 'e2':
        zeta, m = _berezin_measure(w, eta, z, _rule(double_rule, DOUBLE_RULE))
        return float(_clip_variance(_double_variance(sym_eval(f, zeta), m), f"e2, z={z}"))
    raise ConfigError('method', f"未知的整体平均振荡计算方法 {method}")


def mo_global_many(f: SymbolPoly, w: RadialWeight, eta: float, zs) -> np.ndarray:
    """
    在一批点上按定义式计算 MO_{ω,η}(f)，Berezin 变换由矩级数精确给出。
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex)).ravel()
    if _is_constant(f):
        return np.zeros(zs.size)
    bf, bsq = berezin_series_many([f, f.abs_sq()], w, eta, zs)
    return _clip_variance(bsq.real - np.abs(bf) ** 2, f"MO_global, {f!r}")


def _local_moments(f: SymbolPoly, w: RadialWeight, r: float, zs: np.ndarray, rule: DiscRule):
    """
    一批圆盘 D(z,r) 上的 (f̂, 方差)。
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex)).ravel()
    avg_out = np.zeros(zs.size, dtype=complex)
    var_out = np.zeros(zs.size)
    step = max(1, MATRIX_CHUNK // len(rule))
    for start in range(0, zs.size, step):
        sl = slice(start, start + step)
        nodes = bergman_disc_nodes(zs[sl], r, rule)
        m = nodes.weights * w.eval_gap(nodes.gap)
        mass = np.sum(m, axis=1)
        vals = sym_eval(f, nodes.points)
        mean = np.sum(m * vals, axis=1) / mass
        avg_out[sl] = mean
        var_out[sl] = np.sum(m * np.abs(vals - mean[:, None]) ** 2, axis=1) / mass
    return avg_out, var_out


def avg(f: SymbolPoly, w: RadialWeight, r: float, z: complex, rule=None) -> complex:
    """
    平均函数 f̂_{ω,r}(z)=ω(D(z,r))^{−1}∫_{D(z,r)} f ω dA。
    """
    return complex(_local_moments(f, w, r, [z], _rule(rule, LOCAL_RULE))[0][0])


def avg_many(f: SymbolPoly, w: RadialWeight, r: float, zs, rule=None) -> np.ndarray:
    return _local_moments(f, w, r, zs, _rule(rule, LOCAL_RULE))[0]


def mo_local(f: SymbolPoly, w: RadialWeight, r: float, z: complex, method: str = 'average',
             rule=None, double_rule=None) -> float:
    """
    局部平均振荡 MO_{ω,r}(f)(z)。
    :param method: 'average' 用 f̂ 的方差形式；'e3' 用 ω(D)^{−2}·½∫∫|f(u)−f(ζ)|²ω(u)ω(ζ) 的二重求积
    """
    z = complex(z)
    if method == 'average':
        return float(mo_local_many(f, w, r, [z], rule)[0])
    if method == 'e3':
        nodes = bergman_disc_nodes(z, r, _rule(double_rule, DOUBLE_RULE))
        m = nodes.weights[0] * w.eval_gap(nodes.gap[0])
        m = m / np.sum(m)
        return float(_clip_variance(_double_variance(sym_eval(f, nodes.points[0]), m), f"e3, z={z}"))
    raise ConfigError('method', f"未知的局部平均振荡计算方法 {method}")


def mo_local_many(f: SymbolPoly, w: RadialWeight, r: float, zs, rule=None) -> np.ndarray:
    if _is_constant(f):
        return np.zeros(np.atleast_1d(np.asarray(zs)).size)
    _, var = _local_moments(f, w, r, zs, _rule(rule, LOCAL_RULE))
    return np.sqrt(np.clip(var, 0.0, None))


def mo_values(f: SymbolPoly, w: RadialWeight, variant: Variant, points, local_rule=None) -> np.ndarray:
    """
    在一批点上计算某一种平均振荡。
    """
    if variant.kind == 'global':
        return mo_global_many(f, w, variant.param, points)
    return mo_local_many(f, w, variant.param, points, local_rule)


@dataclass(frozen=True)
class LatticeSum:
    value: float
    sum: float
    points: int
    R_max: float


@dataclass(frozen=True)
class MOIntegral:
    value: float
    norm: float
    R_max: float
    tail_ratio: float
    divergent: bool


def mo_lp_lattice(f: SymbolPoly, w: RadialWeight, variant: Variant, p: float, lattice: Lattice,
                  R_max: float | None = None, local_rule=None) -> LatticeSum:
    """
    (Σ_j MO(a_j)^p)^{1/p}，只取 |a_j| ≤ R_max 的格点。sum 字段是 p 次幂之和。
    """
    R = lattice.R_max if R_max is None else R_max
    sub = lattice.within(R)
    values = mo_values(f, w, variant, sub.points, local_rule)
    total = float(np.sum(values ** p))
    return LatticeSum(total ** (1 / p) if total > 0 else 0.0, total, len(sub), float(R))


def mo_lp_integral(f: SymbolPoly, w: RadialWeight, variant: Variant, p: float, R_max: float,
                   rule=None, local_rule=None) -> MOIntegral:
    """
    ∫_{|z|<R_max} MO(f)^p dλ，value 是积分本身，norm 是它的 1/p 次方，并带尾部趋势标记。
    """
    rule = _rule(rule, INVARIANT_RULE)
    nodes = invariant_nodes(float(R_max), rule.radial_count, rule.angular_count)
    values = mo_values(f, w, variant, nodes.points, local_rule)
    res = sum_invariant(values ** p, nodes)
    return MOIntegral(res.value, res.value ** (1 / p) if res.value > 0 else 0.0, res.R_max, res.tail_ratio,
                      res.divergent)


def extrapolate_tail(values, radii) -> float:
    """
    把截断积分看作 1−R 的线性函数，外推到 R→1。
    """
    x = 1 - np.asarray(radii, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ConfigError('trend.integral_radii', "外推至少需要两个截断半径")
    model = LinearRegression().fit(x.reshape(-1, 1), y)
    return float(model.intercept_)


def averaging_ratio(f: SymbolPoly, w: RadialWeight, r: float, pairs: int, rng: np.random.Generator,
                    rule=None, R: float = 0.9) -> dict:
    """
    对 β(z,ζ)<r 的随机点对，给出 |f̂_r(z)−f̂_r(ζ)|/MO_{ω,2r}(f)(z) 的最大值，
    以及 D(z,r) 上 |f−f̂_r|² 的平均与 MO_{ω,2r}(f)(z)² 之比的最大值。
    """
    rule = _rule(rule, LOCAL_RULE)
    z = R * np.sqrt(rng.random(pairs)) * np.exp(2j * np.pi * rng.random(pairs))
    u = math.tanh(r) * np.sqrt(rng.random(pairs)) * np.exp(2j * np.pi * rng.random(pairs))
    zeta = mobius(z, u)

    mo_2r = mo_local_many(f, w, 2 * r, z, rule)
    diff = np.abs(avg_many(f, w, r, z, rule) - avg_many(f, w, r, zeta, rule))

    second = np.zeros(pairs)
    for k in range(pairs):
        nodes = bergman_disc_nodes(complex(z[k]), r, rule)
        m = nodes.weights[0] * w.eval_gap(nodes.gap[0])
        g = sym_eval(f, nodes.points[0]) - avg_many(f, w, r, nodes.points[0], rule)
        second[k] = float(np.sum(m * np.abs(g) ** 2) / np.sum(m))

    with np.errstate(divide='ignore', invalid='ignore'):
        ratio1 = np.where(mo_2r > 1e-14, diff / mo_2r, np.where(diff > 1e-12, np.inf, 0.0))
        ratio2 = np.where(mo_2r > 1e-14, second / mo_2r ** 2, np.where(second > 1e-12, np.inf, 0.0))
    return {
        'r': r,
        'pairs': pairs,
        'difference_ratio_max': float(np.max(ratio1)) if pairs else 0.0,
        'square_ratio_max': float(np.max(ratio2)) if pairs else 0.0,
    }


@dataclass
class MOProfile:
    variant: Variant
    sample_points: np.ndarray
    values: np.ndarray
    p_norms: dict = field(default_factory=dict)

    def to_csv(self, path: str) -> None:
        """
        写出 re,im,value 三列的 CSV，并在同名 .json 文件中写入 p-范数摘要。
        """
        df = pd.DataFrame({'re': self.sample_points.real, 'im': self.sample_points.imag, 'value': self.values})
        df.to_csv(path, index=False, float_format='%.17g')
        sidecar = path[:-4] + '.json' if path.endswith('.csv') else path + '.json'
        with open(sidecar, 'w', encoding='utf-8') as fp:
            json.dump({'variant': self.variant.label, 'p_norms': self.p_norms}, fp, indent=4, ensure_ascii=False)


def mo_profile(f: SymbolPoly, w: RadialWeight, variant: Variant, lattice: Lattice, p_list, R_max: float,
               rule=None, local_rule=None) -> MOProfile:
    """
    格点上的平均振荡剖面，并对每个 p 给出格点和与截断积分。
    """
    values = mo_values(f, w, variant, lattice.points, local_rule)
    profile = MOProfile(variant, lattice.points, values)
    for p in p_list:
        lat = mo_lp_lattice(f, w, variant, p, lattice, R_max, local_rule)
        integral = mo_lp_integral(f, w, variant, p, R_max, rule, local_rule)
        profile.p_norms[str(p)] = {
            'lattice_sum': lat.sum,
            'integral': integral.value,
            'tail_flag': 'divergent' if integral.divergent else 'convergent',
            'tail_ratio': integral.tail_ratio,
        }
    global_vars.lq.push(('平均振荡剖面', 'Success', f"{f!r}, {w.label}, {variant.label}: {len(values)} 个点"))
    return profile
