"""
该模块实现径向权函数 ω 及其相关的量。具体功能包括：

- 三种权函数：标准权 (η+1)(1−r²)^η、对数幂权 (1−r)^α (log(e/(1−r)))^β、由 CSV 表格给出的权（单调三次插值）。
- 尾部质量 ω̂(r)=∫_r^1 ω(s)ds 和矩 μ_x=∫_0^1 s^x ω(s)ds，标准权用闭式，其它用自适应求积。
- 矩缓存表 MomentTable，按指数的二进制位做键，多线程共享，可以持久化到 BHL_CACHE_DIR。
- Bergman 圆盘上的权质量 ω(D(z,r))。
- 判断权函数是否属于 D̂、Ď、D、R 类，并给出见证常数。
"""

" 内置模块 "
import math
import os
import re
import threading
import warnings

" 第三方模块 "
import numpy as np
import pandas as pd
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

" 自定义模块 "
from errors import ConfigError, DomainError, NumericalError
from quadrature import DiscRule, bergman_disc_nodes, default_rule, make_rule
import global_vars

# 自适应求积的相对精度
QUAD_RTOL = 1e-10

# 默认分类网格的点数
DEFAULT_GRID_POINTS = 256

# 表格权的采样必须覆盖到的半径
TABLE_MIN_REACH = 0.999


class RadialWeight:
    """
    径向权函数。创建后不可修改；矩缓存随权函数一起存放。
    kind 取 'standard'、'logpow'、'table' 之一。
    """

    def __init__(self, kind: str, params: dict, normalization: float = 1.0, samples: tuple | None = None,
                 source: str | None = None):
        if normalization <= 0 or not math.isfinite(normalization):
            raise DomainError(f"权函数的归一化常数必须为正数，收到 {normalization}")
        self._kind = kind
        self._params = dict(params)
        self._normalization = float(normalization)
        self._samples = samples
        self._source = source
        self._pchip = None

        if kind == 'standard':
            if not params['eta'] > -1:
                raise DomainError(f"标准权要求 η > -1，收到 η={params['eta']}")
        elif kind == 'logpow':
            if not params['alpha'] > -1:
                raise DomainError(f"对数幂权要求 α > -1，收到 α={params['alpha']}")
        elif kind == 'table':
            r, omega = samples
            self._pchip = PchipInterpolator(r, omega, extrapolate=False)
        else:
            raise DomainError(f"未知的权函数类型: {kind}")

        self.moments = MomentTable(self)

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def params(self) -> dict:
        return dict(self._params)

    @property
    def normalization(self) -> float:
        return self._normalization

    @property
    def samples(self) -> tuple | None:
        return self._samples

    @property
    def label(self) -> str:
        return format_weight(self)

    @property
    def endpoint_exponent(self) -> float:
        """
        ω 在 r→1 处 (1−r)^a 型奇性的指数 a；光滑时为 0。整数 η 的标准权是多项式，不算奇性。
        """
        if self._kind == 'logpow':
            return self._params['alpha']
        if self._kind == 'standard' and not float(self._params['eta']).is_integer():
            return self._params['eta']
        return 0.0

    def __repr__(self):
        return f"RadialWeight({self.label})"

    def __call__(self, r):
        """
        计算 ω(r)，支持数组，不做定义域检查。
        """
        r = np.asarray(r, dtype=float)
        if self._kind == 'standard':
            eta = self._params['eta']
            return self._normalization * (eta + 1) * ((1 - r) * (1 + r)) ** eta
        if self._kind == 'logpow':
            one_minus = 1 - r
            return self._normalization * one_minus ** self._params['alpha'] * (
                    1 - np.log(one_minus)) ** self._params['beta']
        return self._normalization * self._table_eval(r)

    def eval_gap(self, gap):
        """
        由 gap = 1 − r² 计算 ω(r)。在边界附近 r 本身已经丢失了有效位，用 gap 可以保持相对精度。
        """
        gap = np.asarray(gap, dtype=float)
        if self._kind == 'standard':
            eta = self._params['eta']
            return self._normalization * (eta + 1) * gap ** eta
        r = np.sqrt(np.clip(1 - gap, 0.0, None))
        if self._kind == 'logpow':
            one_minus = gap / (1 + r)
            return self._normalization * one_minus ** self._params['alpha'] * (
                    1 - np.log(one_minus)) ** self._params['beta']
        return self._normalization * self._table_eval(r)

    def _table_eval(self, r):
        r_s, omega_s = self._samples
        inside = self._pchip(np.clip(r, r_s[0], r_s[-1]))
        # 采样区间之外取端点值
        out = np.where(r < r_s[0], omega_s[0], np.where(r > r_s[-1], omega_s[-1], inside))
        return np.maximum(out, 0.0)


class MomentTable:
    """
    矩缓存表 μ_x，键是指数 x 的精确二进制表示（float.hex）。
    多个线程可能重复计算同一个矩，但写入时以先到者为准，读到的值始终一致。
    """

    def __init__(self, weight: RadialWeight):
        self.weight = weight
        self.cache: dict[str, float] = {}
        self._lock = threading.Lock()
        self._dirty = False
        self._load()

    def _cache_file(self) -> str | None:
        if global_vars.cache_dir is None or self.weight.kind == 'standard':
            return None
        name = re.sub(r'[^A-Za-z0-9_.=-]', '_', self.weight.label)
        return os.path.join(global_vars.cache_dir, f"moments_{name}.csv")

    def _load(self) -> None:
        path = self._cache_file()
        if path is None or not os.path.exists(path):
            return
        try:
            df = pd.read_csv(path, float_precision='round_trip')
            for x, value in zip(df['exponent'].to_numpy(dtype=float), df['value'].to_numpy(dtype=float)):
                self.cache[float(x).hex()] = float(value)
            global_vars.lq.push(('矩缓存', 'Info', f'从 {path} 读取 {len(df)} 个矩'))
        except (OSError, KeyError, ValueError) as e:
            global_vars.lq.push(('矩缓存', 'Warning', f'矩缓存文件 {path} 无法读取，忽略: {e}'))

    def save(self) -> None:
        """
        将缓存写入 BHL_CACHE_DIR 下的 CSV 文件（exponent,value）。
        """
        path = self._cache_file()
        if path is None or not self._dirty:
            return
        with self._lock:
            items = sorted((float.fromhex(k), v) for k, v in self.cache.items())
            self._dirty = False
        os.makedirs(os.path.dirname(path), exist_ok=True)
        pd.DataFrame(items, columns=['exponent', 'value']).to_csv(path, index=False, float_format='%.17g')
        global_vars.lq.push(('矩缓存', 'Success', f'写入 {len(items)} 个矩到 {path}'))

    def get_many(self, xs) -> np.ndarray:
        """
        批量读取矩，缺失的部分一次算出后写入缓存。
        """
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        keys = [float(x).hex() for x in xs]
        with self._lock:
            values = [self.cache.get(k) for k in keys]
        missing = [i for i, v in enumerate(values) if v is None]
        if missing:
            computed = _compute_moments(self.weight, xs[missing])
            with self._lock:
                for i, value in zip(missing, computed):
                    values[i] = self.cache.setdefault(keys[i], float(value))
                self._dirty = True
        return np.array(values, dtype=float)


def _adaptive_integral(func, a: float, b: float, what: str) -> float:
    """
    scipy 自适应求积，精度达不到 QUAD_RTOL 时抛出 NumericalError 并给出实际达到的误差。
    """
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', integrate.IntegrationWarning)
        value, abserr = integrate.quad(func, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=400)
    if not math.isfinite(value) or abserr > max(1e3 * QUAD_RTOL * abs(value), 1e-300):
        raise NumericalError(f"{what} 的求积没有收敛：值 {value:.6g}，误差估计 {abserr:.3g}，"
                             f"要求相对精度 {QUAD_RTOL:g}")
    return value


def _compute_moments(w: RadialWeight, xs: np.ndarray) -> np.ndarray:
    n = w.normalization
    if w.kind == 'standard':
        eta = w.params['eta']
        return n * (eta + 1) / 2 * np.exp(special.betaln((xs + 1) / 2, eta + 1))
    if w.kind == 'logpow':
        c = w.params['alpha'] + 1
        beta = w.params['beta']
        if beta == 0:
            return n * np.exp(special.betaln(xs + 1, c))
        out = np.empty_like(xs)
        for i, x in enumerate(xs):
            # s = 1 − e^{−t}，被积函数在 t ≈ log(1 + x/c) 附近取峰值
            def f(t, x=x):
                return math.exp(x * math.log1p(-math.exp(-t)) - c * t) * (1 + t) ** beta if t > 0 else (
                    1.0 if x == 0 else 0.0)

            t_peak = math.log1p(x / c)
            head = _adaptive_integral(f, 0.0, t_peak, f"矩 μ_{x:g}") if t_peak > 0 else 0.0
            out[i] = n * (head + _adaptive_integral(f, t_peak, math.inf, f"矩 μ_{x:g}"))
        return out
    r_s, _ = w.samples
    knots = [float(k) for k in r_s if 0 < k < 1]
    out = np.empty_like(xs)
    for i, x in enumerate(xs):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', integrate.IntegrationWarning)
            value, abserr = integrate.quad(lambda s: s ** x * float(w(s)), 0.0, 1.0, points=knots[:200],
                                           epsabs=0.0, epsrel=QUAD_RTOL, limit=len(knots) + 400)
        if not math.isfinite(value) or abserr > 1e3 * QUAD_RTOL * abs(value):
            raise NumericalError(f"矩 μ_{x:g} 的求积没有收敛：误差估计 {abserr:.3g}")
        out[i] = value
    return out


def _check_radius(r) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr >= 1):
        raise DomainError(f"半径必须在 [0,1) 内，收到 {r}")
    return arr


def weight_eval(w: RadialWeight, r: float) -> float:
    """
    计算 ω(r)。
    :param w: 权函数
    :param r: 半径，0 ≤ r < 1
    :return: ω(r) ≥ 0
    """
    _check_radius(r)
    return float(w(r))


def omega_hat(w: RadialWeight, r):
    """
    计算尾部质量 ω̂(r)=∫_r^1 ω(s)ds。标准权用不完全 Beta 函数的闭式，对数幂权在 t=−log(1−s) 变量下自适应求积，
    表格权对分段三次插值精确积分。
    :param w: 权函数
    :param r: 半径（标量或数组），0 ≤ r < 1
    :return: ω̂(r) > 0，形状与 r 相同
    """
    arr = _check_radius(r)
    n = w.normalization
    if w.kind == 'standard':
        eta = w.params['eta']
        gap = (1 - arr) * (1 + arr)
        out = n * (eta + 1) * 0.5 * special.beta(eta + 1, 0.5) * special.betainc(eta + 1, 0.5, gap)
    elif w.kind == 'logpow':
        c = w.params['alpha'] + 1
        beta = w.params['beta']
        if beta == 0:
            out = n * (1 - arr) ** c / c
        else:
            flat = np.atleast_1d(arr).ravel()
            vals = np.empty_like(flat)
            for i, ri in enumerate(flat):
                a = -math.log1p(-ri)
                tail = _adaptive_integral(lambda u: math.exp(-c * u) * (1 + a + u) ** beta, 0.0, math.inf,
                                          f"ω̂({ri:g})")
                vals[i] = n * math.exp(-c * a) * tail
            out = vals.reshape(np.shape(arr))
    else:
        r_s, omega_s = w.samples
        flat = np.atleast_1d(arr).ravel()
        vals = np.empty_like(flat)
        for i, ri in enumerate(flat):
            total = omega_s[-1] * (1 - r_s[-1])
            lo = max(ri, r_s[0])
            if lo < r_s[-1]:
                total += float(w._pchip.integrate(lo, r_s[-1]))
            if ri < r_s[0]:
                total += omega_s[0] * (r_s[0] - ri)
            vals[i] = n * total
        out = vals.reshape(np.shape(arr))
    if np.ndim(out) == 0:
        return float(out)
    return out


def moment(w: RadialWeight, x: float) -> float:
    """
    计算矩 μ_x=∫_0^1 s^x ω(s)ds，结果缓存在权函数的 MomentTable 中。
    :param w: 权函数
    :param x: 指数，x ≥ 0
    :return: μ_x > 0
    """
    if not x >= 0:
        raise DomainError(f"矩的指数必须非负，收到 {x}")
    return float(w.moments.get_many([x])[0])


def moments(w: RadialWeight, xs) -> np.ndarray:
    """
    批量计算矩，供核级数和 Hankel Gram 矩阵使用。
    """
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0):
        raise DomainError("矩的指数必须非负")
    return w.moments.get_many(xs)


def weight_disc_mass(w: RadialWeight, z: complex, r: float, rule: DiscRule | None = None) -> float:
    """
    计算 Bergman 圆盘上的权质量 ω(D(z,r))=∫_{D(z,r)} ω dA，dA 是归一化面积测度。
    :param w: 权函数
    :param z: 圆盘中心，|z|<1
    :param r: 双曲半径，r>0
    :param rule: 圆盘求积规则，默认 128×256
    :return: ω(D(z,r)) > 0
    """
    rule = rule or default_rule()
    nodes = bergman_disc_nodes(complex(z), r, rule)
    return float(np.sum(nodes.weights[0] * w.eval_gap(nodes.gap[0])))


def weight_rule(w: RadialWeight, radial: int, angular: int) -> DiscRule:
    """
    整个圆盘上对 ω dA 积分用的规则：权函数在边界处有奇性时径向用 Gauss–Jacobi 节点。
    """
    return make_rule(radial, angular, w.endpoint_exponent)


def default_grid(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """
    默认的几何加密网格 r_k = 1 − 2^{−k/16}，k=0..points−1。
    """
    k = np.arange(points, dtype=float)
    return -np.expm1(-k / 16 * math.log(2))


def _plateau(ratio: np.ndarray) -> bool:
    """
    平台检验：最后四分之一网格上的比值不能超过第三个四分位点处比值的 1.05 倍。
    """
    if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0):
        return False
    q3 = int(round(0.75 * (len(ratio) - 1)))
    return bool(np.max(ratio[q3:]) <= 1.05 * ratio[q3])


def smoothness_constant(w: RadialWeight, grid, s: float, samples: int = 9) -> float:
    """
    正则权的局部光滑常数：网格上 max ω(t)/ω(r) 与 ω(r)/ω(t) 的最大值，r ≤ t ≤ r+s(1−r)。
    """
    grid = np.asarray(grid, dtype=float)
    frac = np.linspace(0.0, s, samples)
    t = grid[:, None] + frac[None, :] * (1 - grid[:, None])
    wr = w(grid)[:, None]
    wt = w(t)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.maximum(wt / wr, wr / wt)
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    return float(np.max(ratio))


def classify(w: RadialWeight, grid=None, k_candidates: tuple = (2, 4, 8, 16, 64)) -> dict:
    """
    判断权函数是否属于 D̂、Ď、R 类，返回 WeightClassReport（字典形式）。

    - D̂：ω̂(r)/ω̂((1+r)/2) 在网格上有界，见证常数 C 取网格最大值。
    - Ď：对候选的 K 依次检验 ω̂(r)/∫_r^{1−(1−r)/K} ω 是否有界，取第一个通过的 K。
    - R：ω̂(r)/(ω(r)(1−r)) 及其倒数都有界。
    有界性用平台检验判断（有限网格无法证明渐近性，只能检测增长趋势）。

    :param w: 权函数
    :param grid: 严格递增、位于 [0,1) 内的半径网格，至少 16 个点；默认 256 点几何网格
    :param k_candidates: Ď 类的候选 K
    :return: WeightClassReport 字典
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size < 16:
        raise ConfigError('grid', f"分类网格至少需要 16 个点，收到 {grid.size} 个")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] >= 1:
        raise ConfigError('grid', "分类网格必须严格递增并位于 [0,1) 内")

    hat = omega_hat(w, grid)
    with np.errstate(divide='ignore', invalid='ignore'):
        dhat_ratio = hat / omega_hat(w, (1 + grid) / 2)
        dhat = {'holds': _plateau(dhat_ratio), 'witness_C': float(np.max(dhat_ratio))}

        dcheck = {'holds': False, 'witness_K': float(k_candidates[-1]), 'witness_C': math.inf}
        for k in k_candidates:
            inner = hat - omega_hat(w, 1 - (1 - grid) / k)
            ratio = hat / inner
            if _plateau(ratio):
                dcheck = {'holds': True, 'witness_K': float(k), 'witness_C': float(np.max(ratio))}
                break

        reg_ratio = hat / (w(grid) * (1 - grid))
        regular = {
            'holds': _plateau(reg_ratio) and _plateau(1 / reg_ratio),
            'ratio_min': float(np.min(reg_ratio)),
            'ratio_max': float(np.max(reg_ratio)),
        }

    smoothness = {}
    if regular['holds']:
        for s in (0.25, 0.5):
            smoothness[str(s)] = smoothness_constant(w, grid, s)

    report = {
        'weight': w.label,
        'dhat': dhat,
        'dcheck': dcheck,
        'd_class': dhat['holds'] and dcheck['holds'],
        'regular': regular,
        'smoothness': smoothness,
        'grid_max_r': float(grid[-1]),
        'grid_points': int(grid.size),
    }
    global_vars.lq.push(('权函数分类', 'Success',
                         f"{w.label}: D̂={dhat['holds']}, Ď={dcheck['holds']}, R={regular['holds']}"))
    return report


def disc_mass_profile(w: RadialWeight, radii, r: float, rule: DiscRule | None = None) -> dict:
    """
    正则权的圆盘质量可比性：ω(D(z,r))/(ω̂(z)(1−|z|)) 与 ω(D(z,r))/(ω(z)(1−|z|)²) 在径向网格上的范围。
    """
    radii = _check_radius(radii)
    mass = np.array([weight_disc_mass(w, complex(x), r, rule) for x in radii])
    hat_ratio = mass / (omega_hat(w, radii) * (1 - radii))
    pointwise_ratio = mass / (w(radii) * (1 - radii) ** 2)
    return {
        'r': r,
        'radii': radii.tolist(),
        'hat_ratio': [float(np.min(hat_ratio)), float(np.max(hat_ratio))],
        'pointwise_ratio': [float(np.min(pointwise_ratio)), float(np.max(pointwise_ratio))],
    }


def standard(eta: float, normalization: float = 1.0) -> RadialWeight:
    """
    标准权 (η+1)(1−r²)^η。
    """
    return RadialWeight('standard', {'eta': float(eta)}, normalization)


def log_power(alpha: float, beta: float, normalization: float = 1.0) -> RadialWeight:
    """
    对数幂权 (1−r)^α (log(e/(1−r)))^β。
    """
    return RadialWeight('logpow', {'alpha': float(alpha), 'beta': float(beta)}, normalization)


def tabulated(r, omega, normalization: float = 1.0, source: str | None = None) -> RadialWeight:
    """
    表格权，采样之间用单调三次插值（PCHIP），采样必须覆盖到 r ≥ 0.999。
    """
    r = np.asarray(r, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if r.ndim != 1 or r.size < 4 or r.size != omega.size:
        raise ConfigError('weight', "表格权至少需要 4 个 (r, omega) 采样")
    if np.any(np.diff(r) <= 0) or r[0] < 0 or r[-1] >= 1:
        raise ConfigError('weight', "表格权的 r 必须严格递增并位于 [0,1) 内")
    if r[-1] < TABLE_MIN_REACH:
        raise ConfigError('weight', f"表格权的采样必须覆盖到 r ≥ {TABLE_MIN_REACH}，最后一个采样是 {r[-1]}")
    if np.any(omega < 0) or not np.any(omega > 0):
        raise ConfigError('weight', "表格权的 omega 必须非负且不全为零")
    return RadialWeight('table', {}, normalization, samples=(r, omega), source=source)


def load_weight_table(path: str, normalization: float = 1.0) -> RadialWeight:
    """
    从 CSV 文件读取表格权，文件需要带表头 r,omega。
    """
    try:
        df = pd.read_csv(path)
    except (OSError, ValueError) as e:
        raise ConfigError('weight', f"无法读取权函数表格 {path}: {e}")
    if 'r' not in df.columns or 'omega' not in df.columns:
        raise ConfigError('weight', f"权函数表格 {path} 必须带表头 r,omega")
    return tabulated(df['r'].to_numpy(dtype=float), df['omega'].to_numpy(dtype=float), normalization, path)


def parse_weight(spec: str) -> RadialWeight:
    """
    解析权函数描述：standard:eta=<实数>，logpow:alpha=<实数>,beta=<实数>，table:<路径.csv>。
    前两种可以附加 ,norm=<实数> 指定归一化常数。
    """
    spec = spec.strip()
    kind, _, rest = spec.partition(':')
    if kind == 'table':
        if not rest:
            raise ConfigError('weight', f"表格权需要给出 CSV 路径: {spec}")
        return load_weight_table(rest)
    if kind not in ('standard', 'logpow'):
        raise ConfigError('weight', f"未知的权函数类型 '{kind}'，可选 standard、logpow、table")
    values = {}
    for item in filter(None, rest.split(',')):
        key, eq, value = item.partition('=')
        try:
            values[key.strip()] = float(value)
        except ValueError:
            raise ConfigError('weight', f"无法解析 '{item}'（{spec}）")
        if not eq:
            raise ConfigError('weight', f"无法解析 '{item}'（{spec}）")
    norm = values.pop('norm', 1.0)
    required = {'standard': {'eta'}, 'logpow': {'alpha', 'beta'}}[kind]
    if set(values) != required:
        raise ConfigError('weight', f"{kind} 权需要参数 {sorted(required)}，收到 {sorted(values)}")
    try:
        if kind == 'standard':
            return standard(values['eta'], norm)
        return log_power(values['alpha'], values['beta'], norm)
    except DomainError as e:
        raise ConfigError('weight', str(e))


def format_weight(w: RadialWeight) -> str:
    """
    权函数的描述字符串，与 parse_weight 互逆。
    """
    norm = '' if w.normalization == 1.0 else f",norm={w.normalization:g}"
    if w.kind == 'standard':
        return f"standard:eta={w.params['eta']:g}{norm}"
    if w.kind == 'logpow':
        return f"logpow:alpha={w.params['alpha']:g},beta={w.params['beta']:g}{norm}"
    return f"table:{w._source or 'inline'}"
