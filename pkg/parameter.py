"""
该模块负责实验参数的保存、加载和校验。具体功能包括：

- ExperimentConfig 及其嵌套配置（格点、求积、趋势判断、引理验证）的定义和默认值。
- 从 JSON 文件加载参数：未知字段在任何层级都会被拒绝，错误信息给出点分字段路径。
- 把命令行覆盖项合并进配置，并用同样的规则校验。
- 把当前参数保存为 JSON 文件（缩进 4）。
"""

" 内置模块 "
import dataclasses
import json
import math
from dataclasses import dataclass, field

" 自定义模块 "
from errors import ConfigError
from symbols import parse_symbol
from weights import parse_weight


@dataclass
class LatticeConfig:
    r: float = 0.5
    R_max: float = 0.995
    max_points: int = 200000


@dataclass
class QuadratureConfig:
    disc: list = field(default_factory=lambda: [128, 256])
    berezin: list = field(default_factory=lambda: [32, 64])
    local: list = field(default_factory=lambda: [24, 48])
    invariant: list = field(default_factory=lambda: [24, 48])
    double: list = field(default_factory=lambda: [12, 24])


@dataclass
class TrendConfig:
    integral_radii: list = field(default_factory=lambda: [0.98, 0.995])
    lattice_radii: list = field(default_factory=lambda: [0.98, 0.995])
    growth: float = 0.25


@dataclass
class LemmaConfig:
    grid_radii: list = field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95])
    grid_angles: int = 8
    c: list = field(default_factory=lambda: [0.0, 1.0])
    kernel_norm_r: list = field(default_factory=lambda: [0.25, 1.0])
    synthesis_r: list = field(default_factory=lambda: [1.0, 0.5, 0.25])
    synthesis_R_max: float = 0.9
    pairs: int = 40


@dataclass
class ExperimentConfig:
    weights: list = field(default_factory=lambda: ['standard:eta=0', 'standard:eta=1', 'logpow:alpha=-0.5,beta=0'])
    symbols: list = field(default_factory=lambda: ['zbar', 'zbar2', 'absz2', 'zbar_zbar2', 'rez'])
    p: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    eta: list = field(default_factory=lambda: [4.0])
    r: list = field(default_factory=lambda: [math.atanh(0.5)])
    N: int = 128
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    trend: TrendConfig = field(default_factory=TrendConfig)
    lemmas: LemmaConfig = field(default_factory=LemmaConfig)
    classify_points: int = 256
    output: str = 'output'
    seed: int = 0
    workers: int = 4

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data, path: str):
    """
    按 dataclass 的字段从字典构造对象，未知字段报错。
    """
    if not isinstance(data, dict):
        raise ConfigError(path or 'config', f"需要一个 JSON 对象，收到 {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        full = f"{path}.{key}" if path else key
        if key not in known:
            raise ConfigError(full, "未知字段")
        default = known[key].default_factory() if known[key].default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, full)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"需要一个有限实数，收到 {value!r}")
    return float(value)


def _integer(value, path: str, low: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < low:
        raise ConfigError(path, f"需要一个 ≥ {low} 的整数，收到 {value!r}")
    return value


def _number_list(value, path: str, allow_empty: bool = False) -> list:
    if not isinstance(value, list) or (not value and not allow_empty):
        raise ConfigError(path, f"需要一个非空数组，收到 {value!r}")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _increasing_radii(value, path: str) -> list:
    radii = _number_list(value, path)
    if len(radii) < 2 or any(b <= a for a, b in zip(radii, radii[1:])) or not 0 < radii[0] or radii[-1] >= 1:
        raise ConfigError(path, f"需要至少两个严格递增、位于 (0,1) 内的半径，收到 {value!r}")
    return radii


def validate(config: ExperimentConfig) -> ExperimentConfig:
    """
    校验所有字段，并把数值统一成 float/int。出错时抛出带字段路径的 ConfigError。
    """
    if not isinstance(config.weights, list) or not config.weights:
        raise ConfigError('weights', "需要至少一个权函数")
    for i, spec in enumerate(config.weights):
        try:
            parse_weight(spec)
        except ConfigError as e:
            raise ConfigError(f"weights[{i}]", e.message)
    if not isinstance(config.symbols, list) or not config.symbols:
        raise ConfigError('symbols', "需要至少一个符号")
    for i, spec in enumerate(config.symbols):
        try:
            parse_symbol(spec)
        except ConfigError as e:
            raise ConfigError(f"symbols[{i}]", e.message)

    config.p = _number_list(config.p, 'p')
    if any(p <= 0 for p in config.p):
        raise ConfigError('p', f"p 必须为正数，收到 {config.p}")
    config.eta = _number_list(config.eta, 'eta')
    if any(eta <= -1 for eta in config.eta):
        raise ConfigError('eta', f"η 必须大于 -1，收到 {config.eta}")
    config.r = _number_list(config.r, 'r')
    if any(r <= 0 for r in config.r):
        raise ConfigError('r', f"局部半径必须为正，收到 {config.r}")
    config.N = _integer(config.N, 'N', 1)
    if config.N > 512:
        raise ConfigError('N', f"N 不能超过 512，收到 {config.N}")

    lat = config.lattice
    lat.r = _number(lat.r, 'lattice.r')
    if not 0 < lat.r <= 2:
        raise ConfigError('lattice.r', f"格点参数必须在 (0,2] 内，收到 {lat.r}")
    lat.R_max = _number(lat.R_max, 'lattice.R_max')
    if not 0 < lat.R_max < 1:
        raise ConfigError('lattice.R_max', f"截断半径必须在 (0,1) 内，收到 {lat.R_max}")
    lat.max_points = _integer(lat.max_points, 'lattice.max_points', 1)

    for name in ('disc', 'berezin', 'local', 'invariant', 'double'):
        sizes = getattr(config.quadrature, name)
        path = f"quadrature.{name}"
        if not isinstance(sizes, list) or len(sizes) != 2:
            raise ConfigError(path, f"需要 [径向, 角度] 两个整数，收到 {sizes!r}")
        setattr(config.quadrature, name, [_integer(sizes[0], f"{path}[0]", 4), _integer(sizes[1], f"{path}[1]", 4)])

    config.trend.integral_radii = _increasing_radii(config.trend.integral_radii, 'trend.integral_radii')
    config.trend.lattice_radii = _increasing_radii(config.trend.lattice_radii, 'trend.lattice_radii')
    config.trend.growth = _number(config.trend.growth, 'trend.growth')
    if config.trend.growth <= 0:
        raise ConfigError('trend.growth', f"增长阈值必须为正，收到 {config.trend.growth}")

    lem = config.lemmas
    lem.grid_radii = _number_list(lem.grid_radii, 'lemmas.grid_radii')
    if any(not 0 <= x < 1 for x in lem.grid_radii):
        raise ConfigError('lemmas.grid_radii', f"网格半径必须在 [0,1) 内，收到 {lem.grid_radii}")
    lem.grid_angles = _integer(lem.grid_angles, 'lemmas.grid_angles', 1)
    lem.c = _number_list(lem.c, 'lemmas.c')
    if any(c < 0 for c in lem.c):
        raise ConfigError('lemmas.c', f"c 必须非负，收到 {lem.c}")
    lem.kernel_norm_r = _number_list(lem.kernel_norm_r, 'lemmas.kernel_norm_r')
    lem.synthesis_r = _number_list(lem.synthesis_r, 'lemmas.synthesis_r')
    if any(not 0 < r <= 2 for r in lem.synthesis_r):
        raise ConfigError('lemmas.synthesis_r', f"格点参数必须在 (0,2] 内，收到 {lem.synthesis_r}")
    lem.synthesis_R_max = _number(lem.synthesis_R_max, 'lemmas.synthesis_R_max')
    if not 0 < lem.synthesis_R_max < 1:
        raise ConfigError('lemmas.synthesis_R_max', f"截断半径必须在 (0,1) 内，收到 {lem.synthesis_R_max}")
    lem.pairs = _integer(lem.pairs, 'lemmas.pairs', 1)

    config.classify_points = _integer(config.classify_points, 'classify_points', 16)
    if not isinstance(config.output, str) or not config.output:
        raise ConfigError('output', f"需要一个目录路径，收到 {config.output!r}")
    config.seed = _integer(config.seed, 'seed', 0)
    config.workers = _integer(config.workers, 'workers', 1)
    return config


def load_parameter(path: str | None = None) -> ExperimentConfig:
    """
    从 JSON 文件加载参数。path 为 None 时返回默认参数。
    """
    if path is None:
        return validate(ExperimentConfig())
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError('config', f"配置文件 {path} 不存在")
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError('config', f"无法读取配置文件 {path}: {e}")
    return validate(_build(ExperimentConfig, data, ''))


def apply_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """
    合并命令行覆盖项，键是点分字段路径，例如 'lattice.R_max'。值为 None 的项忽略。
    """
    data = config.to_dict()
    for key, value in overrides.items():
        if value is None:
            continue
        node = data
        parts = key.split('.')
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
    return validate(_build(ExperimentConfig, data, ''))


def save_parameter(config: ExperimentConfig, path: str) -> None:
    """
    将参数保存为 JSON 文件。
    """
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(config.to_dict(), f, indent=4, ensure_ascii=False)
