"""
该模块实现单位圆盘上的数值积分：

- DiscRule：径向 Gauss–Legendre 乘以等距角度节点的乘积求积规则，面积测度归一化（∫_𝔻 1 dA = 1）。
- Bergman 圆盘上的积分：通过 ζ=φ_z(w) 换元到 |w|<tanh r 上，不使用示性函数截断。
- 不变测度 dλ=dA/(1−|z|²)² 上的截断积分，节点在 R_max 附近加密，并给出尾部趋势标记。
"""

" 内置模块 "
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

" 第三方模块 "
import numpy as np
from scipy import special

" 自定义模块 "
from errors import ConfigError, NumericalError
from geometry import mobius

# 最外层两个壳的贡献之比超过该值时认为积分在截断处发散
TAIL_DIVERGENCE_RATIO = 0.8


@dataclass(frozen=True, eq=False)
class DiscRule:
    """
    圆盘 |w|<rho 上的乘积求积规则。径向 radial_count 个 Gauss–Legendre 节点，角度 angular_count 个等距节点。
    对 z^m z̄^n 在 m+n ≤ 2·radial_count−2 且 |m−n| < angular_count 时精确。
    alpha ≠ 0 时径向改用 Gauss–Jacobi 节点，端点因子 (1−|w|/rho)^alpha 已从权重中除去，
    被积函数照常传入即可，用于边界处带 (1−r)^alpha 奇性的权函数。
    """
    radial_count: int
    angular_count: int
    rho: float = 1.0
    alpha: float = 0.0
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.radial_count < 1 or self.angular_count < 1:
            raise ConfigError('quadrature', f"求积节点数必须为正，收到 {self.radial_count}×{self.angular_count}")
        if not self.alpha > -1:
            raise ConfigError('quadrature', f"Gauss–Jacobi 端点指数必须大于 -1，收到 {self.alpha}")
        if self.alpha == 0:
            x, wx = special.roots_legendre(self.radial_count)
            s = (x + 1) / 2
            ws = wx / 2
        else:
            # ∫_0^1 G ds = 2^{−α−1} Σ w_i G(s_i)/(1−s_i)^α
            x, wx = special.roots_jacobi(self.radial_count, self.alpha, 0.0)
            s = (x + 1) / 2
            ws = wx * 2.0 ** (-self.alpha - 1) / (1 - s) ** self.alpha
        theta = 2 * np.pi * np.arange(self.angular_count) / self.angular_count
        nodes = (self.rho * s[:, None] * np.exp(1j * theta[None, :])).ravel()
        weights = np.repeat(self.rho ** 2 * 2 * s * ws / self.angular_count, self.angular_count)
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'weights', weights)

    def __len__(self):
        return len(self.nodes)

    def scaled(self, rho: float) -> 'DiscRule':
        """
        同样的规则搬到 |w|<rho 上。
        """
        return _scaled_rule(self.radial_count, self.angular_count, float(rho), self.alpha)


@functools.lru_cache(maxsize=64)
def _scaled_rule(radial: int, angular: int, rho: float, alpha: float = 0.0) -> DiscRule:
    return DiscRule(radial, angular, rho, alpha)


@functools.lru_cache(maxsize=16)
def make_rule(radial: int, angular: int, alpha: float = 0.0) -> DiscRule:
    """
    带缓存的规则构造。
    """
    return DiscRule(radial, angular, alpha=float(alpha))


def default_rule() -> DiscRule:
    return make_rule(128, 256)


def _check_finite(values: np.ndarray, points: np.ndarray) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
        node = points[idx] if np.shape(points) == np.shape(values) else points.ravel()[int(np.argmax(bad.ravel()))]
        raise NumericalError(f"被积函数在节点 {complex(node):.6g} 处取值 {values[idx]}，不是有限数")


def integrate_disc(g: Callable, rule: DiscRule) -> complex:
    """
    ∫_𝔻 g dA（或 |w|<rule.rho 上的积分）。g 必须接受复数数组。
    """
    values = np.broadcast_to(np.asarray(g(rule.nodes), dtype=complex), rule.nodes.shape)
    _check_finite(values, rule.nodes)
    return complex(np.sum(rule.weights * values))


class DiscNodes(NamedTuple):
    """
    Bergman 圆盘 D(z,r) 上换元后的节点：points=φ_z(w)，weights 已含 Jacobian，gap=1−|points|²。
    """
    points: np.ndarray
    weights: np.ndarray
    gap: np.ndarray


def bergman_disc_nodes(z, r: float, rule: DiscRule) -> DiscNodes:
    """
    生成 D(z,r) 上的求积节点。z 可以是数组，返回形状为 z.shape + (节点数,)，标量 z 按长度 1 的数组处理，
    返回 (1, 节点数)。
    换元 ζ=φ_z(w)，|w|<tanh r，Jacobian ((1−|z|²)/|1−z̄w|²)²，并用
    1−|φ_z(w)|² = (1−|z|²)(1−|w|²)/|1−z̄w|² 保持边界附近的相对精度。
    """
    t = math.tanh(r)
    local = rule.scaled(t)
    z = np.atleast_1d(np.asarray(z, dtype=complex))[..., None]
    w = local.nodes
    one_minus_z = 1 - np.abs(z) ** 2
    denom = np.abs(1 - np.conj(z) * w) ** 2
    points = mobius(z, w)
    weights = local.weights * (one_minus_z / denom) ** 2
    gap = one_minus_z * (1 - np.abs(w) ** 2) / denom
    return DiscNodes(np.asarray(points), weights, gap)


def integrate_bergman_disc(g: Callable, z: complex, r: float, rule: DiscRule) -> complex:
    """
    ∫_{D(z,r)} g dA = ∫_{|w|<tanh r} g(φ_z(w)) ((1−|z|²)/|1−z̄w|²)² dA(w)。
    """
    nodes = bergman_disc_nodes(complex(z), r, rule)
    values = np.broadcast_to(np.asarray(g(nodes.points[0]), dtype=complex), nodes.points[0].shape)
    _check_finite(values, nodes.points[0])
    return complex(np.sum(nodes.weights[0] * values))


@dataclass(frozen=True)
class InvariantIntegral:
    value: float | complex
    R_max: float
    tail_ratio: float
    divergent: bool


@dataclass(frozen=True, eq=False)
class InvariantNodes:
    points: np.ndarray
    weights: np.ndarray
    shell: np.ndarray
    R_max: float


@functools.lru_cache(maxsize=32)
def invariant_nodes(R_max: float, radial: int, angular: int) -> InvariantNodes:
    """
    |z|<R_max 上关于 dλ 的求积节点。径向变量取 ρ=arctanh|z|，此时 dλ=(sinh 2ρ/2)dρ dθ/π。
    [0,P] 分成三段 [0,P−2Δ]、[P−2Δ,P−Δ]、[P−Δ,P]，P=arctanh R_max，Δ=min(0.35,P/3)，每段复合 Gauss–Legendre。
    shell 记录节点所在的段（0、1、2），用于尾部趋势判断。
    """
    if not 0 < R_max < 1:
        raise ConfigError('R_max', f"截断半径必须在 (0,1) 内，收到 {R_max}")
    big_p = math.atanh(R_max)
    delta = min(0.35, big_p / 3)
    edges = [0.0, big_p - 2 * delta, big_p - delta, big_p]
    x, wx = special.roots_legendre(radial)
    theta = 2 * np.pi * np.arange(angular) / angular
    points, weights, shell = [], [], []
    for k in range(3):
        a, b = edges[k], edges[k + 1]
        rho = a + (b - a) * (x + 1) / 2
        w_rho = (b - a) / 2 * wx * np.sinh(2 * rho) / 2 * 2 / angular
        points.append((np.tanh(rho)[:, None] * np.exp(1j * theta[None, :])).ravel())
        weights.append(np.repeat(w_rho, angular))
        shell.append(np.full(radial * angular, k))
    return InvariantNodes(np.concatenate(points), np.concatenate(weights), np.concatenate(shell), float(R_max))


def sum_invariant(values, nodes: InvariantNodes) -> InvariantIntegral:
    """
    由节点上的函数值组装 dλ 积分和尾部比值（最外层壳的贡献除以前一层壳的贡献，复值时取模）。
    实值输入给出 float，复值输入给出 complex。
    """
    values = np.asarray(values)
    if not np.iscomplexobj(values):
        values = values.astype(float)
    _check_finite(values, nodes.points)
    contrib = nodes.weights * values
    outer = abs(np.sum(contrib[nodes.shell == 2]))
    inner = abs(np.sum(contrib[nodes.shell == 1]))
    if inner > 0:
        ratio = float(outer / inner)
    else:
        ratio = 0.0 if outer == 0 else math.inf
    total = complex(np.sum(contrib)) if np.iscomplexobj(contrib) else float(np.sum(contrib))
    return InvariantIntegral(total, nodes.R_max, ratio, ratio > TAIL_DIVERGENCE_RATIO)


def integrate_invariant(g: Callable, R_max: float, rule: DiscRule) -> InvariantIntegral:
    """
    ∫_{|z|<R_max} g dλ，value 为复数。rule 只提供每段的径向、角度节点数。
    """
    nodes = invariant_nodes(float(R_max), rule.radial_count, rule.angular_count)
    values = np.broadcast_to(np.asarray(g(nodes.points), dtype=complex), nodes.points.shape)
    return sum_invariant(values, nodes)
