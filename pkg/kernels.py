"""
该模块计算再生核：

- A²_ω 的再生核 B^ω_z(ζ)=Σ c_n (z̄ζ)^n，c_n=1/(2μ_{2n+1})，按几何尾部界截断。
- 标准核 K^η_z(ζ)=(1−z̄ζ)^{−η}（主值分支）。
- 归一化核 k^{η+2}_{ω,z}=K^{η+2}_z/‖K^{η+2}_z‖_{A²_ω}，以及它在单项式基 {ζ^n} 下的系数，供 Berezin 变换、
  Hankel 作用和综合算子共用。
"""

" 内置模块 "
import functools
import math
from typing import NamedTuple

" 第三方模块 "
import numpy as np
from numpy.polynomial import polynomial as npoly

" 自定义模块 "
from errors import ConvergenceError, DomainError
from weights import RadialWeight, moments, omega_hat, weight_disc_mass
import global_vars

# 级数的默认相对精度
KERNEL_TOL = 1e-14

# 级数项数上限
N_MAX = 20000

# |z̄ζ| 的上限
MAX_PRODUCT = 0.9999

# 分块求和时一块的长度
CHUNK = 1024

# 高于这个下标时二项式系数改在对数空间递推
LOG_SPACE_FROM = 1000

# 按行计算系数矩阵时一个分块的元素个数
MATRIX_CHUNK = 1 << 22


class KernelValue(NamedTuple):
    value: complex
    bound: float
    terms: int


class KernelCoefficients(NamedTuple):
    """
    k^{η+2}_{ω,z}=Σ kappa[n] ζ^n，norm=‖K^{η+2}_z‖_{A²_ω}。
    """
    kappa: np.ndarray
    norm: float
    terms: int


def bergman_coefficients(w: RadialWeight, count: int) -> np.ndarray:
    """
    c_n=1/(2μ_{2n+1})，n=0..count−1。
    """
    return 1 / (2 * moments(w, 2 * np.arange(count) + 1))


def basis_norms_sq(w: RadialWeight, count: int) -> np.ndarray:
    """
    h_n=‖ζ^n‖²_{A²_ω}=2μ_{2n+1}。
    """
    return 2 * moments(w, 2 * np.arange(count) + 1)


def binomial_log_coefficients(eta: float, count: int) -> np.ndarray:
    """
    (1−x)^{−(η+2)}=Σ d_n x^n 的系数取对数，d_{n+1}=d_n(n+η+2)/(n+1)。
    前 LOG_SPACE_FROM 项直接连乘，之后在对数空间累加，避免大 η 时溢出。
    """
    n = np.arange(count - 1, dtype=float)
    ratio = (n + eta + 2) / (n + 1)
    head = min(count - 1, LOG_SPACE_FROM)
    out = np.zeros(count)
    with np.errstate(divide='ignore'):
        out[1:head + 1] = np.log(np.cumprod(ratio[:head]))
    if count - 1 > head:
        out[head + 1:] = out[head] + np.cumsum(np.log(ratio[head:]))
    return out


def kernel_eval(w: RadialWeight, z: complex, zeta: complex, tol: float = KERNEL_TOL,
                n_max: int = N_MAX) -> KernelValue:
    """
    用矩级数计算 B^ω_z(ζ)。当当前项与部分和之比小于 tol，并且几何尾部界 term·q/(1−q) 也小于 tol·|部分和| 时停止，
    q=|z̄ζ|·c_{n+1}/c_n。
    :return: KernelValue(value, bound, terms)
    """
    x = complex(np.conj(z) * zeta)
    if abs(x) > MAX_PRODUCT:
        raise DomainError(f"|z̄ζ|={abs(x):.6g} 超过上限 {MAX_PRODUCT}")
    partial = 0j
    start = 0
    while start < n_max:
        stop = min(start + CHUNK, n_max)
        n = np.arange(start, stop)
        c = bergman_coefficients_range(w, start, stop + 1)
        terms = c[:-1] * np.power(x, n)
        sums = partial + np.cumsum(terms)
        q = abs(x) * c[1:] / c[:-1]
        mag = np.abs(terms)
        with np.errstate(divide='ignore', invalid='ignore'):
            tail = np.where(q < 1, mag * q / (1 - q), np.inf)
        done = (mag <= tol * np.abs(sums)) & (tail <= tol * np.abs(sums))
        if np.any(done):
            k = int(np.argmax(done))
            return KernelValue(complex(sums[k]), float(tail[k]), int(n[k]) + 1)
        partial = complex(sums[-1])
        start = stop
    raise ConvergenceError(f"核级数在 {n_max} 项内没有收敛（|z̄ζ|={abs(x):.6g}, tol={tol:g}）")


def bergman_coefficients_range(w: RadialWeight, start: int, stop: int) -> np.ndarray:
    return 1 / (2 * moments(w, 2 * np.arange(start, stop) + 1))


def kernel_eval_many(w: RadialWeight, u, zeta, tol: float = KERNEL_TOL) -> np.ndarray:
    """
    逐元素计算 B^ω_u(ζ)。标准权用闭式 (1−ūζ)^{−(η+2)}/归一化常数，其它权先按最大的 |ūζ| 定出项数再用 Horner 求值。
    """
    x = np.conj(np.asarray(u, dtype=complex)) * np.asarray(zeta, dtype=complex)
    if x.size and np.max(np.abs(x)) > MAX_PRODUCT:
        raise DomainError(f"|ūζ|={np.max(np.abs(x)):.6g} 超过上限 {MAX_PRODUCT}")
    if w.kind == 'standard':
        return (1 - x) ** (-(w.params['eta'] + 2)) / w.normalization
    x_max = float(np.max(np.abs(x))) if x.size else 0.0
    terms = kernel_eval(w, math.sqrt(x_max), math.sqrt(x_max), tol).terms
    return npoly.polyval(x, bergman_coefficients(w, terms))


def kernel_norm_sq(w: RadialWeight, z: complex, tol: float = KERNEL_TOL) -> float:
    """
    ‖B^ω_z‖²_{A²_ω}=B^ω_z(z)。
    """
    if not abs(z) < 1:
        raise DomainError(f"z 必须在单位圆盘内，收到 {z}")
    return kernel_eval(w, z, z, tol).value.real


def standard_kernel_eval(eta: float, z, zeta):
    """
    K^η_z(ζ)=(1−z̄ζ)^{−η}，主值分支。
    """
    out = (1 - np.conj(np.asarray(z, dtype=complex)) * np.asarray(zeta, dtype=complex)) ** (-eta)
    return complex(out) if np.ndim(out) == 0 else out


def _norm_terms(w: RadialWeight, eta: float, radius: float, tol: float, n_max: int) -> int:
    """
    ‖K^{η+2}_z‖² = Σ d_n²|z|^{2n} h_n 在 |z|=radius 时需要的项数。
    """
    if radius == 0:
        return 1
    log_r = math.log(radius)
    start = 0
    partial = 0.0
    log_d = binomial_log_coefficients(eta, n_max + 1)
    q = math.inf
    while start < n_max:
        stop = min(start + CHUNK, n_max)
        n = np.arange(start, stop + 1)
        log_a = 2 * log_d[start:stop + 1] + 2 * n * log_r + np.log(basis_norms_sq_range(w, start, stop + 1))
        a = np.exp(log_a)
        sums = partial + np.cumsum(a[:-1])
        q_all = a[1:] / a[:-1]
        with np.errstate(divide='ignore', invalid='ignore'):
            tail = np.where(q_all < 1, a[:-1] * q_all / (1 - q_all), np.inf)
        done = (a[:-1] <= tol * sums) & (tail <= tol * sums)
        if np.any(done):
            return int(n[int(np.argmax(done))]) + 1
        partial = float(sums[-1])
        q = float(q_all[-1])
        start = stop
    if q >= 1:
        raise DomainError(f"‖K^{{η+2}}_z‖ 的级数在 η={eta} 下发散（|z|={radius:.6g}），请取更大的 η")
    raise ConvergenceError(f"‖K^{{η+2}}_z‖ 的级数在 {n_max} 项内没有收敛（|z|={radius:.6g}, η={eta}）")


def basis_norms_sq_range(w: RadialWeight, start: int, stop: int) -> np.ndarray:
    return 2 * moments(w, 2 * np.arange(start, stop) + 1)


def kernel_coefficient_rows(w: RadialWeight, eta: float, zs, tol: float = KERNEL_TOL,
                            n_max: int = N_MAX) -> tuple[np.ndarray, np.ndarray]:
    """
    一批点 zs 上 k^{η+2}_{ω,z} 的单项式系数。返回 (kappa, norms)：kappa 形状 (len(zs), 项数)，
    项数按 zs 中最大的模长确定。
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex)).ravel()
    if zs.size and np.max(np.abs(zs)) >= 1:
        raise DomainError("z 必须在单位圆盘内")
    radius = float(np.max(np.abs(zs))) if zs.size else 0.0
    count = _norm_terms(w, eta, radius, tol, n_max)
    log_d = binomial_log_coefficients(eta, count)
    log_h = np.log(basis_norms_sq(w, count))
    n = np.arange(count)
    with np.errstate(divide='ignore', invalid='ignore'):
        log_abs = np.log(np.abs(zs))
        log_mag = log_d[None, :] + np.where(n[None, :] == 0, 0.0, n[None, :] * log_abs[:, None])
    log_norm_sq = np.log(np.sum(np.exp(2 * log_mag + log_h[None, :]), axis=1))
    kappa = np.exp(log_mag - 0.5 * log_norm_sq[:, None]) * np.exp(-1j * n[None, :] * np.angle(zs)[:, None])
    return kappa, np.exp(0.5 * log_norm_sq)


@functools.lru_cache(maxsize=4096)
def _cached_coefficients(w: RadialWeight, eta: float, z: complex, tol: float) -> KernelCoefficients:
    kappa, norms = kernel_coefficient_rows(w, eta, [z], tol)
    return KernelCoefficients(kappa[0], float(norms[0]), kappa.shape[1])


def kernel_coefficients(w: RadialWeight, eta: float, z: complex, tol: float = KERNEL_TOL) -> KernelCoefficients:
    """
    k^{η+2}_{ω,z} 在 {ζ^n} 下的系数 d_n z̄^n/‖K^{η+2}_z‖，截断到级数收敛为止。
    """
    return _cached_coefficients(w, float(eta), complex(z), float(tol))


def normalized_kernel_norm(w: RadialWeight, eta: float, z: complex) -> float:
    """
    ‖K^{η+2}_z‖_{A²_ω}=(Σ d_n²|z|^{2n}·2μ_{2n+1})^{1/2}。
    """
    return kernel_coefficients(w, eta, z).norm


def normalized_kernel_eval(w: RadialWeight, eta: float, z: complex, zeta):
    """
    k^{η+2}_{ω,z}(ζ)=K^{η+2}_z(ζ)/‖K^{η+2}_z‖_{A²_ω}。
    """
    return standard_kernel_eval(eta + 2, z, zeta) / normalized_kernel_norm(w, eta, z)


def kernel_norm_profile(w: RadialWeight, radii, r_list, rule=None) -> dict:
    """
    比较 ‖B^ω_z‖²、ω(D(z,r))^{−1}、(ω̂(z)(1−|z|))^{−1} 三个量，给出两两比值在径向网格上的范围。
    """
    radii = np.asarray(radii, dtype=float)
    norm_sq = np.array([kernel_norm_sq(w, x) for x in radii])
    hat_inv = 1 / (omega_hat(w, radii) * (1 - radii))
    out = {'radii': radii.tolist(), 'norm_over_hat': [float(np.min(norm_sq / hat_inv)), float(np.max(norm_sq / hat_inv))]}
    for r in r_list:
        disc_inv = np.array([1 / weight_disc_mass(w, complex(x), r, rule) for x in radii])
        out[f'r={r:g}'] = {
            'norm_over_disc': [float(np.min(norm_sq / disc_inv)), float(np.max(norm_sq / disc_inv))],
            'disc_over_hat': [float(np.min(disc_inv / hat_inv)), float(np.max(disc_inv / hat_inv))],
        }
    global_vars.lq.push(('核范数渐近', 'Success', f"{w.label}: ‖B_z‖²·ω̂(z)(1−|z|) ∈ {out['norm_over_hat']}"))
    return out
