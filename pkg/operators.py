"""
该模块实现 A²_ω 上的算子：

- Bergman 投影 P_ω 在单项式上的闭式：P(z^p z̄^q)=(μ_{2p+1}/μ_{2(p−q)+1}) z^{p−q}（p ≥ q），否则为 0。
- Hankel 算子 H_f g=(I−P)(fg)、交换子 [M_f,P]g=f·P(g)−P(fg)。
- 截断正交基 {e_n=z^n/√(2μ_{2n+1})} 上的 Hankel Gram 矩阵 G_ij=⟨H_f e_i, H_f e_j⟩，全部由矩精确给出。
- Schatten p-范数、奇异值尾部斜率与发散判定。
- 归一化核 k^{η+2}_{ω,z} 上的 Hankel 范数，以及格点综合算子 A e_j=k^{η+2}_{ω,a_j}。
"""

" 内置模块 "
import math
from dataclasses import dataclass, field

" 第三方模块 "
import numpy as np
import scipy.linalg
from sklearn.linear_model import LinearRegression

" 自定义模块 "
from errors import ConvergenceError, NumericalError, ResourceError
from geometry import Lattice
from kernels import basis_norms_sq, kernel_coefficient_rows, kernel_coefficients
from symbols import SymbolPoly, inner_product, monomial, sym_mul
from weights import RadialWeight, moments
import global_vars

# Gram 矩阵的最大规模
MAX_N = 512

# 负特征值的容忍度（相对 ‖G‖）
PSD_TOL = 1e-9

# 特征值的舍入下限（相对 ⟨f e_i, f e_i⟩ 的量级）
ROUNDOFF = 1e-13

# 发散判定的斜率余量
SLOPE_MARGIN = 0.05


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """
    e_n=z^n/√(2μ_{2n+1})，n=0..size−1。
    """
    weight: RadialWeight
    size: int

    @property
    def norms_sq(self) -> np.ndarray:
        return basis_norms_sq(self.weight, self.size)

    def element(self, n: int) -> SymbolPoly:
        return monomial(n, 0, 1 / math.sqrt(self.norms_sq[n]))


@dataclass(frozen=True, eq=False)
class HankelGram:
    symbol: SymbolPoly
    weight: RadialWeight
    N: int
    matrix: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)


@dataclass
class SchattenReport:
    p: float
    N: int
    singular_values: np.ndarray
    norm_p: float
    tail_slope: float

    def to_dict(self) -> dict:
        return {
            'p': self.p,
            'N': self.N,
            'norm_p': self.norm_p,
            'tail_slope': self.tail_slope,
            'divergent': divergence_verdict(self),
            'singular_values': [float(s) for s in self.singular_values],
        }


def project(f: SymbolPoly, w: RadialWeight) -> SymbolPoly:
    """
    Bergman 投影 P_ω f，结果只含解析单项式。
    """
    keep = [(p, q, c) for (p, q), c in f.terms.items() if p >= q]
    if not keep:
        return SymbolPoly()
    mu_num = moments(w, [2 * p + 1 for p, _, _ in keep])
    mu_den = moments(w, [2 * (p - q) + 1 for p, q, _ in keep])
    terms = {}
    for (p, q, c), a, b in zip(keep, mu_num, mu_den):
        terms[(p - q, 0)] = terms.get((p - q, 0), 0j) + c * a / b
    return SymbolPoly(terms)


def hankel_apply(f: SymbolPoly, g: SymbolPoly, w: RadialWeight) -> SymbolPoly:
    """
    H_f g=fg−P(fg)，g 必须是解析多项式。
    """
    if not g.is_analytic():
        raise ValueError("Hankel 算子只作用在解析多项式上")
    fg = sym_mul(f, g)
    return fg - project(fg, w)


def commutator_apply(f: SymbolPoly, g: SymbolPoly, w: RadialWeight) -> SymbolPoly:
    """
    [M_f,P]g=f·P(g)−P(fg)。
    """
    return sym_mul(f, project(g, w)) - project(sym_mul(f, g), w)


def hankel_gram(f: SymbolPoly, w: RadialWeight, N: int, max_n: int = MAX_N) -> HankelGram:
    """
    截断基 {e_0..e_{N−1}} 上 H_f 的 Gram 矩阵 G_ij=⟨f e_i, f e_j⟩−⟨P(f e_i), P(f e_j)⟩。
    内部基扩展到 N+deg_z(f)，使每个 P(f e_i) 都是精确的。
    """
    if N > max_n:
        raise ResourceError(f"Gram 矩阵规模 N={N} 超过上限 {max_n}")
    terms = [(m, n, c) for (m, n), c in f.terms.items()]
    K = N + f.deg_z
    h = basis_norms_sq(w, N + f.deg_z + f.deg_zbar + 1)
    i = np.arange(N)
    scale = 1 / np.sqrt(h[:N])

    first = np.zeros((N, N), dtype=complex)
    for m1, n1, c1 in terms:
        for m2, n2, c2 in terms:
            shift = (m1 - n1) - (m2 - n2)
            j = i + shift
            ok = (j >= 0) & (j < N)
            first[i[ok], j[ok]] += c1 * np.conj(c2) * h[m1 + i[ok] + n2] * scale[i[ok]] * scale[j[ok]]

    # P(f e_i) 在正交基 e_k 下的系数
    coef = np.zeros((N, K), dtype=complex)
    for m, n, c in terms:
        k = m + i - n
        ok = k >= 0
        coef[i[ok], k[ok]] += c * h[m + i[ok]] * scale[i[ok]] / np.sqrt(h[k[ok]])
    second = coef @ coef.conj().T

    matrix = first - second
    matrix = (matrix + matrix.conj().T) / 2
    try:
        eig = scipy.linalg.eigvalsh(matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Gram 矩阵特征值分解失败: {e}")
    size = float(np.max(np.abs(eig))) if eig.size else 0.0
    # 容差以 ⟨f e_i, f e_i⟩ 的量级为准，解析符号时 G 本身只剩舍入误差
    scale_ref = max(size, float(np.max(np.abs(first)))) if first.size else 0.0
    if eig.size and eig[0] < -PSD_TOL * scale_ref:
        raise NumericalError(f"Gram 矩阵不是半正定的：最小特征值 {eig[0]:.3g}，‖G‖={size:.3g}")
    # 低于组装舍入水平的特征值按 0 处理
    eig = np.where(eig > ROUNDOFF * scale_ref, eig, 0.0)
    global_vars.lq.push(('Hankel Gram', 'Info', f"f={f!r}, ω={w.label}, N={N}, ‖G‖={size:.6g}"))
    return HankelGram(f, w, N, matrix, eig)


def singular_values(gram: HankelGram) -> np.ndarray:
    return np.sqrt(gram.eigenvalues)[::-1]


def tail_slope(s: np.ndarray) -> float:
    """
    对内部窗口 [N/4, N/2) 的奇异值做 log s_n 对 log(n+1) 的线性拟合，返回斜率。可用点少于 3 个时返回 −inf。
    截断维数附近的奇异值会塌缩（符号的 ∂̄f 在边界上模长不恒定时尤其明显），不进入拟合。
    """
    s = np.asarray(s, dtype=float)
    if s.size == 0 or s[0] <= 0:
        return -math.inf
    n = np.arange(s.size)
    start, stop = s.size // 4, s.size // 2
    mask = (n >= start) & (n < stop) & (s > 1e-14 * s[0])
    if np.count_nonzero(mask) < 3:
        return -math.inf
    model = LinearRegression().fit(np.log(n[mask] + 1.0).reshape(-1, 1), np.log(s[mask]))
    return float(model.coef_[0])


def schatten_norm(gram: HankelGram, p: float) -> SchattenReport:
    """
    ‖H_f‖_{S_p}=(Σ s_j^p)^{1/p}，s_j=√λ_j(G) 降序排列。
    """
    if not p > 0:
        raise ValueError(f"p 必须为正数，收到 {p}")
    s = singular_values(gram)
    total = float(np.sum(s ** p))
    norm = total ** (1 / p) if total > 0 else 0.0
    return SchattenReport(float(p), gram.N, s, norm, tail_slope(s))


def divergence_verdict(report: SchattenReport) -> bool:
    """
    Schatten 一侧的发散判定：尾部斜率 ≥ −1/p − 0.05 时认为 Σ s_n^p 发散。
    """
    return bool(report.tail_slope >= -1 / report.p - SLOPE_MARGIN)


def hankel_kernel_norm(f: SymbolPoly, w: RadialWeight, eta: float, z: complex) -> float:
    """
    ‖H_f k^{η+2}_{ω,z}‖_{L²_ω}=(‖f k‖²−‖P(f k)‖²)^{1/2}，全部由矩精确给出。
    """
    kc = kernel_coefficients(w, eta, z)
    kappa = kc.kappa
    count = kappa.size
    terms = [(m, n, c) for (m, n), c in f.terms.items()]
    if not terms:
        return 0.0
    h = basis_norms_sq(w, count + f.deg_z + f.deg_zbar + 1)
    idx = np.arange(count)

    full = 0j
    for m1, n1, c1 in terms:
        for m2, n2, c2 in terms:
            shift = (m1 - n1) - (m2 - n2)
            j = idx + shift
            ok = (j >= 0) & (j < count)
            full += c1 * np.conj(c2) * np.sum(kappa[ok] * np.conj(kappa[j[ok]]) * h[m1 + idx[ok] + n2])

    # P(f k)=Σ_k beta_k z^k
    beta = np.zeros(count + f.deg_z, dtype=complex)
    for m, n, c in terms:
        k = idx + m - n
        ok = k >= 0
        np.add.at(beta, k[ok], c * kappa[ok] * h[m + idx[ok]] / h[k[ok]])
    proj = float(np.sum(np.abs(beta) ** 2 * h[:beta.size]))

    diff = full.real - proj
    if diff < -1e-10 * max(full.real, 1.0):
        raise NumericalError(f"‖H_f k‖² 为负：{diff:.3g}（z={z}）")
    return math.sqrt(max(diff, 0.0))


def projection_form(w: RadialWeight, tests: list[SymbolPoly]) -> dict:
    """
    测试函数族 {u_j} 上的矩阵 P_ij=⟨P u_j, u_i⟩、(P²)_ij=⟨P P u_j, u_i⟩ 与 (P*)_ij=conj(⟨P u_i, u_j⟩)。
    """
    proj = [project(u, w) for u in tests]
    n = len(tests)
    p = np.array([[inner_product(proj[j], tests[i], w) for j in range(n)] for i in range(n)])
    pp = np.array([[inner_product(project(proj[j], w), tests[i], w) for j in range(n)] for i in range(n)])
    return {'P': p, 'PP': pp, 'Pstar': p.conj().T}


def commutator_forms(f: SymbolPoly, w: RadialWeight, tests: list[SymbolPoly]) -> tuple[np.ndarray, np.ndarray]:
    """
    返回两个矩阵：L_ij=⟨[M_f,P]u_j, u_i⟩ 与 R_ij=⟨H_f P u_j, u_i⟩−conj(⟨H_{f̄} P u_i, u_j⟩)，
    后者对应 H_f P−(H_{f̄}P)*。
    """
    fbar = f.conj()
    proj = [project(u, w) for u in tests]
    hf = [hankel_apply(f, pu, w) for pu in proj]
    hfbar = [hankel_apply(fbar, pu, w) for pu in proj]
    comm = [commutator_apply(f, u, w) for u in tests]
    n = len(tests)
    left = np.array([[inner_product(comm[j], tests[i], w) for j in range(n)] for i in range(n)])
    right = np.array([[inner_product(hf[j], tests[i], w) - np.conj(inner_product(hfbar[i], tests[j], w))
                       for j in range(n)] for i in range(n)])
    return left, right


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    matrix: np.ndarray
    operator_norm: float
    min_capture: float
    points: int


def synthesis_matrix(w: RadialWeight, eta: float, lattice: Lattice, N: int,
                     capture: float = 1 - 1e-6) -> SynthesisResult:
    """
    综合算子 A e_j=k^{η+2}_{ω,a_j} 在正交基 {e_n} 下的矩阵（N 行，每个格点一列），算子范数取最大奇异值。
    每一列在前 N 个基向量上的能量必须至少为 capture。
    """
    points = lattice.points
    kappa, _ = kernel_coefficient_rows(w, eta, points)
    count = kappa.shape[1]
    rows = min(N, count)
    h = basis_norms_sq(w, rows)
    matrix = (kappa[:, :rows] * np.sqrt(h)[None, :]).T
    energy = np.sum(np.abs(matrix) ** 2, axis=0)
    worst = float(np.min(energy)) if energy.size else 1.0
    if worst < capture:
        j = int(np.argmin(energy))
        raise ConvergenceError(f"N={N} 只保留了格点 {points[j]:.4g} 处归一化核 {worst:.8f} 的能量，"
                               f"要求 {capture}，请增大 N")
    norm = float(scipy.linalg.svdvals(matrix)[0]) if matrix.size else 0.0
    global_vars.lq.push(('综合算子', 'Info', f"{w.label}, η={eta}, {len(points)} 个格点: ‖A‖≈{norm:.6g}"))
    return SynthesisResult(matrix, norm, worst, len(points))
