"""
该模块实现单位圆盘上的 Bergman 几何：

- Möbius 变换 φ_z(ζ)=(z−ζ)/(1−z̄ζ) 与 Bergman 距离 β(z,ζ)=arctanh|φ_z(ζ)|。
- Bergman 圆盘 D(z,r)，成员关系以 |φ_z(ζ)|<tanh r 为准，欧氏圆心和半径由它导出。
- r-格点的确定性环形构造、暴力验证（分离性、覆盖性、最大重叠数）以及 CSV 导入导出。
"""

" 内置模块 "
import math
from dataclasses import dataclass

" 第三方模块 "
import numpy as np
import pandas as pd

" 自定义模块 "
from errors import ConfigError, DomainError, ResourceError
import global_vars

# 格点数量上限
MAX_LATTICE_POINTS = 200000

# 成对距离计算时一个分块的元素个数
CHUNK_ELEMENTS = 1 << 22


def mobius(z, zeta):
    """
    Möbius 变换 φ_z(ζ)=(z−ζ)/(1−z̄ζ)，支持数组广播。它是对合：φ_z(φ_z(ζ))=ζ。
    """
    z = np.asarray(z, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    out = (z - zeta) / (1 - np.conj(z) * zeta)
    return complex(out) if out.ndim == 0 else out


def pseudo_dist(z, zeta):
    """
    伪双曲距离 |φ_z(ζ)|。
    """
    return np.abs(mobius(z, zeta))


def bergman_dist(z, zeta):
    """
    Bergman 距离 β(z,ζ)=½log((1+|φ_z(ζ)|)/(1−|φ_z(ζ)|))=arctanh|φ_z(ζ)|。
    """
    rho = np.minimum(pseudo_dist(z, zeta), 1 - 1e-16)
    out = np.arctanh(rho)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BergmanDisc:
    center: complex
    radius_hyp: float
    euclid_center: complex
    euclid_radius: float

    def contains(self, zeta):
        """
        成员判断，以伪双曲条件为准。
        """
        return pseudo_dist(self.center, zeta) < math.tanh(self.radius_hyp)


def disc_params(z: complex, r: float) -> BergmanDisc:
    """
    计算 D(z,r) 的欧氏参数：圆心 (1−t²)z/(1−t²|z|²)，半径 (1−|z|²)t/(1−t²|z|²)，t=tanh r。
    """
    z = complex(z)
    if not abs(z) < 1:
        raise DomainError(f"圆盘中心必须在单位圆盘内，收到 z={z}")
    if not r > 0:
        raise DomainError(f"双曲半径必须为正数，收到 r={r}")
    t = math.tanh(r)
    denom = 1 - t * t * abs(z) ** 2
    return BergmanDisc(z, float(r), (1 - t * t) * z / denom, (1 - abs(z) ** 2) * t / denom)


@dataclass(frozen=True, eq=False)
class Lattice:
    separation_r: float
    points: np.ndarray
    R_max: float

    def __len__(self):
        return len(self.points)

    def within(self, R: float) -> 'Lattice':
        """
        |a_j| ≤ R 的子格点。
        """
        return Lattice(self.separation_r, self.points[np.abs(self.points) <= R], min(R, self.R_max))


def _ring_count(rho: float, t: float) -> int:
    """
    半径 rho 的环上需要的点数：相邻两点的伪双曲距离恰为 t 时的夹角为 θ*，取 ceil(π/θ*) 个点。
    """
    cos_theta = 1 - t * t * (1 - rho * rho) ** 2 / (2 * rho * rho * (1 - t * t))
    theta = math.acos(min(1.0, max(-1.0, cos_theta)))
    return max(1, math.ceil(math.pi / theta))


def lattice_generate(r: float, R_max: float, max_points: int = MAX_LATTICE_POINTS) -> Lattice:
    """
    确定性的环形 r-格点：原点加上双曲半径 k·r/2 的同心环，环上点等角分布。
    相邻环的 β 距离为 r/2，同一环上相邻点的 β 距离在 [r/2, r] 内，因此格点 r/2-分离并且半径 r 的圆盘覆盖到 R_max。
    :param r: 格点参数，0<r≤2
    :param R_max: 覆盖半径，0<R_max<1
    :param max_points: 格点数量上限
    :return: Lattice
    """
    if not 0 < r <= 2:
        raise ConfigError('lattice.r', f"格点参数必须在 (0,2] 内，收到 {r}")
    if not 0 < R_max < 1:
        raise ConfigError('lattice.R_max', f"截断半径必须在 (0,1) 内，收到 {R_max}")

    half = r / 2
    t = math.tanh(half)
    rings = math.ceil(math.atanh(R_max) / half)
    counts = [1] + [_ring_count(math.tanh(k * half), t) for k in range(1, rings + 1)]
    total = sum(counts)
    if total > max_points:
        raise ResourceError(f"格点数量 {total} 超过上限 lattice.max_points={max_points}（r={r}, R_max={R_max}）")

    parts = [np.zeros(1, dtype=complex)]
    for k in range(1, rings + 1):
        n = counts[k]
        # 奇数环错开半个间隔
        offset = 0.5 if k % 2 else 0.0
        parts.append(math.tanh(k * half) * np.exp(2j * np.pi * (np.arange(n) + offset) / n))
    points = np.concatenate(parts)
    global_vars.lq.push(('格点生成', 'Success', f'r={r}, R_max={R_max}: {rings} 个环，{len(points)} 个格点'))
    return Lattice(float(r), points, float(R_max))


def lattice_cell_measure(lattice: Lattice, R: float) -> float:
    """
    |z|<R 内每个格点平均占有的不变测度 λ(|z|<R)/#{|a_j| ≤ R}，λ(|z|<R)=R²/(1−R²)。
    格点和乘以它之后与 dλ 积分同量纲。
    """
    count = int(np.count_nonzero(np.abs(lattice.points) <= R))
    if count == 0:
        raise DomainError(f"|z| ≤ {R} 内没有格点")
    return R * R / (1 - R * R) / count


def _chunks(n_rows: int, n_cols: int):
    step = max(1, CHUNK_ELEMENTS // max(1, n_cols))
    for start in range(0, n_rows, step):
        yield slice(start, min(n_rows, start + step))


def min_separation(points) -> float:
    """
    点集两两之间的最小 Bergman 距离（单点时为 inf）。
    """
    points = np.asarray(points, dtype=complex)
    best = math.inf
    for sl in _chunks(len(points), len(points)):
        d = pseudo_dist(points[sl, None], points[None, :])
        idx = np.arange(sl.start, sl.stop)
        d[idx - sl.start, idx] = np.inf
        if d.size:
            best = min(best, float(np.min(d)))
    return math.inf if best == math.inf else float(np.arctanh(min(best, 1 - 1e-16)))


def lattice_validate(points, r: float, R_max: float, probe_count: int = 4000, seed: int = 0) -> dict:
    """
    暴力验证格点：分离性（两两 β 距离 ≥ r/2）、覆盖性（|z|≤R_max 的探针都落在某个 D(a_j,r) 内）、
    以及探针处的最大重叠数 M。探针一半在面积上均匀分布，一半在双曲半径上均匀分布，随机数种子固定。
    """
    points = np.asarray(points, dtype=complex)
    if probe_count < 1000:
        raise ConfigError('probe_count', f"探针数量至少为 1000，收到 {probe_count}")
    rng = np.random.default_rng(seed)
    half = probe_count // 2
    radius = np.concatenate([
        R_max * np.sqrt(rng.random(half)),
        np.tanh(rng.random(probe_count - half) * math.atanh(R_max)),
    ])
    probes = radius * np.exp(2j * np.pi * rng.random(probe_count))

    separation = min_separation(points)
    t = math.tanh(r)
    covered = np.zeros(probe_count, dtype=bool)
    overlap = np.zeros(probe_count, dtype=int)
    for sl in _chunks(probe_count, len(points)):
        inside = pseudo_dist(probes[sl, None], points[None, :]) < t
        covered[sl] = inside.any(axis=1)
        overlap[sl] = inside.sum(axis=1)

    report = {
        'separated': bool(separation >= r / 2 - 1e-9),
        'covering': bool(covered.all()),
        'max_overlap': int(overlap.max()) if probe_count else 0,
        'min_separation': separation,
        'points': int(len(points)),
        'probes': int(probe_count),
    }
    status = 'Success' if report['separated'] and report['covering'] else 'Warning'
    global_vars.lq.push(('格点验证', status, f"r={r}, R_max={R_max}: {report}"))
    return report


def save_lattice(lattice: Lattice, path: str) -> None:
    """
    将格点保存为 CSV（表头 re,im）。
    """
    df = pd.DataFrame({'re': lattice.points.real, 'im': lattice.points.imag})
    df.to_csv(path, index=False, float_format='%.17g')


def load_lattice(path: str, separation_r: float, R_max: float | None = None) -> Lattice:
    """
    从 CSV 读取格点。R_max 缺省时取最大模长。
    """
    try:
        df = pd.read_csv(path, float_precision='round_trip')
        points = df['re'].to_numpy(dtype=float) + 1j * df['im'].to_numpy(dtype=float)
    except (OSError, KeyError, ValueError) as e:
        raise ConfigError('lattice', f"无法读取格点文件 {path}: {e}")
    if np.any(np.abs(points) >= 1):
        raise DomainError(f"格点文件 {path} 中有点不在单位圆盘内")
    return Lattice(float(separation_r), points, float(R_max if R_max is not None else np.max(np.abs(points))))
