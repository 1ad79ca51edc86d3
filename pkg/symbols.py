"""
该模块定义测试符号：z 与 z̄ 的多项式 f(z)=Σ c_{m,n} z^m z̄^n。

所有加权内积都归结为权函数的矩：∫_𝔻 z^p z̄^q ω dA 在 p≠q 时为 0，p=q 时为 2μ_{2p+1}。
"""

" 内置模块 "
import cmath
from types import MappingProxyType

" 第三方模块 "
import numpy as np

" 自定义模块 "
from errors import ConfigError, ResourceError
from weights import RadialWeight, moments

# 乘积的次数上限
DEGREE_CAP = 256


class SymbolPoly:
    """
    z、z̄ 的多项式，terms 是 (m, n) → 复系数 的映射，零系数不保存。创建后不可修改。
    """

    def __init__(self, terms: dict | None = None, name: str | None = None):
        clean = {}
        for (m, n), c in (terms or {}).items():
            if m < 0 or n < 0:
                raise ValueError(f"单项式的次数必须非负，收到 ({m}, {n})")
            c = complex(c)
            if c != 0:
                clean[(int(m), int(n))] = clean.get((int(m), int(n)), 0j) + c
        self._terms = MappingProxyType({k: v for k, v in sorted(clean.items()) if v != 0})
        self.name = name

    @property
    def terms(self):
        return self._terms

    @property
    def deg_z(self) -> int:
        return max((m for m, _ in self._terms), default=0)

    @property
    def deg_zbar(self) -> int:
        return max((n for _, n in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_analytic(self) -> bool:
        return all(n == 0 for _, n in self._terms)

    def __call__(self, z):
        return sym_eval(self, z)

    def __add__(self, other):
        other = as_symbol(other)
        terms = dict(self._terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0j) + c
        return SymbolPoly(terms)

    __radd__ = __add__

    def __neg__(self):
        return SymbolPoly({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-as_symbol(other))

    def __rsub__(self, other):
        return as_symbol(other) - self

    def __mul__(self, other):
        return sym_mul(self, as_symbol(other))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SymbolPoly):
            return NotImplemented
        return dict(self._terms) == dict(other.terms)

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def __repr__(self):
        if self.name:
            return self.name
        if self.is_zero():
            return '0'
        return ' + '.join(f"({c:g})z^{m}z̄^{n}" for (m, n), c in self._terms.items())

    def conj(self) -> 'SymbolPoly':
        """
        共轭：c_{m,n} ↦ conj(c_{n,m})。
        """
        return SymbolPoly({(n, m): c.conjugate() for (m, n), c in self._terms.items()})

    def rotate(self, theta: float) -> 'SymbolPoly':
        """
        f(e^{iθ}z) 的系数。
        """
        return SymbolPoly({(m, n): c * cmath.exp(1j * theta * (m - n)) for (m, n), c in self._terms.items()})

    def abs_sq(self) -> 'SymbolPoly':
        """
        |f|²=f·conj(f)。
        """
        return sym_mul(self, self.conj())


def as_symbol(value) -> SymbolPoly:
    if isinstance(value, SymbolPoly):
        return value
    return SymbolPoly({(0, 0): complex(value)})


def monomial(m: int, n: int, c: complex = 1.0) -> SymbolPoly:
    return SymbolPoly({(m, n): c})


def sym_eval(f: SymbolPoly, z):
    """
    逐点求值，支持复数数组。
    """
    z = np.asarray(z, dtype=complex)
    zc = np.conj(z)
    out = np.zeros(z.shape, dtype=complex)
    for (m, n), c in f.terms.items():
        out = out + c * z ** m * zc ** n
    return complex(out) if out.ndim == 0 else out


def sym_mul(f: SymbolPoly, g: SymbolPoly, cap: int = DEGREE_CAP) -> SymbolPoly:
    """
    两个多项式相乘（系数卷积）。z 或 z̄ 的次数超过 cap 时抛出 ResourceError。
    """
    if f.deg_z + g.deg_z > cap or f.deg_zbar + g.deg_zbar > cap:
        raise ResourceError(f"乘积的次数 ({f.deg_z + g.deg_z}, {f.deg_zbar + g.deg_zbar}) 超过上限 {cap}")
    terms = {}
    for (m1, n1), c1 in f.terms.items():
        for (m2, n2), c2 in g.terms.items():
            key = (m1 + m2, n1 + n2)
            terms[key] = terms.get(key, 0j) + c1 * c2
    return SymbolPoly(terms)


def monomial_integral(w: RadialWeight, p: int, q: int) -> float:
    """
    ∫_𝔻 z^p z̄^q ω(|z|) dA：p≠q 时为 0，否则为 2μ_{2p+1}。
    """
    if p != q:
        return 0.0
    return float(2 * moments(w, [2 * p + 1])[0])


def inner_product(f: SymbolPoly, g: SymbolPoly, w: RadialWeight) -> complex:
    """
    ⟨f, g⟩_{L²_ω}=∫ f·conj(g)·ω dA，逐项归结为矩。
    """
    pairs = {}
    for (a, b), cf in f.terms.items():
        for (c, d), cg in g.terms.items():
            # z^a z̄^b · conj(z^c z̄^d) = z^{a+d} z̄^{b+c}
            if a + d == b + c:
                pairs[a + d] = pairs.get(a + d, 0j) + cf * cg.conjugate()
    if not pairs:
        return 0j
    keys = sorted(pairs)
    h = 2 * moments(w, 2 * np.asarray(keys) + 1)
    return complex(sum(pairs[k] * hk for k, hk in zip(keys, h)))


def sym_norm(f: SymbolPoly, w: RadialWeight) -> float:
    return float(np.sqrt(max(inner_product(f, f, w).real, 0.0)))


def _builtin() -> dict:
    z = monomial(1, 0)
    zbar = monomial(0, 1)
    return {
        'zbar': SymbolPoly(zbar.terms, 'zbar'),
        'zbar2': SymbolPoly(monomial(0, 2).terms, 'zbar2'),
        'absz2': SymbolPoly(monomial(1, 1).terms, 'absz2'),
        'zbar_zbar2': SymbolPoly((zbar + monomial(0, 2)).terms, 'zbar_zbar2'),
        'rez': SymbolPoly(((z + zbar) * 0.5).terms, 'rez'),
        'z': SymbolPoly(z.terms, 'z'),
    }


SHORTHANDS = _builtin()

# 实验用的内置符号族，顺序固定
BUILTIN_FAMILY = tuple(SHORTHANDS[k] for k in ('zbar', 'zbar2', 'absz2', 'zbar_zbar2', 'rez'))


def parse_symbol(spec: str) -> SymbolPoly:
    """
    解析符号描述：简写名 zbar、zbar2、absz2、rez、z、zbar_zbar2，或者逗号分隔的 m,n,re,im 四元组序列。
    """
    spec = spec.strip()
    if spec in SHORTHANDS:
        return SHORTHANDS[spec]
    parts = [p.strip() for p in spec.split(',') if p.strip()]
    if not parts or len(parts) % 4:
        raise ConfigError('symbol', f"无法解析符号 '{spec}'：需要简写名或 m,n,re,im 四元组")
    terms = {}
    try:
        for i in range(0, len(parts), 4):
            m, n = int(parts[i]), int(parts[i + 1])
            if m < 0 or n < 0:
                raise ValueError
            terms[(m, n)] = terms.get((m, n), 0j) + complex(float(parts[i + 2]), float(parts[i + 3]))
    except ValueError:
        raise ConfigError('symbol', f"无法解析符号 '{spec}'：m,n 必须是非负整数，re,im 必须是实数")
    return SymbolPoly(terms, spec)


def format_symbol(f: SymbolPoly) -> str:
    if f.name:
        return f.name
    return ','.join(f"{m},{n},{c.real:.17g},{c.imag:.17g}" for (m, n), c in f.terms.items()) or '0,0,0,0'
