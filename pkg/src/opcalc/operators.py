"""Creation/annihilation operator algebra for Gaussian expectation values.

For a Gaussian with mean ``m`` and covariance ``D`` over a finite index set,
the field operator ``Phi_i = b_i + c_i`` splits into a creation part
``b_i`` (multiplication by ``m_i``) and an annihilation part
``c_i = sum_j D_ij d/dm_j``. The expectation of ``f(s)`` is ``f(Phi)`` applied
to the constant function 1. Once every annihilation factor has been moved to
the right of every creation factor (normal order), the action on 1 is read
off directly: ``c_i 1 = 0`` and ``exp(v.c) 1 = 1``.

Expressions are kept symbolic in ``D``: commutators contribute explicit
factors ``D_xy`` and the exponential identities contribute factors
``exp(sum_xy w_xy D_xy)``. Both are resolved only in :func:`expectation`, so a
single expression can be evaluated under many Gaussians.

The supported class is finite sums of polynomials times exponentials of
linear forms in ``b`` and ``c``. A general analytic function can be handled
through :func:`power_series`, i.e. by truncating its Taylor expansion.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "IndexSet",
    "NormalTerm",
    "OperatorExpr",
    "GaussianParams",
    "phi",
    "creation",
    "annihilation",
    "exp_creation",
    "exp_annihilation",
    "exp_phi",
    "constant",
    "linear",
    "multiply",
    "concat",
    "normal_order",
    "expectation",
    "moment",
    "power_series",
]


@dataclass(frozen=True)
class IndexSet:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"index set dimension must be a positive integer, got {self.n}")

    def check(self, i: int) -> int:
        if int(i) != i or not 0 <= i < self.n:
            raise IndexError(f"index {i} out of range for dimension {self.n}")
        return int(i)

    def vector(self, v) -> tuple:
        arr = np.asarray(v, dtype=float).ravel()
        if arr.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficient vector must be finite")
        return tuple(float(x) for x in arr)


def _pair(x: int, y: int) -> tuple:
    return (x, y) if x <= y else (y, x)


def _add_exponent(exponent: tuple, extra: dict) -> tuple:
    """Merge ``{(x, y): w}`` into a sorted ``((x, y), w)`` tuple."""
    acc = dict(exponent)
    for key, w in extra.items():
        if w != 0.0:
            acc[key] = acc.get(key, 0.0) + w
    return tuple(sorted((k, w) for k, w in acc.items() if w != 0.0))


def _bilinear_exponent(v: Sequence[float], u: Sequence[float]) -> dict:
    """Coefficients of ``v^T D u`` on the independent entries ``D_xy, x <= y``."""
    out: dict = {}
    n = len(v)
    for x in range(n):
        if v[x] == 0.0:
            continue
        for y in range(n):
            if u[y] == 0.0:
                continue
            key = _pair(x, y)
            out[key] = out.get(key, 0.0) + v[x] * u[y]
    return out


def _is_zero(vec) -> bool:
    return vec is None or all(x == 0.0 for x in vec)


# A raw word is (scalar, factors) where scalar = (coeff, d_factors, d_exponent)
# and factors is a tuple of ('b', i), ('c', i), ('B', u), ('C', v).
_CREATION = ("b", "B")
_ANNIHILATION = ("c", "C")


@dataclass(frozen=True)
class NormalTerm:
    """One normal-ordered product.

    ``coeff * prod(D[x, y] for x, y in d_factors) * exp(sum(w * D[x, y]))
    * prod(b[i] for i in b_powers) * exp(b_exponent . b)
    * exp(c_exponent . c) * prod(c[i] for i in c_powers)``
    """

    coeff: float
    d_factors: tuple = ()
    d_exponent: tuple = ()
    b_powers: tuple = ()
    b_exponent: tuple | None = None
    c_exponent: tuple | None = None
    c_powers: tuple = ()

    @property
    def key(self) -> tuple:
        return (
            self.d_factors,
            self.d_exponent,
            self.b_powers,
            self.b_exponent,
            self.c_exponent,
            self.c_powers,
        )

    def factors(self) -> tuple:
        out = [("b", i) for i in self.b_powers]
        if self.b_exponent is not None:
            out.append(("B", self.b_exponent))
        if self.c_exponent is not None:
            out.append(("C", self.c_exponent))
        out.extend(("c", i) for i in self.c_powers)
        return tuple(out)

    def __str__(self):
        parts = [repr(self.coeff)]
        parts += [f"D[{x},{y}]" for x, y in self.d_factors]
        if self.d_exponent:
            arg = " + ".join(f"{w!r}*D[{x},{y}]" for (x, y), w in self.d_exponent)
            parts.append(f"exp({arg})")
        if self.b_powers:
            parts.append("b[" + ",".join(map(str, self.b_powers)) + "]")
        if self.b_exponent is not None:
            parts.append(f"exp(({', '.join(map(repr, self.b_exponent))})·b)")
        if self.c_exponent is not None:
            parts.append(f"exp(({', '.join(map(repr, self.c_exponent))})·c)")
        if self.c_powers:
            parts.append("c[" + ",".join(map(str, self.c_powers)) + "]")
        return " * ".join(parts)


def _canonical(scalar: tuple, factors: tuple) -> NormalTerm:
    coeff, d_factors, d_exponent = scalar
    b_powers, c_powers = [], []
    u = v = None
    for kind, arg in factors:
        if kind == "b":
            b_powers.append(arg)
        elif kind == "c":
            c_powers.append(arg)
        elif kind == "B":
            u = arg if u is None else tuple(a + b for a, b in zip(u, arg))
        else:
            v = arg if v is None else tuple(a + b for a, b in zip(v, arg))
    return NormalTerm(
        coeff=coeff,
        d_factors=tuple(sorted(d_factors)),
        d_exponent=d_exponent,
        b_powers=tuple(sorted(b_powers)),
        b_exponent=None if _is_zero(u) else u,
        c_exponent=None if _is_zero(v) else v,
        c_powers=tuple(sorted(c_powers)),
    )


def _first_disorder(factors: tuple) -> int:
    for k in range(len(factors) - 1):
        if factors[k][0] in _ANNIHILATION and factors[k + 1][0] in _CREATION:
            return k
    return -1


def _order_word(scalar: tuple, factors: tuple) -> list:
    """Rewrite one word into a list of normal-ordered NormalTerms."""
    out = []
    stack = [(scalar, factors)]
    while stack:
        sc, fs = stack.pop()
        k = _first_disorder(fs)
        if k < 0:
            out.append(_canonical(sc, fs))
            continue
        (lk, la), (rk, ra) = fs[k], fs[k + 1]
        head, tail = fs[:k], fs[k + 2 :]
        coeff, dfac, dexp = sc
        swapped = head + (fs[k + 1], fs[k]) + tail
        if lk == "C" and rk == "B":
            # exp(v.c) exp(u.b) = exp(u.b) exp(v.c) exp(v^T D u)
            stack.append(((coeff, dfac, _add_exponent(dexp, _bilinear_exponent(la, ra))), swapped))
            continue
        stack.append((sc, swapped))
        if lk == "c" and rk == "b":
            # [c_x, b_y] = D_xy
            stack.append(((coeff, dfac + (_pair(la, ra),), dexp), head + tail))
        elif lk == "c" and rk == "B":
            # [c_x, exp(u.b)] = (sum_y D_xy u_y) exp(u.b)
            for y, uy in enumerate(ra):
                if uy != 0.0:
                    stack.append(((coeff * uy, dfac + (_pair(la, y),), dexp), head + (fs[k + 1],) + tail))
        else:
            # [exp(v.c), b_y] = (sum_x v_x D_xy) exp(v.c)
            for x, vx in enumerate(la):
                if vx != 0.0:
                    stack.append(((coeff * vx, dfac + (_pair(x, ra),), dexp), head + (fs[k],) + tail))
    return out


def _merge(terms: Iterable[NormalTerm]) -> tuple:
    acc: dict = {}
    order = []
    for t in terms:
        if t.key not in acc:
            acc[t.key] = 0.0
            order.append(t.key)
        acc[t.key] += t.coeff
    merged = []
    for key in order:
        c = acc[key]
        if c != 0.0:
            d_factors, d_exponent, b_powers, u, v, c_powers = key
            merged.append(NormalTerm(c, d_factors, d_exponent, b_powers, u, v, c_powers))
    return tuple(merged)


@dataclass(frozen=True)
class OperatorExpr:
    """Sum of operator words over an index set.

    Expressions produced by the public constructors and by :func:`multiply` are
    normal-ordered. :func:`concat` builds unordered products; those are
    brought into normal order by :func:`normal_order` (and implicitly by
    :func:`expectation`).
    """

    index_set: IndexSet
    terms: tuple = ()
    raw: tuple = field(default=(), repr=False)

    @property
    def is_normal(self) -> bool:
        return not self.raw

    def words(self) -> list:
        out = [((t.coeff, t.d_factors, t.d_exponent), t.factors()) for t in self.terms]
        return out + list(self.raw)

    def _check(self, other: OperatorExpr):
        if self.index_set != other.index_set:
            raise ValueError(f"index set mismatch: {self.index_set} vs {other.index_set}")

    def __add__(self, other):
        if not isinstance(other, OperatorExpr):
            other = constant(self.index_set, other)
        self._check(other)
        return OperatorExpr(self.index_set, _merge(self.terms + other.terms), self.raw + other.raw)

    __radd__ = __add__

    def scale(self, a: float) -> OperatorExpr:
        a = float(a)
        if a == 0.0:
            return OperatorExpr(self.index_set)
        terms = tuple(
            NormalTerm(t.coeff * a, t.d_factors, t.d_exponent, t.b_powers, t.b_exponent, t.c_exponent, t.c_powers)
            for t in self.terms
        )
        raw = tuple(((c * a, df, de), fs) for (c, df, de), fs in self.raw)
        return OperatorExpr(self.index_set, terms, raw)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        if not isinstance(other, OperatorExpr):
            other = constant(self.index_set, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, OperatorExpr):
            return multiply(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = constant(self.index_set, 1.0)
        for _ in range(int(k)):
            out = multiply(out, self)
        return out

    def dump(self) -> str:
        """One normal-ordered term per line (debugging aid, not a stable format)."""
        return "\n".join(str(t) for t in normal_order(self).terms)

    def __len__(self):
        return len(self.terms) + len(self.raw)


@dataclass(frozen=True)
class GaussianParams:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        d = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if m.ndim != 1 or d.shape != (m.size, m.size):
            raise ValueError(f"mean shape {m.shape} incompatible with covariance shape {d.shape}")
        if not np.allclose(d, d.T, rtol=0, atol=1e-12 * max(1.0, np.abs(d).max())):
            raise ValueError("covariance must be symmetric")
        scale = np.linalg.norm(d, 2) if d.size else 0.0
        if d.size and np.linalg.eigvalsh(d).min() < -1e-10 * max(scale, 1e-300):
            raise ValueError("covariance must be positive semi-definite")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", d)

    @property
    def n(self) -> int:
        return self.mean.size


def _single(index_set: IndexSet, term: NormalTerm) -> OperatorExpr:
    return OperatorExpr(index_set, (term,))


def constant(index_set: IndexSet, value: float) -> OperatorExpr:
    value = float(value)
    if value == 0.0:
        return OperatorExpr(index_set)
    return _single(index_set, NormalTerm(value))


def creation(index_set: IndexSet, i: int) -> OperatorExpr:
    return _single(index_set, NormalTerm(1.0, b_powers=(index_set.check(i),)))


def annihilation(index_set: IndexSet, i: int) -> OperatorExpr:
    return _single(index_set, NormalTerm(1.0, c_powers=(index_set.check(i),)))


def exp_creation(index_set: IndexSet, u) -> OperatorExpr:
    u = index_set.vector(u)
    return _single(index_set, NormalTerm(1.0, b_exponent=None if _is_zero(u) else u))


def exp_annihilation(index_set: IndexSet, v) -> OperatorExpr:
    v = index_set.vector(v)
    return _single(index_set, NormalTerm(1.0, c_exponent=None if _is_zero(v) else v))


def phi(index_set: IndexSet, i: int) -> OperatorExpr:
    """Field operator ``Phi_i = b_i + c_i``."""
    return creation(index_set, i) + annihilation(index_set, i)


def linear(index_set: IndexSet, coeffs, offset: float = 0.0) -> OperatorExpr:
    """``offset + sum_i coeffs[i] * Phi_i``."""
    coeffs = index_set.vector(coeffs)
    out = constant(index_set, offset)
    for i, a in enumerate(coeffs):
        if a != 0.0:
            out = out + phi(index_set, i).scale(a)
    return out


def exp_phi(index_set: IndexSet, alpha) -> OperatorExpr:
    """``exp(alpha . Phi)`` split by BCH into ``exp(alpha^T D alpha / 2) exp(alpha.b) exp(alpha.c)``."""
    alpha = index_set.vector(alpha)
    if _is_zero(alpha):
        return constant(index_set, 1.0)
    half = {k: 0.5 * w for k, w in _bilinear_exponent(alpha, alpha).items()}
    term = NormalTerm(1.0, d_exponent=_add_exponent((), half), b_exponent=alpha, c_exponent=alpha)
    return _single(index_set, term)


def concat(e1: OperatorExpr, e2: OperatorExpr) -> OperatorExpr:
    """Operator product ``e1 e2`` without reordering (the result is generally not normal)."""
    e1._check(e2)
    raw = []
    for (c1, df1, de1), f1 in e1.words():
        for (c2, df2, de2), f2 in e2.words():
            raw.append(((c1 * c2, df1 + df2, _add_exponent(de1, dict(de2))), f1 + f2))
    return OperatorExpr(e1.index_set, (), tuple(raw))


def normal_order(e: OperatorExpr) -> OperatorExpr:
    """Move every annihilation factor to the right; terms with equal structure are merged."""
    if e.is_normal:
        return e
    terms = []
    for scalar, factors in e.words():
        terms.extend(_order_word(scalar, factors))
    return OperatorExpr(e.index_set, _merge(terms))


def multiply(e1: OperatorExpr, e2: OperatorExpr) -> OperatorExpr:
    return normal_order(concat(e1, e2))


def moment(index_set: IndexSet, indices: Sequence[int]) -> OperatorExpr:
    out = constant(index_set, 1.0)
    for i in indices:
        out = multiply(out, phi(index_set, i))
    return out


def power_series(index_set: IndexSet, coeffs: Sequence[float], direction=None, center: float = 0.0) -> OperatorExpr:
    """Truncated series ``sum_k coeffs[k] * (direction . Phi - center)**k``.

    ``direction`` defaults to the first unit vector. This is how analytic
    functions outside the polynomial-times-exponential class are supported.
    """
    if direction is None:
        direction = np.eye(index_set.n)[0]
    x = linear(index_set, direction, -center)
    out = OperatorExpr(index_set)
    xk = constant(index_set, 1.0)
    for k, a in enumerate(coeffs):
        if k:
            xk = multiply(xk, x)
        if a != 0.0:
            out = out + xk.scale(a)
    return out


def expectation(e: OperatorExpr, g: GaussianParams) -> float:
    """Gaussian expectation: apply the normal-ordered operator to 1 at ``(m, D)``."""
    if g.n != e.index_set.n:
        raise ValueError(f"expression has dimension {e.index_set.n}, Gaussian has {g.n}")
    m, d = g.mean, g.cov
    total = 0.0
    for t in normal_order(e).terms:
        if t.c_powers:
            continue
        value = t.coeff
        if t.d_factors:
            value *= prod(d[x, y] for x, y in t.d_factors)
        if t.b_powers:
            value *= prod(m[i] ** k for i, k in Counter(t.b_powers).items())
        arg = 0.0
        if t.d_exponent:
            arg += sum(w * d[x, y] for (x, y), w in t.d_exponent)
        if t.b_exponent is not None:
            arg += float(np.dot(t.b_exponent, m))
        if arg:
            value *= np.exp(arg)
        total += value
    return float(total)
