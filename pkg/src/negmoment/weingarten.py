"""Exact Weingarten calculus for t <= 6 copies.

The Gram matrix ``Q[pi, sigma] = d**cycles(pi sigma)`` is the regular
representation of the central element ``g = sum_a d**cycles(a) a`` of the
group algebra of S_t (up to the involution sigma -> sigma^-1).  Its
(pseudo-)inverse is therefore also central, and we compute it by exact
rational arithmetic in the class algebra, whose dimension is the number of
partitions of t (at most 11).  The full t! x t! matrices are assembled from
the class values on demand.

Coefficient convention: ``twirl(X) = sum_{pi,sigma} C[pi,sigma] Tr(W_pi X) W_sigma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from numbers import Number
from typing import Any, Mapping, Sequence

import numpy as np
import sympy

from . import permgroup as pg
from .permgroup import Permutation

DENSE_CAP = 4096


# ------------------------------------------------------------ class algebra

@lru_cache(maxsize=None)
def class_structure_constants(t: int) -> np.ndarray:
    """``c[i, j, k] = #{(x, y) in K_i x K_j : x y = z}`` for a fixed z in K_k."""
    parts = pg.partitions(t)
    cls = pg.class_of(t)
    prod = pg.product_table(t)
    inv = pg.inverse_table(t)
    p = len(parts)
    c = np.zeros((p, p, p), dtype=np.int64)
    n = len(cls)
    for k in range(p):
        z = int(np.flatnonzero(cls == k)[0])
        y = prod[inv, z]  # y = x^-1 z for every x
        np.add.at(c, (cls, cls[y], np.full(n, k)), 1)
    return c


def _multiplication_matrix(t: int, a: Sequence) -> sympy.Matrix:
    """Matrix of b -> a*b in the class basis (entries are class values)."""
    c = class_structure_constants(t)
    p = c.shape[0]
    return sympy.Matrix(p, p, lambda k, j: sum(sympy.Integer(int(c[i, j, k])) * a[i] for i in range(p)))


def _identity_vector(p: int) -> sympy.Matrix:
    e = sympy.zeros(p, 1)
    e[0] = 1  # class [1,...,1] comes first in partitions(t)
    return e


def class_multiply(t: int, a: Sequence, b: Sequence) -> list:
    """Product of two central elements given by their class values."""
    m = _multiplication_matrix(t, [sympy.nsimplify(x) for x in a])
    return list(m * sympy.Matrix([sympy.nsimplify(x) for x in b]))


@lru_cache(maxsize=None)
def weingarten_class_values(t: int, d: int) -> tuple[tuple[Fraction, ...], bool]:
    """Weingarten function on each conjugacy class, and whether it is a pseudo-inverse.

    For d >= t the Gram element is invertible.  Otherwise the Moore-Penrose
    inverse is obtained from the minimal polynomial m(x) = x q(x) of the
    (semisimple) Gram element: with a(x) = (1 - q(x)/q(0)) / x one has
    a(g) = 1/mu on every nonzero eigenspace, and g^+ = a(g)^2 g.
    """
    pg._check_size(t)
    if d < 1:
        raise ValueError("dimension must be >= 1")
    parts = pg.partitions(t)
    p = len(parts)
    g = [sympy.Integer(d) ** len(lam) for lam in parts]
    mg = _multiplication_matrix(t, g)
    e = _identity_vector(p)
    if mg.det() != 0:
        w = mg.LUsolve(e)
        pseudo = False
    else:
        x = sympy.Symbol("x")
        char = sympy.Poly(mg.charpoly(x).as_expr(), x)
        minimal = sympy.Poly(sympy.sqf_part(char.as_expr()), x)
        q = sympy.Poly(sympy.quo(minimal.as_expr(), x), x)
        q0 = q.eval(0)
        a = sympy.Poly(sympy.quo((q0 - q).as_expr(), x) / q0, x)
        a_g = _poly_at(a, mg, p)
        gvec = sympy.Matrix(g)
        w = a_g * (a_g * gvec)
        pseudo = True
    return tuple(Fraction(int(v.p), int(v.q)) for v in (sympy.Rational(v) for v in w)), pseudo


def _poly_at(poly: "sympy.Poly", mat: sympy.Matrix, p: int) -> sympy.Matrix:
    out = sympy.zeros(p, p)
    for coeff in poly.all_coeffs():  # Horner
        out = out * mat + coeff * sympy.eye(p)
    return out


# --------------------------------------------------------------- the table

@dataclass(frozen=True)
class WeingartenTable:
    """Gram and Weingarten matrices for (t, d), indexed by ``permgroup.enumerate_group(t)``."""

    t: int
    d: int
    class_gram: tuple[int, ...]
    class_wg: tuple[Fraction, ...]
    pseudo: bool

    @cached_property
    def _product_classes(self) -> np.ndarray:
        return pg.class_of(self.t)[pg.product_table(self.t)]

    @cached_property
    def gram(self) -> np.ndarray:
        vals = np.array(self.class_gram, dtype=object)
        return vals[self._product_classes]

    @cached_property
    def wg(self) -> np.ndarray:
        vals = np.array(self.class_wg, dtype=object)
        return vals[self._product_classes]

    @cached_property
    def wg_float(self) -> np.ndarray:
        vals = np.array([float(v) for v in self.class_wg])
        return vals[self._product_classes]

    @cached_property
    def gram_float(self) -> np.ndarray:
        vals = np.array([float(v) for v in self.class_gram])
        return vals[self._product_classes]

    def row_sums(self) -> np.ndarray:
        return self.wg.sum(axis=1)

    def wg_of(self, alpha: Permutation) -> Fraction:
        return self.class_wg[pg.partitions(self.t).index(pg.cycle_type(alpha))]


@lru_cache(maxsize=None)
def build_table(t: int, d: int) -> WeingartenTable:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    wg, pseudo = weingarten_class_values(t, d)
    gram = tuple(d ** len(lam) for lam in pg.partitions(t))
    return WeingartenTable(t=t, d=d, class_gram=gram, class_wg=wg, pseudo=pseudo)


def table_to_json(table: WeingartenTable) -> dict:
    return {
        "t": table.t,
        "d": table.d,
        "pseudo": table.pseudo,
        "classes": [pg.format_partition(l) for l in pg.partitions(table.t)],
        "gram": [str(v) for v in table.class_gram],
        "wg": [f"{v.numerator}/{v.denominator}" for v in table.class_wg],
    }


def wg_asymptotic(alpha: Permutation, d: float) -> float:
    """Leading large-d term d**(k - 2t) * prod_i (-1)**(l_i - 1) Catalan(l_i - 1)."""
    lengths = pg.cycle_type(alpha)
    coeff = 1
    for ell in lengths:
        q = ell - 1
        coeff *= (-1) ** q * math.comb(2 * q, q) // (q + 1)
    return coeff * float(d) ** (len(lengths) - 2 * alpha.size)


# ------------------------------------------------ permutation combinations

Key = tuple[Permutation, ...]


@dataclass(frozen=True)
class PermutationCombination:
    """Formal sum ``sum_k c_k (W_k1 (x) W_k2 (x) ...)`` with one permutation per party."""

    t: int
    parties: int
    coefficients: Mapping[Key, Any] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, c in dict(self.coefficients).items():
            if isinstance(key, Permutation):
                key = (key,)
            if len(key) != self.parties or any(p.size != self.t for p in key):
                raise ValueError(f"bad key {key}")
            if c != 0:
                clean[tuple(key)] = c
        object.__setattr__(self, "coefficients", clean)

    @classmethod
    def single(cls, *terms: tuple[Permutation, Any]) -> "PermutationCombination":
        t = terms[0][0].size
        out: dict[Key, Any] = {}
        for p, c in terms:
            out[(p,)] = out.get((p,), 0) + c
        return cls(t, 1, out)

    @classmethod
    def zero(cls, t: int, parties: int = 1) -> "PermutationCombination":
        return cls(t, parties, {})

    def coefficient(self, *perms: Permutation):
        return self.coefficients.get(tuple(perms), 0)

    def _check(self, other: "PermutationCombination") -> None:
        if (self.t, self.parties) != (other.t, other.parties):
            raise ValueError("incompatible combinations")

    def __add__(self, other: "PermutationCombination") -> "PermutationCombination":
        self._check(other)
        out = dict(self.coefficients)
        for k, c in other.coefficients.items():
            out[k] = out.get(k, 0) + c
        return PermutationCombination(self.t, self.parties, out)

    def __neg__(self) -> "PermutationCombination":
        return self * -1

    def __sub__(self, other: "PermutationCombination") -> "PermutationCombination":
        return self + (-other)

    def __mul__(self, s: Number) -> "PermutationCombination":
        return PermutationCombination(self.t, self.parties,
                                      {k: c * s for k, c in self.coefficients.items()})

    __rmul__ = __mul__

    def tensor(self, other: "PermutationCombination") -> "PermutationCombination":
        if self.t != other.t:
            raise ValueError("copy number mismatch")
        out = {k1 + k2: c1 * c2 for k1, c1 in self.coefficients.items()
               for k2, c2 in other.coefficients.items()}
        return PermutationCombination(self.t, self.parties + other.parties, out)

    def coefficient_array(self, exact: bool = True) -> np.ndarray:
        """Dense coefficient tensor indexed by group indices, one axis per party."""
        n = math.factorial(self.t)
        idx = pg.group_index(self.t)
        arr = np.zeros((n,) * self.parties, dtype=object if exact else complex)
        for key, c in self.coefficients.items():
            arr[tuple(idx[p] for p in key)] += c
        return arr

    def traces(self, dims: Sequence[int], exact: bool = True) -> np.ndarray:
        """``Tr[self . (W_pi1 (x) W_pi2 ...)]`` for every tuple of permutations."""
        if len(dims) != self.parties:
            raise ValueError("need one dimension per party")
        out = self.coefficient_array(exact)
        for axis, d in enumerate(dims):
            g = gram_matrix(self.t, d, exact)
            out = np.moveaxis(np.tensordot(out, g, axes=([axis], [0])), -1, axis)
        return out

    def to_dense(self, dims: Sequence[int]) -> np.ndarray:
        n = int(np.prod(dims)) ** self.t
        if n > DENSE_CAP:
            raise ValueError(f"dense dimension {n} exceeds cap {DENSE_CAP}")
        out = np.zeros((n, n), dtype=complex)
        cols = np.arange(n)
        for key, c in self.coefficients.items():
            out[permutation_index(key, dims), cols] += complex(c)
        return out

    def __str__(self) -> str:
        if not self.coefficients:
            return "0"
        return " + ".join(f"{c}*" + "(x)".join(f"W{p}" for p in k)
                          for k, c in sorted(self.coefficients.items()))


def gram_matrix(t: int, d: int, exact: bool = True) -> np.ndarray:
    """``Tr(W_pi W_sigma) = d**cycles(pi sigma)`` as a t! x t! array."""
    cyc = pg.num_cycles_array(t)[pg.product_table(t)]
    if exact:
        powers = np.array([d ** k for k in range(t + 1)], dtype=object)
    else:
        powers = float(d) ** np.arange(t + 1)
    return powers[cyc]


def cyclic_shifts(t: int = 3) -> tuple[Permutation, Permutation]:
    """The two t-cycles (1,2,...,t) and its inverse."""
    w0 = Permutation.from_cycles(t, tuple(range(1, t + 1)))
    return w0, pg.inverse(w0)


# ------------------------------------------------------------ dense helpers

@lru_cache(maxsize=256)
def _digits(dims: tuple[int, ...], t: int) -> np.ndarray:
    shape = dims * t  # copy-major: (a1, b1, a2, b2, ...)
    return np.indices(shape).reshape(len(shape), -1)


def permutation_index(perms: Sequence[Permutation], dims: Sequence[int]) -> np.ndarray:
    """``out[s]`` = flat index of ``(W_p1 (x) W_p2 ...)|s>`` for every basis index s.

    Party j permutes its own symbols: copy k receives copy p_j(k)'s symbol.
    """
    dims = tuple(int(d) for d in dims)
    t = perms[0].size
    npart = len(dims)
    digits = _digits(dims, t)
    shape = dims * t
    strides = np.array([int(np.prod(shape[i + 1:])) for i in range(len(shape))], dtype=np.int64)
    out = np.zeros(digits.shape[1], dtype=np.int64)
    for j, p in enumerate(perms):
        for k in range(t):
            out += digits[p.mapping[k] * npart + j] * strides[k * npart + j]
    return out


def dense_permutation(perms: Sequence[Permutation] | Permutation, dims: Sequence[int]) -> np.ndarray:
    if isinstance(perms, Permutation):
        perms = (perms,)
    idx = permutation_index(perms, dims)
    n = len(idx)
    out = np.zeros((n, n))
    out[idx, np.arange(n)] = 1.0
    return out


def dense_traces(x: np.ndarray, dims: Sequence[int], t: int) -> np.ndarray:
    """``Tr[(W_pi1 (x) ...) X]`` for all permutation tuples (one axis per party)."""
    group = pg.enumerate_group(t)
    n = math.factorial(t)
    out = np.zeros((n,) * len(dims), dtype=complex)
    rows = np.arange(x.shape[0])
    for key in np.ndindex(*out.shape):
        idx = permutation_index([group[i] for i in key], dims)
        out[key] = x[rows, idx].sum()
    return out


def twirl_dense(x: np.ndarray, d: int | Sequence[int], t: int, cap: int = DENSE_CAP) -> np.ndarray:
    """Explicit twirl; with a tuple of dims the channel is the product of local twirls."""
    dims = (d,) if np.isscalar(d) else tuple(d)
    n = int(np.prod(dims)) ** t
    if x.shape != (n, n):
        raise ValueError(f"operator shape {x.shape} does not match dims {dims}, t={t}")
    if n > cap:
        raise ValueError(f"dense dimension {n} exceeds cap {cap}")
    coeffs = dense_traces(x, dims, t)
    for axis, dj in enumerate(dims):
        c = build_table(t, dj).wg_float
        coeffs = np.moveaxis(np.tensordot(coeffs, c, axes=([axis], [0])), -1, axis)
    group = pg.enumerate_group(t)
    out = np.zeros((n, n), dtype=complex)
    cols = np.arange(n)
    for key in np.ndindex(*coeffs.shape):
        if coeffs[key] != 0:
            out[permutation_index([group[i] for i in key], dims), cols] += coeffs[key]
    return out


def symmetric_projector(d: int, t: int) -> np.ndarray:
    perms = pg.enumerate_group(t)
    return sum(dense_permutation(p, (d,)) for p in perms) / math.factorial(t)


# ------------------------------------------------------- diagonal fast path

def diagonal_traces(obs) -> np.ndarray:
    """``Tr[(W_pi1 (x) ...) O]`` for a class-function diagonal observable.

    ``obs`` must expose ``dims``, ``copies`` and ``pattern_value(patterns)``,
    where ``patterns`` holds one set partition (restricted growth string) per
    party.  Strings are never enumerated: each pattern with k blocks stands
    for d(d-1)...(d-k+1) strings, and W_pi has unit diagonal on exactly those
    strings whose pattern is coarser than the cycles of pi.
    """
    t = obs.copies
    rgs = pg.set_partitions(t)
    emb = pg.embedding_matrix(t).astype(object)
    sizes = [len(set(s)) for s in rgs]
    nparty = len(obs.dims)
    weights = np.empty((len(rgs),) * nparty, dtype=object)
    for key in np.ndindex(*weights.shape):
        count = 1
        for j, d in zip(key, obs.dims):
            count *= pg.falling_factorial(d, sizes[j])
        weights[key] = count * obs.pattern_value(tuple(rgs[j] for j in key)) if count else 0
    out = weights
    for axis in range(nparty):
        out = np.moveaxis(np.tensordot(out, emb, axes=([axis], [1])), -1, axis)
    return out


def _coefficients_from_traces(traces: np.ndarray, dims: Sequence[int], t: int,
                              exact: bool) -> np.ndarray:
    coeffs = traces
    for axis, d in enumerate(dims):
        table = build_table(t, d)
        c = table.wg if exact else table.wg_float
        coeffs = np.moveaxis(np.tensordot(coeffs, c, axes=([axis], [0])), -1, axis)
    return coeffs


def _combination_from_array(coeffs: np.ndarray, t: int) -> PermutationCombination:
    group = pg.enumerate_group(t)
    terms = {tuple(group[i] for i in key): coeffs[key] for key in np.ndindex(*coeffs.shape)}
    return PermutationCombination(t, coeffs.ndim, terms)


def twirl_diagonal(obs) -> PermutationCombination:
    traces = diagonal_traces(obs)
    exact = all(isinstance(v, (int, Fraction)) for v in traces.flat)
    return _combination_from_array(_coefficients_from_traces(traces, obs.dims, obs.copies, exact),
                                   obs.copies)


def twirl_from_traces(traces: np.ndarray, dims: Sequence[int], t: int) -> PermutationCombination:
    exact = traces.dtype == object
    return _combination_from_array(_coefficients_from_traces(traces, dims, t, exact), t)


# -------------------------------------------------------- projection check

@dataclass(frozen=True)
class ProjectionReport:
    ok: bool
    residuals: np.ndarray
    max_residual: float
    scale: float

    def __bool__(self) -> bool:
        return self.ok


def operator_traces(obs) -> np.ndarray:
    if hasattr(obs, "permutation_traces"):
        return obs.permutation_traces()
    return diagonal_traces(obs)


def projection_criterion(obs, target: PermutationCombination, tol: float = 1e-9,
                         dims: Sequence[int] | None = None) -> ProjectionReport:
    """Two operators have the same twirl iff their traces against every permutation agree.

    ``obs`` is a diagonal or Bell-class observable, a dense operator, or an
    array of precomputed traces; arrays need ``dims``. Residuals are indexed
    by group index per party.
    """
    dims = tuple(dims) if dims is not None else getattr(obs, "dims", None)
    if dims is None:
        raise ValueError("observable must declare its local dimensions")
    if isinstance(obs, np.ndarray):
        n = int(np.prod(dims)) ** target.t
        got = dense_traces(obs, dims, target.t) if obs.shape == (n, n) else obs
    else:
        got = operator_traces(obs)
    want = target.traces(dims, exact=got.dtype == object)
    res = got - want
    if res.dtype == object and all(isinstance(v, (int, Fraction)) for v in res.flat):
        max_res = float(max(abs(v) for v in res.flat))
        scale = float(max([1] + [abs(v) for v in want.flat]))
        ok = max_res == 0
        return ProjectionReport(ok, res, max_res, scale)
    res = np.asarray(res, dtype=complex)
    max_res = float(np.max(np.abs(res))) if res.size else 0.0
    scale = float(max(1.0, np.max(np.abs(np.asarray(want, dtype=complex)))))
    return ProjectionReport(max_res <= tol * scale, res, max_res, scale)
