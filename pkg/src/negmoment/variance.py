"""Variance of the third-moment estimators and the resulting sample budgets.

The per-round variance is assembled from four twirled terms, one per
number of shots shared between two triples (0 to 3 collisions):

    G_t = Tr[Phi^t(Q_t) rho^(x)t],   t = 6, 5, 4, 3,

with Q_3 = O+(123)^2, Q_4 = O+(123) O+(124), Q_5 = O+(123) O+(145) and
Q_6 = O+(123) O+(456).  The bipartite terms D_t use Q_t^A (x) Q_t^B and a
product of local twirls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import permgroup as pg
from . import qstate
from .observables import DiagonalObservable, o_plus_weights
from .weingarten import build_table, diagonal_traces

DELTA_CAP = 729

# triples of positions paired by each variance term
_TRIPLE_PAIRS = {
    3: ((0, 1, 2), (0, 1, 2)),
    4: ((0, 1, 2), (0, 1, 3)),
    5: ((0, 1, 2), (0, 3, 4)),
    6: ((0, 1, 2), (3, 4, 5)),
}


@dataclass(frozen=True)
class VarianceTerms:
    """Terms t = 3..6 of the per-round variance; ``kind`` is "gamma" or "delta"."""

    g3: object
    g4: object
    g5: object
    g6: object
    provenance: str
    kind: str = "gamma"

    def __post_init__(self):
        if not all(math.isfinite(float(v)) for v in self.values()):
            raise ValueError("variance terms must be finite")

    def values(self) -> tuple:
        return (self.g3, self.g4, self.g5, self.g6)

    def __getitem__(self, t: int):
        return self.values()[t - 3]


def q_observable(t: int, d: int) -> DiagonalObservable:
    """Diagonal Q_t on t copies of C^d."""
    if t not in _TRIPLE_PAIRS:
        raise ValueError("t must be 3, 4, 5 or 6")
    w = o_plus_weights(d)
    left, right = _TRIPLE_PAIRS[t]

    def rule(s):
        return w[pg.weight([s[i] for i in left])] * w[pg.weight([s[i] for i in right])]

    return DiagonalObservable(f"Q{t}(d={d})", (d,), rule, copies=t)


def class_tallies(t: int) -> dict[pg.Partition, dict[tuple[int, int], int]]:
    """Collision patterns of t positions grouped by block sizes and triple weights.

    Each set partition of the positions stands for A_d^k strings (k blocks);
    its two paired triples have weights w1, w2.  Returns
    {lam: {(min w, max w): number of set partitions}}.
    """
    if t not in _TRIPLE_PAIRS:
        raise ValueError("t must be 3, 4, 5 or 6")
    left, right = _TRIPLE_PAIRS[t]
    out: dict[pg.Partition, dict[tuple[int, int], int]] = {}
    for rgs in pg.set_partitions(t):
        lam = tuple(sorted((rgs.count(b) for b in set(rgs)), reverse=True))
        w = sorted((pg.weight([rgs[i] for i in left]), pg.weight([rgs[i] for i in right])))
        row = out.setdefault(lam, {})
        row[tuple(w)] = row.get(tuple(w), 0) + 1
    return out


@lru_cache(maxsize=None)
def twirl_coefficients(t: int, d: int) -> tuple[Fraction, ...]:
    """c_sigma with Phi^t(Q_t) = sum_sigma c_sigma W_sigma, in group order."""
    traces = diagonal_traces(q_observable(t, d))
    return tuple(np.dot(traces, build_table(t, d).wg))


@lru_cache(maxsize=None)
def gamma_class_polynomial(t: int, d: int) -> dict[pg.Partition, Fraction]:
    """G_t as a polynomial in power sums: {lam: coefficient of prod_k Tr[rho^lam_k]}."""
    out: dict[pg.Partition, Fraction] = {}
    for p, c in zip(pg.enumerate_group(t), twirl_coefficients(t, d)):
        lam = pg.cycle_type(p)
        out[lam] = out.get(lam, Fraction(0)) + Fraction(c)
    return out


def _power_sums(rho, upto: int) -> list[float]:
    m = rho.data if isinstance(rho, qstate.DensityMatrix) else np.asarray(rho)
    ev = np.clip(np.linalg.eigvalsh(m), 0, None)
    return [float(np.sum(ev ** k)) for k in range(upto + 1)]


def gamma_brute(rho, which: int) -> float:
    """G_t by summing Weingarten-twirled class counts against Tr[rho^k] products."""
    m = rho.data if isinstance(rho, qstate.DensityMatrix) else np.asarray(rho)
    d = m.shape[0]
    ps = _power_sums(m, which)
    return float(sum(float(c) * math.prod(ps[k] for k in lam)
                     for lam, c in gamma_class_polynomial(which, d).items()))


def gamma_brute_pure(d: int, which: int) -> Fraction:
    """Exact G_t for any pure state (all power sums equal one)."""
    return sum(gamma_class_polynomial(which, d).values(), Fraction(0))


def _dense_sum(coeffs: Sequence, d: int, t: int) -> np.ndarray:
    from .weingarten import permutation_index

    n = d ** t
    out = np.zeros((n, n))
    cols = np.arange(n)
    for p, c in zip(pg.enumerate_group(t), coeffs):
        if c:
            out[permutation_index([p], (d,)), cols] += float(c)
    return out


_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def delta_brute(rho_ab, which: int, dims: tuple[int, int] | None = None) -> float:
    """D_t = Tr[(Phi_A (x) Phi_B)(Q_t^A (x) Q_t^B) rho^(x)t] by dense contraction."""
    da, db = qstate._dims_of(rho_ab, dims)
    m = rho_ab.data if isinstance(rho_ab, qstate.DensityMatrix) else np.asarray(rho_ab)
    t = which
    if max(da, db) ** t > DELTA_CAP:
        raise ValueError(f"d^t exceeds the dense cap {DELTA_CAP}")
    xa = _dense_sum(twirl_coefficients(t, da), da, t).reshape((da,) * 2 * t)
    xb = _dense_sum(twirl_coefficients(t, db), db, t).reshape((db,) * 2 * t)
    r = m.reshape(da, db, da, db)
    a, ap = _LETTERS[:t], _LETTERS[t:2 * t]
    b, bp = _LETTERS[2 * t:3 * t], _LETTERS[3 * t:4 * t]
    terms = [a + ap, b + bp] + [ap[k] + bp[k] + a[k] + b[k] for k in range(t)]
    val = np.einsum(",".join(terms) + "->", xa, xb, *([r] * t), optimize="greedy")
    return float(np.real(val))


# ------------------------------------------------------------ closed forms

def gamma_pure(d: int) -> VarianceTerms:
    """Pure-state G_3..G_6 as exact rationals in d."""
    if d < 2:
        raise ValueError("d >= 2")
    d = Fraction(d)
    g3 = (6 * d ** 3 - 2 * d + 8) / (d + 2)
    g4 = 2 * (7 * d ** 3 + 6 * d ** 2 + 3 * d + 8) / (d ** 2 + 5 * d + 6)
    g5 = (48 * d ** 3 + 68 * d ** 2 + 60 * d + 64) / (d ** 3 + 9 * d ** 2 + 26 * d + 24)
    g6 = 4 * (d ** 4 + 59 * d ** 3 + 107 * d ** 2 + 109 * d + 84) / (
        d ** 4 + 14 * d ** 3 + 71 * d ** 2 + 154 * d + 120)
    return VarianceTerms(g3, g4, g5, g6, "closed-form-pure")


def gamma_pure_reference(d: int) -> VarianceTerms:
    """Pure-state rationals exactly as tabulated; G_3 and G_4 differ from gamma_pure for d > 2."""
    d = Fraction(d)
    g3 = (6 * d ** 2 - 2 * d + 8) / (d + 2)
    g4 = 4 * (3 * d ** 3 + 5 * d ** 2 - d + 5) / (d ** 2 + 5 * d + 6)
    ref = gamma_pure(int(d))
    return VarianceTerms(g3, g4, ref.g5, ref.g6, "closed-form-reference")


def pure_bounds(d: int) -> tuple[float, float, float, float]:
    """Upper bounds 6d^2, 14d, 48, 10 on the pure-state terms."""
    return (6 * d * d, 14 * d, 48, 10)


def gamma3_exact(rho) -> float:
    m = rho.data if isinstance(rho, qstate.DensityMatrix) else np.asarray(rho)
    d = m.shape[0]
    p2, p3 = qstate.moment(m, 2), qstate.moment(m, 3)
    return ((d - 1) * (d * d + 3 * d + 4) + 3 * d * (d - 1) * (d + 1) * p2
            + 2 * (d ** 3 - d * d + 6) * p3) / (d + 2)


def delta3_exact(rho_ab, dims: tuple[int, int] | None = None) -> float:
    da, db = qstate._dims_of(rho_ab, dims)
    if da != db:
        raise ValueError("closed form needs d_A = d_B")
    d = da
    m = rho_ab.data if isinstance(rho_ab, qstate.DensityMatrix) else np.asarray(rho_ab)
    ra, rb = qstate.reduced(m, "A", (d, d)), qstate.reduced(m, "B", (d, d))
    eye = np.eye(d)
    m2 = m @ m
    tr = lambda x: float(np.real(np.trace(x)))  # noqa: E731
    a2, b2, a3, b3 = tr(ra @ ra), tr(rb @ rb), tr(ra @ ra @ ra), tr(rb @ rb @ rb)
    c3 = d ** 3 - d * d + 6
    e = d * (d + 1) ** 2 - 4
    pta = qstate.partial_transpose(m, (d, d), "A")
    total = ((a2 + b2) * 3 * d * (d - 1) ** 2 * (d + 1) * (d * d + 3 * d + 4)
             + (a3 + b3) * 2 * (d - 1) * c3 * (d * d + 3 * d + 4)
             + tr(m2) * 3 * d * d * (d * d - 1) ** 2
             + tr(m2 @ m) * 2 * c3 ** 2
             + tr(m @ np.kron(ra, rb)) * 6 * d * d * (d * d - 1) ** 2
             + (tr(m2 @ np.kron(ra, eye)) + tr(m2 @ np.kron(eye, rb))) * 6 * d * (d - 1) * (d + 1) * c3
             + 2 * tr(pta @ pta @ pta) * c3 ** 2
             + e ** 2)
    return total / (d + 2) ** 2


# -------------------------------------------------------------- variances

def _shots(n_m) -> float:
    if not math.isinf(n_m) and n_m < 3:
        raise ValueError("N_M >= 3")
    return n_m


def variance_nu(n_m, terms: VarianceTerms, tr_rho3: float) -> float:
    """Tabulated per-round variance formula (leading order in 1/N_M)."""
    n = _shots(n_m)
    g3, g4, g5, g6 = (float(v) for v in terms.values())
    if math.isinf(n):
        return g6 / 4 - tr_rho3 ** 2
    return (g6 / 4 + 9 * g5 / (4 * n) + 9 * g4 / (2 * n * n)
            + 3 * g3 / (2 * n * (n - 1) * (n - 2)) - tr_rho3 ** 2)


def variance_nu_finite(n_m, terms: VarianceTerms, tr_rho3: float) -> float:
    """Exact per-round variance: collision-count weights without the large-N_M expansion."""
    n = _shots(n_m)
    g3, g4, g5, g6 = (float(v) for v in terms.values())
    if math.isinf(n):
        return g6 / 4 - tr_rho3 ** 2
    second = ((n - 3) * (n - 4) * (n - 5) / 6 * g6 + 1.5 * (n - 3) * (n - 4) * g5
              + 3 * (n - 3) * g4 + g3) / (4 * math.comb(int(n), 3))
    return second - tr_rho3 ** 2


def variance_mu(n_m, terms: VarianceTerms, tr_rho3: float, tr_pt3: float) -> float:
    return variance_nu(n_m, terms, tr_rho3 + tr_pt3)


def variance_mu_finite(n_m, terms: VarianceTerms, tr_rho3: float, tr_pt3: float) -> float:
    return variance_nu_finite(n_m, terms, tr_rho3 + tr_pt3)


def estimator_variance(per_round_variance: float, n_u: int) -> float:
    return per_round_variance / n_u


def gamma_terms(rho) -> VarianceTerms:
    return VarianceTerms(*(gamma_brute(rho, t) for t in (3, 4, 5, 6)), "brute-force")


def delta_terms(rho_ab, dims: tuple[int, int] | None = None) -> VarianceTerms:
    return VarianceTerms(*(delta_brute(rho_ab, t, dims) for t in (3, 4, 5, 6)), "brute-force",
                         kind="delta")


# ---------------------------------------------------------------- budgets

def bernstein_bound(epsilon: float, n_u: int, nu: float) -> float:
    """2 exp(-N_U eps^2 / (2 nu + 2 eps / 3)), not clipped to 1."""
    if epsilon <= 0:
        raise ValueError("epsilon > 0")
    if math.isinf(epsilon):
        return 0.0
    return 2 * math.exp(-n_u * epsilon ** 2 / (2 * nu + 2 * epsilon / 3))


def asymptotic_requirements(D: int, epsilon: float) -> tuple[int, int, int]:
    """(N_M, N_U, N_M N_U) with N_M = ceil(D^(2/3)) and N_U = ceil(1/eps^2)."""
    if D < 2 or epsilon <= 0:
        raise ValueError("need D >= 2 and epsilon > 0")
    # smallest n with n^3 >= D^2, in integers
    n_m = max(1, round(D ** (2 / 3)) - 1)
    while n_m ** 3 < D * D:
        n_m += 1
    # decimal value of epsilon, so 0.1 gives exactly 100
    n_u = math.ceil(Fraction(repr(float(epsilon))) ** -2)
    return n_m, n_u, n_m * n_u
