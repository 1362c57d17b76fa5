"""Post-processing observables for three-copy randomized measurements.

Every observable here is diagonal in a product basis (computational or Bell),
so it is fully described by a coefficient rule on outcome triples.  The
twirl of such an observable is fixed by its traces against the permutation
operators, which is how each construction is verified.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
import sympy

from . import permgroup as pg
from .permgroup import Permutation
from .weingarten import PermutationCombination, cyclic_shifts, permutation_index

COPIES = 3


# ------------------------------------------------------ diagonal observables

@dataclass(frozen=True, eq=False)
class DiagonalObservable:
    """Diagonal operator on (H_d1 (x) H_d2 ...)^{(x)t} given by a coefficient rule.

    ``rule`` takes one outcome string per party and must depend only on the
    equality pattern of each string (a class function of the symbols).
    """

    name: str
    dims: tuple[int, ...]
    rule: Callable[..., object]
    copies: int = COPIES

    def value(self, *strings: Sequence[int]) -> object:
        if len(strings) != len(self.dims):
            raise ValueError("need one string per party")
        return self.rule(*(tuple(s) for s in strings))

    def pattern_value(self, patterns: Sequence[tuple[int, ...]]) -> object:
        return self.rule(*patterns)

    def diagonal(self) -> np.ndarray:
        """Dense diagonal in copy-major order (a1, b1, a2, b2, ...)."""
        shape = self.dims * self.copies
        out = np.empty(int(np.prod(shape)))
        npart = len(self.dims)
        for flat, digits in enumerate(itertools.product(*[range(d) for d in shape])):
            strings = [digits[j::npart] for j in range(npart)]
            out[flat] = float(self.rule(*strings))
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diagonal())

    def to_json(self) -> dict:
        rgs = pg.set_partitions(self.copies)
        table = {}
        for key in itertools.product(rgs, repeat=len(self.dims)):
            v = self.pattern_value(key)
            table["|".join("".join(str(x) for x in k) for k in key)] = str(v)
        return {"name": self.name, "dims": list(self.dims), "copies": self.copies,
                "pattern_coefficients": table}


def o_plus_weights(d: int) -> dict[int, int]:
    """Coefficient of O_+ by weight: 1 + (-d)**(wt-1)."""
    return {w: 1 + (-d) ** (w - 1) for w in (1, 2, 3)}


def o_plus_delta_form(d: int) -> tuple[int, int, int]:
    """(alpha, beta, gamma) with O = alpha d_123 + beta (d_12 + d_23 + d_13) + gamma."""
    return (d + 1) * (d + 2), -(d + 1), 2


def o_plus_from_deltas(s: Sequence[int], d: int) -> int:
    a, b, g = o_plus_delta_form(d)
    e12, e23, e13 = s[0] == s[1], s[1] == s[2], s[0] == s[2]
    return a * (e12 and e23) + b * (e12 + e23 + e13) + g


def o_plus(d: int) -> DiagonalObservable:
    if d < 2:
        raise ValueError("d must be >= 2")
    w = o_plus_weights(d)
    return DiagonalObservable(f"O+(d={d})", (d,), lambda s: w[pg.weight(s)])


def o_plus_global(da: int, db: int) -> DiagonalObservable:
    """O_+ on the joint alphabet of size d_A d_B, twirled by the global channel."""
    obs = o_plus(da * db)
    return DiagonalObservable(f"O+AB({da}x{db})", obs.dims, obs.rule)


def joint_weight_value(da: int, db: int, a: Sequence[int], b: Sequence[int]) -> int:
    """O_+^{AB} evaluated on paired symbols (a_k, b_k)."""
    return o_plus_weights(da * db)[pg.weight(list(zip(a, b)))]


def o_plus_bilocal(da: int, db: int) -> DiagonalObservable:
    wa, wb = o_plus_weights(da), o_plus_weights(db)
    return DiagonalObservable(f"O+(x)O+({da}x{db})", (da, db),
                              lambda a, b: wa[pg.weight(a)] * wb[pg.weight(b)])


def o_corr(da: int, db: int) -> tuple[DiagonalObservable, DiagonalObservable]:
    """Local observables twirling to W_(12) on A and W_(23) on B.

    Coefficients are d+1 on a collision of the selected pair and -1 otherwise.
    """
    oa = DiagonalObservable(f"Oc_A(d={da})", (da,), lambda a: (da + 1) * (a[0] == a[1]) - 1)
    ob = DiagonalObservable(f"Oc_B(d={db})", (db,), lambda b: (db + 1) * (b[1] == b[2]) - 1)
    return oa, ob


def o_corr_product(da: int, db: int) -> DiagonalObservable:
    oa, ob = o_corr(da, db)
    return DiagonalObservable(f"Oc({da}x{db})", (da, db), lambda a, b: oa.rule(a) * ob.rule(b))


# ------------------------------------------------------------ target operators

def m_plus(t: int = COPIES) -> PermutationCombination:
    w0, w1 = cyclic_shifts(t)
    return PermutationCombination.single((w0, 1), (w1, 1))


def m_minus(t: int = COPIES) -> PermutationCombination:
    w0, w1 = cyclic_shifts(t)
    return PermutationCombination.single((w0, 1), (w1, -1))


def m_neg_targets() -> dict[str, PermutationCombination]:
    """Three-copy target operators as permutation combinations.

    ``"M+AB"`` is the global M_+ written on two parties; ``"Mneg"`` has
    expectation Tr[(rho^{T_B})^3] and ``"Mc"`` has Tr[rho_AB (rho_A (x) rho_B)].
    """
    w0, w1 = cyclic_shifts(COPIES)
    t12 = Permutation.from_cycles(COPIES, (1, 2))
    t23 = Permutation.from_cycles(COPIES, (2, 3))
    mp, mm = m_plus(), m_minus()
    mpp, mmm = mp.tensor(mp), mm.tensor(mm)
    global_plus = PermutationCombination(COPIES, 2, {(w0, w0): 1, (w1, w1): 1})
    half = Fraction(1, 2)
    return {
        "M+": mp,
        "M-": mm,
        "M++": mpp,
        "M--": mmm,
        "M+AB": global_plus,
        "Mneg": PermutationCombination(COPIES, 2, {(w0, w1): half, (w1, w0): half}),
        "Mneg_from_plus": (mpp - global_plus) * half,
        "Mneg_from_bell": (mpp - mmm) * Fraction(1, 4),
        "Mc": PermutationCombination(COPIES, 2, {(t12, t23): 1}),
    }


# ------------------------------------------------------- Heisenberg-Weyl / Bell

@lru_cache(maxsize=None)
def _shift_clock(d: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.roll(np.eye(d), 1, axis=0)  # X|l> = |l+1>
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return x, z


def heisenberg_weyl(d: int, u: int, v: int) -> np.ndarray:
    """P(u, v) = X^u Z^v."""
    if not (0 <= u < d and 0 <= v < d):
        raise ValueError("labels must lie in [0, d)")
    x, z = _shift_clock(d)
    return np.linalg.matrix_power(x, u) @ np.linalg.matrix_power(z, v)


@lru_cache(maxsize=None)
def _all_hw(d: int) -> np.ndarray:
    """P(u, v) for label index u*d + v."""
    return np.stack([heisenberg_weyl(d, u, v) for u in range(d) for v in range(d)])


def bell_label_state(d: int, u: int, v: int) -> np.ndarray:
    phi = np.zeros(d * d, dtype=complex)
    phi[np.arange(d) * (d + 1)] = 1 / math.sqrt(d)
    return np.kron(np.eye(d), heisenberg_weyl(d, u, v)) @ phi


def bell_class(u_vec: Sequence[int], v_vec: Sequence[int], d: int) -> tuple[int, int]:
    """(weight, theta) of a label triple; theta = I.(u x v) mod d, zero unless all pairs differ."""
    pairs = list(zip(u_vec, v_vec))
    wt = pg.weight(pairs)
    if wt >= 2:
        return wt, 0
    u1, u2, u3 = u_vec
    v1, v2, v3 = v_vec
    theta = (u1 * v2 + u2 * v3 + u3 * v1) - (u1 * v3 + u2 * v1 + u3 * v2)
    return 1, theta % d


@lru_cache(maxsize=None)
def label_class_arrays(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Weight and theta for every ordered triple of label indices, shape (L, L, L)."""
    L = d * d
    u = np.arange(L) // d
    v = np.arange(L) % d
    x1, x2, x3 = np.meshgrid(np.arange(L), np.arange(L), np.arange(L), indexing="ij")
    same = (x1 == x2).astype(int) + (x2 == x3) + (x1 == x3)
    wt = np.select([same == 3, same == 1], [3, 2], default=1)
    theta = (u[x1] * v[x2] + u[x2] * v[x3] + u[x3] * v[x1]
             - u[x1] * v[x3] - u[x2] * v[x1] - u[x3] * v[x2]) % d
    theta = np.where(wt == 1, theta, 0)
    return wt, theta


def bell_class_counts(d: int) -> dict[tuple[int, int], int]:
    wt, theta = label_class_arrays(d)
    keys, counts = np.unique(np.stack([wt.ravel(), theta.ravel()]), axis=1, return_counts=True)
    return {(int(w), int(th)): int(c) for (w, th), c in zip(keys.T, counts)}


def bell_phi_values(d: int) -> np.ndarray:
    """<Psi_x1 Psi_x2 Psi_x3| W_pi^A (x) W_sigma^B |...> for all label triples.

    Shape (L, L, L, 6, 6), indexed by label indices and group indices of (pi, sigma).
    Uses Tr[W_g (A_1 (x) A_2 (x) A_3)] = prod over cycles of g of Tr(A_k A_g(k) ...)
    with A_k = P_k^dag P_sigma(k) and g = pi^-1 sigma.
    """
    L = d * d
    hw = _all_hw(d)
    pair = np.einsum("xji,yjk->xyik", hw.conj(), hw)  # P_x^dag P_y
    grid = np.stack(np.meshgrid(*[np.arange(L)] * 3, indexing="ij"), axis=-1).reshape(-1, 3)
    group = pg.enumerate_group(COPIES)
    out = np.empty((len(grid), 6, 6), dtype=complex)
    for i, pi in enumerate(group):
        for j, sigma in enumerate(group):
            mats = [pair[grid[:, k], grid[:, sigma.mapping[k]]] for k in range(COPIES)]
            g = pg.compose(pg.inverse(pi), sigma)
            val = np.ones(len(grid), dtype=complex)
            for cyc in g.cycles():
                prod = mats[cyc[0]]
                for k in cyc[1:]:
                    prod = prod @ mats[k]
                val *= np.trace(prod, axis1=1, axis2=2)
            out[:, i, j] = val / d ** 3
    return out.reshape(L, L, L, 6, 6)


def bell_phi_dense(d: int, labels: Sequence[int], pi: Permutation, sigma: Permutation) -> complex:
    """Direct 6-fold contraction oracle for one label triple (small d only)."""
    states = [bell_label_state(d, x // d, x % d) for x in labels]
    psi = states[0]
    for s in states[1:]:
        psi = np.kron(psi, s)
    idx = permutation_index([pi, sigma], (d, d))
    return complex(np.vdot(psi, _apply_index(idx, psi)))


def _apply_index(idx: np.ndarray, vec: np.ndarray) -> np.ndarray:
    out = np.zeros_like(vec)
    out[idx] = vec
    return out


# ------------------------------------------------------------- O_{--}

@dataclass(frozen=True, eq=False)
class BellObservable:
    """Bell-diagonal three-copy observable with coefficients set by (weight, theta)."""

    d: int
    q_values: dict[str, object]
    class_coefficients: dict[tuple[int, int], float]
    copies: int = COPIES

    @property
    def dims(self) -> tuple[int, int]:
        return (self.d, self.d)

    def coefficient(self, wt: int, theta: int = 0) -> float:
        return float(self.class_coefficients.get((wt, theta % self.d), 0.0))

    def value(self, labels: Sequence[tuple[int, int]]) -> float:
        u, v = zip(*labels)
        return self.coefficient(*bell_class(u, v, self.d))

    @cached_property
    def tensor(self) -> np.ndarray:
        """Coefficient for every ordered triple of label indices (u*d + v)."""
        wt, theta = label_class_arrays(self.d)
        out = np.zeros(wt.shape)
        for (w, th), c in self.class_coefficients.items():
            out[(wt == w) & (theta == th)] = float(c)
        return out

    def permutation_traces(self) -> np.ndarray:
        """Tr[O (W_pi^A (x) W_sigma^B)] for all 36 pairs."""
        phi = bell_phi_values(self.d)
        return np.einsum("xyz,xyzij->ij", self.tensor, phi)

    def dense(self) -> np.ndarray:
        basis = [bell_label_state(self.d, x // self.d, x % self.d) for x in range(self.d ** 2)]
        L = len(basis)
        dim = (self.d ** 2) ** 3
        out = np.zeros((dim, dim), dtype=complex)
        for x in itertools.product(range(L), repeat=3):
            c = self.tensor[x]
            if c:
                psi = np.kron(np.kron(basis[x[0]], basis[x[1]]), basis[x[2]])
                out += c * np.outer(psi, psi.conj())
        return out

    def to_json(self) -> dict:
        return {"d": self.d,
                "q_values": {k: str(v) for k, v in self.q_values.items()},
                "class_coefficients": {f"{w},{th}": float(c)
                                       for (w, th), c in sorted(self.class_coefficients.items())}}


BELL_UNKNOWNS = ("Q(1,0)", "Q(1,d/2)", "Q(2,0)", "Q(3,0)")


def bell_linear_system(d: int):
    """4x4 system for the class totals Q(c) = sum of coefficients over class c.

    Rows are the permutation pairs (W0 on A with identity on B), (same
    transposition on both), (W0, W0) and (W1, W0), each in units of d^3 phi
    averaged over the class.  Even d is exact rational; odd d carries the
    cos((d+1) pi / d) phase in the last row and is returned as floats.
    """
    k = d ** 5 * (d * d - 1) ** 2
    rhs = [0, 0, k, -k]
    if d % 2 == 0:
        a = sympy.Matrix([[d, d, d, d],
                          [0, 0, sympy.Rational(d * d, 3), d * d],
                          [0, 0, 0, d ** 3],
                          [d, -d, d, d]])
        return a, sympy.Matrix(rhs)
    c = math.cos((d + 1) * math.pi / d)
    a = np.array([[d, d, d, d],
                  [0, 0, d * d / 3, d * d],
                  [0, 0, 0, d ** 3],
                  [d, d * c, d, d]], dtype=float)
    return a, np.array(rhs, dtype=float)


def solve_bell_system(d: int) -> dict[str, object]:
    a, b = bell_linear_system(d)
    if isinstance(a, sympy.Matrix):
        if a.det() == 0:
            raise np.linalg.LinAlgError("singular Bell system")
        sol = a.LUsolve(b)
        vals = [Fraction(int(sympy.Rational(x).p), int(sympy.Rational(x).q)) for x in sol]
    else:
        if abs(np.linalg.det(a)) < 1e-12 * np.abs(a).max() ** 4:
            raise np.linalg.LinAlgError("singular Bell system")
        vals = list(np.linalg.solve(a, b))
    return dict(zip(BELL_UNKNOWNS, vals))


def bell_support_angle(d: int) -> int:
    """The nonzero rotation angle carrying weight-1 coefficient (d/2, or (d+1)/2 for odd d)."""
    return d // 2 if d % 2 == 0 else (d + 1) // 2


def o_minus_minus(d: int) -> BellObservable:
    if d < 2:
        raise ValueError("d must be >= 2")
    q = solve_bell_system(d)
    n = bell_class_counts(d)
    th = bell_support_angle(d)
    totals = {(3, 0): q["Q(3,0)"], (2, 0): q["Q(2,0)"], (1, 0): q["Q(1,0)"]}
    if d % 2 == 0:
        totals[(1, th)] = q["Q(1,d/2)"]
    else:
        # the angles (d+1)/2 and (d-1)/2 = -(d+1)/2 share one class total
        totals[(1, th)] = q["Q(1,d/2)"] / 2
        totals[(1, (d - 1) // 2)] = q["Q(1,d/2)"] / 2
    coeffs: dict[tuple[int, int], object] = {}
    for cls, total in totals.items():
        if n.get(cls, 0):
            coeffs[cls] = total / n[cls]
        elif abs(total) > 1e-9:
            # d = 2 has no weight-1 triple at theta = 0
            raise ValueError(f"class {cls} is empty but carries total {total}")
    return BellObservable(d, q, coeffs)


# ------------------------------------------------------------------ no-go

@dataclass(frozen=True)
class NogoReport:
    d: int
    target_w0w0: object
    target_w0w1: object
    gap: object
    random_max_difference: float
    n_random: int

    @property
    def obstructed(self) -> bool:
        return self.gap != 0 and self.random_max_difference <= 1e-12


def nogo_witness(d: int, n_random: int = 50, rng: np.random.Generator | None = None) -> NogoReport:
    """Show that no diagonal observable twirls to the negativity operator.

    The targets use the un-halved sum W0 (x) W1 + W1 (x) W0.  Any diagonal
    operator has equal traces against W0 (x) W0 and W0 (x) W1, while the
    target's traces differ.
    """
    w0, w1 = cyclic_shifts(COPIES)
    idx = pg.group_index(COPIES)
    target = PermutationCombination(COPIES, 2, {(w0, w1): 1, (w1, w0): 1})
    tr = target.traces((d, d))
    t00, t01 = tr[idx[w0], idx[w0]], tr[idx[w0], idx[w1]]
    rng = rng if rng is not None else np.random.default_rng(0)
    fixed00 = permutation_index([w0, w0], (d, d)) == np.arange((d * d) ** 3)
    fixed01 = permutation_index([w0, w1], (d, d)) == np.arange((d * d) ** 3)
    worst = 0.0
    for _ in range(n_random):
        diag = rng.standard_normal((d * d) ** 3)
        worst = max(worst, abs(diag[fixed00].sum() - diag[fixed01].sum()))
    return NogoReport(d, t00, t01, t01 - t00, worst, n_random)
