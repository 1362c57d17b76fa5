"""Randomized-measurement estimators of third moments.

Each round draws random local or global unitaries, computes Born
probabilities, samples ``n_shots`` outcomes and evaluates a three-copy kernel
as a U-statistic over distinct shot triples.  Rounds are driven by
independent child seeds, so round ``k`` depends only on ``(seed, k)`` and a
run with fewer rounds is a prefix of a longer one.
"""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from . import permgroup as pg
from . import qstate
from .observables import (DiagonalObservable, label_class_arrays, o_minus_minus,
                          o_plus_delta_form)
from .qstate import DensityMatrix

SCHEMES = ("single", "global", "bilocal", "correlation", "bell")
COMPOSITES = {
    # name: ((scheme, weight), ...) combined linearly
    "neg": (("bilocal", 1.0), ("global", -1.0)),
    "neg_bell": (("bilocal", 0.5), ("bell", -0.25)),
}
EXACT = math.inf
DEGENERATE_SHOTS = (3, 4, 5)
BLOCK = 256


# ------------------------------------------------------------- U-statistics

def _is_exact(x) -> bool:
    return isinstance(x, (int, np.integer, Fraction))


def _weight_coefficients(coeff, d: int | None = None) -> dict[int, Any]:
    if isinstance(coeff, DiagonalObservable):
        return {3: coeff.value((0, 0, 0)), 2: coeff.value((0, 0, 1)), 1: coeff.value((0, 1, 2))}
    if isinstance(coeff, dict):
        return {w: coeff[w] for w in (1, 2, 3)}
    if callable(coeff):
        return {w: coeff(w) for w in (1, 2, 3)}
    raise TypeError("symmetric coefficients must be a weight map, callable or DiagonalObservable")


def u_statistic_triples(counts, coeff, symmetric: bool = True):
    """Average of a three-shot kernel over distinct shot triples, from a histogram.

    ``symmetric=True``: ``coeff`` depends only on the collision weight of the
    triple (3 all equal, 2 one pair, 1 distinct) and may be a ``{wt: value}``
    map, a callable on the weight, or a one-party :class:`DiagonalObservable`.

    ``symmetric=False``: ``coeff(x, y, z)`` is evaluated on ordered triples of
    outcome labels and averaged over ordered distinct triples.  Labels are the
    indices of ``counts``, tuples when ``counts`` has more than one axis.

    Integer or Fraction inputs give an exact Fraction; otherwise a float.
    """
    counts = np.asarray(counts)
    if counts.size == 0 or np.any(counts < 0):
        raise ValueError("counts must be a non-empty non-negative histogram")
    n = int(counts.sum())
    if n < 3:
        raise ValueError(f"need at least 3 shots, got {n}")
    if symmetric:
        w = _weight_coefficients(coeff)
        c = [int(x) for x in counts.ravel()]
        all3 = sum(math.comb(x, 3) for x in c)
        two = sum(math.comb(x, 2) * (n - x) for x in c)
        total = math.comb(n, 3)
        num = w[3] * all3 + w[2] * two + w[1] * (total - all3 - two)
        if all(_is_exact(v) for v in w.values()):
            return Fraction(num) / total
        return float(num) / total
    labels = [idx if counts.ndim > 1 else idx[0] for idx in np.ndindex(*counts.shape)
              if counts[idx] > 0]
    c = [int(counts[lab if counts.ndim > 1 else (lab,)]) for lab in labels]
    k = len(labels)
    num = 0
    for i, j, l in itertools.product(range(k), repeat=3):
        mult = c[i] * (c[j] - (i == j)) * (c[l] - (i == l) - (j == l))
        if mult:
            num += coeff(labels[i], labels[j], labels[l]) * mult
    denom = n * (n - 1) * (n - 2)
    return Fraction(num) / denom if _is_exact(num) else float(num) / denom


def brute_force_triples(shots: Sequence, coeff, symmetric: bool = True):
    """Direct enumeration over shot triples; the reference for the histogram forms."""
    shots = list(shots)
    n = len(shots)
    if n < 3:
        raise ValueError("need at least 3 shots")
    if symmetric:
        w = _weight_coefficients(coeff)
        vals = [w[pg.weight(t)] for t in itertools.combinations(shots, 3)]
        total = math.comb(n, 3)
    else:
        vals = [coeff(shots[i], shots[j], shots[k])
                for i, j, k in itertools.permutations(range(n), 3)]
        total = n * (n - 1) * (n - 2)
    s = sum(vals)
    return Fraction(s) / total if _is_exact(s) else float(s) / total


def two_party_kernel(obs: DiagonalObservable) -> Callable:
    """Ordered-triple kernel on joint labels ``(a, b)`` for a two-party observable."""
    if len(obs.dims) != 2:
        raise ValueError("need a two-party observable")
    return lambda x, y, z: obs.value((x[0], y[0], z[0]), (x[1], y[1], z[1]))


# ---------------------------------------------- batched kernels on histograms
# Each takes counts (rounds, ...) and returns the ordered-triple average,
# without the 1/2 of the "+" family.

def _ff2(c):
    return c * (c - 1.0)


def _ff3(c):
    return c * (c - 1.0) * (c - 2.0)


def plus_from_counts(counts: np.ndarray, d: int) -> np.ndarray:
    a, b, g = o_plus_delta_form(d)
    c = counts.astype(float)
    n = c.sum(-1)
    s0 = n * (n - 1) * (n - 2)
    return (a * _ff3(c).sum(-1) + 3 * b * _ff2(c).sum(-1) * (n - 2) + g * s0) / s0


def plus_from_probs(p: np.ndarray, d: int) -> np.ndarray:
    a, b, g = o_plus_delta_form(d)
    return a * (p ** 3).sum(-1) + 3 * b * (p ** 2).sum(-1) + g


def _pair_sums(c: np.ndarray) -> dict[str, np.ndarray]:
    """Ordered distinct-triple counts of delta products, c of shape (R, dA, dB)."""
    ca, cb = c.sum(2), c.sum(1)
    n = ca.sum(-1)
    flat = c.reshape(len(c), -1)
    return {
        "00": n * (n - 1) * (n - 2),
        "20": _ff2(ca).sum(-1) * (n - 2),
        "02": _ff2(cb).sum(-1) * (n - 2),
        "30": _ff3(ca).sum(-1),
        "03": _ff3(cb).sum(-1),
        "pp": _ff2(flat).sum(-1) * (n - 2),
        # pair 12 on A with pair 23 on B: fix the shared shot, subtract i = k
        "pq": (c * ((ca[:, :, None] - 1) * (cb[:, None, :] - 1) - (c - 1))).sum((1, 2)),
        "32": (_ff2(c) * (ca[:, :, None] - 2)).sum((1, 2)),
        "23": (_ff2(c) * (cb[:, None, :] - 2)).sum((1, 2)),
        "33": _ff3(flat).sum(-1),
    }


def _pair_moments(p: np.ndarray) -> dict[str, np.ndarray]:
    pa, pb = p.sum(2), p.sum(1)
    flat = p.reshape(len(p), -1)
    return {
        "00": np.ones(len(p)),
        "20": (pa ** 2).sum(-1), "02": (pb ** 2).sum(-1),
        "30": (pa ** 3).sum(-1), "03": (pb ** 3).sum(-1),
        "pp": (flat ** 2).sum(-1),
        "pq": (p * pa[:, :, None] * pb[:, None, :]).sum((1, 2)),
        "32": (p ** 2 * pa[:, :, None]).sum((1, 2)),
        "23": (p ** 2 * pb[:, None, :]).sum((1, 2)),
        "33": (flat ** 3).sum(-1),
    }


def _bilocal_combine(s: dict[str, np.ndarray], da: int, db: int) -> np.ndarray:
    a, b, g = o_plus_delta_form(da)
    a2, b2, g2 = o_plus_delta_form(db)
    num = (a * a2 * s["33"] + 3 * a * b2 * s["32"] + a * g2 * s["30"]
           + 3 * b * a2 * s["23"] + b * b2 * (3 * s["pp"] + 6 * s["pq"]) + 3 * b * g2 * s["20"]
           + g * a2 * s["03"] + 3 * g * b2 * s["02"] + g * g2 * s["00"])
    return num / s["00"]


def _corr_combine(s: dict[str, np.ndarray], da: int, db: int) -> np.ndarray:
    num = ((da + 1) * (db + 1) * s["pq"] - (da + 1) * s["20"] - (db + 1) * s["02"] + s["00"])
    return num / s["00"]


def bilocal_from_counts(c: np.ndarray) -> np.ndarray:
    return _bilocal_combine(_pair_sums(c.astype(float)), c.shape[1], c.shape[2])


def bilocal_from_probs(p: np.ndarray) -> np.ndarray:
    return _bilocal_combine(_pair_moments(p), p.shape[1], p.shape[2])


def corr_from_counts(c: np.ndarray) -> np.ndarray:
    return _corr_combine(_pair_sums(c.astype(float)), c.shape[1], c.shape[2])


def corr_from_probs(p: np.ndarray) -> np.ndarray:
    return _corr_combine(_pair_moments(p), p.shape[1], p.shape[2])


class _BellKernel:
    """O_{--} split into its all-equal, one-pair and all-distinct parts."""

    def __init__(self, d: int):
        obs = o_minus_minus(d)
        wt, _ = label_class_arrays(d)
        self.o3 = obs.coefficient(3, 0)
        self.o2 = obs.coefficient(2, 0)
        self.t1 = np.where(wt == 1, obs.tensor, 0.0)

    def _distinct(self, x: np.ndarray) -> np.ndarray:
        m = np.tensordot(x, self.t1, axes=([1], [0]))
        return np.einsum("rxy,rx,ry->r", m, x, x)

    def from_counts(self, counts: np.ndarray) -> np.ndarray:
        c = counts.astype(float)
        n = c.sum(-1)
        num = (self.o3 * _ff3(c).sum(-1) + 3 * self.o2 * (_ff2(c) * (n[:, None] - c)).sum(-1)
               + self._distinct(c))
        return num / (n * (n - 1) * (n - 2))

    def from_probs(self, p: np.ndarray) -> np.ndarray:
        return (self.o3 * (p ** 3).sum(-1) + 3 * self.o2 * (p ** 2 * (1 - p)).sum(-1)
                + self._distinct(p))


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class ProtocolConfig:
    """One estimation run.

    ``n_shots`` may be ``math.inf`` for exact Born probabilities.  Composite
    schemes (``neg``, ``neg_bell``) take the first budget for the bilocal part
    and ``n_rounds_2``/``n_shots_2`` (defaulting to the first) for the other.
    """

    scheme: str
    d_a: int
    d_b: int = 1
    n_rounds: int = 100
    n_shots: float = 30
    seed: int | None = None
    n_rounds_2: int | None = None
    n_shots_2: float | None = None
    threads: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES and self.scheme not in COMPOSITES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.d_a < 2 or self.d_b < 1:
            raise ValueError("local dimensions must be d_A >= 2, d_B >= 1")
        if self.scheme == "single" and self.d_b != 1:
            raise ValueError("single scheme takes d_B = 1")
        bip = self.scheme not in ("single", "global")
        if bip and self.d_b < 2:
            raise ValueError(f"scheme {self.scheme} needs d_B >= 2")
        if self.scheme in ("bell", "neg_bell") and self.d_a != self.d_b:
            raise ValueError("Bell measurement needs d_A = d_B")
        for rounds, shots in self.budgets():
            _check_budget(rounds, shots)

    def budgets(self) -> list[tuple[int, float]]:
        first = (self.n_rounds, self.n_shots)
        if self.scheme not in COMPOSITES:
            return [first]
        second = (self.n_rounds_2 if self.n_rounds_2 is not None else self.n_rounds,
                  self.n_shots_2 if self.n_shots_2 is not None else self.n_shots)
        return [first, second]

    @property
    def dim(self) -> int:
        return self.d_a * self.d_b

    def to_dict(self) -> dict:
        out = asdict(self)
        for k in ("n_shots", "n_shots_2"):
            if out[k] is not None and math.isinf(out[k]):
                out[k] = "inf"
        return out


def _check_budget(rounds, shots) -> None:
    if int(rounds) != rounds or rounds < 1:
        raise ValueError(f"number of rounds must be a positive integer, got {rounds}")
    if not math.isinf(shots) and (int(shots) != shots or shots < 3):
        raise ValueError(f"shots per round must be an integer >= 3 or inf, got {shots}")


# ----------------------------------------------------------------- rounds

def _state_matrix(rho, d_a: int, d_b: int) -> np.ndarray:
    m = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape != (d_a * d_b, d_a * d_b):
        raise ValueError(f"state of shape {m.shape} does not match dimensions {d_a}x{d_b}")
    if isinstance(rho, DensityMatrix) and d_b > 1 and rho.dims != (d_a, d_b):
        raise ValueError(f"state bipartition {rho.dims} does not match {d_a}x{d_b}")
    return m


def _diag_probs(u: np.ndarray, m: np.ndarray) -> np.ndarray:
    """<i|U rho U^dag|i> for a stack of unitaries."""
    p = np.einsum("rij,rij->ri", u @ m, u.conj()).real
    p = np.clip(p, 0, None)
    return p / p.sum(-1, keepdims=True)


def _batched_kron(ua: np.ndarray, ub: np.ndarray) -> np.ndarray:
    r, da, db = len(ua), ua.shape[-1], ub.shape[-1]
    return np.einsum("rij,rkl->rikjl", ua, ub).reshape(r, da * db, da * db)


class _Engine:
    """Vectorized rounds of one elementary scheme."""

    def __init__(self, scheme: str, m: np.ndarray, d_a: int, d_b: int, n_shots: float):
        self.scheme, self.m, self.d_a, self.d_b, self.n_shots = scheme, m, d_a, d_b, n_shots
        self.exact = math.isinf(n_shots)
        if scheme == "bell":
            self.bell = _BellKernel(d_a)
            self.bell_rows = qstate.bell_basis(d_a).conj().T

    def draw(self, rng: np.random.Generator) -> tuple[np.ndarray, ...]:
        """Random inputs of one round: Ginibre matrices, then shot uniforms."""
        if self.scheme in ("single", "global"):
            z = (qstate.ginibre(self.d_a * self.d_b, rng),)
        else:
            z = (qstate.ginibre(self.d_a, rng), qstate.ginibre(self.d_b, rng))
        if self.exact:
            return z
        return z + (rng.random(int(self.n_shots)),)

    def values(self, draws: list[tuple[np.ndarray, ...]]) -> np.ndarray:
        nz = 1 if self.scheme in ("single", "global") else 2
        mats = [qstate.haar_from_ginibre(np.stack([dr[k] for dr in draws])) for k in range(nz)]
        u = mats[0] if nz == 1 else _batched_kron(mats[0], mats[1])
        if self.scheme == "bell":
            u = self.bell_rows[None] @ u
        p = _diag_probs(u, self.m)
        if self.exact:
            x = p
        else:
            x = qstate.counts_from_uniforms(p, np.stack([dr[-1] for dr in draws]))
        return self._kernel(x)

    def _kernel(self, x: np.ndarray) -> np.ndarray:
        s, exact = self.scheme, self.exact
        if s in ("single", "global"):
            d = self.d_a * self.d_b
            return 0.5 * (plus_from_probs(x, d) if exact else plus_from_counts(x, d))
        if s == "bell":
            return self.bell.from_probs(x) if exact else self.bell.from_counts(x)
        x = x.reshape(len(x), self.d_a, self.d_b)
        if s == "bilocal":
            return 0.5 * (bilocal_from_probs(x) if exact else bilocal_from_counts(x))
        return corr_from_probs(x) if exact else corr_from_counts(x)


def _run_rounds(engine: _Engine, seeds: Sequence[np.random.SeedSequence], threads: int) -> np.ndarray:
    blocks = [seeds[i:i + BLOCK] for i in range(0, len(seeds), BLOCK)]

    def work(block):
        return engine.values([engine.draw(qstate.make_rng(s)) for s in block])

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    return np.concatenate(parts)


def run_round(rho, config: ProtocolConfig, rng: np.random.Generator) -> float:
    """One round of an elementary scheme using ``rng`` directly."""
    if config.scheme in COMPOSITES:
        raise ValueError("run_round takes an elementary scheme; composites combine two runs")
    m = _state_matrix(rho, config.d_a, config.d_b)
    engine = _Engine(config.scheme, m, config.d_a, config.d_b, config.n_shots)
    return float(engine.values([engine.draw(rng)])[0])


def round_values(rho, scheme: str, d_a: int, d_b: int, n_rounds: int, n_shots: float,
                 seed: int | np.random.SeedSequence | None = None, threads: int = 1) -> np.ndarray:
    """Per-round estimates of an elementary scheme; round k is seeded by child k of ``seed``."""
    _check_budget(n_rounds, n_shots)
    m = _state_matrix(rho, d_a, d_b)
    engine = _Engine(scheme, m, d_a, d_b, n_shots)
    return _run_rounds(engine, qstate.child_seeds(seed, n_rounds), threads)


# ----------------------------------------------------------------- targets

def target_value(rho, scheme: str, dims: tuple[int, int] | None = None) -> float:
    """Exact expectation of a scheme's estimator, from the state."""
    if scheme in ("single", "global"):
        return qstate.moment(rho, 3)
    pt3 = qstate.negativity_moment(rho, dims)
    r3 = qstate.moment(rho, 3)
    if scheme == "bilocal":
        return r3 + pt3
    if scheme == "bell":
        return 2 * r3 - 2 * pt3
    if scheme == "correlation":
        return qstate.correlation_numerator(rho, dims)
    if scheme in COMPOSITES:
        return pt3
    raise ValueError(f"unknown scheme {scheme!r}")


TARGET_NAMES = {
    "single": "Tr[rho^3]",
    "global": "Tr[rho_AB^3]",
    "bilocal": "Tr[rho^3] + Tr[(rho^T_B)^3]",
    "bell": "Tr[(M- x M-) rho^3] = 2Tr[rho^3] - 2Tr[(rho^T_B)^3]",
    "correlation": "Tr[rho_AB (rho_A x rho_B)]",
    "neg": "Tr[(rho^T_B)^3]",
    "neg_bell": "Tr[(rho^T_B)^3]",
}


# ----------------------------------------------------------------- results

@dataclass
class EstimateResult:
    per_round: np.ndarray | None
    mean: float
    stderr: float
    target: str
    config: ProtocolConfig
    oracle: float | None = None
    components: dict[str, dict] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def error(self) -> float | None:
        return None if self.oracle is None else abs(self.mean - self.oracle)

    def to_json(self, include_rounds: bool = False) -> dict:
        out = {"config": self.config.to_dict(), "target": self.target, "mean": self.mean,
               "stderr": self.stderr, "oracle": self.oracle, "components": self.components,
               "metadata": self.metadata}
        if include_rounds and self.per_round is not None:
            out["per_round"] = [float(x) for x in self.per_round]
        return out


def _stderr(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan


def _component_seeds(scheme: str, root: np.random.SeedSequence) -> list[np.random.SeedSequence]:
    if scheme not in COMPOSITES:
        return [root]
    return qstate.child_seeds(root, len(COMPOSITES[scheme]))


def scheme_runs(rho, scheme: str, d_a: int, d_b: int, budgets: Sequence[tuple[int, float]],
                seed: int | np.random.SeedSequence | None = None,
                threads: int = 1) -> list[tuple[str, float, np.ndarray]]:
    """Per-round values of every component of ``scheme`` as (name, weight, values)."""
    m = _state_matrix(rho, d_a, d_b)
    root = seed if isinstance(seed, np.random.SeedSequence) else \
        np.random.SeedSequence(qstate.seed_from_env(seed))
    parts = COMPOSITES.get(scheme, ((scheme, 1.0),))
    if len(budgets) != len(parts):
        raise ValueError(f"scheme {scheme} needs {len(parts)} budgets")
    return [(name, w, round_values(m, name, d_a, d_b, rounds, shots, ss, threads))
            for (name, w), (rounds, shots), ss in zip(parts, budgets, _component_seeds(scheme, root))]


def estimate(rho, config: ProtocolConfig, with_oracle: bool = True) -> EstimateResult:
    """Run ``config`` on ``rho``; composites combine independently seeded runs."""
    m = _state_matrix(rho, config.d_a, config.d_b)
    dims = (config.d_a, config.d_b)
    start = time.perf_counter()
    runs = scheme_runs(m, config.scheme, *dims, config.budgets(), config.seed, config.threads)
    comps = {}
    for (name, w, vals), (rounds, shots) in zip(runs, config.budgets()):
        comps[name] = {"weight": w, "mean": float(vals.mean()), "stderr": _stderr(vals),
                       "n_rounds": int(rounds), "n_shots": "inf" if math.isinf(shots) else int(shots)}
    mean = sum(w * v.mean() for _, w, v in runs)
    stderr = math.sqrt(sum((w * c["stderr"]) ** 2 for (_, w, _), c in zip(runs, comps.values())))
    per_round = None
    if len({len(v) for _, _, v in runs}) == 1:
        per_round = sum(w * v for _, w, v in runs)
        if len(runs) > 1:
            stderr = _stderr(per_round)
    shots = [s for _, s in config.budgets()]
    meta = {"degenerate_shots": any(s in DEGENERATE_SHOTS for s in shots),
            "wall_time_s": time.perf_counter() - start}
    oracle = float(target_value(m, config.scheme, dims)) if with_oracle else None
    if len(runs) == 1:
        comps = {}
    return EstimateResult(per_round, float(mean), stderr, TARGET_NAMES[config.scheme], config,
                          oracle, comps, meta)


def exact_round_value(probs: np.ndarray, coeff: Callable[[tuple, tuple, tuple], float]) -> float:
    """sum over all ordered outcome triples of coeff times the product of probabilities.

    Reference for the exact-probability kernels; ``probs`` may be multi-axis.
    """
    probs = np.asarray(probs)
    labels = list(np.ndindex(*probs.shape))
    total = 0.0
    for x, y, z in itertools.product(labels, repeat=3):
        total += coeff(x, y, z) * probs[x] * probs[y] * probs[z]
    return total
