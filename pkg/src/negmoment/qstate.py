"""Qudit states, Haar sampling, Born probabilities and exact moment oracles."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import permgroup as pg
from .permgroup import Permutation

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
DENSE_CAP = 4096
DEFAULT_SEED = 20240607


# ------------------------------------------------------------------ random

def seed_from_env(seed: int | None = None) -> int:
    """Explicit seed, else ``$NEG_SEED``, else a fixed default."""
    if seed is not None:
        return int(seed)
    env = os.environ.get("NEG_SEED")
    return int(env) if env else DEFAULT_SEED


def make_rng(seed: int | np.random.SeedSequence | None = None) -> np.random.Generator:
    """Counter-based Philox generator; bit-exact for a given seed."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed_from_env(seed))
    return np.random.Generator(np.random.Philox(seed))


def child_seeds(seed: int | np.random.SeedSequence, n: int) -> list[np.random.SeedSequence]:
    """Independent child streams, one per round; child k depends only on (seed, k).

    Unlike ``SeedSequence.spawn`` this does not advance the parent, so
    repeated calls return the same children.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed_from_env(seed))
    return [np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (k,),
                                   pool_size=seed.pool_size) for k in range(n)]


# ----------------------------------------------------------- density matrix

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    data: np.ndarray
    bipartition: tuple[int, int] | None = None

    def __post_init__(self):
        rho = np.array(self.data, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > TRACE_TOL:
            raise ValueError(f"trace is {np.trace(rho).real:.3g}, expected 1")
        if np.linalg.eigvalsh(rho).min() < PSD_TOL:
            raise ValueError("density matrix is not positive semidefinite")
        if self.bipartition is not None:
            da, db = (int(x) for x in self.bipartition)
            if da * db != rho.shape[0]:
                raise ValueError("bipartition does not match dimension")
            object.__setattr__(self, "bipartition", (da, db))
        rho.setflags(write=False)
        object.__setattr__(self, "data", rho)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        if self.bipartition is None:
            raise ValueError("state has no bipartition")
        return self.bipartition

    def with_bipartition(self, da: int, db: int) -> "DensityMatrix":
        return DensityMatrix(self.data, (da, db))

    def to_json(self) -> str:
        flat = [[float(z.real), float(z.imag)] for z in self.data.ravel()]
        return json.dumps({"dim": self.dim,
                           "bipartition": list(self.bipartition) if self.bipartition else None,
                           "entries": flat})

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        obj = json.loads(text)
        dim = int(obj["dim"])
        entries = np.array(obj["entries"], dtype=float)
        if entries.shape != (dim * dim, 2):
            raise ValueError("entries must be dim*dim [re, im] pairs")
        data = (entries[:, 0] + 1j * entries[:, 1]).reshape(dim, dim)
        bip = obj.get("bipartition")
        return cls(data, tuple(bip) if bip else None)


def _as_matrix(rho) -> np.ndarray:
    return rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)


def _dims_of(rho, dims=None) -> tuple[int, int]:
    if dims is not None:
        return tuple(dims)
    if isinstance(rho, DensityMatrix):
        return rho.dims
    raise ValueError("bipartition required")


def pure(psi: np.ndarray, bipartition=None) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()), bipartition)


def bell_vector(d: int) -> np.ndarray:
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * (d + 1)] = 1 / math.sqrt(d)
    return psi


def bell_state(d: int) -> DensityMatrix:
    if d < 2:
        raise ValueError("d must be >= 2")
    return pure(bell_vector(d), (d, d))


def noisy_bell(d: int, p: float) -> DensityMatrix:
    """(1-p) Psi_+ + p I/D."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    D = d * d
    return DensityMatrix((1 - p) * bell_state(d).data + p * np.eye(D) / D, (d, d))


def pure_product(d: int, rng: np.random.Generator | None = None) -> DensityMatrix:
    """|0>|0>, or a product of two Haar-random pure states when ``rng`` is given."""
    if rng is None:
        a = np.zeros(d)
        a[0] = 1
        return pure(np.kron(a, a), (d, d))
    return pure(np.kron(haar_vector(d, rng), haar_vector(d, rng)), (d, d))


def product_state(rho_a, rho_b) -> DensityMatrix:
    a, b = _as_matrix(rho_a), _as_matrix(rho_b)
    return DensityMatrix(np.kron(a, b), (a.shape[0], b.shape[0]))


def maximally_mixed(da: int, db: int | None = None) -> DensityMatrix:
    D = da * (db or 1)
    return DensityMatrix(np.eye(D) / D, (da, db) if db else None)


def haar_vector(D: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(D) + 1j * rng.standard_normal(D)
    return z / np.linalg.norm(z)


def haar_pure(D: int, rng: np.random.Generator, bipartition=None) -> DensityMatrix:
    return pure(haar_vector(D, rng), bipartition)


def random_mixed(D: int, rng: np.random.Generator, rank: int | None = None,
                 bipartition=None) -> DensityMatrix:
    """Induced-measure mixed state: G G^dag / Tr with a D x rank Ginibre G."""
    k = D if rank is None else rank
    g = rng.standard_normal((D, k)) + 1j * rng.standard_normal((D, k))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho / np.trace(rho).real, bipartition)


# ------------------------------------------------------------------- Haar

def haar_from_ginibre(z: np.ndarray) -> np.ndarray:
    """QR with the R-diagonal phase fix; works on stacks of matrices."""
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phases = diag / np.abs(diag)
    return q * phases[..., None, :]


def ginibre(d: int, rng: np.random.Generator, size: tuple[int, ...] = ()) -> np.ndarray:
    shape = size + (d, d)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def haar_unitary(d: int, rng: np.random.Generator, size: tuple[int, ...] = ()) -> np.ndarray:
    return haar_from_ginibre(ginibre(d, rng, size))


# ----------------------------------------------------------- state algebra

def partial_transpose(rho, dims=None, subsystem: str = "B") -> np.ndarray:
    da, db = _dims_of(rho, dims)
    m = _as_matrix(rho).reshape(da, db, da, db)
    if subsystem == "B":
        m = m.transpose(0, 3, 2, 1)
    elif subsystem == "A":
        m = m.transpose(2, 1, 0, 3)
    else:
        raise ValueError("subsystem must be 'A' or 'B'")
    return m.reshape(da * db, da * db)


def reduced(rho, keep: str, dims=None) -> np.ndarray:
    da, db = _dims_of(rho, dims)
    m = _as_matrix(rho).reshape(da, db, da, db)
    if keep == "A":
        return np.einsum("ibjb->ij", m)
    if keep == "B":
        return np.einsum("aiaj->ij", m)
    raise ValueError("keep must be 'A' or 'B'")


def moment(rho, k: int) -> float:
    m = _as_matrix(rho)
    return float(np.trace(np.linalg.matrix_power(m, k)).real)


def negativity_moment(rho, dims=None) -> float:
    """Tr[(rho^{T_B})^3]."""
    return moment(partial_transpose(rho, dims), 3)


def log_negativity(rho, dims=None) -> float:
    """log2 of the trace norm of rho^{T_B}."""
    ev = np.linalg.eigvalsh(partial_transpose(rho, dims))
    return float(np.log2(np.sum(np.abs(ev))))


def correlation_numerator(rho, dims=None) -> float:
    """Tr[rho_AB (rho_A (x) rho_B)]."""
    dims = _dims_of(rho, dims)
    prod = np.kron(reduced(rho, "A", dims), reduced(rho, "B", dims))
    return float(np.trace(_as_matrix(rho) @ prod).real)


def fidelity_f2(rho, dims=None) -> float:
    dims = _dims_of(rho, dims)
    num = correlation_numerator(rho, dims)
    pa = moment(reduced(rho, "A", dims), 2)
    pb = moment(reduced(rho, "B", dims), 2)
    return num / max(moment(rho, 2), pa * pb)


def renyi_entropy(rho, alpha: float) -> float:
    """Base-2 Renyi entropy; alpha=0 is log2 rank, alpha=1 the von Neumann entropy."""
    ev = np.linalg.eigvalsh(_as_matrix(rho))
    ev = ev[ev > 1e-12]
    if alpha == 0:
        return float(np.log2(len(ev)))
    if alpha == 1:
        return float(-np.sum(ev * np.log2(ev)))
    return float(np.log2(np.sum(ev ** alpha)) / (1 - alpha))


def schmidt_coefficients(rho, dims=None) -> np.ndarray:
    """Squared Schmidt coefficients (spectrum of rho_A) of a pure bipartite state."""
    m = _as_matrix(rho)
    if abs(moment(m, 2) - 1) > 1e-9:
        raise ValueError("Schmidt path needs a pure state")
    ev = np.linalg.eigvalsh(reduced(m, "A", _dims_of(rho, dims)))
    return np.clip(ev, 0, None)


# ------------------------------------------------------------ measurements

def born_probabilities(rho, unitaries: Sequence[np.ndarray]) -> np.ndarray:
    """Computational-basis outcome distribution after applying kron(*unitaries)."""
    m = _as_matrix(rho)
    u = unitaries[0]
    for v in unitaries[1:]:
        u = np.kron(u, v)
    if u.shape != m.shape:
        raise ValueError("unitaries do not match the state dimension")
    p = np.einsum("ij,jk,ik->i", u, m, u.conj()).real
    return np.clip(p, 0, None) / p.sum()


def bell_basis(d: int) -> np.ndarray:
    """Columns are |Psi_{u,v}> = (I (x) X^u Z^v)|Psi_+>, column index u*d + v."""
    from .observables import heisenberg_weyl

    phi = bell_vector(d)
    cols = [np.kron(np.eye(d), heisenberg_weyl(d, u, v)) @ phi for u in range(d) for v in range(d)]
    return np.stack(cols, axis=1)


def bell_probabilities(rho, ua: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """Bell-measurement label distribution after U_A (x) U_B, flattened as u*d + v."""
    m = _as_matrix(rho)
    da, db = ua.shape[0], ub.shape[0]
    if da != db or da * db != m.shape[0]:
        raise ValueError("Bell measurement needs d_A = d_B matching the state")
    b = bell_basis(da).conj().T @ np.kron(ua, ub)
    p = np.einsum("ij,jk,ik->i", b, m, b.conj()).real
    return np.clip(p, 0, None) / p.sum()


def sample_counts(probs: np.ndarray, n_shots: int, rng: np.random.Generator) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if n_shots == 0:
        return np.zeros(len(probs), dtype=np.int64)
    return rng.multinomial(n_shots, probs / probs.sum())


def counts_from_uniforms(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Histogram of inverse-CDF draws; rows of ``probs`` pair with rows of ``uniforms``."""
    probs = np.atleast_2d(probs)
    uniforms = np.atleast_2d(uniforms)
    cum = np.cumsum(probs, axis=-1)
    cum /= cum[:, -1:]
    k = probs.shape[-1]
    idx = np.minimum((uniforms[:, :, None] >= cum[:, None, :]).sum(-1), k - 1)
    counts = np.zeros(probs.shape, dtype=np.int64)
    rows = np.repeat(np.arange(probs.shape[0]), uniforms.shape[1])
    np.add.at(counts, (rows, idx.ravel()), 1)
    return counts


# ------------------------------------------------- permutation expectations

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def dense_permutation_expectation(rho, pi: Permutation, sigma: Permutation, dims=None) -> complex:
    """Tr[(W_pi^A (x) W_sigma^B) rho^{(x)t}] by direct contraction of t copies."""
    da, db = _dims_of(rho, dims)
    t = pi.size
    if (da * db) ** t > DENSE_CAP:
        raise ValueError(f"D^t = {(da * db) ** t} exceeds the dense cap {DENSE_CAP}")
    r = _as_matrix(rho).reshape(da, db, da, db)
    a, b = _LETTERS[:t], _LETTERS[t:2 * t]
    terms = [a[k] + b[k] + a[pi.mapping[k]] + b[sigma.mapping[k]] for k in range(t)]
    return complex(np.einsum(",".join(terms) + "->", *([r] * t), optimize="greedy"))


def schmidt_permutation_expectation(spectrum: np.ndarray, pi: Permutation, sigma: Permutation) -> float:
    """Product over cycles of sigma pi^-1 of Tr[Lambda^length]."""
    beta = pg.compose(sigma, pg.inverse(pi))
    lam = np.asarray(spectrum, dtype=float)
    return float(np.prod([np.sum(lam ** len(c)) for c in beta.cycles()]))


def permutation_expectation(rho, pi: Permutation, sigma: Permutation, dims=None,
                            method: str = "auto") -> complex:
    """Tr[(W_pi^A (x) W_sigma^B) rho^{(x)t}]; pure states use the Schmidt formula."""
    if pi.size != sigma.size:
        raise ValueError("size mismatch")
    if pi.size > pg.MAX_COPIES:
        raise ValueError("t must be <= 6")
    dims = _dims_of(rho, dims)
    if method == "auto":
        method = "schmidt" if abs(moment(rho, 2) - 1) < 1e-9 else "dense"
    if method == "schmidt":
        return schmidt_permutation_expectation(schmidt_coefficients(rho, dims), pi, sigma)
    if method == "dense":
        return dense_permutation_expectation(rho, pi, sigma, dims)
    raise ValueError(f"unknown method {method!r}")


def combination_expectation(rho, combo, dims=None) -> complex:
    """Tr[P rho^{(x)t}] for a permutation combination (single-party or bipartite)."""
    if combo.parties == 1:
        m = _as_matrix(rho)
        out = 0
        for (p,), c in combo.coefficients.items():
            out += complex(c) * np.prod([moment(m, len(cyc)) for cyc in p.cycles()])
        return out
    if combo.parties != 2:
        raise ValueError("only one or two parties supported")
    dims = _dims_of(rho, dims)
    return sum(complex(c) * permutation_expectation(rho, p, q, dims)
               for (p, q), c in combo.coefficients.items())
