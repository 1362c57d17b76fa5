"""Symmetric-group combinatorics for t <= 6 copies.

Permutations are stored 0-based as mapping tuples, ``p.mapping[i] = p(i)``.
Cycle notation accepted and printed by this module is 1-based, so
``Permutation.from_cycles(3, (1, 2, 3))`` is the cyclic shift 0->1->2->0.

The copy-permutation operator acts as ``W_p |s_1..s_t> = |s_p(1)..s_p(t)>``,
so ``W_p W_q = W_{q o p}`` (see :func:`permute_string`).
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_COPIES = 6

Partition = tuple[int, ...]


def _check_size(t: int) -> None:
    if not isinstance(t, (int, np.integer)) or not 1 <= t <= MAX_COPIES:
        raise ValueError(f"number of copies must be in [1, {MAX_COPIES}], got {t!r}")


@dataclass(frozen=True, order=True)
class Permutation:
    mapping: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(x) for x in self.mapping)
        object.__setattr__(self, "mapping", m)
        if sorted(m) != list(range(len(m))):
            raise ValueError(f"not a bijection on range({len(m)}): {m}")

    @property
    def size(self) -> int:
        return len(self.mapping)

    @classmethod
    def identity(cls, t: int) -> "Permutation":
        return cls(tuple(range(t)))

    @classmethod
    def from_cycles(cls, t: int, *cycles: Sequence[int]) -> "Permutation":
        """Build from 1-based cycles; omitted points are fixed."""
        m = list(range(t))
        seen: set[int] = set()
        for cyc in cycles:
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                if not 1 <= a <= t or a in seen:
                    raise ValueError(f"bad cycle {cyc} for size {t}")
                seen.add(a)
                m[a - 1] = b - 1
        return cls(tuple(m))

    @classmethod
    def parse(cls, text: str, t: int) -> "Permutation":
        """Parse notation like ``"(1,4,6)(3,5)"``; ``"()"`` or ``"e"`` is the identity."""
        text = text.replace(" ", "")
        if text in ("", "()", "e"):
            return cls.identity(t)
        if not (text.startswith("(") and text.endswith(")")):
            raise ValueError(f"cannot parse cycle notation {text!r}")
        cycles = [tuple(int(x) for x in c.split(",")) for c in text[1:-1].split(")(")]
        return cls.from_cycles(t, *cycles)

    def __call__(self, i: int) -> int:
        return self.mapping[i]

    def cycles(self) -> list[tuple[int, ...]]:
        """0-based cycles, smallest element first, sorted by smallest element."""
        seen = [False] * self.size
        out = []
        for start in range(self.size):
            if seen[start]:
                continue
            cyc = []
            i = start
            while not seen[i]:
                seen[i] = True
                cyc.append(i)
                i = self.mapping[i]
            out.append(tuple(cyc))
        return out

    def num_cycles(self) -> int:
        return len(self.cycles())

    def is_identity(self) -> bool:
        return all(i == m for i, m in enumerate(self.mapping))

    def __str__(self) -> str:
        nontrivial = [c for c in self.cycles() if len(c) > 1]
        if not nontrivial:
            return "()"
        return "".join("(" + ",".join(str(i + 1) for i in c) + ")" for c in nontrivial)

    def __repr__(self) -> str:
        return f"Permutation({str(self)}, t={self.size})"


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Return p o q, i.e. ``i -> p(q(i))``."""
    if p.size != q.size:
        raise ValueError("size mismatch")
    return Permutation(tuple(p.mapping[j] for j in q.mapping))


def inverse(p: Permutation) -> Permutation:
    inv = [0] * p.size
    for i, j in enumerate(p.mapping):
        inv[j] = i
    return Permutation(tuple(inv))


def permute_string(p: Permutation, s: Sequence) -> tuple:
    """Action of W_p on a basis string: position i receives s[p(i)]."""
    return tuple(s[j] for j in p.mapping)


@lru_cache(maxsize=None)
def enumerate_group(t: int) -> tuple[Permutation, ...]:
    """All of S_t in lexicographic order of the mapping; identity first."""
    _check_size(t)
    return tuple(Permutation(m) for m in itertools.permutations(range(t)))


@lru_cache(maxsize=None)
def group_index(t: int) -> dict[Permutation, int]:
    return {p: i for i, p in enumerate(enumerate_group(t))}


@lru_cache(maxsize=None)
def product_table(t: int) -> np.ndarray:
    """``table[i, j]`` is the index of ``g_i o g_j``."""
    perms = np.array([p.mapping for p in enumerate_group(t)], dtype=np.int64)
    n = len(perms)
    # composed[i, j, k] = g_i[g_j[k]]
    composed = perms[np.arange(n)[:, None, None], perms[None, :, :]]
    weights = t ** np.arange(t - 1, -1, -1)
    # lexicographic order of mappings is numeric order of their base-t codes
    return np.searchsorted(perms @ weights, composed @ weights).astype(np.int64)


@lru_cache(maxsize=None)
def inverse_table(t: int) -> np.ndarray:
    idx = group_index(t)
    return np.array([idx[inverse(p)] for p in enumerate_group(t)], dtype=np.int64)


# ---------------------------------------------------------------- partitions

def cycle_type(p: Permutation) -> Partition:
    return tuple(sorted((len(c) for c in p.cycles()), reverse=True))


@lru_cache(maxsize=None)
def partitions(t: int) -> tuple[Partition, ...]:
    """Integer partitions of t, ordered lexicographically ascending on the parts.

    For t=4 this is [1111], [211], [22], [31], [4].
    """
    def gen(n: int, cap: int) -> Iterator[Partition]:
        if n == 0:
            yield ()
            return
        for k in range(min(n, cap), 0, -1):
            for rest in gen(n - k, k):
                yield (k,) + rest

    return tuple(sorted(gen(t, t)))


def validate_partition(lam: Sequence[int]) -> Partition:
    lam = tuple(int(x) for x in lam)
    if not lam or any(x < 1 for x in lam) or list(lam) != sorted(lam, reverse=True):
        raise ValueError(f"not a partition: {lam}")
    return lam


@lru_cache(maxsize=None)
def class_of(t: int) -> np.ndarray:
    """Index into ``partitions(t)`` of the cycle type of each group element."""
    pos = {lam: i for i, lam in enumerate(partitions(t))}
    return np.array([pos[cycle_type(p)] for p in enumerate_group(t)], dtype=np.int64)


@lru_cache(maxsize=None)
def num_cycles_array(t: int) -> np.ndarray:
    return np.array([p.num_cycles() for p in enumerate_group(t)], dtype=np.int64)


def class_representative(lam: Sequence[int]) -> Permutation:
    """Permutation with consecutive cycles of lengths ``lam``: (1..l1)(l1+1..)..."""
    lam = validate_partition(lam)
    cycles, start = [], 1
    for k in lam:
        cycles.append(tuple(range(start, start + k)))
        start += k
    return Permutation.from_cycles(sum(lam), *cycles)


# ----------------------------------------------------------- outcome strings

def string_class(s: Sequence[int]) -> tuple[Permutation, Partition]:
    """Collision permutation of a string and its partition.

    Indices carrying the same symbol form one cycle, traversed in increasing
    index order. ``(5,3,5,5,3,0)`` gives ``(1,3,4)(2,5)`` and ``[3,2,1]``.
    """
    t = len(s)
    groups: dict = {}
    for i, x in enumerate(s):
        groups.setdefault(x, []).append(i)
    m = list(range(t))
    for idx in groups.values():
        for a, b in zip(idx, idx[1:] + idx[:1]):
            m[a] = b
    omega = Permutation(tuple(m))
    return omega, cycle_type(omega)


def _blocks(p: Permutation) -> list[frozenset[int]]:
    return [frozenset(c) for c in p.cycles()]


def embeds(pi: Permutation, omega: Permutation) -> bool:
    """True iff every cycle of ``pi`` lies inside a single cycle of ``omega``."""
    if pi.size != omega.size:
        raise ValueError("size mismatch")
    block_of = {}
    for b, cyc in enumerate(omega.cycles()):
        for i in cyc:
            block_of[i] = b
    return all(len({block_of[i] for i in cyc}) == 1 for cyc in pi.cycles())


def matrix_element(pi: Permutation, s: Sequence[int]) -> int:
    """<s|W_pi|s>, which is 1 exactly when s is constant on every cycle of pi."""
    if len(s) != pi.size:
        raise ValueError("size mismatch")
    return int(all(s[pi.mapping[i]] == s[i] for i in range(pi.size)))


def symmetry_factor(lam: Sequence[int]) -> int:
    return math.prod(math.factorial(k) for k in validate_partition(lam))


def embedding_constant(xi: Sequence[int], lam: Sequence[int],
                       sigma: Permutation | None = None) -> int:
    """Number of permutations of cycle type ``xi`` embeddable in ``sigma`` of type ``lam``.

    ``sigma`` defaults to :func:`class_representative`; any other element of
    the class gives the same count.
    """
    xi, lam = validate_partition(xi), validate_partition(lam)
    if sum(xi) != sum(lam):
        raise ValueError("size mismatch")
    if sigma is None:
        sigma = class_representative(lam)
    elif cycle_type(sigma) != lam:
        raise ValueError("sigma does not have cycle type lam")
    return sum(1 for p in enumerate_group(sum(xi))
               if cycle_type(p) == xi and embeds(p, sigma))


@lru_cache(maxsize=None)
def gamma_table(t: int) -> np.ndarray:
    """Embedding constants, rows xi and columns lam, both in ``partitions(t)`` order."""
    parts = partitions(t)
    return np.array([[embedding_constant(x, l) for l in parts] for x in parts], dtype=np.int64)


def format_partition(lam: Sequence[int]) -> str:
    return "[" + "".join(str(k) for k in lam) + "]"


def gamma_table_csv(t: int) -> str:
    parts = partitions(t)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["xi\\lambda"] + [format_partition(l) for l in parts])
    for xi, row in zip(parts, gamma_table(t)):
        w.writerow([format_partition(xi)] + [int(v) for v in row])
    return buf.getvalue()


# ------------------------------------------------------------ set partitions

@lru_cache(maxsize=None)
def set_partitions(t: int) -> tuple[tuple[int, ...], ...]:
    """Set partitions of t positions as restricted growth strings.

    Each string labels positions by block, blocks numbered in order of first
    appearance; ``(0, 1, 0)`` is {1,3}{2}. There are Bell(t) of them.
    """
    out = []

    def rec(prefix: list[int], nblocks: int) -> None:
        if len(prefix) == t:
            out.append(tuple(prefix))
            return
        for b in range(nblocks + 1):
            rec(prefix + [b], max(nblocks, b + 1))

    rec([], 0)
    return tuple(out)


def falling_factorial(d: int, k: int) -> int:
    """d (d-1) ... (d-k+1): number of injective labelings of k blocks by d symbols."""
    return math.prod(range(d - k + 1, d + 1)) if k <= d else 0


@lru_cache(maxsize=None)
def embedding_matrix(t: int) -> np.ndarray:
    """Boolean (t!, Bell(t)) array: permutation i is constant-compatible with set partition j."""
    perms = enumerate_group(t)
    rgs = set_partitions(t)
    return np.array([[matrix_element(p, s) for s in rgs] for p in perms], dtype=bool)


def iter_strings(d: int, t: int) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(d), repeat=t)


def weight(s: Sequence) -> int:
    """Largest multiplicity of a symbol in ``s`` (3 for aaa, 2 for aab, 1 for abc)."""
    return max(Counter(s).values())
