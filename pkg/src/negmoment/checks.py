"""Golden verification suites behind ``negmoment verify``."""
from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import permgroup as pg
from . import qstate
from . import reference as ref
from . import variance as var
from .observables import (m_minus, m_neg_targets, m_plus, nogo_witness, o_corr, o_minus_minus,
                          o_plus, o_plus_bilocal, o_plus_global, o_corr_product)
from .permgroup import Permutation
from .weingarten import PermutationCombination, projection_criterion

PASS, FAIL, DEVIATION = "PASS", "FAIL", "DEVIATION"


@dataclass(frozen=True)
class Check:
    name: str
    status: str
    residual: float
    detail: str = ""

    def line(self) -> str:
        extra = f"  {self.detail}" if self.detail else ""
        return f"{self.status:9s} {self.name:48s} residual={self.residual:.3e}{extra}"


def _status(ok: bool, key=None) -> str:
    if ok:
        return PASS
    return DEVIATION if key in ref.KNOWN_DEVIATIONS else FAIL


def twirl_checks(dims=(2, 3, 4, 5)) -> list[Check]:
    t12 = Permutation.from_cycles(3, (1, 2))
    t23 = Permutation.from_cycles(3, (2, 3))
    targets = m_neg_targets()
    out = []
    for d in dims:
        oa, ob = o_corr(d, d)
        cases = [
            (f"O+ -> M+ (d={d})", o_plus(d), m_plus()),
            (f"O_A -> W(12) (d={d})", oa, PermutationCombination.single((t12, 1))),
            (f"O_B -> W(23) (d={d})", ob, PermutationCombination.single((t23, 1))),
            (f"O+AB -> M+AB global (D={d * d})", o_plus_global(d, d), m_plus()),
            (f"O+ x O+ -> M++ (d={d})", o_plus_bilocal(d, d), targets["M++"]),
            (f"Oc -> W(12) x W(23) (d={d})", o_corr_product(d, d), targets["Mc"]),
            (f"O-- -> M- x M- (d={d}, {'even' if d % 2 == 0 else 'odd'})",
             o_minus_minus(d), m_minus().tensor(m_minus())),
        ]
        for name, obs, target in cases:
            rep = projection_criterion(obs, target)
            out.append(Check(name, _status(rep.ok), rep.max_residual, f"scale={rep.scale:.3g}"))
    return out


def table_checks() -> list[Check]:
    out = []
    for t in (3, 4, 5, 6):
        got = pg.gamma_table(t)
        want = np.array(ref.GAMMA_TABLES[t])
        diff = float(np.abs(got - want).max())
        out.append(Check(f"embedding constants S_{t}", _status(diff == 0), diff))
        tallies = var.class_tallies(t)
        for lam, row in ref.CLASS_TALLIES[t].items():
            for pair in sorted(set(row) | set(tallies.get(lam, {}))):
                g, w = tallies.get(lam, {}).get(pair, 0), row.get(pair, 0)
                key = ("tally", t, lam, pair)
                out.append(Check(f"tally Q{t} {pg.format_partition(lam)} weights {pair}",
                                 _status(g == w, key), abs(g - w), f"got={g} ref={w}"))
            size = sum(tallies.get(lam, {}).values())
            out.append(Check(f"class size Q{t} {pg.format_partition(lam)}",
                             _status(size == ref.CLASS_SIZES[t][lam]),
                             abs(size - ref.CLASS_SIZES[t][lam])))
            tf = pg.symmetry_factor(lam)
            out.append(Check(f"T factor Q{t} {pg.format_partition(lam)}",
                             _status(tf == ref.CLASS_T_FACTORS[t][lam], ("t_factor", t, lam)),
                             abs(tf - ref.CLASS_T_FACTORS[t][lam]),
                             f"got={tf} ref={ref.CLASS_T_FACTORS[t][lam]}"))
    return out


def nogo_checks(dims=(2, 3, 4, 5)) -> list[Check]:
    out = []
    for d in dims:
        rep = nogo_witness(d)
        ok = rep.target_w0w0 == 2 * d ** 4 and rep.target_w0w1 == d ** 2 + d ** 6
        out.append(Check(f"negativity traces (d={d})", _status(ok),
                         float(abs(rep.target_w0w0 - 2 * d ** 4) + abs(rep.target_w0w1 - d ** 2 - d ** 6)),
                         f"W0W0={rep.target_w0w0} W0W1={rep.target_w0w1} gap={rep.gap}"))
        out.append(Check(f"diagonal observables blind (d={d})",
                         _status(rep.random_max_difference <= 1e-12), rep.random_max_difference,
                         f"n={rep.n_random}"))
    return out


def variance_checks(dims=(2, 3, 4), n_random: int = 5) -> list[Check]:
    out = []
    for d in dims:
        closed, reference = var.gamma_pure(d), var.gamma_pure_reference(d)
        for t in (3, 4, 5, 6):
            brute = var.gamma_brute_pure(d, t)
            out.append(Check(f"pure G{t} brute vs closed form (d={d})",
                             _status(brute == closed[t]), float(abs(brute - closed[t]))))
            out.append(Check(f"pure G{t} brute vs reference (d={d})",
                             _status(brute == reference[t], ("pure_gamma", t)),
                             float(abs(brute - reference[t])),
                             f"brute={brute} reference={reference[t]}"))
    rng = qstate.make_rng(7)
    for d in (2, 3):
        worst = max(abs(var.gamma3_exact(r) - var.gamma_brute(r, 3))
                    for r in (qstate.random_mixed(d, rng) for _ in range(n_random)))
        out.append(Check(f"mixed G3 exact vs brute (d={d})", _status(worst < 1e-8), worst))
    worst = max(abs(var.delta3_exact(r) - var.delta_brute(r, 3))
                for r in (qstate.random_mixed(4, rng, bipartition=(2, 2)) for _ in range(n_random)))
    out.append(Check("mixed D3 exact vs brute (2x2)", _status(worst < 1e-8), worst))
    return out


SUITES: dict[str, Callable[[], list[Check]]] = {
    "twirl": twirl_checks,
    "tables": table_checks,
    "nogo": nogo_checks,
    "variance": variance_checks,
}


def run_suite(kind: str) -> tuple[list[Check], float]:
    if kind not in SUITES:
        raise ValueError(f"unknown suite {kind!r}; choose from {', '.join(SUITES)}")
    start = time.perf_counter()
    checks = SUITES[kind]()
    return checks, time.perf_counter() - start
