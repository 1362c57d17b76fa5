"""Command-line front end: sweeps, verification suites, state oracles and budgets."""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checks, qstate, variance
from .estimator import COMPOSITES, SCHEMES, DEGENERATE_SHOTS, scheme_runs, target_value

FAMILIES = ("bell", "noisy_bell", "product", "haar_pure", "mixed", "file")
COLUMNS = ["scheme", "state", "p", "d_a", "d_b", "n_rounds", "n_shots", "repetitions",
           "oracle", "mean_estimate", "mean_abs_error", "std_estimate", "se_mean", "degenerate"]


class SpecError(ValueError):
    """Invalid sweep field; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SweepSpec:
    scheme: str = "neg"
    state: str = "noisy_bell"
    p_values: tuple[float, ...] = (0.3,)
    dims: tuple[tuple[int, int], ...] = ((3, 3),)
    n_rounds: tuple[int, ...] = (100,)
    n_shots: tuple[float, ...] = (30,)
    repetitions: int = 10
    seed: int = qstate.DEFAULT_SEED
    state_file: str | None = None
    threads: int = 1
    out: str | None = None
    format: str = "csv"
    timing: bool = False

    def validate(self) -> "SweepSpec":
        if self.scheme not in SCHEMES and self.scheme not in COMPOSITES:
            raise SpecError("sweep.scheme", f"unknown scheme {self.scheme!r}")
        if self.state not in FAMILIES:
            raise SpecError("sweep.state", f"unknown state family {self.state!r}")
        if self.state == "file" and not self.state_file:
            raise SpecError("sweep.state_file", "required for state = file")
        if not self.repetitions or self.repetitions < 1:
            raise SpecError("sweep.repetitions", "must be a positive integer")
        for key, vals in (("sweep.p", self.p_values), ("sweep.dims", self.dims),
                          ("sweep.n_rounds", self.n_rounds), ("sweep.n_shots", self.n_shots)):
            if not vals:
                raise SpecError(key, "grid must be non-empty")
        for p in self.p_values:
            if not 0 <= p <= 1:
                raise SpecError("sweep.p", f"mixing parameter {p} outside [0, 1]")
        for da, db in self.dims:
            if da < 2 or db < 1:
                raise SpecError("sweep.dims", f"bad dimensions {da}x{db}")
            if self.scheme in ("bell", "neg_bell") and da != db:
                raise SpecError("sweep.dims", "Bell measurement needs d_A = d_B")
            if self.scheme == "single" and db != 1:
                raise SpecError("sweep.dims", "single scheme takes d_B = 1")
        for n in self.n_rounds:
            if n < 1:
                raise SpecError("sweep.n_rounds", f"{n} must be >= 1")
        for n in self.n_shots:
            if not math.isinf(n) and (n < 3 or n != int(n)):
                raise SpecError("sweep.n_shots", f"{n} must be an integer >= 3 or inf")
        if self.format not in ("csv", "jsonl"):
            raise SpecError("sweep.format", f"unknown format {self.format!r}")
        if self.threads < 1:
            raise SpecError("sweep.threads", "must be >= 1")
        return self


# ------------------------------------------------------------------ parsing

def _split(text: str) -> list[str]:
    return [x.strip() for x in str(text).replace(";", ",").split(",") if x.strip()]


def _parse_list(path: str, text: str, conv):
    try:
        return tuple(conv(x) for x in _split(text))
    except ValueError as exc:
        raise SpecError(path, f"cannot parse {text!r}: {exc}") from None


def _shots(x: str) -> float:
    return math.inf if x.lower() in ("inf", "infinity", "exact") else int(x)


def _dims(x: str) -> tuple[int, int]:
    parts = x.lower().split("x")
    if len(parts) == 1:
        return int(parts[0]), 1
    if len(parts) != 2:
        raise ValueError("expected AxB")
    return int(parts[0]), int(parts[1])


_FIELDS = {
    "scheme": ("scheme", str),
    "state": ("state", str),
    "p": ("p_values", lambda s: _parse_list("sweep.p", s, float)),
    "dims": ("dims", lambda s: _parse_list("sweep.dims", s, _dims)),
    "n_rounds": ("n_rounds", lambda s: _parse_list("sweep.n_rounds", s, int)),
    "n_shots": ("n_shots", lambda s: _parse_list("sweep.n_shots", s, _shots)),
    "repetitions": ("repetitions", int),
    "seed": ("seed", int),
    "state_file": ("state_file", str),
    "threads": ("threads", int),
    "out": ("out", str),
    "format": ("format", str),
    "timing": ("timing", lambda s: str(s).lower() in ("1", "true", "yes", "on")),
}


def spec_from_mapping(values: dict[str, str], base: SweepSpec | None = None) -> SweepSpec:
    spec = base or SweepSpec(seed=qstate.seed_from_env())
    updates = {}
    for key, raw in values.items():
        if raw is None:
            continue
        if key not in _FIELDS:
            raise SpecError(f"sweep.{key}", "unknown key")
        name, conv = _FIELDS[key]
        try:
            updates[name] = conv(raw) if isinstance(raw, str) else raw
        except SpecError:
            raise
        except ValueError as exc:
            raise SpecError(f"sweep.{key}", str(exc)) from None
    return replace(spec, **updates)


def load_config(path: str) -> dict[str, str]:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise SpecError("config", f"cannot read {path}")
    if "sweep" not in parser:
        raise SpecError("config", "missing [sweep] section")
    return dict(parser["sweep"])


# -------------------------------------------------------------------- sweep

def build_state(spec: SweepSpec, p: float, da: int, db: int) -> qstate.DensityMatrix:
    rng = qstate.make_rng(np.random.SeedSequence(spec.seed, spawn_key=(da, db, 1 << 20)))
    if spec.state == "bell":
        _require_square(da, db)
        return qstate.bell_state(da)
    if spec.state == "noisy_bell":
        _require_square(da, db)
        return qstate.noisy_bell(da, p)
    if spec.state == "product":
        a = qstate.haar_pure(da, rng).data
        b = qstate.haar_pure(db, rng).data if db > 1 else np.ones((1, 1))
        return qstate.product_state(a, b).with_bipartition(da, db)
    if spec.state == "haar_pure":
        return qstate.haar_pure(da * db, rng, bipartition=(da, db))
    if spec.state == "mixed":
        return qstate.maximally_mixed(da, db)
    rho = qstate.DensityMatrix.from_json(Path(spec.state_file).read_text())
    if rho.dim != da * db:
        raise SpecError("sweep.dims", f"state file has dimension {rho.dim}, not {da}x{db}")
    return rho.with_bipartition(da, db)


def _require_square(da: int, db: int) -> None:
    if da != db:
        raise SpecError("sweep.dims", "Bell-type states need d_A = d_B")


def _budgets(scheme: str, n_rounds: int, n_shots: float) -> list[tuple[int, float]]:
    k = len(COMPOSITES.get(scheme, (None,)))
    return [(n_rounds, n_shots)] * k


def run_sweep(spec: SweepSpec) -> list[dict]:
    """One row per (dims, p, n_shots, n_rounds), aggregated over repetitions.

    Repetition r uses child r of the sweep seed for every grid point, and
    smaller round counts reuse the prefix of the longest run.
    """
    spec.validate()
    rows = []
    max_rounds = max(spec.n_rounds)
    for (da, db) in spec.dims:
        p_grid = spec.p_values if spec.state == "noisy_bell" else (spec.p_values[0],)
        for p in p_grid:
            rho = build_state(spec, p, da, db)
            oracle = float(target_value(rho, spec.scheme, (da, db)))
            for n_m in spec.n_shots:
                start = time.perf_counter()
                reps = qstate.child_seeds(spec.seed, spec.repetitions)
                per_rep = [scheme_runs(rho, spec.scheme, da, db,
                                       _budgets(spec.scheme, max_rounds, n_m), ss, spec.threads)
                           for ss in reps]
                elapsed = time.perf_counter() - start
                for n_u in sorted(spec.n_rounds):
                    est = np.array([sum(w * v[:n_u].mean() for _, w, v in runs) for runs in per_rep])
                    err = np.abs(est - oracle)
                    std = float(np.std(est, ddof=1)) if len(est) > 1 else math.nan
                    row = {
                        "scheme": spec.scheme, "state": spec.state,
                        "p": p if spec.state == "noisy_bell" else "",
                        "d_a": da, "d_b": db, "n_rounds": n_u,
                        "n_shots": "inf" if math.isinf(n_m) else int(n_m),
                        "repetitions": spec.repetitions, "oracle": oracle,
                        "mean_estimate": float(est.mean()), "mean_abs_error": float(err.mean()),
                        "std_estimate": std, "se_mean": std / math.sqrt(len(est)),
                        "degenerate": n_m in DEGENERATE_SHOTS,
                    }
                    if spec.timing:
                        row["wall_time_s"] = elapsed * n_u / max_rounds
                    rows.append(row)
    return rows


def format_rows(rows: list[dict], fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "jsonl":
        for row in rows:
            buf.write(json.dumps(row, sort_keys=False) + "\n")
        return buf.getvalue()
    cols = list(COLUMNS) + (["wall_time_s"] if rows and "wall_time_s" in rows[0] else [])
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\r\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def fit_slope(n_rounds: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(N_U)."""
    x, y = np.log(np.asarray(n_rounds, float)), np.log(np.asarray(errors, float))
    return float(np.polyfit(x, y, 1)[0])


# --------------------------------------------------------------- commands

def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    values = load_config(args.config) if args.config else {}
    flags = {"scheme": args.scheme, "state": args.state, "p": args.p, "dims": args.dims,
             "n_rounds": args.n_rounds, "n_shots": args.n_shots, "repetitions": args.repetitions,
             "seed": args.seed, "state_file": args.state_file, "threads": args.threads,
             "out": args.out, "format": args.format, "timing": "true" if args.timing else None}
    values.update({k: str(v) for k, v in flags.items() if v is not None})
    values.setdefault("threads", str(os.cpu_count() or 1))
    try:
        spec = spec_from_mapping(values).validate()
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = run_sweep(spec)
    _write(format_rows(rows, spec.format), spec.out)
    return 0


def cmd_verify(args) -> int:
    try:
        results, elapsed = checks.run_suite(args.kind)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in results:
        print(c.line())
    failed = sum(c.status == checks.FAIL for c in results)
    dev = sum(c.status == checks.DEVIATION for c in results)
    print(f"{args.kind}: {len(results) - failed - dev} passed, {dev} known deviations, "
          f"{failed} failed in {elapsed:.2f}s")
    return 1 if failed else 0


def cmd_oracle(args) -> int:
    if args.state_file:
        rho = qstate.DensityMatrix.from_json(Path(args.state_file).read_text())
    else:
        spec = SweepSpec(state=args.state, seed=qstate.seed_from_env(args.seed))
        da, db = _dims(args.dims)
        rho = build_state(spec, args.p, da, db)
    dims = rho.dims
    out = {"dims": list(dims), "purity": qstate.moment(rho, 2), "tr_rho3": qstate.moment(rho, 3)}
    if dims[1] > 1:
        out.update({
            "tr_pt3": qstate.negativity_moment(rho),
            "log_negativity": qstate.log_negativity(rho),
            "correlation_numerator": qstate.correlation_numerator(rho),
            "fidelity_f2": qstate.fidelity_f2(rho),
        })
    print(json.dumps(out, indent=2))
    return 0


def cmd_plan(args) -> int:
    n_m, n_u, total = variance.asymptotic_requirements(args.dim, args.epsilon)
    print(json.dumps({"D": args.dim, "epsilon": args.epsilon, "n_shots": n_m,
                      "n_rounds": n_u, "total_shots": total}))
    if n_m < 3:
        print("note: three-shot U-statistics need at least 3 shots per round", file=sys.stderr)
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default $NEG_SEED)")
    p.add_argument("--threads", type=int, default=None,
                   help="round-level worker threads; results do not depend on it")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="negmoment",
                                     description="Randomized-measurement moment estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an estimation sweep")
    _common(run)
    run.add_argument("--config", help="INI file with a [sweep] section")
    run.add_argument("--scheme", choices=SCHEMES + tuple(COMPOSITES))
    run.add_argument("--state", choices=FAMILIES)
    run.add_argument("--state-file")
    run.add_argument("--p", help="comma list of noisy_bell mixing values")
    run.add_argument("--dims", help="comma list like 5x5,10x10")
    run.add_argument("--n-rounds", help="comma list of N_U")
    run.add_argument("--n-shots", help="comma list of N_M; inf for exact probabilities")
    run.add_argument("--repetitions", type=int)
    run.add_argument("--timing", action="store_true", help="add a wall_time_s column")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run a golden verification suite")
    _common(ver)
    ver.add_argument("kind", help="twirl | tables | nogo | variance")
    ver.set_defaults(func=cmd_verify)

    ora = sub.add_parser("oracle", help="exact moments of a state")
    _common(ora)
    ora.add_argument("state_file", nargs="?")
    ora.add_argument("--state", choices=FAMILIES[:-1], default="bell")
    ora.add_argument("--dims", default="2x2")
    ora.add_argument("--p", type=float, default=0.0)
    ora.set_defaults(func=cmd_oracle)

    plan = sub.add_parser("plan", help="shot and round budget for dimension D")
    _common(plan)
    plan.add_argument("--dim", type=int, required=True)
    plan.add_argument("--epsilon", type=float, required=True)
    plan.set_defaults(func=cmd_plan)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
