"""Command-line front end.

Exit codes: 0 when every requested check passes, 1 when a check fails
(including operators that cannot be decomposed), 2 on unreadable or
malformed input.  JSON reports are deterministic for a given command line,
seed and version; wall-clock timings only appear in the human output.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .algebra import DEFAULT_TOL, AlgebraShape, ShapeMismatchError, Tolerances
from .io import (
    FormatError,
    decomposition_to_json,
    dumps,
    element_to_json,
    load_superop,
    scan_to_json,
)
from .preserver import (
    NotBijectiveError,
    NotDecomposableError,
    decide_op,
    decompose,
    is_op_randomized,
)
from .semigroup import (
    DEFAULT_TIMES,
    FailedDecompositionError,
    GeneratorSpec,
    PreconditionError,
    box_generator,
    check_cocycles,
    check_semigroup_law,
    example_e,
    example_v,
    generator_decomposition,
    nongroup_example,
    pedersen_conditions,
    random_inner,
    random_triple_derivation,
    random_wolff_data,
    scan,
    wolff_build,
    wolff_extract,
    zero_generator,
)
from .superop import PropertyReport

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

GENERATORS = ("zero", "box-e", "box-v", "wolff", "inner", "triple-derivation")
CHECKS = ("law", "cocycles", "pedersen", "wolff", "generator")
SCENARIOS = ("nongroup-2x2", "symmetric-demo", "generator-demo")

# One-line description of the identity behind each check, printed next to it
# in the human report.
DESCRIPTIONS = {
    "orthogonality_preserving": "a b* = b* a = 0 implies T(a) T(b)* = T(b)* T(a) = 0",
    "h_adjoint_left": "h* T(x) = T(x)* h",
    "h_adjoint_right": "h T(x)* = T(x) h*",
    "h_r_commute": "h r* = r h* with h = T(1), r its range isometry",
    "factorization": "T = L_{h r*} S",
    "S_triple_hom": "S is a triple homomorphism",
    "r_unitary": "r is unitary",
    "h_in_homotope_center": "h r* is central",
    "semigroup_law": "T_{t+s} = T_t T_s",
    "h_cocycle": "h_{t+s} = h_t r_t* S_t(h_s)",
    "r_cocycle": "r_{t+s} = S_t(r_s)",
    "S_group": "S_{t+s} = S_t S_s",
    "equivalence": "semigroup law holds iff the cocycle identities hold",
    "r_group": "r_s r_t = r_{t+s}",
    "r_fixed_by_rt_star_St": "r_s = r_t* S_t(r_s)",
    "left_mult_commutes": "r_t r_t* S_t(x) = r_t* S_t(r_t x)",
    "delta_square_of_one": "delta^2(1) = delta(1)^2",
    "pedersen_agreement": "the four range-isometry conditions agree",
    "symmetric": "T_t(x*) = T_t(x)* for every scanned t",
    "h_central": "extracted h is central",
    "h_selfadjoint": "extracted h is self-adjoint",
    "d_star_derivation": "R - L_h is a *-derivation",
    "witness_search": "randomized search for a non-preserved orthogonal pair",
    "h_t_exponential": "h_t = exp(t h)",
    "h_group": "h_{t+s} = h_t h_s",
    "z0_skew": "z0 = R(1) satisfies z0* = -z0",
    "D_star_derivation": "R - L_{z0} is a *-derivation",
    "D1_star_derivation": "R - L_{z0} + [z0/2, .] is a *-derivation",
    "variant_matches": "R = D1 + (z0 o .)",
    "peirce_closed_form": "exp(t iL(e,e)) = e^{it} P2 + e^{it/2} P1 + P0",
    "h_closed_form": "h_t matches the closed-form 2x2 matrix",
    "defect_closed_form": "r_t r_s - r_{t+s} matches its closed form",
    "h_equals_r": "h_t is unitary, so r_t = h_t",
    "v_scalar": "for v = E12, r_t = e^{it/2} 1",
}


class InputError(Exception):
    """Raised for problems with the command line or input files (exit 2)."""


class Report:
    """Checks accumulated by one command, rendered as text and JSON."""

    def __init__(self, command: str, seed: int, tol: Tolerances, tol_overridden: bool):
        self.command = command
        self.seed = seed
        self.tol = tol
        self.tol_overridden = tol_overridden
        self.checks: list[dict[str, Any]] = []
        self.timings: dict[str, float] = {}
        self.extra: dict[str, Any] = {}

    def add(self, rep: PropertyReport, group: str = "", seconds: float | None = None,
            name: str | None = None, informational: bool = False):
        entry = rep.to_dict()
        entry["name"] = name = name or rep.name
        entry["group"] = group
        if informational:
            entry["informational"] = True
        self.checks.append(entry)
        if seconds is not None:
            self.timings[f"{group}/{name}"] = seconds

    def skip(self, name: str, group: str, reason: str):
        self.checks.append({"name": name, "group": group, "verdict": None,
                            "skipped": True, "reason": reason})

    def fail(self, name: str, group: str, reason: str):
        self.checks.append({"name": name, "group": group, "verdict": False,
                            "residual": None, "reason": reason})

    @property
    def verdict(self) -> bool:
        return not any(_is_failure_entry(c) for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "tolerances": {"eq_tol": self.tol.eq_tol, "rank_tol": self.tol.rank_tol,
                           "exp_tol": self.tol.exp_tol},
            "checks": self.checks,
            "verdict": self.verdict,
            **self.extra,
        }

    def render(self) -> str:
        head = f"opstar {__version__}  {self.command}  seed={self.seed}  eq_tol={self.tol.eq_tol:g}"
        if self.tol_overridden:
            head += "  (tolerance overridden)"
        lines = [head]
        for c in self.checks:
            if c.get("skipped"):
                mark = "SKIP"
            elif c.get("informational"):
                mark = "true" if c["verdict"] else "false"
            else:
                mark = "PASS" if c["verdict"] else "FAIL"
            res = c.get("residual")
            res_s = f"{res:.2e}" if isinstance(res, float) else "-"
            key = f"{c['group']}/{c['name']}"
            timing = f"  [{self.timings[key] * 1e3:.1f} ms]" if key in self.timings else ""
            desc = DESCRIPTIONS.get(c["name"], "")
            lines.append(f"  {mark}  {key:<36s} {res_s:>9s}  {desc}{timing}")
            reason = c.get("reason") or c.get("details", {}).get("reason")
            if reason:
                lines.append(f"        reason: {reason}")
            if "witness" in c and c["verdict"] is False:
                lines.append(f"        witness: {_witness_summary(c['witness'])}")
        lines.append("verdict: " + ("PASS" if self.verdict else "FAIL"))
        return "\n".join(lines)


def _witness_summary(w: Any) -> str:
    if isinstance(w, dict):
        return ", ".join(f"{k}={v}" for k, v in w.items() if k not in ("a", "b"))
    return str(w)


def _timed(fn: Callable[[], Any]) -> tuple[Any, float]:
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------- argument helpers

def resolve_seed(flag: int | None) -> int:
    """--seed wins over OPSTAR_SEED, which wins over 0."""
    if flag is not None:
        return flag
    env = os.environ.get("OPSTAR_SEED")
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError as err:
        raise InputError(f"OPSTAR_SEED must be an integer, got {env!r}") from err


def resolve_tol(eq_tol: float | None) -> tuple[Tolerances, bool]:
    if eq_tol is None:
        return DEFAULT_TOL, False
    try:
        return DEFAULT_TOL.with_eq_tol(eq_tol), True
    except ValueError as err:
        raise InputError(f"bad --tol: {err}") from err


def parse_floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as err:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from err
    if not vals or not all(math.isfinite(v) for v in vals):
        raise InputError(f"expected finite numbers, got {text!r}")
    return vals


def parse_shape(text: str) -> AlgebraShape:
    try:
        return AlgebraShape([int(x) for x in text.split(",") if x.strip()])
    except ValueError as err:
        raise InputError(f"bad --shape {text!r}: {err}") from err


def _load_op(path):
    try:
        return load_superop(path)
    except (FormatError, ShapeMismatchError) as err:
        raise InputError(str(err)) from err


def _write(path: Path | None, payload: Any):
    if path is None:
        return
    try:
        Path(path).write_text(dumps(payload), encoding="utf-8")
    except OSError as err:
        raise InputError(f"cannot write {path}: {err.strerror}") from err


# ---------------------------------------------------------------- subcommands

def cmd_check_op(args) -> tuple[Report, int]:
    seed = resolve_seed(args.seed)
    tol, over = resolve_tol(args.tol)
    T = _load_op(args.input)
    report = Report("check-op", seed, tol, over)
    if args.randomized:
        rep, dt = _timed(lambda: is_op_randomized(T, args.samples, seed, tol=tol))
        report.extra["route"] = "randomized"
        report.add(rep, "op", dt)
    else:
        dec, dt = _timed(lambda: decide_op(T, tol, args.samples, seed))
        report.extra["route"] = dec.route
        report.extra["exact"] = dec.exact
        if dec.randomized is not None:
            report.add(dec.randomized, "op", dt)
        else:
            worst = (max(dec.decomposition.identity_residuals.values())
                     if dec.decomposition is not None else 0.0)
            report.add(PropertyReport("orthogonality_preserving", dec.verdict, worst,
                                      exhaustive=dec.exact,
                                      details={"reason": dec.reason} if dec.reason else {}),
                       "op", dt)
        if not dec.verdict and dec.randomized is None:
            # The exact route gives no concrete pair; look for one to report.
            wit, dt = _timed(lambda: is_op_randomized(T, args.samples, seed, tol=tol))
            report.add(wit, "op", dt, name="witness_search", informational=True)
        if dec.decomposition is not None:
            for name, val in dec.decomposition.identity_residuals.items():
                report.add(PropertyReport(name, val <= tol.eq_tol, val), "identities")
    return report, EXIT_OK if report.verdict else EXIT_FAIL


def cmd_decompose(args) -> tuple[Report, int]:
    tol, over = resolve_tol(args.tol)
    T = _load_op(args.input)
    report = Report("decompose", 0, tol, over)
    try:
        dec, dt = _timed(lambda: decompose(T, tol))
    except (NotBijectiveError, NotDecomposableError) as err:
        report.fail("decompose", "op", str(err))
        return report, EXIT_FAIL
    for name, val in dec.identity_residuals.items():
        report.add(PropertyReport(name, val <= tol.eq_tol, val), "identities")
    report.timings["identities/decompose"] = dt
    payload = decomposition_to_json(dec)
    report.extra["decomposition"] = payload
    _write(args.out, payload)
    return report, EXIT_OK if dec.verdict else EXIT_FAIL


def make_generator(spec: str, shape: AlgebraShape, seed: int) -> GeneratorSpec:
    if spec.startswith("file:"):
        R = _load_op(spec[len("file:"):])
        if R.dom != R.cod:
            raise InputError("a generator must map the algebra to itself")
        return GeneratorSpec(R, spec)
    if spec == "zero":
        return zero_generator(shape)
    if spec == "box-e":
        return box_generator(example_e(), "iL(e,e)")
    if spec == "box-v":
        return box_generator(example_v(), "iL(v,v)")
    if spec == "wolff":
        return wolff_build(*random_wolff_data(shape, seed))
    if spec == "inner":
        return random_inner(shape, seed)
    if spec == "triple-derivation":
        return random_triple_derivation(shape, seed)
    raise InputError(f"unknown generator {spec!r}; choose from {', '.join(GENERATORS)} "
                     f"or file:PATH")


def _parse_checks(values: list[str] | None) -> tuple[tuple[str, ...], bool]:
    names: list[str] = []
    for v in values or ["all"]:
        for name in v.split(","):
            name = name.strip()
            if name == "all":
                names.extend(CHECKS)
            elif name in CHECKS:
                names.append(name)
            else:
                raise InputError(f"unknown check {name!r}; choose from "
                                 f"{', '.join(CHECKS + ('all',))}")
    explicit = "all" not in ",".join(values or ["all"]).split(",")
    return tuple(dict.fromkeys(names)), explicit


def run_semigroup_checks(report: Report, gen: GeneratorSpec, times, checks, explicit,
                         tol: Tolerances) -> Any:
    """Run the requested checks on the family exp(tR); returns the scan."""
    sc, dt = _timed(lambda: scan(gen, times, tol))
    report.timings["scan/exp"] = dt

    def precondition(name, group, err):
        # Under --checks all, checks whose hypotheses fail are skipped;
        # when asked for by name they count as failures.
        if explicit:
            report.fail(name, group, str(err))
        else:
            report.skip(name, group, str(err))

    if "law" in checks:
        rep, dt = _timed(lambda: check_semigroup_law(sc))
        report.add(rep, "law", dt)
    if "cocycles" in checks:
        try:
            coc, dt = _timed(lambda: check_cocycles(sc))
        except FailedDecompositionError as err:
            report.fail("h_cocycle", "cocycles", f"decomposition failed: {err}")
        else:
            for rep in (coc.h_cocycle, coc.r_cocycle, coc.S_group):
                report.add(rep, "cocycles")
            report.add(PropertyReport("equivalence", coc.agree, 0.0,
                                      details={"law": coc.law.verdict,
                                               "cocycles": coc.cocycles_hold}),
                       "cocycles", dt)
    if "pedersen" in checks:
        try:
            ped, dt = _timed(lambda: pedersen_conditions(gen, times, tol))
        except PreconditionError as err:
            precondition("pedersen_agreement", "pedersen", err)
        else:
            for rep in (ped.c1, ped.c2, ped.c3, ped.c4):
                report.add(rep, "pedersen", informational=True)
            report.add(PropertyReport("pedersen_agreement", ped.agreement, ped.delta_defect,
                                      details={"flags": list(ped.flags),
                                               "delta_defect": ped.delta_defect}),
                       "pedersen", dt)
    if "wolff" in checks:
        res, dt = _timed(lambda: wolff_extract(sc))
        if not res.symmetric:
            precondition("symmetric", "wolff",
                         "semigroup is not symmetric "
                         f"(residual {res.checks['symmetric'].residual:.2e})")
        else:
            for name, rep in res.checks.items():
                report.add(rep, "wolff", name=name)
            report.timings["wolff/extract"] = dt
            report.extra["extracted_h"] = element_to_json(res.h)
    if "generator" in checks:
        try:
            gd, dt = _timed(lambda: generator_decomposition(gen, tol=tol))
        except PreconditionError as err:
            precondition("z0_skew", "generator", err)
        else:
            for name, rep in gd.reports.items():
                report.add(rep, "generator", name=name)
            report.timings["generator/decomposition"] = dt
            report.extra["z0"] = element_to_json(gd.z0)
    return sc


def _is_failure_entry(c: dict) -> bool:
    return c["verdict"] is False and not c.get("informational")


def _exit_for(report: Report) -> int:
    return EXIT_OK if report.verdict else EXIT_FAIL


def cmd_semigroup(args) -> tuple[Report, int]:
    seed = resolve_seed(args.seed)
    tol, over = resolve_tol(args.tol)
    shape = parse_shape(args.shape)
    times = parse_floats(args.times) if args.times else DEFAULT_TIMES
    checks, explicit = _parse_checks(args.checks)
    gen = make_generator(args.generator, shape, seed)
    report = Report("semigroup", seed, tol, over)
    report.extra["generator"] = args.generator
    report.extra["times"] = list(times)
    sc = run_semigroup_checks(report, gen, times, checks, explicit, tol)
    if args.out is not None:
        residuals = {c["name"]: c.get("residual") for c in report.checks
                     if not c.get("skipped")}
        _write(args.out, scan_to_json(sc, residuals))
    return report, _exit_for(report)


def cmd_scenario(args) -> tuple[Report, int]:
    seed = resolve_seed(args.seed)
    tol, over = resolve_tol(args.tol)
    report = Report(f"scenario {args.name}", seed, tol, over)
    if args.name == "nongroup-2x2":
        rec = nongroup_example(args.t, args.s, tol)
        for name, val in rec.residuals().items():
            report.add(PropertyReport(name, val <= tol.eq_tol, val), "nongroup")
        report.extra.update({"t": rec.t, "s": rec.s, "h_t": element_to_json(rec.h_t),
                             "defect_norm": rec.defect_norm})
    else:
        shape = parse_shape(args.shape)
        if args.name == "symmetric-demo":
            gen = wolff_build(*random_wolff_data(shape, seed))
            checks = ("law", "cocycles", "wolff")
        else:
            gen = random_triple_derivation(shape, seed)
            checks = ("law", "cocycles", "generator")
        report.extra["shape"] = list(shape.dims)
        run_semigroup_checks(report, gen, DEFAULT_TIMES, checks, True, tol)
    return report, _exit_for(report)


def cmd_selftest(args) -> tuple[Report, int]:
    from .acceptance import run_all

    report = Report("selftest", 0, DEFAULT_TOL, False)
    for res in run_all():
        report.add(PropertyReport(f"criterion_{res.number:02d}", res.passed, 0.0,
                                  details={"title": res.title, "detail": res.detail}),
                   "acceptance")
        report.timings[f"acceptance/criterion_{res.number:02d}"] = res.seconds
        print(res.line())
    return report, EXIT_OK if report.verdict else EXIT_FAIL


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opstar",
        description="Orthogonality-preserving operators and their one-parameter "
                    "semigroups on direct sums of matrix algebras.")
    parser.add_argument("--version", action="version", version=f"opstar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--tol", type=float, default=None,
                       help=f"equality tolerance (default {DEFAULT_TOL.eq_tol:g})")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="random seed (default: $OPSTAR_SEED, else 0)")
        p.add_argument("--json", type=Path, default=None, help="write the report as JSON")
        p.add_argument("-q", "--quiet", action="store_true", help="suppress the human report")

    p = sub.add_parser("check-op", help="decide whether an operator preserves orthogonality")
    p.add_argument("input", type=Path, help="operator JSON file")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true",
                      help="exact decision (default; randomized only for non-surjective T)")
    mode.add_argument("--randomized", action="store_true",
                      help="search random orthogonal pairs for a counterexample")
    p.add_argument("--samples", type=int, default=200, help="pairs per pair kind")
    common(p)
    p.set_defaults(func=cmd_check_op)

    p = sub.add_parser("decompose", help="compute h, r and S for a bijective operator")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, default=None, help="write the decomposition JSON")
    common(p, seed=False)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("semigroup", help="scan exp(tR) and verify semigroup identities")
    p.add_argument("--generator", default="zero",
                   help=f"one of {', '.join(GENERATORS)} or file:PATH")
    p.add_argument("--shape", default="2", help="block sizes, e.g. 2,2,1 (default 2)")
    p.add_argument("--times", default=None,
                   help="comma-separated time grid (default " +
                        ",".join(f"{t:g}" for t in DEFAULT_TIMES) + ")")
    p.add_argument("--checks", action="append", default=None,
                   help=f"comma-separated subset of {', '.join(CHECKS)}, or all (default)")
    p.add_argument("--out", type=Path, default=None, help="write the scan JSON")
    common(p)
    p.set_defaults(func=cmd_semigroup)

    p = sub.add_parser("scenario", help="run a built-in scenario")
    p.add_argument("name", choices=SCENARIOS)
    p.add_argument("--t", type=float, default=1.0, help="time t (nongroup-2x2)")
    p.add_argument("--s", type=float, default=1.0, help="second time s (nongroup-2x2)")
    p.add_argument("--shape", default="2,1", help="block sizes (demo scenarios)")
    common(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--json", type=Path, default=None)
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_selftest, tol=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_INPUT if err.code not in (0, None) else EXIT_OK
    try:
        report, code = args.func(args)
        _write(args.json, report.to_dict())
    except (InputError, ShapeMismatchError) as err:
        print(f"opstar: error: {err}", file=sys.stderr)
        return EXIT_INPUT
    if not args.quiet:
        print(report.render())
    return code


if __name__ == "__main__":
    sys.exit(main())
