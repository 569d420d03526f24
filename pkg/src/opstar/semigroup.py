"""One-parameter families T_t of orthogonality preserving bijections.

A family is anything with an ``at(t)`` method returning a SuperOp.  Generated
families T_t = exp(tR) come from `GeneratorSpec`; `PointwiseFamily` wraps an
arbitrary callable so that families which are not semigroups can be scanned
through the same checks.

For each t the scan splits T_t = h_t r_t* S_t.  A family of such bijections
is a uniformly continuous semigroup exactly when {S_t} is a semigroup, h_t is
continuous at zero and h_{t+s} = h_t r_t* S_t(h_s); the checks below evaluate
both sides of that equivalence independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

from .algebra import (
    DEFAULT_TOL,
    Element,
    Tolerances,
    as_shape,
    batch_residuals,
    central_residual,
    center_basis,
    operator_norm,
    random_sample,
    relative_residual,
)
from .preserver import Decomposition, NotDecomposableError, decompose
from .superop import (
    PropertyReport,
    SuperOp,
    box,
    exp,
    expm_matrix,
    inner_derivation,
    jordan_mult,
    left_mult,
    make_report,
    property_check,
)
from .triple import peirce_projection, polar

DEFAULT_TIMES = (-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0)


class PreconditionError(ValueError):
    pass


class FailedDecompositionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    R: SuperOp
    label: str = ""

    def __post_init__(self):
        if not self.R.is_square:
            raise ValueError("a generator must act on a single algebra")

    @property
    def shape(self):
        return self.R.dom

    def at(self, t: float) -> SuperOp:
        return exp(self.R, t)


@dataclass(frozen=True, eq=False)
class PointwiseFamily:
    fn: Callable[[float], SuperOp]
    shape: Any
    label: str = ""

    def at(self, t: float) -> SuperOp:
        return self.fn(t)


def squared_time(gen: GeneratorSpec) -> PointwiseFamily:
    """t -> exp(t^2 R): every member is fine, the family is not a semigroup."""
    return PointwiseFamily(lambda t: exp(gen.R, t * t), gen.shape,
                           f"{gen.label or 'R'} at t^2")


# ------------------------------------------------------------------ scans

@dataclass
class ScanRecord:
    t: float
    T: SuperOp
    h: Element
    r: Element | None
    S: SuperOp | None
    verdict: bool
    reason: str = ""
    decomposition: Decomposition | None = None


def _record(t: float, T: SuperOp, tol: Tolerances) -> ScanRecord:
    h = T(Element.identity(T.dom))
    try:
        dec = decompose(T, tol)
    except (NotDecomposableError, ValueError) as err:
        return ScanRecord(t, T, h, None, None, False, f"not OP at t={t}: {err}")
    reason = "" if dec.verdict else f"not OP at t={t}: " + ", ".join(dec.failed(tol))
    return ScanRecord(t, T, dec.h, dec.r, dec.S, dec.verdict, reason, dec)


@dataclass
class SemigroupScan:
    family: Any
    times: tuple[float, ...]
    records: list[ScanRecord]
    tol: Tolerances = DEFAULT_TOL
    _cache: dict[float, ScanRecord] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for rec in self.records:
            self._cache.setdefault(_key(rec.t), rec)

    @property
    def shape(self):
        return self.records[0].T.dom

    def at(self, t: float) -> ScanRecord:
        """Record at t, computed on demand for times outside the grid."""
        k = _key(t)
        if k not in self._cache:
            self._cache[k] = _record(t, self.family.at(t), self.tol)
        return self._cache[k]

    @property
    def all_ok(self) -> bool:
        return all(r.verdict for r in self.records)

    def pairs(self) -> list[tuple[float, float]]:
        return [(t, s) for t in self.times for s in self.times]


def _key(t: float) -> float:
    return round(float(t), 12)


def scan(family, times: Iterable[float] = DEFAULT_TIMES,
         tol: Tolerances = DEFAULT_TOL) -> SemigroupScan:
    times = tuple(float(t) for t in times)
    records = [_record(t, family.at(t), tol) for t in times]
    return SemigroupScan(family, times, records, tol)


def identity_at_zero_residual(sc: SemigroupScan) -> float:
    T0 = sc.at(0.0).T
    return relative_residual(T0.mat, np.eye(T0.dom.total_dim))


def check_semigroup_law(sc: SemigroupScan) -> PropertyReport:
    """max over grid pairs of the residual of T_{t+s} = T_t T_s."""
    pairs = sc.pairs()
    res = np.array([relative_residual(sc.at(t + s).T.mat, (sc.at(t).T @ sc.at(s).T).mat)
                    for t, s in pairs])
    return make_report("semigroup_law", res, sc.tol,
                       lambda i: {"t": pairs[i[0]][0], "s": pairs[i[0]][1]})


@dataclass
class CocycleReport:
    h_cocycle: PropertyReport       # h_{t+s} = h_t r_t* S_t(h_s)
    r_cocycle: PropertyReport       # r_{t+s} = S_t(r_s)
    S_group: PropertyReport         # S_{t+s} = S_t S_s
    law: PropertyReport
    h_continuity: list[float]
    cocycles_hold: bool
    agree: bool

    def __bool__(self):
        return self.cocycles_hold

    @property
    def residuals(self) -> dict[str, float]:
        return {"h_cocycle": self.h_cocycle.residual, "r_cocycle": self.r_cocycle.residual,
                "S_group": self.S_group.residual, "semigroup_law": self.law.residual}


def check_cocycles(sc: SemigroupScan, continuity_steps=(1e-1, 1e-2, 1e-3)) -> CocycleReport:
    """Evaluate the cocycle side of the semigroup equivalence and compare it
    with the semigroup law computed directly from the operators."""
    pairs = sc.pairs()
    needed = sorted({_key(x) for t, s in pairs for x in (t, s, t + s)})
    bad = [sc.at(t) for t in needed if not sc.at(t).verdict]
    if bad:
        raise FailedDecompositionError(bad[0].reason)

    hres, rres, sres = [], [], []
    for t, s in pairs:
        Rt, Rs, Rts = sc.at(t), sc.at(s), sc.at(t + s)
        hres.append(relative_residual(Rts.h, Rt.h @ Rt.r.H @ Rt.S(Rs.h)))
        rres.append(relative_residual(Rts.r, Rt.S(Rs.r)))
        sres.append(relative_residual(Rts.S.mat, (Rt.S @ Rs.S).mat))
    label = lambda i: {"t": pairs[i[0]][0], "s": pairs[i[0]][1]}
    tol = sc.tol
    h_rep = make_report("h_cocycle", hres, tol, label)
    r_rep = make_report("r_cocycle", rres, tol, label)
    s_rep = make_report("S_group", sres, tol, label)

    one = Element.identity(sc.shape)
    cont = [operator_norm(sc.family.at(t)(one) - one) for t in continuity_steps]
    law = check_semigroup_law(sc)
    holds = h_rep.verdict and r_rep.verdict and s_rep.verdict
    return CocycleReport(h_rep, r_rep, s_rep, law, cont, holds, holds == law.verdict)


def continuity_at_zero(family, steps: Sequence[float] = (1e-1, 1e-2, 1e-3),
                       tol: Tolerances = DEFAULT_TOL) -> tuple[list[float], bool]:
    """||T_t - Id|| along decreasing t, and whether it decreases (up to eq_tol)."""
    norms = []
    for t in steps:
        T = family.at(t)
        norms.append(float(np.linalg.norm(T.mat - np.eye(T.dom.total_dim), 2)))
    monotone = all(b <= a + tol.eq_tol for a, b in zip(norms, norms[1:]))
    return norms, monotone


# ------------------------------------------------------------ generators

def zero_generator(shape) -> GeneratorSpec:
    shape = as_shape(shape)
    return GeneratorSpec(SuperOp(shape, shape, np.zeros((shape.total_dim,) * 2)), "zero")


def box_generator(a: Element, label: str = "") -> GeneratorSpec:
    """x -> i {a, a, x}, a generator of surjective isometries."""
    return GeneratorSpec(1j * box(a, a), label or "iL(a,a)")


def example_e() -> Element:
    """A partial isometry in M_2 with e e* = [[1,1],[1,1]]/2 and e* e = E_11."""
    return Element.from_blocks([np.array([[1.0, 0.0], [1.0, 0.0]]) / math.sqrt(2)])


def example_v() -> Element:
    return Element.from_blocks([np.array([[0.0, 1.0], [0.0, 0.0]])])


def random_triple_derivation(shape, seed=None, scale: float = 0.5) -> GeneratorSpec:
    """L(a, b) - L(b, a) + i L(c, c) for random a, b, c."""
    rng = np.random.default_rng(seed)
    a, b, c = (scale * random_sample(shape, "generic", rng) for _ in range(3))
    R = box(a, b) - box(b, a) + 1j * box(c, c)
    return GeneratorSpec(R, f"triple derivation (seed {seed})")


def random_inner(shape, seed=None, scale: float = 0.5) -> GeneratorSpec:
    z = scale * random_sample(shape, "skew", seed)
    return GeneratorSpec(inner_derivation(z), f"inner derivation (seed {seed})")


def random_wolff_data(shape, seed=None, scale: float = 0.5) -> tuple[Element, Element]:
    """Random central self-adjoint h and skew z."""
    shape = as_shape(shape)
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(shape.n_blocks)
    h = sum((c * b for c, b in zip(coeffs, center_basis(shape))), Element.zeros(shape))
    z = scale * random_sample(shape, "skew", rng)
    return h, z


# ------------------------------------------------------- isometry generators

def _require_isometry_generator(gen: GeneratorSpec, times, tol):
    for t in times:
        rep = property_check(gen.at(t), "surjective_isometry", tol)
        if not rep.verdict:
            raise PreconditionError(
                f"not an isometry generator: exp({t} R) fails triple_hom "
                f"(residual {rep.residual:.2e})")


@dataclass
class GeneratorDecomposition:
    z0: Element
    D: SuperOp
    z1: Element
    D1: SuperOp
    reports: dict[str, PropertyReport]

    def __bool__(self):
        return all(r.verdict for r in self.reports.values())


def generator_decomposition(gen: GeneratorSpec, times: Iterable[float] = (0.5, 1.0),
                            tol: Tolerances = DEFAULT_TOL) -> GeneratorDecomposition:
    """Write a generator of surjective isometries as R = D + L_{z0} = D1 + M_{z1}.

    z0 = R(1) is skew, D = R - L_{z0} and D1 = D + [z0/2, .] are
    *-derivations and z1 = z0.
    """
    _require_isometry_generator(gen, times, tol)
    R = gen.R
    one = Element.identity(R.dom)
    z0 = R(one)
    D = R - left_mult(z0)
    z1 = z0
    D1 = D + inner_derivation(0.5 * z0)
    skew = relative_residual(z0.H, -z0)
    variant = relative_residual((D1 + jordan_mult(z1)).mat, R.mat)
    reports = {
        "z0_skew": PropertyReport("z0_skew", skew <= tol.eq_tol, skew),
        "D_star_derivation": property_check(D, "star_derivation", tol),
        "D1_star_derivation": property_check(D1, "star_derivation", tol),
        "variant_matches": PropertyReport("variant_matches", variant <= tol.eq_tol, variant),
    }
    return GeneratorDecomposition(z0, D, z1, D1, reports)


# ------------------------------------------------------- symmetric case

def expm_element(a: Element, t: float = 1.0) -> Element:
    return Element(a.shape, tuple(expm_matrix(t * b) for b in a.blocks))


def wolff_build(h: Element, z: Element, tol: Tolerances = DEFAULT_TOL) -> GeneratorSpec:
    """R = L_h + [z, .] for central self-adjoint h and skew z."""
    if central_residual(h) > tol.eq_tol:
        raise ValueError("h must be central")
    if relative_residual(h, h.H) > tol.eq_tol:
        raise ValueError("h must be self-adjoint")
    if relative_residual(z.H, -z) > tol.eq_tol:
        raise ValueError("z must be skew (z* = -z)")
    return GeneratorSpec(left_mult(h) + inner_derivation(z), "L_h + [z, .]")


@dataclass
class WolffResult:
    h: Element | None
    d: SuperOp | None
    R_log: SuperOp | None
    R_fd: SuperOp | None
    checks: dict[str, PropertyReport]
    symmetric: bool

    def __bool__(self):
        return self.symmetric and all(c.verdict for c in self.checks.values())


def wolff_extract(sc: SemigroupScan, t1: float = 0.125) -> WolffResult:
    """Recover h and the *-derivation d from a scan of a symmetric OP semigroup.

    The generator is estimated as log(T_{t1}) / t1 with the principal matrix
    logarithm; the forward difference (T_{t1} - Id) / t1 is kept for
    comparison.
    """
    tol = sc.tol
    sym = [property_check(rec.T, "symmetric_map", tol) for rec in sc.records]
    if not all(s.verdict for s in sym):
        worst = max(sym, key=lambda s: s.residual)
        return WolffResult(None, None, None, None,
                           {"symmetric": PropertyReport("symmetric", False, worst.residual)},
                           False)
    shape = sc.shape
    T1 = sc.family.at(t1)
    n = shape.total_dim
    R_log = SuperOp(shape, shape, scipy.linalg.logm(T1.mat) / t1)
    R_fd = SuperOp(shape, shape, (T1.mat - np.eye(n)) / t1)
    one = Element.identity(shape)
    h = R_log(one)
    d = R_log - left_mult(h)

    checks = {}
    cr = central_residual(h)
    checks["h_central"] = PropertyReport("h_central", cr <= tol.eq_tol, cr)
    sa = relative_residual(h, h.H)
    checks["h_selfadjoint"] = PropertyReport("h_selfadjoint", sa <= tol.eq_tol, sa)
    checks["d_star_derivation"] = property_check(d, "star_derivation", tol)
    ht = [relative_residual(rec.h, expm_element(h, rec.t)) for rec in sc.records]
    checks["h_t_exponential"] = make_report("h_t_exponential", ht, tol,
                                            lambda i: {"t": sc.records[i[0]].t})
    pairs = sc.pairs()
    hg = [relative_residual(sc.at(t + s).h, sc.at(t).h @ sc.at(s).h) for t, s in pairs]
    rg = [relative_residual(sc.at(t + s).r, sc.at(t).r @ sc.at(s).r) for t, s in pairs]
    lab = lambda i: {"t": pairs[i[0]][0], "s": pairs[i[0]][1]}
    checks["h_group"] = make_report("h_group", hg, tol, lab)
    checks["r_group"] = make_report("r_group", rg, tol, lab)
    return WolffResult(h, d, R_log, R_fd, checks, True)


# ------------------------------------------------------- Pedersen conditions

@dataclass
class PedersenReport:
    c1: PropertyReport   # r_s r_t = r_{t+s}
    c2: PropertyReport   # r_s = r_t* S_t(r_s)
    c3: PropertyReport   # L_{r_t} r_t* S_t = r_t* S_t L_{r_t}
    c4: PropertyReport   # delta^2(1) = delta(1)^2
    delta_defect: float  # operator norm of delta^2(1) - delta(1)^2

    @property
    def flags(self) -> tuple[bool, bool, bool, bool]:
        return (self.c1.verdict, self.c2.verdict, self.c3.verdict, self.c4.verdict)

    @property
    def agreement(self) -> bool:
        return len(set(self.flags)) == 1


def pedersen_conditions(gen: GeneratorSpec, times: Iterable[float] = DEFAULT_TIMES,
                        tol: Tolerances = DEFAULT_TOL) -> PedersenReport:
    """Four conditions on S_t = exp(t delta), r_t = S_t(1), which agree for
    generators of surjective isometries on a unital algebra.

    delta(1)^2 is the algebra square of the element delta(1).
    """
    times = tuple(float(t) for t in times)
    _require_isometry_generator(gen, [t for t in times if t != 0] or [1.0], tol)
    shape = gen.shape
    one = Element.identity(shape)
    cache: dict[float, tuple[SuperOp, Element]] = {}

    def S_r(t):
        k = _key(t)
        if k not in cache:
            S = gen.at(t)
            cache[k] = (S, S(one))
        return cache[k]

    pairs = [(t, s) for t in times for s in times]
    lab = lambda i: {"t": pairs[i[0]][0], "s": pairs[i[0]][1]}
    c1 = [relative_residual(S_r(s)[1] @ S_r(t)[1], S_r(t + s)[1]) for t, s in pairs]
    c2 = [relative_residual(S_r(s)[1], S_r(t)[1].H @ S_r(t)[0](S_r(s)[1])) for t, s in pairs]

    X = shape.to_dense(np.eye(shape.total_dim))
    c3 = []
    for t in times:
        S, r = S_r(t)
        rd = r.dense()
        SX = S.images()
        lhs = rd @ rd.conj().T @ SX
        rX = shape.from_dense(rd @ X)
        rhs = rd.conj().T @ shape.to_dense(rX @ S.mat.T)
        c3.append(batch_residuals(lhs, rhs).max())

    d1 = gen.R(one)
    d2 = gen.R(d1)
    c4 = relative_residual(d2, d1 @ d1)
    return PedersenReport(
        make_report("r_group", c1, tol, lab),
        make_report("r_fixed_by_rt_star_St", c2, tol, lab),
        make_report("left_mult_commutes", c3, tol, lambda i: {"t": times[i[0]]}),
        PropertyReport("delta_square_of_one", c4 <= tol.eq_tol, c4),
        operator_norm(d2 - d1 @ d1),
    )


# ------------------------------------------------------- the 2x2 example

def nongroup_h_closed_form(t: float) -> np.ndarray:
    w = np.exp(0.5j * t)
    return np.array([[w * (w + 1) / 2, (w - 1) / 2],
                     [w * (w - 1) / 2, (w + 1) / 2]])


def nongroup_defect_closed_form(t: float, s: float) -> np.ndarray:
    """Closed form of r_t r_s - r_{t+s} for the 2x2 example."""
    a, b, c = np.exp(0.5j * s), np.exp(0.5j * t), np.exp(1j * t)
    return np.array([
        [-0.25 * a * (a - 1) * (b - 1) ** 2, 0.25 * (a - 1) * (c - 1)],
        [-0.25 * a * (a - 1) * (c - 1), 0.25 * (a - 1) * (b - 1) ** 2],
    ])


@dataclass
class NonGroupRecord:
    t: float
    s: float
    e: Element
    h_t: Element
    peirce_residual: float        # exp(t iL(e,e)) vs e^{it} P2 + e^{it/2} P1 + P0
    h_closed_form_residual: float
    defect: Element               # r_t r_s - r_{t+s}
    defect_residual: float        # vs closed form
    defect_norm: float
    h_equals_r_residual: float
    v_scalar_residual: float      # r_t = e^{it/2} 1 for v = E_12

    def residuals(self) -> dict[str, float]:
        return {"peirce_closed_form": self.peirce_residual,
                "h_closed_form": self.h_closed_form_residual,
                "defect_closed_form": self.defect_residual,
                "h_equals_r": self.h_equals_r_residual,
                "v_scalar": self.v_scalar_residual}


def nongroup_example(t: float, s: float = 1.0, tol: Tolerances = DEFAULT_TOL) -> NonGroupRecord:
    """The 2x2 family exp(t iL(e,e)) whose range partial isometries are not a group.

    The residuals are absolute operator-norm distances.
    """
    e = example_e()
    gen = box_generator(e, "iL(e,e)")
    one = Element.identity(e.shape)
    Tt = gen.at(t)
    closed = (np.exp(1j * t) * peirce_projection(e, 2, tol).mat
              + np.exp(0.5j * t) * peirce_projection(e, 1, tol).mat
              + peirce_projection(e, 0, tol).mat)
    peirce_res = float(np.linalg.norm(Tt.mat - closed, 2))

    h_t = Tt(one)
    h_res = float(np.linalg.norm(h_t.blocks[0] - nongroup_h_closed_form(t), 2))
    r_t = polar(h_t, tol).u
    r_of = lambda x: polar(gen.at(x)(one), tol).u
    defect = r_of(t) @ r_of(s) - r_of(t + s)
    defect_res = float(np.linalg.norm(defect.blocks[0] - nongroup_defect_closed_form(t, s), 2))

    v_gen = box_generator(example_v(), "iL(v,v)")
    v_res = operator_norm(v_gen.at(t)(one) - np.exp(0.5j * t) * one)
    return NonGroupRecord(t, s, e, h_t, peirce_res, h_res, defect, defect_res,
                          operator_norm(defect), operator_norm(h_t - r_t), v_res)

