"""Orthogonality preservers: decisions, decompositions T = h r* S, kernels.

Two elements are orthogonal when a b* = b* a = 0.  For a linear bijection T
the property of preserving orthogonality is decided exactly: with h = T(1)
and r its range partial isometry, T preserves orthogonality iff h is
invertible, r is unitary and S = r h^-1 T is a triple isomorphism obeying the
compatibility identities collected in `decompose`.  Surjective maps are
reduced to bijections by factoring out the kernel, which must then be a sum
of blocks.  For everything else only a randomized search for broken pairs is
offered.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .algebra import (
    DEFAULT_TOL,
    AlgebraShape,
    Element,
    Tolerances,
    as_shape,
    batch_residuals,
    center_basis,
    central_residual,
    matrix_unit,
    operator_norm,
    relative_residual,
)
from .superop import (
    PropertyReport,
    SuperOp,
    _tp,
    block_triple_auto,
    left_mult,
    property_check,
)
from .triple import odd_triple_power, polar


class NotBijectiveError(ValueError):
    pass


class NotSurjectiveError(ValueError):
    pass


class NotDecomposableError(ValueError):
    """T(1) is not invertible, so T cannot be an orthogonality preserving bijection."""

    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


# --------------------------------------------------------------- orthogonality

def orthogonality_residual(a: Element, b: Element) -> float:
    """max(||a b*||, ||b* a||) / (1 + ||a|| ||b||)."""
    num = max(operator_norm(a @ b.H), operator_norm(b.H @ a))
    return num / (1.0 + operator_norm(a) * operator_norm(b))


def is_orthogonal(a: Element, b: Element, tol: Tolerances = DEFAULT_TOL) -> bool:
    return orthogonality_residual(a, b) <= tol.eq_tol


def _dense_orth_residuals(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    Bh = np.conj(np.swapaxes(B, -1, -2))
    opn = lambda x: np.linalg.norm(x, 2, axis=(-2, -1))
    num = np.maximum(opn(A @ Bh), opn(Bh @ A))
    return num / (1.0 + opn(A) * opn(B))


PAIR_KINDS = ("matrix_unit", "general", "hermitian", "spectral_positive")


def _matrix_unit_pairs(shape: AlgebraShape):
    units = [(bi, i, j) for bi, n in enumerate(shape.dims)
             for j in range(n) for i in range(n)]
    pairs = []
    for x in units:
        for y in units:
            if x[0] != y[0] or (x[1] != y[1] and x[2] != y[2]):
                pairs.append((x, y))
    return pairs


def _random_unitary(rng, n):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _split_pair(rng, shape: AlgebraShape, kind: str) -> tuple[Element, Element]:
    if kind == "spectral_positive":
        hs = []
        for n in shape.dims:
            g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            hs.append(np.linalg.eigh((g + g.conj().T) / 2))
        lo = min(w.min() for w, _ in hs)
        hi = max(w.max() for w, _ in hs)
        tau = rng.uniform(lo, hi)
        a = [(V * np.clip(w - tau, 0, None)) @ V.conj().T for w, V in hs]
        b = [(V * np.clip(tau - w, 0, None)) @ V.conj().T for w, V in hs]
        return Element(shape, tuple(a)), Element(shape, tuple(b))

    a_blocks, b_blocks = [], []
    for n in shape.dims:
        side = rng.integers(0, 2, size=n).astype(bool)
        if kind == "general":
            U, V = _random_unitary(rng, n), _random_unitary(rng, n)
            s = rng.uniform(0.2, 2.0, size=n)
        elif kind == "hermitian":
            U = _random_unitary(rng, n)
            V = U
            s = rng.uniform(0.2, 2.0, size=n) * rng.choice([-1.0, 1.0], size=n)
        else:
            raise ValueError(f"unknown pair kind {kind!r}")
        a_blocks.append((U * np.where(side, s, 0)) @ V.conj().T)
        b_blocks.append((U * np.where(side, 0, s)) @ V.conj().T)
    return Element(shape, tuple(a_blocks)), Element(shape, tuple(b_blocks))


def orthogonal_pairs(shape, kind: str = "matrix_unit", count: int | None = None,
                     seed=0) -> list[tuple[Element, Element]]:
    """Seeded list of orthogonal pairs.

    matrix_unit enumerates pairs of orthogonal matrix units (shuffled and cut
    to `count` when given); general, hermitian and spectral_positive draw
    random pairs sharing a spectral or singular value frame with disjoint
    supports.
    """
    shape = as_shape(shape)
    rng = np.random.default_rng(seed)
    if kind == "matrix_unit":
        pairs = _matrix_unit_pairs(shape)
        if count is not None and count < len(pairs):
            idx = rng.permutation(len(pairs))[:count]
            pairs = [pairs[i] for i in sorted(idx)]
        return [(matrix_unit(shape, *x), matrix_unit(shape, *y)) for x, y in pairs]
    if kind not in PAIR_KINDS:
        raise ValueError(f"unknown pair kind {kind!r}")
    count = 100 if count is None else count
    return [_split_pair(rng, shape, kind) for _ in range(count)]


def is_op_randomized(T: SuperOp, count: int = 200, seed=0,
                     kinds: Sequence[str] = PAIR_KINDS,
                     tol: Tolerances = DEFAULT_TOL) -> PropertyReport:
    """Search for an orthogonal pair whose images are not orthogonal.

    A true verdict only means no counterexample was found among the pairs
    tried; the report is flagged non-exhaustive.
    """
    tried = 0
    worst = 0.0
    for n_kind, kind in enumerate(kinds):
        pairs = orthogonal_pairs(T.dom, kind, count, seed=(seed, n_kind))
        if not pairs:
            continue
        A = T.dom.to_dense(np.stack([a.vec() for a, _ in pairs]))
        B = T.dom.to_dense(np.stack([b.vec() for _, b in pairs]))
        TA = T.cod.to_dense(np.stack([a.vec() for a, _ in pairs]) @ T.mat.T)
        TB = T.cod.to_dense(np.stack([b.vec() for _, b in pairs]) @ T.mat.T)
        src = _dense_orth_residuals(A, B)
        res = _dense_orth_residuals(TA, TB)
        assert np.all(src <= tol.eq_tol), "pair generator produced a non-orthogonal pair"
        bad = np.flatnonzero(res > tol.eq_tol)
        if bad.size:
            k = int(bad[0])
            a, b = pairs[k]
            return PropertyReport(
                "orthogonality_preserving", False, float(res[k]),
                witness={"kind": kind, "index": k, "pair_number": tried + k,
                         "a": a, "b": b},
                exhaustive=False,
                details={"pairs_tried": tried + k + 1, "kinds": list(kinds)})
        tried += len(pairs)
        worst = max(worst, float(res.max()))
    return PropertyReport("orthogonality_preserving", True, worst, exhaustive=False,
                          details={"pairs_tried": tried, "kinds": list(kinds)})


# --------------------------------------------------------------- decomposition

IDENTITY_NAMES = (
    "h_adjoint_left",       # h* S(x) = S(x*)* h
    "h_adjoint_right",      # h S(x*)* = S(x) h*
    "h_r_commute",          # h r* S(x) = S(x) r* h
    "factorization",        # T(x) = h r* S(x) = S(x) r* h
    "S_triple_hom",
    "r_unitary",
    "h_in_homotope_center",  # h r* central
)


@dataclass
class Decomposition:
    h: Element
    r: Element
    S: SuperOp
    identity_residuals: dict[str, float]
    verdict: bool
    h_margin: float = field(default=float("nan"))

    def __bool__(self):
        return self.verdict

    def failed(self, tol: Tolerances = DEFAULT_TOL) -> list[str]:
        return [k for k, v in self.identity_residuals.items() if v > tol.eq_tol]


def invertibility_margin(h: Element) -> float:
    """Smallest singular value over the largest one, across all blocks."""
    s = np.concatenate([np.linalg.svd(b, compute_uv=False) for b in h.blocks])
    return float(s.min() / s.max()) if s.max() > 0 else 0.0


def decompose(T: SuperOp, tol: Tolerances = DEFAULT_TOL) -> Decomposition:
    """Split a bijection as T = h r* S with h = T(1), r = r(h), S = r h^-1 T.

    The verdict is true exactly when every compatibility identity holds,
    which for bijections is equivalent to T preserving orthogonality.
    """
    if not T.is_bijective(tol):
        raise NotBijectiveError("decompose needs a bijective operator")
    one = Element.identity(T.dom)
    h = T(one)
    margin = invertibility_margin(h)
    if margin <= tol.rank_tol:
        raise NotDecomposableError(
            f"h not invertible: T(1) has singular value ratio {margin:.3e}", margin)
    r = polar(h, tol).u
    S = left_mult(r @ h.inverse()) @ T

    hd, rd = h.dense(), r.dense()
    hh, rh = hd.conj().T, rd.conj().T
    X = T.dom.to_dense(np.eye(T.dom.total_dim))
    SX = S.images()
    TX = T.images()
    SXs = S.cod.to_dense(T.dom.from_dense(np.conj(np.swapaxes(X, -1, -2))) @ S.mat.T)
    SXs_h = np.conj(np.swapaxes(SXs, -1, -2))
    SX_h = np.conj(np.swapaxes(SX, -1, -2))

    res = {}
    res["h_adjoint_left"] = batch_residuals(hh @ SX, SXs_h @ hd).max()
    res["h_adjoint_right"] = batch_residuals(hd @ SXs_h, SX @ hh).max()
    res["h_r_commute"] = batch_residuals(hd @ rh @ SX, SX @ rh @ hd).max()
    res["factorization"] = max(batch_residuals(TX, hd @ rh @ SX).max(),
                               batch_residuals(TX, SX @ rh @ hd).max())
    res["S_triple_hom"] = property_check(S, "triple_hom", tol).residual
    res["r_unitary"] = max(relative_residual(r.H @ r, one), relative_residual(r @ r.H, one))
    res["h_in_homotope_center"] = central_residual(h @ r.H)
    res = {k: float(v) for k, v in res.items()}
    verdict = all(v <= tol.eq_tol for v in res.values())
    return Decomposition(h, r, S, res, verdict, margin)


def compose_from_parts(h: Element, r: Element, S: SuperOp) -> SuperOp:
    """T = L_{h r*} S."""
    return left_mult(h @ r.H) @ S


def multiplier_identity_check(T: SuperOp, dec: Decomposition, samples: int = 20,
                              seed=0, tol: Tolerances = DEFAULT_TOL) -> PropertyReport:
    """Check {T a, T b, T c} = h^[3] r* S({a, b, c}) on basis and random triples."""
    X = T.dom.to_dense(np.eye(T.dom.total_dim))
    TX = T.images()
    h3r = (odd_triple_power(dec.h, 3) @ dec.r.H).dense()
    mids = np.concatenate([X, 1j * X])
    Tmids = np.concatenate([TX, 1j * TX])

    def S_dense(batch):
        return dec.S.cod.to_dense(T.dom.from_dense(batch) @ dec.S.mat.T)

    basis_res = np.empty((len(mids), len(X), len(X)))
    for k in range(len(mids)):
        lhs = _tp(TX[:, None], Tmids[k], TX[None, :])
        rhs = h3r @ S_dense(_tp(X[:, None], mids[k], X[None, :]))
        basis_res[k] = batch_residuals(lhs, rhs)

    rng = np.random.default_rng(seed)
    rand_res = []
    for _ in range(samples):
        abc = [rng.standard_normal(T.dom.total_dim) + 1j * rng.standard_normal(T.dom.total_dim)
               for _ in range(3)]
        D = T.dom.to_dense(np.stack(abc))
        TD = T.cod.to_dense(np.stack(abc) @ T.mat.T)
        lhs = _tp(TD[0], TD[1], TD[2])
        rhs = h3r @ S_dense(_tp(D[0], D[1], D[2])[None])[0]
        rand_res.append(batch_residuals(lhs, rhs))
    worst_basis = float(basis_res.max())
    worst_rand = float(max(rand_res)) if rand_res else 0.0
    worst = max(worst_basis, worst_rand)
    return PropertyReport("multiplier_identity", worst <= tol.eq_tol, worst,
                          details={"basis_residual": worst_basis,
                                   "random_residual": worst_rand,
                                   "random_samples": samples})


# --------------------------------------------------------------- kernels

@dataclass
class KernelReport:
    kernel_blocks: tuple[int, ...]
    is_ideal: bool
    kernel_dim: int
    quotient_shape: AlgebraShape | None
    quotient_op: SuperOp | None
    reason: str = ""


def kernel_quotient(T: SuperOp, tol: Tolerances = DEFAULT_TOL) -> KernelReport:
    """Identify ker(T) with a sum of blocks and factor it out.

    When the null space of T is not spanned by whole blocks it is not an
    ideal, so T cannot preserve orthogonality.
    """
    if not T.is_surjective(tol):
        raise NotSurjectiveError("kernel_quotient needs a surjective operator")
    nrm = T.op_norm()
    dom = T.dom
    blocks = tuple(i for i in range(dom.n_blocks)
                   if np.linalg.norm(T.mat[:, dom.block_slice(i)], 2) <= tol.eq_tol * nrm)
    kernel_dim = dom.total_dim - T.rank(tol)
    block_dim = sum(dom.dims[i] ** 2 for i in blocks)
    if kernel_dim != block_dim:
        return KernelReport(blocks, False, kernel_dim, None, None,
                            "kernel is not an ideal, so T is not orthogonality preserving")
    kept = [i for i in range(dom.n_blocks) if i not in blocks]
    if not kept:
        return KernelReport(blocks, True, kernel_dim, None, None, "T is zero")
    qshape = AlgebraShape(dom.dims[i] for i in kept)
    cols = np.concatenate([np.arange(dom.total_dim)[dom.block_slice(i)] for i in kept])
    return KernelReport(blocks, True, kernel_dim, qshape,
                        SuperOp(qshape, T.cod, T.mat[:, cols]))


# --------------------------------------------------------------- decisions

@dataclass
class OPDecision:
    verdict: bool
    route: str                      # "bijective", "quotient" or "randomized"
    exact: bool
    reason: str = ""
    decomposition: Decomposition | None = None
    kernel: KernelReport | None = None
    randomized: PropertyReport | None = None

    def __bool__(self):
        return self.verdict


def decide_op(T: SuperOp, tol: Tolerances = DEFAULT_TOL, count: int = 200,
              seed=0) -> OPDecision:
    """Exact decision for bijections and surjections, randomized otherwise."""
    if T.is_bijective(tol):
        try:
            dec = decompose(T, tol)
        except NotDecomposableError as err:
            return OPDecision(False, "bijective", True, str(err))
        reason = "" if dec.verdict else "failed identities: " + ", ".join(dec.failed(tol))
        return OPDecision(dec.verdict, "bijective", True, reason, decomposition=dec)
    if T.is_surjective(tol):
        ker = kernel_quotient(T, tol)
        if not ker.is_ideal or ker.quotient_op is None:
            return OPDecision(False, "quotient", True, ker.reason, kernel=ker)
        sub = decide_op(ker.quotient_op, tol, count, seed)
        return OPDecision(sub.verdict, "quotient", True, sub.reason,
                          decomposition=sub.decomposition, kernel=ker)
    rep = is_op_randomized(T, count, seed, tol=tol)
    return OPDecision(rep.verdict, "randomized", False,
                      "" if rep.verdict else "orthogonal pair with non-orthogonal images",
                      randomized=rep)


@dataclass
class AgreementReport:
    general: PropertyReport
    hermitian: PropertyReport
    positive: PropertyReport
    exact: bool | None
    agree: bool
    details: dict[str, Any] = field(default_factory=dict)

    def __bool__(self):
        return self.agree


def pair_agreement(T: SuperOp, count: int = 200, seed=0,
                   tol: Tolerances = DEFAULT_TOL) -> AgreementReport:
    """Run the randomized search on general, self-adjoint and positive pairs.

    Orthogonality preservation on positive pairs already forces it on all
    pairs, so the three verdicts must coincide, and must match the exact
    decision whenever one is available.
    """
    general = is_op_randomized(T, count, seed, kinds=("matrix_unit", "general"), tol=tol)
    herm = is_op_randomized(T, count, seed, kinds=("hermitian",), tol=tol)
    pos = is_op_randomized(T, count, seed, kinds=("spectral_positive",), tol=tol)
    exact = None
    if T.is_surjective(tol):
        exact = decide_op(T, tol).verdict
    verdicts = {general.verdict, herm.verdict, pos.verdict}
    agree = len(verdicts) == 1 and (exact is None or exact in verdicts)
    return AgreementReport(general, herm, pos, exact, agree)


# --------------------------------------------------------------- constructions

def random_triple_automorphism(shape, seed=None) -> SuperOp:
    """Random block permutation (within equal sizes), block unitaries u, v and
    transpose flags, assembled by `block_triple_auto`."""
    shape = as_shape(shape)
    rng = np.random.default_rng(seed)
    perm = list(range(shape.n_blocks))
    for n in set(shape.dims):
        idx = [i for i, m in enumerate(shape.dims) if m == n]
        for i, j in zip(idx, rng.permutation(idx)):
            perm[i] = int(j)
    us = [_random_unitary(rng, n) for n in shape.dims]
    vs = [_random_unitary(rng, n) for n in shape.dims]
    transpose = [bool(f) for f in rng.integers(0, 2, size=shape.n_blocks)]
    return block_triple_auto(shape, perm, us, vs, transpose)


@dataclass
class Construction:
    T: SuperOp
    h: Element
    r: Element
    S: SuperOp


def random_op_bijection(shape, seed=None, weights: Sequence[float] | None = None) -> Construction:
    """T = h r* S with S a random triple automorphism, r = S(1) and
    h = sum_i c_i r 1_i for positive weights c_i."""
    shape = as_shape(shape)
    rng = np.random.default_rng(seed)
    S = random_triple_automorphism(shape, rng)
    r = S(Element.identity(shape))
    c = rng.uniform(0.5, 3.0, size=shape.n_blocks) if weights is None else weights
    h = Element.zeros(shape)
    for ci, ui in zip(c, center_basis(shape)):
        h = h + ci * (r @ ui)
    return Construction(compose_from_parts(h, r, S), h, r, S)


def random_defect_map(shape, seed=None, strength: float = 0.5) -> SuperOp:
    """An orthogonality preserving bijection plus a rank-one defect x -> x + s f(x) E_11."""
    shape = as_shape(shape)
    rng = np.random.default_rng(seed)
    base = random_op_bijection(shape, rng).T
    f = rng.standard_normal(shape.total_dim) + 1j * rng.standard_normal(shape.total_dim)
    f /= np.linalg.norm(f)
    target = matrix_unit(shape, 0, 0, 0).vec()
    return SuperOp(shape, shape, base.mat + strength * np.outer(target, f))


def random_invertible_map(shape, seed=None) -> SuperOp:
    shape = as_shape(shape)
    rng = np.random.default_rng(seed)
    n = shape.total_dim
    return SuperOp(shape, shape, (rng.standard_normal((n, n))
                                  + 1j * rng.standard_normal((n, n))) / np.sqrt(2 * n))
