"""Linear maps between block algebras, stored as matrices on vectorized elements.

With the column-stacking convention vec(a x b) = (b^T kron a) vec(x), so on a
single block L_a = I kron a and R_a = a^T kron I.  Multi-block operators are
block diagonal in these pieces.

Property checks are exhaustive over the matrix-unit basis: every identity
checked here is (conjugate-)multilinear in its arguments, so the basis
suffices.  The triple product is conjugate-linear in its middle slot; the
checks also feed i times the basis there, which costs little and guards the
conjugate-linear bookkeeping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import scipy.linalg

from .algebra import (
    DEFAULT_TOL,
    AlgebraShape,
    Element,
    ShapeMismatchError,
    Tolerances,
    as_shape,
    batch_residuals,
)


@dataclass(frozen=True, eq=False)
class SuperOp:
    dom: AlgebraShape
    cod: AlgebraShape
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        if mat.shape != (self.cod.total_dim, self.dom.total_dim):
            raise ShapeMismatchError(
                f"matrix {mat.shape} does not map {self.dom} to {self.cod}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("operator entries must be finite")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_function(cls, dom, cod, fn: Callable[[Element], Element]) -> "SuperOp":
        """Materialize a linear map from its values on the matrix-unit basis."""
        dom, cod = as_shape(dom), as_shape(cod)
        cols = [fn(Element.from_vec(dom, e)).vec() for e in np.eye(dom.total_dim)]
        return cls(dom, cod, np.stack(cols, axis=1))

    @property
    def is_square(self) -> bool:
        return self.dom == self.cod

    def apply(self, a: Element) -> Element:
        if a.shape != self.dom:
            raise ShapeMismatchError(f"operator on {self.dom} applied to {a.shape}")
        return Element.from_vec(self.cod, self.mat @ a.vec())

    __call__ = apply

    def compose(self, other: "SuperOp") -> "SuperOp":
        """self after other."""
        if other.cod != self.dom:
            raise ShapeMismatchError(f"cannot compose {self.dom}<-{self.cod} after {other.cod}")
        return SuperOp(other.dom, self.cod, self.mat @ other.mat)

    __matmul__ = compose

    def _same(self, other):
        if not isinstance(other, SuperOp):
            raise TypeError(f"expected SuperOp, got {type(other).__name__}")
        if (other.dom, other.cod) != (self.dom, self.cod):
            raise ShapeMismatchError("operators act between different algebras")

    def __add__(self, other):
        self._same(other)
        return SuperOp(self.dom, self.cod, self.mat + other.mat)

    def __sub__(self, other):
        self._same(other)
        return SuperOp(self.dom, self.cod, self.mat - other.mat)

    def __neg__(self):
        return SuperOp(self.dom, self.cod, -self.mat)

    def __mul__(self, scalar):
        return SuperOp(self.dom, self.cod, complex(scalar) * self.mat)

    __rmul__ = __mul__

    def op_norm(self) -> float:
        return op_norm(self)

    def rank(self, tol: Tolerances = DEFAULT_TOL) -> int:
        s = np.linalg.svd(self.mat, compute_uv=False)
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > tol.rank_tol * s[0]))

    def is_bijective(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return (self.dom.total_dim == self.cod.total_dim
                and self.rank(tol) == self.dom.total_dim)

    def is_surjective(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return self.rank(tol) == self.cod.total_dim

    def inverse(self) -> "SuperOp":
        return SuperOp(self.cod, self.dom, np.linalg.inv(self.mat))

    def images(self) -> np.ndarray:
        """Dense block-diagonal images of the matrix-unit basis, shape (m, N, N)."""
        return self.cod.to_dense(self.mat.T)


def identity(shape) -> SuperOp:
    shape = as_shape(shape)
    return SuperOp(shape, shape, np.eye(shape.total_dim))


def zero(shape) -> SuperOp:
    shape = as_shape(shape)
    return SuperOp(shape, shape, np.zeros((shape.total_dim,) * 2))


def op_norm(T: SuperOp) -> float:
    """Largest singular value of the vectorized matrix."""
    if T.mat.size == 0:
        return 0.0
    return float(np.linalg.norm(T.mat, 2))


def compose(T: SuperOp, U: SuperOp) -> SuperOp:
    return T.compose(U)


def apply(T: SuperOp, a: Element) -> Element:
    return T.apply(a)


# ---------------------------------------------------------------- builders

def _blockwise(shape: AlgebraShape, pieces: Sequence[np.ndarray]) -> SuperOp:
    return SuperOp(shape, shape, scipy.linalg.block_diag(*pieces))


def left_mult(a: Element) -> SuperOp:
    return _blockwise(a.shape, [np.kron(np.eye(b.shape[0]), b) for b in a.blocks])


def right_mult(a: Element) -> SuperOp:
    return _blockwise(a.shape, [np.kron(b.T, np.eye(b.shape[0])) for b in a.blocks])


def jordan_mult(a: Element) -> SuperOp:
    return 0.5 * (left_mult(a) + right_mult(a))


def box(a: Element, b: Element) -> SuperOp:
    """L(a, b): x -> {a, b, x} = (a b* x + x b* a) / 2."""
    return 0.5 * (left_mult(a @ b.H) + right_mult(b.H @ a))


def inner_derivation(z: Element) -> SuperOp:
    """x -> z x - x z."""
    return left_mult(z) - right_mult(z)


def block_triple_auto(shape, perm: Sequence[int] | None = None,
                      us: Sequence | None = None, vs: Sequence | None = None,
                      transpose: Sequence[bool] | None = None) -> SuperOp:
    """Triple automorphism built from block data.

    Block i of the input is sent to u_i x_i v_i* (or u_i x_i^T v_i* when
    transpose[i] is set) and the result is placed in output block perm[i].
    """
    shape = as_shape(shape)
    k = shape.n_blocks
    perm = list(range(k)) if perm is None else [int(p) for p in perm]
    if sorted(perm) != list(range(k)):
        raise ValueError(f"{perm} is not a permutation of the blocks")
    for i, p in enumerate(perm):
        if shape.dims[i] != shape.dims[p]:
            raise ValueError(f"block {i} of size {shape.dims[i]} paired with "
                             f"block {p} of size {shape.dims[p]}")
    us = [np.eye(n) for n in shape.dims] if us is None else [np.asarray(u, complex) for u in us]
    vs = [np.eye(n) for n in shape.dims] if vs is None else [np.asarray(v, complex) for v in vs]
    transpose = [False] * k if transpose is None else list(transpose)

    pieces = []
    for i, n in enumerate(shape.dims):
        m = np.kron(vs[i].conj(), us[i])
        if transpose[i]:
            # vec(x^T) = K vec(x), K the commutation matrix
            K = np.eye(n * n)[np.arange(n * n).reshape(n, n).T.ravel()]
            m = m @ K
        pieces.append(m)
    mat = np.zeros((shape.total_dim,) * 2, dtype=complex)
    for i, piece in enumerate(pieces):
        mat[shape.block_slice(perm[i]), shape.block_slice(i)] = piece
    return SuperOp(shape, shape, mat)


def conjugation(u: Element) -> SuperOp:
    """x -> u x u*."""
    return left_mult(u) @ right_mult(u.H)


_BUILDERS: dict[str, Callable[..., SuperOp]] = {
    "left_mult": left_mult,
    "right_mult": right_mult,
    "jordan_mult": jordan_mult,
    "box": box,
    "inner_derivation": inner_derivation,
    "block_triple_auto": block_triple_auto,
    "identity": identity,
    "zero": zero,
}


def build(kind: str, *args, **kwargs) -> SuperOp:
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown operator kind {kind!r}") from None
    return builder(*args, **kwargs)


# ------------------------------------------------------------ exponential

_PADE13 = np.array([
    64764752532480000., 32382376266240000., 7771770303897600.,
    1187353796428800., 129060195264000., 10559470521600.,
    670442572800., 33522128640., 1323241920., 40840800.,
    960960., 16380., 182., 1.])
_THETA13 = 5.371920351148152


def expm_matrix(A: np.ndarray) -> np.ndarray:
    """exp(A) by scaling and squaring with the [13/13] Pade approximant."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if n == 0:
        return A.copy()
    norm1 = np.linalg.norm(A, 1)
    if norm1 == 0.0:
        return np.eye(n, dtype=complex)
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
        A = A / 2.0 ** s
    b = _PADE13
    ident = np.eye(n)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    F = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        F = F @ F
    return F


def exp(R: SuperOp, t: float = 1.0) -> SuperOp:
    if not R.is_square:
        raise ShapeMismatchError("exponential needs an operator on a single algebra")
    return SuperOp(R.dom, R.cod, expm_matrix(t * R.mat))


# ---------------------------------------------------------- property checks

@dataclass
class PropertyReport:
    name: str
    verdict: bool
    residual: float
    witness: dict[str, Any] | None = None
    exhaustive: bool = True
    details: dict[str, Any] = field(default_factory=dict)

    def __bool__(self):
        return self.verdict

    def to_dict(self) -> dict[str, Any]:
        out = {"name": self.name, "verdict": self.verdict,
               "residual": float(self.residual), "exhaustive": self.exhaustive}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.details:
            out["details"] = self.details
        return out


def make_report(name: str, residuals: np.ndarray, tol: Tolerances,
                witness_labels: Callable[[tuple], dict] | None = None,
                **details) -> PropertyReport:
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size == 0:
        return PropertyReport(name, True, 0.0, details=details)
    idx = np.unravel_index(int(np.argmax(residuals)), residuals.shape)
    worst = float(residuals[idx])
    verdict = worst <= tol.eq_tol
    witness = None
    if not verdict and witness_labels is not None:
        witness = witness_labels(tuple(int(i) for i in idx))
    return PropertyReport(name, verdict, worst, witness, details=details)


def _tp(a, b, c):
    """Batched triple product on dense arrays with broadcasting."""
    bh = np.conj(np.swapaxes(b, -1, -2))
    return 0.5 * (a @ bh @ c + c @ bh @ a)


def _adj(x):
    return np.conj(np.swapaxes(x, -1, -2))


class _Basis:
    """Matrix-unit basis of the domain with images under T in dense form."""

    def __init__(self, T: SuperOp):
        self.T = T
        self.m = T.dom.total_dim
        self.X = T.dom.to_dense(np.eye(self.m))
        self.TX = T.images()

    def Tdense(self, dense_batch: np.ndarray) -> np.ndarray:
        """Apply T to a batch of dense domain elements."""
        v = self.T.dom.from_dense(dense_batch)
        return self.T.cod.to_dense(v @ self.T.mat.T)


def _label(shape: AlgebraShape, k: int) -> str:
    for i, n in enumerate(shape.dims):
        s = shape.block_slice(i)
        if s.start <= k < s.stop:
            pos = k - s.start
            return f"E[{i}]({pos % n},{pos // n})"
    return f"e{k}"


def _check_symmetric(T, B, tol):
    lhs = B.Tdense(_adj(B.X))
    rhs = _adj(B.TX)
    return make_report("symmetric_map", batch_residuals(lhs, rhs), tol,
                       lambda i: {"x": _label(T.dom, i[0])})


def _check_jordan_star(T, B, tol):
    X, TX = B.X, B.TX
    prod = 0.5 * (X[:, None] @ X[None, :] + X[None, :] @ X[:, None])
    lhs = B.Tdense(prod)
    rhs = 0.5 * (TX[:, None] @ TX[None, :] + TX[None, :] @ TX[:, None])
    jr = batch_residuals(lhs, rhs)
    sr = batch_residuals(B.Tdense(_adj(X)), _adj(TX))
    worst = np.concatenate([jr.ravel(), sr])
    m = B.m

    def label(i):
        k = i[0]
        if k < m * m:
            return {"a": _label(T.dom, k // m), "b": _label(T.dom, k % m), "identity": "jordan"}
        return {"x": _label(T.dom, k - m * m), "identity": "involution"}
    return make_report("jordan_star_hom", worst, tol, label,
                       jordan_residual=float(jr.max()), involution_residual=float(sr.max()))


def _middle(B):
    return np.concatenate([B.X, 1j * B.X]), np.concatenate([B.TX, 1j * B.TX])


def _check_triple_hom(T, B, tol):
    mids, Tmids = _middle(B)
    res = np.empty((len(mids), B.m, B.m))
    for k in range(len(mids)):
        inner = _tp(B.X[:, None], mids[k], B.X[None, :])
        lhs = B.Tdense(inner)
        rhs = _tp(B.TX[:, None], Tmids[k], B.TX[None, :])
        res[k] = batch_residuals(lhs, rhs)

    def label(i):
        k = i[0] % B.m
        return {"a": _label(T.dom, i[1]),
                "b": ("i*" if i[0] >= B.m else "") + _label(T.dom, k),
                "c": _label(T.dom, i[2])}
    return make_report("triple_hom", res, tol, label)


def _check_derivation(T, B, tol, name="derivation"):
    X, TX = B.X, B.TX
    lhs = B.Tdense(X[:, None] @ X[None, :])
    rhs = TX[:, None] @ X[None, :] + X[:, None] @ TX[None, :]
    return make_report(name, batch_residuals(lhs, rhs), tol,
                       lambda i: {"a": _label(T.dom, i[0]), "b": _label(T.dom, i[1])})


def _check_star_derivation(T, B, tol):
    d = _check_derivation(T, B, tol)
    s = _check_symmetric(T, B, tol)
    worst = max(d.residual, s.residual)
    witness = d.witness or s.witness
    return PropertyReport("star_derivation", worst <= tol.eq_tol, worst,
                          None if worst <= tol.eq_tol else witness,
                          details={"leibniz_residual": d.residual,
                                   "involution_residual": s.residual})


def _check_triple_derivation(T, B, tol):
    mids, Tmids = _middle(B)
    X, TX = B.X, B.TX
    res = np.empty((len(mids), B.m, B.m))
    for k in range(len(mids)):
        lhs = B.Tdense(_tp(X[:, None], mids[k], X[None, :]))
        rhs = (_tp(TX[:, None], mids[k], X[None, :])
               + _tp(X[:, None], Tmids[k], X[None, :])
               + _tp(X[:, None], mids[k], TX[None, :]))
        res[k] = batch_residuals(lhs, rhs)

    def label(i):
        k = i[0] % B.m
        return {"a": _label(T.dom, i[1]),
                "b": ("i*" if i[0] >= B.m else "") + _label(T.dom, k),
                "c": _label(T.dom, i[2])}
    return make_report("triple_derivation", res, tol, label)


def _check_surjective_isometry(T, B, tol):
    th = _check_triple_hom(T, B, tol)
    bij = T.is_bijective(tol)
    verdict = th.verdict and bij
    return PropertyReport("surjective_isometry", verdict, th.residual, th.witness,
                          details={"invertible": bij})


_CHECKS = {
    "symmetric_map": _check_symmetric,
    "jordan_star_hom": _check_jordan_star,
    "triple_hom": _check_triple_hom,
    "derivation": _check_derivation,
    "star_derivation": _check_star_derivation,
    "triple_derivation": _check_triple_derivation,
    "surjective_isometry": _check_surjective_isometry,
}

SQUARE_ONLY = {"derivation", "star_derivation", "triple_derivation"}


def property_check(T: SuperOp, prop: str, tol: Tolerances = DEFAULT_TOL) -> PropertyReport:
    """Decide a structural property of T on the matrix-unit basis."""
    try:
        check = _CHECKS[prop]
    except KeyError:
        raise ValueError(f"unknown property {prop!r}; choose from {sorted(_CHECKS)}") from None
    if prop in SQUARE_ONLY and not T.is_square:
        raise ShapeMismatchError(f"{prop} needs an operator on a single algebra")
    return check(T, _Basis(T), tol)
