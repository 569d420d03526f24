"""Triple calculus on block algebras.

The triple product {a, b, c} = (a b* c + c b* a) / 2 is linear in the outer
slots and conjugate-linear in the middle one.  Odd triple powers, the cubic
root and the range partial isometry all live in the polar picture a = u|a|:
a^[2n+1] = u |a|^(2n+1) and a^[1/3] = u |a|^(1/3).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algebra import (
    DEFAULT_TOL,
    Element,
    Tolerances,
    center_basis,
    central_residual,
    classify,
    operator_norm,
    relative_residual,
)
from .superop import SuperOp, left_mult, right_mult


class NotPartialIsometryError(ValueError):
    pass


class NotUnitaryError(ValueError):
    pass


def triple_product(a: Element, b: Element, c: Element) -> Element:
    bh = b.H
    return 0.5 * (a @ bh @ c + c @ bh @ a)


def odd_triple_power(a: Element, m: int) -> Element:
    if m < 1 or m % 2 == 0:
        raise ValueError(f"triple powers are defined for odd m >= 1, got {m}")
    out = a
    for _ in range((m - 1) // 2):
        out = triple_product(a, a, out)
    return out


@dataclass(frozen=True)
class PolarData:
    u: Element
    abs: Element
    rank_per_block: tuple[int, ...]


def polar(a: Element, tol: Tolerances = DEFAULT_TOL) -> PolarData:
    """Polar decomposition a = u|a| with u the range partial isometry.

    Singular values below rank_tol times the largest singular value over all
    blocks are treated as zero.
    """
    svds = [np.linalg.svd(b) for b in a.blocks]
    smax = max((s.max() if s.size else 0.0) for _, s, _ in svds)
    cut = tol.rank_tol * smax
    us, abss, ranks = [], [], []
    for (U, s, Vh), n in zip(svds, a.shape.dims):
        keep = s > cut if smax > 0 else np.zeros(n, bool)
        Ur, Vr, sr = U[:, keep], Vh[keep].conj().T, s[keep]
        us.append(Ur @ Vr.conj().T)
        abss.append((Vr * sr) @ Vr.conj().T)
        ranks.append(int(keep.sum()))
    return PolarData(Element(a.shape, tuple(us)), Element(a.shape, tuple(abss)), tuple(ranks))


def range_partial_isometry(a: Element, tol: Tolerances = DEFAULT_TOL) -> Element:
    return polar(a, tol).u


def _psd_function(p: Element, f: Callable[[np.ndarray], np.ndarray]) -> Element:
    blocks = []
    for b in p.blocks:
        w, V = np.linalg.eigh(0.5 * (b + b.conj().T))
        w = np.clip(w, 0.0, None)
        blocks.append((V * np.asarray(f(w), dtype=complex)) @ V.conj().T)
    return Element(p.shape, tuple(blocks))


def triple_functional_calculus(a: Element, f: Callable[[np.ndarray], np.ndarray],
                               tol: Tolerances = DEFAULT_TOL) -> Element:
    """u f(|a|) for a scalar function f with f(0) = 0.

    f is evaluated on the eigenvalues of |a| and must accept a numpy array.
    """
    if abs(complex(np.asarray(f(np.zeros(1)))[0])) > 0:
        raise ValueError("the triple functional calculus needs f(0) = 0")
    pd = polar(a, tol)
    return pd.u @ _psd_function(pd.abs, f)


def cubic_root(a: Element, tol: Tolerances = DEFAULT_TOL) -> Element:
    """The unique z with {z, z, z} = a, namely u |a|^(1/3)."""
    return triple_functional_calculus(a, np.cbrt, tol)


def cubic_root_limit(a: Element, n_steps: int,
                     tol: Tolerances = DEFAULT_TOL) -> tuple[Element, float]:
    """Iterate the cubic root n_steps times; returns a^[1/3^n] and its
    operator-norm distance to the range partial isometry of a."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    z = a
    for _ in range(n_steps):
        z = cubic_root(z, tol)
    return z, operator_norm(z - polar(a, tol).u)


def peirce_projection(e: Element, j: int, tol: Tolerances = DEFAULT_TOL) -> SuperOp:
    """P_2(e) x = p x q, P_1(e) x = (1-p) x q + p x (1-q), P_0(e) x = (1-p) x (1-q),
    where p = e e* and q = e* e."""
    if not classify(e, tol).partial_isometry:
        raise NotPartialIsometryError("Peirce projections need a partial isometry")
    one = Element.identity(e.shape)
    p, q = e @ e.H, e.H @ e
    Lp, Rq = left_mult(p), right_mult(q)
    Lp_, Rq_ = left_mult(one - p), right_mult(one - q)
    if j == 2:
        return Lp @ Rq
    if j == 1:
        return Lp_ @ Rq + Lp @ Rq_
    if j == 0:
        return Lp_ @ Rq_
    raise ValueError(f"Peirce index must be 0, 1 or 2, got {j}")


@dataclass(frozen=True)
class HomotopeTag:
    """A unitary r defining the homotope with x . y = x r* y and x^# = r x* r."""

    r: Element
    tol: Tolerances = DEFAULT_TOL

    def __post_init__(self):
        if not classify(self.r, self.tol).unitary:
            raise NotUnitaryError("homotopes are taken at unitary elements")


def homotope_product(x: Element, y: Element, tag: HomotopeTag) -> Element:
    return x @ tag.r.H @ y


def homotope_involution(x: Element, tag: HomotopeTag) -> Element:
    return tag.r @ x.H @ tag.r


def homotope_center(tag: HomotopeTag) -> list[Element]:
    """Basis {r 1_i} of the center of the homotope."""
    return [tag.r @ c for c in center_basis(tag.r.shape)]


def homotope_center_residual(h: Element, tag: HomotopeTag) -> float:
    """Residual of h r* being central; zero exactly when h lies in r Z(A)."""
    return central_residual(h @ tag.r.H)


def cube_residual(z: Element, a: Element) -> float:
    return relative_residual(triple_product(z, z, z), a)
