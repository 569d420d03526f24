"""Finite-dimensional C*-algebras M_{n_1} + ... + M_{n_k} and their elements.

An element is stored as a tuple of square complex blocks.  The vectorization
used everywhere in the package stacks the columns of each block and then
concatenates the blocks in shape order, so for a single block

    vec([[a, b],
         [c, d]]) = (a, c, b, d).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class ShapeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by every check in the package.

    eq_tol bounds relative residuals of identities, rank_tol is the relative
    singular value cutoff, exp_tol the target accuracy of matrix exponentials.
    """

    eq_tol: float = 1e-9
    rank_tol: float = 1e-10
    exp_tol: float = 1e-12

    def __post_init__(self):
        if min(self.eq_tol, self.rank_tol, self.exp_tol) <= 0:
            raise ValueError("tolerances must be strictly positive")
        if not self.rank_tol < self.eq_tol:
            raise ValueError("rank_tol must be smaller than eq_tol")

    def with_eq_tol(self, eq_tol: float) -> "Tolerances":
        rank_tol = min(self.rank_tol, eq_tol / 10)
        return Tolerances(eq_tol=eq_tol, rank_tol=rank_tol, exp_tol=self.exp_tol)


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class AlgebraShape:
    dims: tuple[int, ...]

    def __init__(self, dims: Iterable[int]):
        dims = tuple(int(n) for n in dims)
        if not dims:
            raise ValueError("an algebra needs at least one block")
        if any(n < 1 for n in dims):
            raise ValueError(f"block sizes must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    def __repr__(self):
        return "M(" + "+".join(str(n) for n in self.dims) + ")"

    @property
    def n_blocks(self) -> int:
        return len(self.dims)

    @cached_property
    def total_dim(self) -> int:
        return sum(n * n for n in self.dims)

    @cached_property
    def size(self) -> int:
        """Side length of the block-diagonal embedding."""
        return sum(self.dims)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        """Start of each block inside a vectorized element."""
        out, acc = [], 0
        for n in self.dims:
            out.append(acc)
            acc += n * n
        return tuple(out)

    @cached_property
    def dense_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Row/column of each vec position inside the block-diagonal embedding."""
        rows, cols, start = [], [], 0
        for n in self.dims:
            j, i = np.meshgrid(np.arange(n), np.arange(n))
            # column stacking: i runs fastest
            rows.append(start + i.T.ravel())
            cols.append(start + j.T.ravel())
            start += n
        return np.concatenate(rows), np.concatenate(cols)

    def block_slice(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i] + self.dims[i] ** 2)

    def is_commutative(self) -> bool:
        return all(n == 1 for n in self.dims)

    # batched conversions between vec form and dense block-diagonal form

    def to_dense(self, vecs: np.ndarray) -> np.ndarray:
        vecs = np.asarray(vecs)
        rows, cols = self.dense_index
        out = np.zeros(vecs.shape[:-1] + (self.size, self.size), dtype=complex)
        out[..., rows, cols] = vecs
        return out

    def from_dense(self, dense: np.ndarray) -> np.ndarray:
        rows, cols = self.dense_index
        return np.asarray(dense)[..., rows, cols]


def as_shape(shape) -> AlgebraShape:
    if isinstance(shape, AlgebraShape):
        return shape
    if isinstance(shape, int):
        return AlgebraShape([shape])
    return AlgebraShape(shape)


@dataclass(frozen=True, eq=False)
class Element:
    shape: AlgebraShape
    blocks: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        blocks = tuple(np.array(b, dtype=complex) for b in self.blocks)
        if len(blocks) != self.shape.n_blocks:
            raise ShapeMismatchError(
                f"{len(blocks)} blocks given for shape {self.shape}")
        for n, b in zip(self.shape.dims, blocks):
            if b.shape != (n, n):
                raise ShapeMismatchError(f"block of shape {b.shape}, expected {(n, n)}")
            if not np.all(np.isfinite(b)):
                raise ValueError("element entries must be finite")
            b.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    # constructors

    @classmethod
    def from_blocks(cls, blocks: Sequence) -> "Element":
        blocks = [np.atleast_2d(np.asarray(b, dtype=complex)) for b in blocks]
        return cls(AlgebraShape(b.shape[0] for b in blocks), tuple(blocks))

    @classmethod
    def zeros(cls, shape) -> "Element":
        shape = as_shape(shape)
        return cls(shape, tuple(np.zeros((n, n)) for n in shape.dims))

    @classmethod
    def identity(cls, shape) -> "Element":
        shape = as_shape(shape)
        return cls(shape, tuple(np.eye(n) for n in shape.dims))

    @classmethod
    def from_vec(cls, shape, v) -> "Element":
        shape = as_shape(shape)
        v = np.asarray(v, dtype=complex).ravel()
        if v.size != shape.total_dim:
            raise ShapeMismatchError(f"vector of length {v.size} for {shape}")
        return cls(shape, tuple(
            v[shape.block_slice(i)].reshape(n, n, order="F")
            for i, n in enumerate(shape.dims)))

    @classmethod
    def from_dense(cls, shape, dense) -> "Element":
        shape = as_shape(shape)
        return cls.from_vec(shape, shape.from_dense(dense))

    # representations

    def vec(self) -> np.ndarray:
        return np.concatenate([b.ravel(order="F") for b in self.blocks])

    def dense(self) -> np.ndarray:
        return self.shape.to_dense(self.vec())

    # arithmetic

    def _check(self, other: "Element"):
        if not isinstance(other, Element):
            raise TypeError(f"expected Element, got {type(other).__name__}")
        if other.shape != self.shape:
            raise ShapeMismatchError(f"{self.shape} vs {other.shape}")

    def _map(self, fn, other=None) -> "Element":
        if other is None:
            return Element(self.shape, tuple(fn(a) for a in self.blocks))
        self._check(other)
        return Element(self.shape, tuple(fn(a, b) for a, b in zip(self.blocks, other.blocks)))

    def __add__(self, other):
        return self._map(np.add, other)

    def __sub__(self, other):
        return self._map(np.subtract, other)

    def __neg__(self):
        return self._map(np.negative)

    def __mul__(self, scalar):
        if isinstance(scalar, Element):
            raise TypeError("use @ for the algebra product")
        return self._map(lambda a: complex(scalar) * a)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1 / complex(scalar))

    def __matmul__(self, other):
        return self._map(np.matmul, other)

    def adjoint(self) -> "Element":
        return self._map(lambda a: a.conj().T)

    @property
    def H(self) -> "Element":
        return self.adjoint()

    def transpose(self) -> "Element":
        return self._map(lambda a: a.T.copy())

    def inverse(self) -> "Element":
        return self._map(np.linalg.inv)

    def fro(self) -> float:
        return float(np.sqrt(sum(np.vdot(b, b).real for b in self.blocks)))

    def norm(self) -> float:
        return operator_norm(self)

    def allclose(self, other: "Element", tol: float = DEFAULT_TOL.eq_tol) -> bool:
        return relative_residual(self, other) <= tol

    def __repr__(self):
        return f"Element({self.shape!r}, {[b.tolist() for b in self.blocks]})"


def elem_arith(a: Element, b: Element | None, op: str, scalar: complex = 1.0) -> Element:
    """Dispatch form of the element arithmetic: add, sub, mul, scale, adjoint."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a @ b
    if op == "scale":
        return scalar * a
    if op == "adjoint":
        return a.adjoint()
    raise ValueError(f"unknown operation {op!r}")


def relative_residual(lhs, rhs) -> float:
    """||lhs - rhs||_F / (1 + ||lhs||_F + ||rhs||_F) for Elements or arrays."""
    if isinstance(lhs, Element):
        lhs._check(rhs)
        lhs, rhs = lhs.vec(), rhs.vec()
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    num = np.linalg.norm(lhs - rhs)
    return float(num / (1.0 + np.linalg.norm(lhs) + np.linalg.norm(rhs)))


def batch_residuals(lhs: np.ndarray, rhs: np.ndarray, axes=(-2, -1)) -> np.ndarray:
    """Relative residuals of stacked arrays, reduced over `axes`."""
    diff = np.sqrt(np.sum(np.abs(lhs - rhs) ** 2, axis=axes))
    nl = np.sqrt(np.sum(np.abs(lhs) ** 2, axis=axes))
    nr = np.sqrt(np.sum(np.abs(rhs) ** 2, axis=axes))
    return diff / (1.0 + nl + nr)


def jordan_product(a: Element, b: Element) -> Element:
    return 0.5 * (a @ b + b @ a)


def operator_norm(a: Element) -> float:
    return max(float(np.linalg.norm(b, 2)) for b in a.blocks)


def singular_values(a: Element) -> list[np.ndarray]:
    return [np.linalg.svd(b, compute_uv=False) for b in a.blocks]


@dataclass(frozen=True)
class Classification:
    selfadjoint: bool
    positive: bool
    unitary: bool
    partial_isometry: bool
    invertible: bool


def classify(a: Element, tol: Tolerances = DEFAULT_TOL) -> Classification:
    nrm = operator_norm(a)
    one = Element.identity(a.shape)
    scale = tol.eq_tol * (1 + nrm)

    selfadjoint = operator_norm(a - a.H) <= scale
    positive = False
    if selfadjoint:
        herm = 0.5 * (a + a.H)
        lo = min(np.linalg.eigvalsh(b).min() for b in herm.blocks)
        positive = lo >= -tol.eq_tol * nrm
    unitary = (operator_norm(a.H @ a - one) <= scale
               and operator_norm(a @ a.H - one) <= scale)
    partial_isometry = operator_norm(a @ a.H @ a - a) <= scale

    svals = singular_values(a)
    smax = max(s.max() for s in svals)
    invertible = bool(smax > 0 and min(s.min() for s in svals) > tol.rank_tol * smax)
    return Classification(bool(selfadjoint), bool(positive), bool(unitary),
                          bool(partial_isometry), invertible)


def block_identity(shape, i: int) -> Element:
    shape = as_shape(shape)
    return Element(shape, tuple(
        np.eye(n) if k == i else np.zeros((n, n)) for k, n in enumerate(shape.dims)))


def center_basis(shape) -> list[Element]:
    shape = as_shape(shape)
    return [block_identity(shape, i) for i in range(shape.n_blocks)]


def matrix_unit(shape, block: int, i: int, j: int) -> Element:
    shape = as_shape(shape)
    blocks = [np.zeros((n, n)) for n in shape.dims]
    blocks[block][i, j] = 1.0
    return Element(shape, tuple(blocks))


def matrix_unit_basis(shape) -> list[Element]:
    """Matrix units in vec order, i.e. the k-th element has vec = e_k."""
    shape = as_shape(shape)
    return [Element.from_vec(shape, v) for v in np.eye(shape.total_dim)]


def is_central(h: Element, tol: Tolerances = DEFAULT_TOL) -> bool:
    return central_residual(h) <= tol.eq_tol


def central_residual(h: Element) -> float:
    """Worst commutator residual of h against the matrix-unit basis."""
    basis = h.shape.to_dense(np.eye(h.shape.total_dim))
    hd = h.dense()
    return float(batch_residuals(hd @ basis, basis @ hd).max())


def center_coordinates(h: Element) -> np.ndarray:
    """Coefficients c_i with h = sum c_i 1_i (trace average per block)."""
    return np.array([np.trace(b) / b.shape[0] for b in h.blocks])


def random_sample(shape, kind: str = "generic", seed=None) -> Element:
    """Seeded random element of kind hermitian, positive, unitary, skew or generic."""
    shape = as_shape(shape)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    blocks = []
    for n in shape.dims:
        g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
        if kind == "generic":
            blocks.append(g)
        elif kind == "hermitian":
            blocks.append((g + g.conj().T) / 2)
        elif kind == "skew":
            blocks.append((g - g.conj().T) / 2)
        elif kind == "positive":
            blocks.append(g.conj().T @ g)
        elif kind == "unitary":
            q, r = np.linalg.qr(g)
            d = np.diagonal(r)
            blocks.append(q * (d / np.abs(d)))
        else:
            raise ValueError(f"unknown sample kind {kind!r}")
    return Element(shape, tuple(blocks))
