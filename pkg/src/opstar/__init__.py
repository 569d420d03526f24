"""Orthogonality-preserving operators on finite-dimensional C*-algebras.

Algebras are direct sums of full matrix blocks; linear maps between them are
stored as matrices acting on column-stacked block vectors.
"""
__version__ = "0.1.0"
