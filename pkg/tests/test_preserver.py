import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opstar.algebra import (
    DEFAULT_TOL,
    AlgebraShape,
    Element,
    center_basis,
    matrix_unit,
    matrix_unit_basis,
    random_sample,
    relative_residual,
)
from opstar.preserver import (
    NotBijectiveError,
    NotDecomposableError,
    NotSurjectiveError,
    PAIR_KINDS,
    compose_from_parts,
    decide_op,
    decompose,
    is_op_randomized,
    is_orthogonal,
    kernel_quotient,
    multiplier_identity_check,
    orthogonal_pairs,
    orthogonality_residual,
    pair_agreement,
    random_defect_map,
    random_invertible_map,
    random_op_bijection,
    random_triple_automorphism,
)
from opstar.superop import SuperOp, block_triple_auto, conjugation, identity
from opstar.triple import triple_product

M2 = AlgebraShape([2])
SHAPES = [AlgebraShape([2]), AlgebraShape([2, 1]), AlgebraShape([2, 2, 1])]
TOL = DEFAULT_TOL.eq_tol
seeds = st.integers(0, 2**32 - 1)


def E(i, j, shape=M2, block=0):
    return matrix_unit(shape, block, i, j)


def rank_one_defect(shape, strength=0.5):
    """x -> x + strength * tr(x) E_11, a bijection that breaks orthogonality."""
    one = Element.identity(shape)
    return identity(shape) + strength * SuperOp(
        shape, shape, np.outer(E(0, 0, shape).vec(), one.vec().conj()))


class TestOrthogonality:
    def test_examples(self):
        assert is_orthogonal(E(0, 0), E(1, 1))
        assert not is_orthogonal(E(0, 0), E(0, 1))
        assert is_orthogonal(random_sample(M2, "generic", 0), Element.zeros(M2))

    def test_direct_multiplication_oracle(self):
        a, b = E(0, 0), E(0, 1)
        # a b* = E11 E21 = 0 but b* a = E21 E11 = E21
        assert np.abs((a @ b.H).dense()).max() == 0
        assert np.abs((b.H @ a).dense()).max() == 1
        assert orthogonality_residual(a, b) > 0.1

    def test_matrix_unit_pairs(self):
        pairs = orthogonal_pairs(M2, "matrix_unit")
        as_vecs = [(a.vec().tolist(), b.vec().tolist()) for a, b in pairs]
        assert (E(0, 0).vec().tolist(), E(1, 1).vec().tolist()) in as_vecs
        for a, b in pairs:
            assert is_orthogonal(a, b)

    def test_cross_block_pairs_included(self):
        s = AlgebraShape([2, 1])
        pairs = orthogonal_pairs(s, "matrix_unit")
        assert any(a.blocks[0].any() and b.blocks[1].any() for a, b in pairs)

    @pytest.mark.parametrize("kind", PAIR_KINDS[1:])
    @pytest.mark.parametrize("shape", SHAPES)
    def test_random_pairs_are_orthogonal(self, kind, shape):
        for a, b in orthogonal_pairs(shape, kind, 50, seed=3):
            assert orthogonality_residual(a, b) <= TOL
            if kind == "spectral_positive":
                for x in (a, b):
                    assert min(np.linalg.eigvalsh(blk).min() for blk in x.blocks) >= -TOL
            if kind == "hermitian":
                assert relative_residual(a, a.H) <= TOL

    def test_pairs_are_deterministic(self):
        p1 = orthogonal_pairs(AlgebraShape([2, 1]), "spectral_positive", 10, seed=9)
        p2 = orthogonal_pairs(AlgebraShape([2, 1]), "spectral_positive", 10, seed=9)
        for (a1, b1), (a2, b2) in zip(p1, p2):
            np.testing.assert_array_equal(a1.vec(), a2.vec())
            np.testing.assert_array_equal(b1.vec(), b2.vec())
        with pytest.raises(ValueError):
            orthogonal_pairs(M2, "cubes", 3)


class TestRandomizedCheck:
    def test_identity(self):
        rep = is_op_randomized(identity(AlgebraShape([2, 1])))
        assert rep.verdict and not rep.exhaustive

    def test_conjugation(self):
        u = random_sample(AlgebraShape([2, 1]), "unitary", 1)
        assert is_op_randomized(conjugation(u)).verdict

    def test_defect_found_with_witness(self):
        T = rank_one_defect(M2)
        rep = is_op_randomized(T)
        assert not rep.verdict
        a, b = rep.witness["a"], rep.witness["b"]
        assert is_orthogonal(a, b)
        assert not is_orthogonal(T(a), T(b))

    def test_witness_rate_on_generic_bijections(self):
        found = 0
        for seed in range(50):
            T = random_invertible_map(SHAPES[seed % 3], seed)
            assert not decompose(T).verdict
            rep = is_op_randomized(T, count=125, seed=seed)
            found += (not rep.verdict) and rep.details["pairs_tried"] <= 500
        assert found >= 48


class TestDecompose:
    def test_identity(self):
        s = AlgebraShape([2, 1])
        dec = decompose(identity(s))
        one = Element.identity(s)
        assert dec.verdict
        assert relative_residual(dec.h, one) == 0.0
        assert relative_residual(dec.r, one) == 0.0
        assert relative_residual(dec.S.mat, np.eye(5)) == 0.0

    def test_scalar_times_automorphism(self):
        u = random_sample(M2, "unitary", 7)
        c = 2 * np.exp(1j * np.pi / 4)
        T = c * conjugation(u)
        dec = decompose(T)
        one = Element.identity(M2)
        assert dec.verdict
        assert relative_residual(dec.h, c * one) <= 1e-14
        assert relative_residual(dec.r, np.exp(1j * np.pi / 4) * one) <= 1e-14
        # S = r h^-1 T keeps the phase so that S(1) = r
        expected_S = np.exp(1j * np.pi / 4) * conjugation(u)
        assert relative_residual(dec.S.mat, expected_S.mat) <= 1e-14

    def test_block_swap_construction(self):
        s = AlgebraShape([2, 1, 1])
        rng = np.random.default_rng(11)
        S = block_triple_auto(s, perm=[0, 2, 1],
                              us=[random_sample(AlgebraShape([n]), "unitary", rng).blocks[0]
                                  for n in s.dims])
        r = S(Element.identity(s))
        c = [1.5, 0.7, 2.5]
        h = sum((ci * (r @ z) for ci, z in zip(c, center_basis(s))), Element.zeros(s))
        T = compose_from_parts(h, r, S)
        dec = decompose(T)
        assert dec.verdict
        assert relative_residual(dec.h, h) <= 1e-14
        assert relative_residual(dec.S.mat, S.mat) <= TOL
        assert multiplier_identity_check(T, dec).verdict

    @pytest.mark.parametrize("seed", range(50))
    def test_round_trip(self, seed):
        c = random_op_bijection(SHAPES[seed % 3], seed)
        dec = decompose(c.T)
        assert dec.verdict, dec.failed()
        assert relative_residual(dec.h, c.h) <= TOL
        assert relative_residual(dec.r, c.r) <= TOL
        assert relative_residual(dec.S.mat, c.S.mat) <= TOL

    @pytest.mark.parametrize("seed", range(10))
    def test_inverse_also_decomposes(self, seed):
        T = random_op_bijection(SHAPES[seed % 3], seed).T
        assert decompose(T).verdict
        assert decompose(T.inverse()).verdict

    @pytest.mark.parametrize("seed", range(5))
    def test_zero_triple_products_preserved(self, seed):
        s = AlgebraShape([2, 2, 1])
        T = random_op_bijection(s, seed).T
        basis = matrix_unit_basis(s)
        checked = 0
        for a in basis:
            for b in basis:
                for c in basis:
                    if triple_product(a, b, c).fro() == 0.0:
                        assert triple_product(T(a), T(b), T(c)).fro() <= TOL
                        checked += 1
        assert checked > 0

    def test_generic_bijection_rejected(self):
        dec = decompose(random_invertible_map(AlgebraShape([2, 1]), 0))
        assert not dec.verdict
        assert dec.failed()

    def test_not_bijective(self):
        with pytest.raises(NotBijectiveError):
            decompose(SuperOp(M2, M2, np.zeros((4, 4))))

    def test_singular_unit_image(self):
        # x -> x - (tr(x)/2) E_22 is bijective and sends 1 to E_11
        one = Element.identity(M2)
        T = identity(M2) - 0.5 * SuperOp(M2, M2, np.outer(E(1, 1).vec(), one.vec().conj()))
        assert T.is_bijective()
        with pytest.raises(NotDecomposableError, match="h not invertible"):
            decompose(T)


class TestMultiplierIdentity:
    def test_identity(self):
        T = identity(AlgebraShape([2, 1]))
        rep = multiplier_identity_check(T, decompose(T))
        assert rep.verdict and rep.residual <= 1e-15

    def test_cubic_homogeneity(self):
        T = 2 * identity(M2)
        dec = decompose(T)
        rng = np.random.default_rng(0)
        a, b, c = (random_sample(M2, "generic", rng) for _ in range(3))
        lhs = triple_product(T(a), T(b), T(c))
        assert relative_residual(lhs, 8 * triple_product(a, b, c)) <= 1e-15
        assert multiplier_identity_check(T, dec).verdict

    @pytest.mark.parametrize("seed", range(5))
    def test_random_constructions(self, seed):
        T = random_op_bijection(AlgebraShape([2, 2, 1]), seed).T
        assert multiplier_identity_check(T, decompose(T), seed=seed).verdict


class TestKernel:
    def test_identity(self):
        rep = kernel_quotient(identity(AlgebraShape([2, 1])))
        assert rep.kernel_blocks == () and rep.is_ideal and rep.kernel_dim == 0
        np.testing.assert_array_equal(rep.quotient_op.mat, np.eye(5))

    def test_block_killed(self):
        s = AlgebraShape([2, 1])
        mat = np.zeros((4, 5))
        mat[:, :4] = np.eye(4)
        T = SuperOp(s, M2, mat)
        rep = kernel_quotient(T)
        # blocks are numbered from zero: the M_1 block is block 1
        assert rep.kernel_blocks == (1,) and rep.is_ideal
        assert decompose(rep.quotient_op).verdict
        dec = decide_op(T)
        assert dec.verdict and dec.exact and dec.route == "quotient"

    def test_non_ideal_kernel(self):
        # kill E11 - E22 only
        d = (E(0, 0) - E(1, 1)).vec() / np.sqrt(2)
        P = np.eye(4) - np.outer(d, d.conj())
        keep = np.linalg.svd(P)[0][:, :3]
        T = SuperOp(M2, AlgebraShape([1, 1, 1]), keep.conj().T @ P)
        rep = kernel_quotient(T)
        assert not rep.is_ideal
        assert "not an ideal" in rep.reason
        dec = decide_op(T)
        assert not dec.verdict and dec.exact

    def test_needs_surjective(self):
        T = SuperOp(AlgebraShape([1]), M2, np.ones((4, 1)))
        with pytest.raises(NotSurjectiveError):
            kernel_quotient(T)
        assert decide_op(T).route == "randomized"


class TestAgreement:
    def test_identity(self):
        rep = pair_agreement(identity(AlgebraShape([2, 1])))
        assert rep.general.verdict and rep.hermitian.verdict and rep.positive.verdict
        assert rep.agree and rep.exact

    def test_defect_fails_everywhere(self):
        rep = pair_agreement(random_defect_map(AlgebraShape([2, 1]), 0))
        assert not (rep.general.verdict or rep.hermitian.verdict or rep.positive.verdict)
        assert rep.agree and rep.exact is False

    @pytest.mark.parametrize("seed", range(3))
    def test_round_trip_map(self, seed):
        T = random_op_bijection(AlgebraShape([2, 2, 1]), seed).T
        rep = pair_agreement(T, seed=seed)
        assert rep.agree and rep.exact
        assert decompose(T).verdict


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_triple_automorphisms_preserve_orthogonality(seed):
    s = AlgebraShape([2, 2, 1])
    T = random_triple_automorphism(s, seed)
    for a, b in orthogonal_pairs(s, "general", 10, seed=seed):
        assert orthogonality_residual(T(a), T(b)) <= TOL
