import math

import numpy as np
import pytest

from qpirlab.errors import LayoutError, LayoutMismatch
from qpirlab.registers import RegisterLayout
from qpirlab.states import (
    DensityOperator,
    StateVector,
    basis_state,
    partial_trace,
    pure_density,
    tensor,
)
from qpirlab.linalg import (
    binary_entropy,
    fidelity,
    haar_random_unitary,
    helstrom_probability,
    purify,
    pure_state_distance,
    schmidt_compressor,
    schmidt_decompose,
    shannon_entropy,
    trace_distance,
    uhlmann_unitary,
)

from conftest import bloch_grid_success, random_density, random_pure

QUBIT = RegisterLayout.of(("q", 2))
KET0 = basis_state(QUBIT, 0)
KET1 = basis_state(QUBIT, 1)
PLUS = StateVector(QUBIT, np.array([1.0, 1.0]) / math.sqrt(2))


def dm(vec: StateVector) -> DensityOperator:
    return pure_density(vec)


class TestTraceDistance:
    def test_identical_states(self):
        assert trace_distance(dm(KET0), dm(KET0)) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_pure_states(self):
        assert trace_distance(dm(KET0), dm(KET1)) == pytest.approx(1.0, abs=1e-12)

    def test_zero_plus_pair(self):
        # pure-state formula sqrt(1 - |<0|+>|^2) = 1/sqrt(2)
        expected = math.sqrt(1.0 - 0.5)
        assert trace_distance(dm(KET0), dm(PLUS)) == pytest.approx(expected, abs=1e-9)
        assert pure_state_distance(KET0, PLUS) == pytest.approx(expected, abs=1e-9)

    def test_layout_mismatch(self):
        other = pure_density(basis_state(RegisterLayout.of(("p", 2)), 0))
        with pytest.raises(LayoutMismatch):
            trace_distance(dm(KET0), other)


class TestFidelity:
    def test_equal_states(self):
        rho = DensityOperator(QUBIT, np.diag([0.25, 0.75]))
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)

    def test_pure_overlap(self):
        assert fidelity(dm(KET0), dm(PLUS)) == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_mixed_vs_pure_oracle(self):
        # direct evaluation of || (I/2)^{1/2} |0><0| ||_1 via singular values
        half = np.eye(2) / 2
        root = np.diag(np.sqrt(np.diag(half)))
        expected = float(np.sum(np.linalg.svd(root @ np.diag([1.0, 0.0]),
                                              compute_uv=False)))
        assert expected == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        got = fidelity(DensityOperator(QUBIT, half), dm(KET0))
        assert got == pytest.approx(expected, abs=1e-9)


class TestPurify:
    def test_pure_state_purifies_to_product(self):
        out = purify(dm(KET0), "p")
        assert out.layout.labels() == ("q", "p")
        marginal = partial_trace(out, ["q"])
        assert np.allclose(marginal.matrix, np.diag([1.0, 0.0]), atol=1e-9)

    def test_maximally_mixed_purifies_to_bell_like(self):
        out = purify(DensityOperator(QUBIT, np.eye(2) / 2), "p")
        marginal = partial_trace(out, ["q"])
        assert np.allclose(marginal.matrix, np.eye(2) / 2, atol=1e-9)
        # purifier marginal is maximally mixed too
        assert np.allclose(partial_trace(out, ["p"]).matrix, np.eye(2) / 2,
                           atol=1e-9)

    def test_round_trip_on_random_state(self, rng):
        lay = RegisterLayout.of(("m", 5))
        rho = DensityOperator(lay, random_density(rng, 5))
        out = purify(rho, "env")
        back = partial_trace(out, ["m"])
        assert np.max(np.abs(back.matrix - rho.matrix)) < 1e-8

    def test_label_clash_rejected(self):
        with pytest.raises(LayoutError):
            purify(dm(KET0), "q")


class TestSchmidt:
    def test_bell_state(self):
        bell = StateVector(RegisterLayout.of(("a", 2), ("b", 2)),
                           np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2))
        dec = schmidt_decompose(bell, ["a"])
        assert dec.rank == 2
        assert np.allclose(dec.coefficients[:2], [1 / math.sqrt(2)] * 2, atol=1e-12)

    def test_product_state_rank_one(self):
        prod = tensor(PLUS, basis_state(RegisterLayout.of(("b", 3)), 2))
        dec = schmidt_decompose(prod, ["q"])
        assert dec.rank == 1

    def test_random_state_reconstructs(self, rng):
        lay = RegisterLayout.of(("a", 4), ("b", 4))
        psi = StateVector(lay, random_pure(rng, 16))
        dec = schmidt_decompose(psi, ["a"])
        assert np.linalg.norm(dec.reconstruct() - psi.amplitudes) < 1e-8
        assert np.sum(dec.coefficients**2) == pytest.approx(1.0, abs=1e-9)
        assert dec.coefficients[0] >= dec.coefficients[-1]

    def test_cut_must_be_proper(self):
        bell = StateVector(RegisterLayout.of(("a", 2), ("b", 2)),
                           np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2))
        with pytest.raises(LayoutError):
            schmidt_decompose(bell, [])
        with pytest.raises(LayoutError):
            schmidt_decompose(bell, ["a", "b"])


class TestSchmidtCompressor:
    def test_bell_is_incompressible(self):
        bell = StateVector(RegisterLayout.of(("a", 2), ("b", 2)),
                           np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2))
        comp = schmidt_compressor(bell, ["a"])
        assert comp.input_layout.total_dim == 2

    def test_fixed_factor_compresses_to_one(self, rng):
        lay = RegisterLayout.of(("a", 8), ("b", 3))
        psi = tensor(basis_state(RegisterLayout.of(("a", 8)), 0),
                     StateVector(RegisterLayout.of(("b", 3)), random_pure(rng, 3)))
        comp = schmidt_compressor(psi, ["a"])
        assert comp.input_layout.total_dim == 1

    def test_rank_three_state_in_dim_eight(self, rng):
        # build sum_i lambda_i |a_i>|b_i> with three chosen coefficients
        lams = np.array([0.8, 0.5, math.sqrt(1 - 0.8**2 - 0.5**2)])
        amps = np.zeros(8 * 4, dtype=complex)
        for i, lam in enumerate(lams):
            amps[i * 4 + i] = lam
        psi = StateVector(RegisterLayout.of(("a", 8), ("b", 4)), amps)
        comp = schmidt_compressor(psi, ["a"])
        assert comp.input_layout.total_dim == 3
        # round trip: project the cut factor onto the support and back
        proj = comp.matrix @ comp.matrix.conj().T
        t = psi.tensor().reshape(8, 4)
        assert np.linalg.norm(proj @ t - t) < 1e-8


class TestUhlmann:
    def test_identical_states_reach_zero_distance(self, rng):
        lay = RegisterLayout.of(("a", 3), ("p", 4))
        psi = StateVector(lay, random_pure(rng, 12))
        u = uhlmann_unitary(psi, psi, ["p"])
        from qpirlab.states import apply_matrix_to_factor
        rotated = apply_matrix_to_factor(u.matrix, psi, ["p"])
        assert pure_state_distance(psi, rotated) < 1e-9

    def test_permuted_purifier_is_unwound(self, rng):
        lay = RegisterLayout.of(("a", 3), ("p", 3))
        phi = StateVector(lay, random_pure(rng, 9))
        perm = np.zeros((3, 3), dtype=complex)
        perm[0, 1] = perm[1, 2] = perm[2, 0] = 1.0
        from qpirlab.states import apply_matrix_to_factor
        psi = apply_matrix_to_factor(perm, phi, ["p"])
        u = uhlmann_unitary(phi, psi, ["p"])
        rotated = apply_matrix_to_factor(u.matrix, psi, ["p"])
        assert pure_state_distance(phi, rotated) < 1e-9

    def test_random_pairs_meet_distance_bound(self, rng):
        from qpirlab.states import apply_matrix_to_factor, reduced_density_matrix
        from qpirlab.linalg import trace_distance_matrices
        lay = RegisterLayout.of(("a", 4), ("p", 4))
        for _ in range(25):
            phi = StateVector(lay, random_pure(rng, 16))
            psi = StateVector(lay, random_pure(rng, 16))
            eps = trace_distance_matrices(reduced_density_matrix(phi, ["a"]),
                                          reduced_density_matrix(psi, ["a"]))
            u = uhlmann_unitary(phi, psi, ["p"])
            rotated = apply_matrix_to_factor(u.matrix, psi, ["p"])
            achieved = pure_state_distance(phi, rotated)
            assert achieved <= math.sqrt(eps * (2 - eps)) + 1e-9


class TestHelstrom:
    def test_identical_states_coin_flip(self):
        res = helstrom_probability(dm(KET0), dm(KET0))
        assert res.probability == pytest.approx(0.5, abs=1e-12)

    def test_orthogonal_states_certain(self):
        res = helstrom_probability(dm(KET0), dm(KET1))
        assert res.probability == pytest.approx(1.0, abs=1e-12)
        # the projector points at the first state
        assert np.trace(res.projector @ dm(KET0).matrix).real == pytest.approx(1.0)

    def test_zero_vs_plus_matches_grid_oracle(self):
        res = helstrom_probability(dm(KET0), dm(PLUS))
        closed_form = 0.5 + 0.5 / math.sqrt(2)
        assert res.probability == pytest.approx(closed_form, abs=1e-9)
        grid = bloch_grid_success(dm(KET0).matrix, dm(PLUS).matrix)
        assert res.probability == pytest.approx(grid, abs=1e-3)

    def test_invalid_prior(self):
        with pytest.raises(ValueError):
            helstrom_probability(dm(KET0), dm(KET1), prior0=1.5)


class TestEntropy:
    def test_binary_entropy_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == pytest.approx(1.0, abs=1e-12)

    def test_binary_entropy_three_quarters(self):
        expected = -(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25))
        assert expected == pytest.approx(0.811278, abs=1e-6)
        assert binary_entropy(0.75) == pytest.approx(expected, abs=1e-12)

    def test_binary_entropy_domain(self):
        with pytest.raises(ValueError):
            binary_entropy(-0.01)
        with pytest.raises(ValueError):
            binary_entropy(1.01)

    def test_shannon_point_mass(self):
        assert shannon_entropy([1.0, 0.0, 0.0]) == 0.0

    def test_shannon_uniform_powers_of_two(self):
        for k in range(1, 5):
            dist = np.full(2**k, 2.0**-k)
            assert shannon_entropy(dist) == pytest.approx(k, abs=1e-12)

    def test_shannon_mixed(self):
        assert shannon_entropy([0.5, 0.25, 0.25]) == pytest.approx(1.5, abs=1e-12)

    def test_shannon_rejects_bad_distributions(self):
        with pytest.raises(ValueError):
            shannon_entropy([0.5, 0.6])
        with pytest.raises(ValueError):
            shannon_entropy([-0.1, 1.1])


class TestHaar:
    def test_dim_one_is_a_phase(self):
        u = haar_random_unitary(1, seed=1)
        assert abs(abs(u.matrix[0, 0]) - 1.0) < 1e-12

    def test_seed_determinism(self):
        a = haar_random_unitary(5, seed=42)
        b = haar_random_unitary(5, seed=42)
        assert np.array_equal(a.matrix, b.matrix)
        c = haar_random_unitary(5, seed=43)
        assert not np.allclose(a.matrix, c.matrix)

    def test_columns_are_unit_norm(self):
        u = haar_random_unitary(16, seed=7)
        norms = np.linalg.norm(u.matrix, axis=0)
        assert np.max(np.abs(norms - 1.0)) < 1e-9

    def test_dim_zero_rejected(self):
        with pytest.raises(ValueError):
            haar_random_unitary(0, seed=1)
