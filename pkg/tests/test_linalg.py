import numpy as np
import pytest

from nvpair.linalg import (DimensionError, basis_state, check_density_matrix,
                           electron_index, full_index, matrix_exponential,
                           matrix_exponential_expm, pair_index, pair_label,
                           partial_trace, partial_trace_pair, projector,
                           state_fidelity, tensor_product)


def test_index_round_trip():
    for i in range(9):
        assert pair_index(*pair_label(i)) == i
    assert pair_index(0, 0) == 4
    assert electron_index(1) == 0


def test_full_index_layout():
    # slot order (A electron, A nucleus, B electron, B nucleus)
    assert full_index(1, 0.5, 1, 0.5) == 0
    assert full_index(1, 0.5, 1, -0.5) == 1
    assert full_index(1, -0.5, 1, 0.5) == 6
    assert full_index(-1, -0.5, -1, -0.5) == 35


def test_matrix_exponential_matches_expm():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    h = m + m.conj().T
    np.testing.assert_allclose(matrix_exponential(h, 0.3),
                               matrix_exponential_expm(h, 0.3), atol=1e-12)


def test_matrix_exponential_rejects_non_hermitian():
    with pytest.raises(ValueError):
        matrix_exponential(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


def test_partial_trace_of_product_state():
    rho_a = projector(np.array([1.0, 2.0, 0.5]))
    rho_b = projector(np.array([1.0, -1.0]))
    rho = tensor_product(rho_a, rho_b)
    np.testing.assert_allclose(partial_trace(rho, (3, 2), (0,)), rho_a,
                               atol=1e-14)
    np.testing.assert_allclose(partial_trace(rho, (3, 2), (1,)), rho_b,
                               atol=1e-14)


def test_partial_trace_pair_keeps_marginals():
    psi = (basis_state(9, pair_index(0, 0))
           + basis_state(9, pair_index(1, 1))) / np.sqrt(2.0)
    rho = projector(psi)
    red = partial_trace_pair(rho, "A")
    np.testing.assert_allclose(np.diag(red).real, [0.5, 0.5, 0.0], atol=1e-14)


def test_check_density_matrix_rejections():
    with pytest.raises(DimensionError):
        check_density_matrix(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="Hermitian"):
        check_density_matrix(np.array([[0.5, 0.5], [-0.5, 0.5]]))
    with pytest.raises(ValueError, match="trace"):
        check_density_matrix(np.eye(2))
    with pytest.raises(ValueError, match="positive"):
        check_density_matrix(np.diag([1.5, -0.5]))


def test_state_fidelity_normalizes_target():
    rho = projector(np.array([1.0, 0.0]))
    assert state_fidelity(rho, np.array([2.0, 0.0])) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        state_fidelity(rho, np.zeros(3))
