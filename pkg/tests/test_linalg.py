import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixlearn.linalg import jacobi_eigh, operator_norm_sym, orthonormalize, project_to_simplex


def test_jacobi_matches_lapack_oracle(rng):
    for n in (1, 2, 3, 8, 30):
        a = rng.standard_normal((n, n))
        a = a + a.T
        w, v = jacobi_eigh(a)
        assert np.allclose(w, np.linalg.eigvalsh(a)[::-1], atol=1e-9)
        assert np.abs(v.T @ v - np.eye(n)).max() < 1e-10
        assert np.abs((v * w) @ v.T - a).max() < 1e-10 * max(1.0, np.linalg.norm(a))


def test_jacobi_zero_and_diagonal():
    w, v = jacobi_eigh(np.zeros((3, 3)))
    assert np.all(w == 0.0)
    w, _ = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    assert np.allclose(w, [3.0, 2.0, -1.0])


def test_jacobi_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        jacobi_eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_operator_norm_sym(rng):
    a = rng.standard_normal((6, 6))
    a = a + a.T
    assert operator_norm_sym(a) == pytest.approx(np.linalg.norm(a, 2), abs=1e-9)


def test_orthonormalize_basis(rng):
    cols = rng.standard_normal((8, 3))
    q = orthonormalize(cols)
    assert np.abs(q.T @ q - np.eye(3)).max() < 1e-12
    # same span: original columns reproduce under the projector
    proj = q @ q.T
    assert np.abs(proj @ cols - cols).max() < 1e-9


def test_orthonormalize_rank_deficient():
    cols = np.ones((4, 2))
    with pytest.raises(ValueError):
        orthonormalize(cols)


@settings(deadline=None, max_examples=80)
@given(st.lists(st.floats(min_value=-10, max_value=10), min_size=1, max_size=8))
def test_simplex_projection_properties(vals):
    x = project_to_simplex(np.array(vals))
    assert x.min() >= 0.0
    assert x.sum() == pytest.approx(1.0, abs=1e-9)
    # optimality via the KKT characterization: entries above the water level
    # keep a common offset, the rest are clamped at zero
    v = np.array(vals)
    active = x > 0
    offs = v[active] - x[active]
    assert np.ptp(offs) < 1e-9 if active.sum() > 1 else True
    if (~active).any() and active.any():
        assert v[~active].max() <= v[active].min() + 1e-9
