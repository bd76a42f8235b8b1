import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbmor import transfer as tf
from pbmor.benchmarks import advdiff_source_snapshots, gen_advdiff, sample_advdiff_params
from pbmor.deim import DeimModel, deim_advdiff, deim_approximate, fit_deim, pod_basis, qdeim_select
from pbmor.errors import EmptyBasisError


def test_single_snapshot():
    v = np.array([3.0, 0.0, 4.0])
    U, s = pod_basis(v[:, None])
    assert U.shape == (3, 1)
    assert np.allclose(np.abs(U[:, 0]), v / 5)


def test_rank_one_snapshots():
    v = np.array([1.0, 2.0, 3.0])
    U, _ = pod_basis(np.column_stack([v, 2 * v]))
    assert U.shape[1] == 1


def test_zero_snapshots_rejected():
    with pytest.raises(EmptyBasisError):
        pod_basis(np.zeros((4, 3)))


def test_constant_vector_exact():
    v = np.array([1.0, -2.0, 0.5, 4.0])
    model = fit_deim(v[:, None])
    approx = deim_approximate(model, v[model.row_indices])
    assert np.allclose(approx, v, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(5, 30), k=st.integers(1, 5), seed=st.integers(0, 10_000))
def test_projection_properties(n, k, seed):
    rng = np.random.default_rng(seed)
    k = min(k, n)
    model = fit_deim(rng.standard_normal((n, k)), tol=1e-10)
    assert len(set(model.row_indices.tolist())) == model.M
    # exact on span(U)
    inside = model.U @ rng.standard_normal(model.M)
    got = deim_approximate(model, inside[model.row_indices])
    assert np.linalg.norm(got - inside) <= 1e-12 * np.linalg.norm(inside) * max(1.0, np.linalg.cond(model.StU))
    # idempotent and interpolatory on the selected rows
    b = rng.standard_normal(n)
    once = deim_approximate(model, b[model.row_indices])
    twice = deim_approximate(model, once[model.row_indices])
    assert np.linalg.norm(twice - once) <= 1e-12 * max(np.linalg.norm(once), 1.0) * np.linalg.cond(model.StU)
    assert np.allclose(once[model.row_indices], b[model.row_indices], rtol=0, atol=1e-12 * np.abs(b).max())


def test_callable_input_and_errors(rng):
    model = fit_deim(rng.standard_normal((6, 2)))
    b = rng.standard_normal(6)
    assert np.allclose(deim_approximate(model, lambda: b[model.row_indices]),
                       deim_approximate(model, b[model.row_indices]))
    with pytest.raises(ValueError):
        deim_approximate(model, b)
    with pytest.raises(ValueError):
        deim_approximate(model, b[model.row_indices], reduced=True)


def test_attach_gives_reduced_vector(rng):
    model = fit_deim(rng.standard_normal((8, 3)))
    W = np.linalg.qr(rng.standard_normal((8, 2)))[0]
    m2 = model.attach(W)
    b = rng.standard_normal(8)
    sel = b[model.row_indices]
    assert np.allclose(deim_approximate(m2, sel, reduced=True), W.T @ deim_approximate(model, sel))


def test_save_load_roundtrip(tmp_path, rng):
    model = fit_deim(rng.standard_normal((10, 4)))
    model.save(str(tmp_path / 'model'))
    back = DeimModel.load(str(tmp_path / 'model'))
    assert np.array_equal(back.row_indices, model.row_indices)
    assert np.allclose(back.U, model.U, rtol=0, atol=1e-15)
    assert back.tol == model.tol


def test_gaussian_snapshots_stable_rank():
    P = sample_advdiff_params(np.random.default_rng(0), 200)
    S = advdiff_source_snapshots(11, P)
    model = fit_deim(S, 1e-5)
    again = fit_deim(advdiff_source_snapshots(11, P), 1e-5)
    assert model.M == again.M and np.array_equal(model.row_indices, again.row_indices)
    assert np.array_equal(qdeim_select(model.U), model.row_indices)
    assert 5 < model.M < 60


def test_deim_system_uses_surrogate():
    grid = 9
    rng = np.random.default_rng(3)
    model = fit_deim(advdiff_source_snapshots(grid, sample_advdiff_params(rng, 200)), 1e-8)
    sys = gen_advdiff(grid)
    dsys = deim_advdiff(grid, model, sys)
    p = np.array([0.5, 0.1, -0.2, 4.0])
    b_full = sys.B.evaluate(p)[:, 3]
    b_deim = dsys.B.evaluate(p)[:, 3]
    assert np.linalg.norm(b_full - b_deim) <= 1e-4 * np.linalg.norm(b_full)
    assert np.allclose(b_deim[model.row_indices], b_full[model.row_indices], rtol=1e-12)
    # derivative of the surrogate is the surrogate of the derivative
    J = dsys.B.derivative(p, 1)[:, 3]
    assert np.allclose(J, model.U @ np.linalg.solve(model.StU, sys.B.derivative(p, 1)[model.row_indices, 3]))
    h1 = tf.eval_Hk_right(sys, [1.0], p, [0, 0, 0, 1.0])
    h2 = tf.eval_Hk_right(dsys, [1.0], p, [0, 0, 0, 1.0])
    assert np.allclose(h1, h2, rtol=1e-3)
