"""POD compression and Q-DEIM interpolation of parameter-dependent vectors.

A vector ``b(p)`` is approximated by ``U (S^T U)^{-1} S^T b(p)`` where ``U``
holds the leading left singular vectors of a snapshot matrix and ``S``
selects ``M`` rows.  Only the selected entries of ``b(p)`` are needed online.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.io
import scipy.linalg as spla

from pbmor.errors import EmptyBasisError
from pbmor.kron import pivoted_qr_rows
from pbmor.system import AffineMatrix, BilinearSystem, CoefficientFunction


def pod_basis(snapshots, tol=1e-5):
    """Leading left singular vectors of ``snapshots``.

    Keeps the ``M`` singular values larger than ``tol * sigma_max``.

    Returns
    -------
    U : ndarray, shape (n, M)
    sigma : ndarray
        All singular values, in decreasing order.
    """
    X = np.atleast_2d(np.asarray(snapshots, dtype=float))
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError('need at least one snapshot column')
    if not np.any(X):
        raise EmptyBasisError('snapshot matrix is identically zero')
    U, sigma, _ = spla.svd(X, full_matrices=False)
    M = int(np.sum(sigma > tol * sigma[0]))
    return U[:, :M], sigma


def qdeim_select(U):
    """Row indices from pivoted QR of ``U^T``."""
    return pivoted_qr_rows(U)


@dataclass(frozen=True)
class DeimModel:
    U: np.ndarray
    row_indices: np.ndarray
    singular_values: np.ndarray
    tol: float = 1e-5
    factor: Optional[np.ndarray] = None  # W^T U (S^T U)^{-1}

    @property
    def M(self):
        return self.U.shape[1]

    @property
    def n(self):
        return self.U.shape[0]

    @property
    def StU(self):
        return self.U[self.row_indices]

    def interpolation_weights(self, selected):
        """``(S^T U)^{-1} g`` for the selected entries ``g`` (vector or columns)."""
        return np.linalg.solve(self.StU, np.asarray(selected))

    def attach(self, W):
        """Copy carrying the reduced factor ``W^T U (S^T U)^{-1}``."""
        factor = np.linalg.solve(self.StU.T, (W.T @ self.U).T).T
        return replace(self, factor=factor)

    def save(self, prefix):
        """Write ``<prefix>.U.mtx`` and ``<prefix>.json``."""
        prefix = Path(prefix)
        scipy.io.mmwrite(str(prefix) + '.U.mtx', self.U)
        meta = {'row_indices': [int(i) for i in self.row_indices],
                'singular_values': [float(s) for s in self.singular_values],
                'tol': self.tol, 'M': self.M, 'n': self.n}
        Path(str(prefix) + '.json').write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, prefix):
        prefix = str(prefix)
        U = np.asarray(scipy.io.mmread(prefix + '.U.mtx'))
        meta = json.loads(Path(prefix + '.json').read_text())
        return cls(U, np.asarray(meta['row_indices'], dtype=int),
                   np.asarray(meta['singular_values']), meta['tol'])


def fit_deim(snapshots, tol=1e-5):
    """POD basis plus Q-DEIM rows for a snapshot matrix."""
    U, sigma = pod_basis(snapshots, tol)
    return DeimModel(U, qdeim_select(U), sigma, tol)


def deim_approximate(model, g, reduced=False):
    """Approximate ``b(p)`` from its selected entries ``g``.

    ``g`` is either the array of the ``M`` selected entries or a callable
    returning them.  With ``reduced=True`` the model must carry a factor
    from :meth:`DeimModel.attach` and the reduced vector is returned.
    """
    sel = np.asarray(g() if callable(g) else g)
    if sel.shape[0] != model.M:
        raise ValueError(f'{sel.shape[0]} selected entries for M = {model.M}')
    if reduced:
        if model.factor is None:
            raise ValueError('no reduction basis attached')
        return model.factor @ sel
    return model.U @ model.interpolation_weights(sel)


def deim_coefficient(model, selected: CoefficientFunction, tag=''):
    """Vector coefficient ``(S^T U)^{-1} g(p)`` built from a coefficient on the selected rows."""
    lu = spla.lu_factor(model.StU)

    def value(p):
        return spla.lu_solve(lu, selected.value(p))

    def grad(p):
        return spla.lu_solve(lu, selected.gradient(p))

    def hess(p):
        H = selected.hessian(p)
        K, nu, _ = H.shape
        return spla.lu_solve(lu, H.reshape(K, -1)).reshape(K, nu, nu)

    return CoefficientFunction(value, grad, hess, tag=tag or f'deim({selected.tag})')


def replace_vector_term(M: AffineMatrix, term_index, column, model, selected: CoefficientFunction, tag=''):
    """Swap a vector-valued term of ``M`` for its DEIM surrogate.

    The replaced term placed ``b(p)`` in ``column``; the new one places
    ``U (S^T U)^{-1} g(p)`` there, with ``M`` stacked matrices.
    """
    rows, cols = M.shape
    stack = np.zeros((model.M, rows, cols))
    stack[:, :, column] = model.U.T
    terms = [(t.coefficient, t.matrices) for t in M.terms]
    terms[term_index] = (deim_coefficient(model, selected, tag), stack)
    return AffineMatrix(M.constant, terms)


def deim_advdiff(grid, model, sys=None):
    """Advection-diffusion system whose source input uses the DEIM surrogate."""
    from pbmor.benchmarks import advdiff_grid, gaussian_coefficient, gen_advdiff

    sys = sys or gen_advdiff(grid)
    x, y, _ = advdiff_grid(grid)
    idx = model.row_indices
    sel = gaussian_coefficient(x[idx], y[idx], tag=f'advdiff.source_rows:{grid}')
    term = next(i for i, t in enumerate(sys.B.terms) if t.coefficient.tag.startswith('advdiff.source'))
    B = replace_vector_term(sys.B, term, 3, model, sel, tag=f'deim:advdiff.source:{grid}')
    return BilinearSystem(sys.E, sys.A, sys.N, B, sys.C, sys.nu, name=sys.name + ' (deim)')
