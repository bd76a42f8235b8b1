"""Petrov-Galerkin projection with an offline/online affine split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pbmor import config
from pbmor.errors import IllPosedReductionError
from pbmor.kron import lu_rcond
from pbmor.system import AffineMatrix, BilinearSystem, as_param


@dataclass
class ReducedBilinearSystem(BilinearSystem):
    """A :class:`BilinearSystem` obtained by projection; ``basis`` records how."""

    def online_evaluate(self, p):
        """Reduced matrices at ``p`` from the precomputed projected terms."""
        return self.evaluate(p)


def _project(M: AffineMatrix, left, right):
    def fn(X):
        out = X
        if left is not None:
            out = left.T @ out
        if right is not None:
            out = out @ right
        return out
    return M.map(fn)


def reduce(sys, basis, check_points=None):
    """Project ``sys`` onto ``basis`` term by term.

    ``E~ = W^T E V``, ``A~ = W^T A V``, ``N~_j = W^T N_j V``, ``B~ = W^T B``
    and ``C~ = C V``.  Each constant matrix of every affine expansion is
    projected once; coefficient functions are shared with ``sys``.

    Raises
    ------
    IllPosedReductionError
        If ``E~`` is singular at any spec sample (or at ``check_points``).
    """
    V, W = basis.V, basis.W
    if V.shape != W.shape or V.shape[0] != sys.n:
        raise ValueError(f'basis shapes V {V.shape}, W {W.shape} incompatible with n = {sys.n}')
    rsys = ReducedBilinearSystem(
        E=_project(sys.E, W, V), A=_project(sys.A, W, V),
        N=[_project(Nj, W, V) for Nj in sys.N],
        B=_project(sys.B, W, None), C=_project(sys.C, None, V),
        nu=sys.nu, name=(sys.name + ' (reduced)').strip(), basis=basis)
    points = [s.p_hat for s in getattr(basis, 'specs', [])]
    if check_points is not None:
        points += [as_param(p, sys.nu) for p in check_points]
    for p in points:
        rc = lu_rcond(rsys.E.evaluate(p))[2]
        if rc < config.RCOND_TOL:
            raise IllPosedReductionError(f'reduced E is singular at p = {p} (rcond {rc:.2e})')
    return rsys


def online_evaluate(rsys, p):
    """Dense reduced matrices at ``p``; only ``r``-sized objects are touched."""
    return rsys.evaluate(p)
