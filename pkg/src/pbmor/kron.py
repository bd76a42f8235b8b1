"""Kronecker-structured linear algebra kernels.

Everything downstream (transfer functions, bases, verification) goes through
the three primitives in this module: block-diagonal application of
``I_{m^k} (x) M``, factorized solves with the shifted pencil ``sE - A`` and
row selection by column-pivoted QR.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as spla

from pbmor import config
from pbmor.errors import DegenerateBasisError, InstanceTooLargeError, ShiftAtEigenvalueError


def demote(X, tol=None):
    """Return ``X`` as a real array if its imaginary part is negligible."""
    X = np.asarray(X)
    if not np.iscomplexobj(X):
        return X
    tol = config.IMAG_TOL if tol is None else tol
    scale = np.max(np.abs(X)) if X.size else 0.0
    if X.size == 0 or np.max(np.abs(X.imag)) <= tol * scale:
        return np.ascontiguousarray(X.real)
    return X


class KronIdentity:
    """Lazy representation of ``I_{m^k} (x) M``.

    Products with this object apply ``M`` block-wise without forming the
    identity factor; :meth:`toarray` materializes it for testing.

    Parameters
    ----------
    k
        Number of identity factors ``I_m``.
    M
        The dense right factor.
    m
        Size of each identity factor.
    """

    __array_ufunc__ = None  # let ndarray @ KronIdentity reach __rmatmul__

    def __init__(self, k: int, M, m: int):
        if k < 0:
            raise ValueError('k must be nonnegative')
        M = np.atleast_2d(np.asarray(M))
        self.k, self.m, self.M = k, m, M
        self.reps = m ** k
        if self.reps * M.shape[0] > config.MAX_KRON_ROWS:
            raise InstanceTooLargeError(
                f'I_{m}^(x){k} (x) M has {self.reps * M.shape[0]} rows '
                f'(cap {config.MAX_KRON_ROWS})')

    @property
    def shape(self):
        return self.reps * self.M.shape[0], self.reps * self.M.shape[1]

    def toarray(self):
        return np.kron(np.eye(self.reps), self.M)

    def __matmul__(self, X):
        X = np.asarray(X)
        vec = X.ndim == 1
        X2 = X.reshape(self.shape[1], -1)
        blocks = X2.reshape(self.reps, self.M.shape[1], -1)
        out = np.einsum('ij,bjc->bic', self.M, blocks).reshape(self.shape[0], -1)
        return out.ravel() if vec else out

    def __rmatmul__(self, X):
        X = np.asarray(X)
        vec = X.ndim == 1
        X2 = np.atleast_2d(X)
        blocks = X2.reshape(X2.shape[0], self.reps, self.M.shape[0])
        out = np.einsum('rbi,ij->rbj', blocks, self.M).reshape(X2.shape[0], -1)
        return out.ravel() if vec else out


def kron_identity_left(k, M, m):
    """``I_{m^k} (x) M`` as a lazy operator (see :class:`KronIdentity`)."""
    return KronIdentity(k, M, m)


def lu_rcond(M):
    """LU factors of ``M`` and LAPACK's 1-norm reciprocal condition estimate."""
    M = np.asarray(M)
    anorm = np.linalg.norm(M, 1)
    with np.errstate(all='ignore'), warnings.catch_warnings():
        warnings.simplefilter('ignore', spla.LinAlgWarning)
        lu, piv = spla.lu_factor(M, check_finite=False)
    gecon, = spla.get_lapack_funcs(('gecon',), (lu,))
    rcond, info = gecon(lu, anorm, norm='1')
    if anorm == 0.0 or info != 0 or not np.isfinite(rcond):
        rcond = 0.0
    return lu, piv, float(rcond)


class ShiftedSolver:
    """LU factorization of the pencil ``s E - A`` for repeated solves.

    Raises :class:`ShiftAtEigenvalueError` when the reciprocal condition
    estimate of the pencil falls below ``config.RCOND_TOL``.
    """

    def __init__(self, E, A, s):
        E = np.asarray(E)
        A = np.asarray(A)
        if E.ndim != 2 or E.shape[0] != E.shape[1] or E.shape != A.shape:
            raise ValueError(f'E and A must be square and equal-sized, got {E.shape} and {A.shape}')
        n = E.shape[0]
        if n > config.MAX_DENSE_SIZE:
            raise InstanceTooLargeError(f'dense factorization of size {n} exceeds cap {config.MAX_DENSE_SIZE}')
        s = complex(s)
        if s.imag == 0.0 and not (np.iscomplexobj(E) or np.iscomplexobj(A)):
            s = s.real
        self.s = s
        M = s * E - A
        self.n = n
        if not np.all(np.isfinite(M)):
            raise ShiftAtEigenvalueError('pencil has non-finite entries')
        self.lu, self.piv, rcond = lu_rcond(M)
        if rcond < config.RCOND_TOL:
            raise ShiftAtEigenvalueError(
                f's = {s} makes sE - A singular (rcond estimate {rcond:.3e})')
        self.rcond = rcond

    def solve(self, RHS, trans=False):
        """Solve ``(sE - A) X = RHS`` or, with ``trans``, ``(sE - A)^T X = RHS``.

        The transpose is the plain (non-conjugated) transpose.
        """
        RHS = np.asarray(RHS)
        if RHS.shape[0] != self.n:
            raise ValueError(f'RHS has {RHS.shape[0]} rows, expected {self.n}')
        if np.iscomplexobj(RHS) and not np.iscomplexobj(self.lu):
            # real factorization, complex data: solve real and imaginary parts separately
            return (spla.lu_solve((self.lu, self.piv), RHS.real, trans=int(trans), check_finite=False)
                    + 1j * spla.lu_solve((self.lu, self.piv), RHS.imag, trans=int(trans), check_finite=False))
        return spla.lu_solve((self.lu, self.piv), RHS, trans=int(trans), check_finite=False)


def solve_shifted(E, A, s, RHS, trans=False):
    """Return ``X`` with ``(sE - A) X = RHS`` (dense LU, partial pivoting)."""
    return demote(ShiftedSolver(E, A, s).solve(RHS, trans=trans))


def pivoted_qr_rows(U, rank_tol=1e-12):
    """Row indices chosen by column-pivoted QR of ``U.T`` (Q-DEIM).

    Parameters
    ----------
    U
        ``n x M`` matrix of full column rank.
    rank_tol
        Relative threshold on the diagonal of ``R`` below which ``U`` is
        declared rank deficient.

    Returns
    -------
    numpy.ndarray
        ``M`` distinct row indices, in pivot order.
    """
    U = np.atleast_2d(np.asarray(U))
    n, M = U.shape
    if M == 0 or n < M:
        raise DegenerateBasisError(f'need n >= M >= 1, got U of shape {U.shape}')
    _, R, piv = spla.qr(U.T, mode='economic', pivoting=True)
    d = np.abs(np.diag(R))
    if d[0] == 0.0 or d[M - 1] <= rank_tol * d[0]:
        raise DegenerateBasisError(f'U is numerically rank deficient (|R_MM|/|R_11| = {d[M - 1] / max(d[0], 1e-300):.2e})')
    return np.asarray(piv[:M])
