"""Parametric bilinear systems with affine parameter dependence.

A system is the tuple ``(E, A, N_1..N_m, B, C)`` of :class:`AffineMatrix`
objects, each of the form ``M(p) = M0 + sum_i f_i(p) M_i``.  A coefficient
function may be vector valued; it is then paired with a stack of matrices
and contributes ``sum_k f(p)[k] M_i[k]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from pbmor import config
from pbmor.kron import lu_rcond
from pbmor.errors import CoefficientEvaluationError, SingularMassError

FD_STEP = 1e-6
FD_STEP_HESSIAN = 1e-4


def as_param(p, nu=None):
    """Validate a parameter point and return it as a 1-D float array."""
    p = np.atleast_1d(np.asarray(p, dtype=float)).ravel()
    if nu is not None and p.shape != (nu,):
        raise ValueError(f'parameter has {p.size} entries, expected {nu}')
    if not np.all(np.isfinite(p)):
        raise ValueError(f'parameter {p} is not finite')
    return p


def _steps(p, rel):
    return rel * np.maximum(1.0, np.abs(p))


class CoefficientFunction:
    """Scalar or vector-valued coefficient ``f(p)`` of an affine term.

    Parameters
    ----------
    value
        Callable ``p -> scalar`` or ``p -> (K,)`` array.
    gradient
        Optional callable ``p -> (nu,)`` (scalar case) or ``(K, nu)``.
    hessian
        Optional callable ``p -> (nu, nu)`` or ``(K, nu, nu)``.
    tag
        Name used in manifests; see :mod:`pbmor.io` for how tags resolve.

    Missing derivatives are replaced by central finite differences; the
    ``approximate_gradient`` and ``approximate_hessian`` flags say so.
    """

    def __init__(self, value: Callable, gradient: Optional[Callable] = None,
                 hessian: Optional[Callable] = None, tag: str = ''):
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self.tag = tag

    @property
    def approximate_gradient(self):
        return self._gradient is None

    @property
    def approximate_hessian(self):
        return self._hessian is None

    def __repr__(self):
        return f'CoefficientFunction({self.tag!r})'

    def value(self, p):
        v = np.atleast_1d(np.asarray(self._value(p)))
        if not np.all(np.isfinite(v)):
            raise CoefficientEvaluationError(f'coefficient {self.tag!r} is not finite at p = {p}')
        return v

    def gradient(self, p):
        """Array of shape ``(K, nu)``."""
        p = np.asarray(p, dtype=float)
        if self._gradient is not None:
            g = np.asarray(self._gradient(p))
            return g.reshape(-1, p.size)
        h = _steps(p, FD_STEP)
        cols = []
        for j in range(p.size):
            e = np.zeros_like(p)
            e[j] = h[j]
            cols.append((self.value(p + e) - self.value(p - e)) / (2 * h[j]))
        return np.stack(cols, axis=-1)

    def hessian(self, p):
        """Array of shape ``(K, nu, nu)``, symmetrized."""
        p = np.asarray(p, dtype=float)
        nu = p.size
        if self._hessian is not None:
            return np.asarray(self._hessian(p)).reshape(-1, nu, nu)
        h = _steps(p, FD_STEP_HESSIAN)
        if self._gradient is not None:
            rows = []
            for j in range(nu):
                e = np.zeros_like(p)
                e[j] = h[j]
                rows.append((self.gradient(p + e) - self.gradient(p - e)) / (2 * h[j]))
            H = np.stack(rows, axis=1)
        else:
            K = self.value(p).size
            H = np.empty((K, nu, nu))
            for i in range(nu):
                for j in range(nu):
                    ei = np.zeros_like(p)
                    ej = np.zeros_like(p)
                    ei[i] = h[i]
                    ej[j] = h[j]
                    H[:, i, j] = (self.value(p + ei + ej) - self.value(p + ei - ej)
                                  - self.value(p - ei + ej) + self.value(p - ei - ej)) / (4 * h[i] * h[j])
        return 0.5 * (H + np.swapaxes(H, 1, 2))


def constant_coefficient(c=1.0):
    return CoefficientFunction(lambda p: c, lambda p: np.zeros(np.size(p)),
                               lambda p: np.zeros((np.size(p),) * 2), tag=repr(float(c)))


def linear_coefficient(j, scale=1.0):
    """``f(p) = scale * p[j]``."""

    def grad(p):
        g = np.zeros(np.size(p))
        g[j] = scale
        return g

    tag = f'p[{j}]' if scale == 1.0 else f'{scale!r}*p[{j}]'
    return CoefficientFunction(lambda p: scale * p[j], grad, lambda p: np.zeros((np.size(p),) * 2), tag=tag)


def square_coefficient(j, scale=1.0):
    """``f(p) = scale * p[j]**2``."""

    def grad(p):
        g = np.zeros(np.size(p))
        g[j] = 2 * scale * p[j]
        return g

    def hess(p):
        H = np.zeros((np.size(p),) * 2)
        H[j, j] = 2 * scale
        return H

    tag = f'p[{j}]^2' if scale == 1.0 else f'{scale!r}*p[{j}]^2'
    return CoefficientFunction(lambda p: scale * p[j] ** 2, grad, hess, tag=tag)


def exp_coefficient(j):
    """``f(p) = exp(p[j])``."""

    def grad(p):
        g = np.zeros(np.size(p))
        g[j] = np.exp(p[j])
        return g

    def hess(p):
        H = np.zeros((np.size(p),) * 2)
        H[j, j] = np.exp(p[j])
        return H

    return CoefficientFunction(lambda p: np.exp(p[j]), grad, hess, tag=f'exp(p[{j}])')


@dataclass
class AffineTerm:
    coefficient: CoefficientFunction
    matrices: np.ndarray  # (K, rows, cols)


class AffineMatrix:
    """``M(p) = M0 + sum_i f_i(p) M_i``.

    Parameters
    ----------
    constant
        The parameter-independent term ``M0``.
    terms
        Sequence of ``(CoefficientFunction, matrix)`` pairs.  For a
        vector-valued coefficient of length ``K`` the matrix is a stack of
        shape ``(K, rows, cols)``.
    """

    def __init__(self, constant, terms: Sequence = ()):
        self.constant = np.atleast_2d(np.asarray(constant))
        self.shape = self.constant.shape
        self.terms = []
        for coef, mat in terms:
            mat = np.asarray(mat)
            if mat.ndim == 1:
                mat = mat.reshape(self.shape)
            if mat.ndim == 2:
                mat = mat[np.newaxis]
            if mat.shape[1:] != self.shape:
                raise ValueError(f'term matrix shape {mat.shape[1:]} differs from constant shape {self.shape}')
            self.terms.append(AffineTerm(coef, mat))

    @classmethod
    def const(cls, M):
        return cls(M)

    def __repr__(self):
        return f'AffineMatrix(shape={self.shape}, terms={[t.coefficient.tag for t in self.terms]})'

    @property
    def is_constant(self):
        return not self.terms

    @property
    def dtype(self):
        return np.result_type(self.constant, *[t.matrices for t in self.terms])

    def evaluate(self, p):
        """``M0 + sum f_i(p) M_i``."""
        out = np.array(self.constant, dtype=self.dtype, copy=True)
        for t in self.terms:
            v = t.coefficient.value(p)
            if v.size != t.matrices.shape[0]:
                raise CoefficientEvaluationError(
                    f'coefficient {t.coefficient.tag!r} returned {v.size} values for {t.matrices.shape[0]} matrices')
            out = out + np.tensordot(v, t.matrices, axes=1)
        return out

    def derivative(self, p, j):
        """``sum (d f_i / d p_j)(p) M_i``."""
        out = np.zeros(self.shape, dtype=self.dtype)
        for t in self.terms:
            g = t.coefficient.gradient(p)[:, j]
            out = out + np.tensordot(g, t.matrices, axes=1)
        return out

    def second_derivative(self, p, i, j):
        """``sum (d^2 f / d p_i d p_j)(p) M_k``."""
        out = np.zeros(self.shape, dtype=self.dtype)
        for t in self.terms:
            h = t.coefficient.hessian(p)[:, i, j]
            out = out + np.tensordot(h, t.matrices, axes=1)
        return out

    def map(self, fn):
        """Apply a linear map to every constant matrix, sharing coefficients."""
        const = fn(self.constant)
        terms = [(t.coefficient, np.stack([fn(M) for M in t.matrices])) for t in self.terms]
        return AffineMatrix(const, terms)


def evaluate_affine(M: AffineMatrix, p):
    return M.evaluate(p)


def affine_derivative(M: AffineMatrix, p, j):
    return M.derivative(p, j)


def affine_second_derivative(M: AffineMatrix, p, i, j):
    return M.second_derivative(p, i, j)


def _affine(M):
    return M if isinstance(M, AffineMatrix) else AffineMatrix(M)


@dataclass
class BilinearSystem:
    """``E(p) x' = A(p) x + sum_j N_j(p) x u_j + B(p) u``, ``y = C(p) x``.

    Parameters
    ----------
    E, A
        ``n x n`` affine matrices.
    N
        List of ``m`` affine ``n x n`` matrices.
    B
        ``n x m`` affine matrix.
    C
        ``l x n`` affine matrix.
    nu
        Number of parameters.
    """

    E: AffineMatrix
    A: AffineMatrix
    N: list
    B: AffineMatrix
    C: AffineMatrix
    nu: int
    name: str = ''
    basis: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        self.E, self.A, self.B, self.C = map(_affine, (self.E, self.A, self.B, self.C))
        self.N = [_affine(Nj) for Nj in self.N]
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.E.shape != (n, n):
            raise ValueError(f'E and A must be n x n, got {self.E.shape}, {self.A.shape}')
        m = self.B.shape[1]
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise ValueError(f'B is {self.B.shape} and C is {self.C.shape} for n = {n}')
        if len(self.N) != m:
            raise ValueError(f'{len(self.N)} bilinear matrices for {m} inputs')
        for Nj in self.N:
            if Nj.shape != (n, n):
                raise ValueError(f'N_j must be n x n, got {Nj.shape}')

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def order(self):
        return self.n

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def l(self):  # noqa: E743
        return self.C.shape[0]

    @property
    def dims(self):
        return self.n, self.m, self.l, self.nu

    def affine_matrices(self):
        """All affine matrices keyed by name, ``N`` entries as ``N1..Nm``."""
        out = {'E': self.E, 'A': self.A, 'B': self.B, 'C': self.C}
        out.update({f'N{j + 1}': Nj for j, Nj in enumerate(self.N)})
        return out

    def evaluate(self, p):
        """Dict of dense matrices ``E, A, N (list), B, C`` at ``p``."""
        p = as_param(p, self.nu)
        return {'E': self.E.evaluate(p), 'A': self.A.evaluate(p),
                'N': [Nj.evaluate(p) for Nj in self.N],
                'B': self.B.evaluate(p), 'C': self.C.evaluate(p)}

    def check_mass(self, p):
        """Raise :class:`SingularMassError` if ``E(p)`` is numerically singular."""
        E = self.E.evaluate(as_param(p, self.nu))
        rc = lu_rcond(E)[2]
        if rc < config.RCOND_TOL:
            raise SingularMassError(f'E(p) singular at p = {p} (rcond {rc:.2e})')
        return rc

    def linearized(self):
        """Copy with all bilinear matrices set to zero."""
        Z = [AffineMatrix(np.zeros((self.n, self.n))) for _ in self.N]
        return BilinearSystem(self.E, self.A, Z, self.B, self.C, self.nu, name=self.name + ' (linearized)')

    def with_B(self, B):
        return BilinearSystem(self.E, self.A, self.N, B, self.C, self.nu, name=self.name)
