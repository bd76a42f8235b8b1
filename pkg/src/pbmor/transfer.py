"""Tangential subsystem transfer functions of parametric bilinear systems.

The k-th regular subsystem transfer function is

    H_k(s_1..s_k; p) = C R_k N [I (x) R_{k-1} N] ... [I^(k-1) (x) R_1 B],

with resolvents ``R_j = (s_j E(p) - A(p))^{-1}`` and ``N = [N_1 .. N_m]``.
None of the Kronecker factors is formed.  Right contractions run the chain
from ``R_1 B b`` upward and carry an ``n x m^(j-1)`` block; left
contractions run from ``c^T C R_k`` downward and carry an ``n x m^(k-j)``
block of transposed row vectors.  Parameter derivatives are propagated
through the same chain in forward mode.
"""

from __future__ import annotations

import numpy as np

from pbmor import config
from pbmor.errors import InstanceTooLargeError
from pbmor.kron import ShiftedSolver, demote
from pbmor.system import FD_STEP, FD_STEP_HESSIAN, as_param


class PointEvaluation:
    """Matrices of a system at a fixed parameter, with cached factorizations.

    Derivative matrices are computed on first use.
    """

    def __init__(self, sys, p):
        self.sys = sys
        self.p = as_param(p, sys.nu)
        mats = sys.evaluate(self.p)
        self.E, self.A, self.N, self.B, self.C = mats['E'], mats['A'], mats['N'], mats['B'], mats['C']
        self._solvers = {}
        self._d1 = {}
        self._d2 = {}

    def solver(self, s):
        s = complex(s)
        if s not in self._solvers:
            self._solvers[s] = ShiftedSolver(self.E, self.A, s)
        return self._solvers[s]

    def solve(self, s, X, trans=False):
        return self.solver(s).solve(X, trans=trans)

    def d1(self, j):
        """First derivatives ``(E, A, N, B, C)`` with respect to ``p_j``."""
        if j not in self._d1:
            s, p = self.sys, self.p
            self._d1[j] = (s.E.derivative(p, j), s.A.derivative(p, j),
                           [Nk.derivative(p, j) for Nk in s.N],
                           s.B.derivative(p, j), s.C.derivative(p, j))
        return self._d1[j]

    def d2(self, i, j):
        key = (min(i, j), max(i, j))
        if key not in self._d2:
            s, p = self.sys, self.p
            self._d2[key] = (s.E.second_derivative(p, i, j), s.A.second_derivative(p, i, j),
                             [Nk.second_derivative(p, i, j) for Nk in s.N],
                             s.B.second_derivative(p, i, j), s.C.second_derivative(p, i, j))
        return self._d2[key]


def _at(sys, p):
    if isinstance(sys, PointEvaluation):
        return sys
    return PointEvaluation(sys, p)


def n_apply(N, X):
    """``[N_1 .. N_m] (I_m (x) X) = [N_1 X, .., N_m X]``."""
    return np.hstack([Nj @ X for Nj in N])


def nbar_t_apply(N, X):
    """``[N_1; ..; N_m]^T (I_m (x) X) = [N_1^T X, .., N_m^T X]``."""
    return np.hstack([Nj.T @ X for Nj in N])


def _left_expand(N, W):
    # column a of W is the transposed row block a; the result is ordered a-major
    if not N:
        return W[:, :0]
    return np.stack([Nj.T @ W for Nj in N], axis=2).reshape(W.shape[0], -1)


def _check_k(freqs):
    k = len(freqs)
    if k < 1:
        raise ValueError('need at least one frequency')
    if k > config.MAX_SUBSYSTEM:
        raise InstanceTooLargeError(f'k = {k} exceeds the configured maximum {config.MAX_SUBSYSTEM}')
    return k


def _vec(x, size, name):
    x = np.atleast_1d(np.asarray(x)).ravel()
    if x.size != size:
        raise ValueError(f'{name} has {x.size} entries, expected {size}')
    if not np.any(x):
        raise ValueError(f'{name} must be nonzero')
    return x


def right_chain(pe, freqs, b, deriv_at=None):
    """States ``v_1..v_k`` of the right chain at ``pe``.

    With ``deriv_at = i`` (1-based), the resolvent at position ``i`` is
    replaced by its s-derivative ``-R E R``.
    """
    vs = []
    X = (pe.B @ b)[:, None]
    for j, s in enumerate(freqs, start=1):
        if j > 1:
            X = n_apply(pe.N, vs[-1])
        v = pe.solve(s, X)
        if deriv_at == j:
            v = -pe.solve(s, pe.E @ v)
        vs.append(v)
    return vs


def eval_Hk_right(sys, freqs, p, b):
    """``H_k(s_1..s_k; p) (I_m^(k-1) (x) b)`` as an ``l x m^(k-1)`` array."""
    _check_k(freqs)
    pe = _at(sys, p)
    b = _vec(b, pe.B.shape[1], 'b')
    return demote(pe.C @ right_chain(pe, freqs, b)[-1])


def eval_Hk_left(sys, freqs, p, c):
    """``c^T H_k(s_1..s_k; p)`` as a ``1 x m^k`` array."""
    k = _check_k(freqs)
    pe = _at(sys, p)
    c = _vec(c, pe.C.shape[0], 'c')
    W = pe.solve(freqs[k - 1], (pe.C.T @ c)[:, None], trans=True)
    for j in range(k - 2, -1, -1):
        W = pe.solve(freqs[j], _left_expand(pe.N, W), trans=True)
    return demote((pe.B.T @ W).T.reshape(1, -1))


def eval_Hk_bitangential(sys, freqs, p, b, c):
    """``c^T H_k(s_1..s_k; p) (I_m^(k-1) (x) b)``, an ``m^(k-1)`` vector."""
    _check_k(freqs)
    pe = _at(sys, p)
    b = _vec(b, pe.B.shape[1], 'b')
    c = _vec(c, pe.C.shape[0], 'c')
    return demote(c @ pe.C @ right_chain(pe, freqs, b)[-1])


def freq_derivative(sys, freqs, p, b, c, i):
    """``d/ds_i`` of the bitangential value (``i`` is 1-based)."""
    k = _check_k(freqs)
    if not 1 <= i <= k:
        raise ValueError(f'i must lie in 1..{k}')
    pe = _at(sys, p)
    b = _vec(b, pe.B.shape[1], 'b')
    c = _vec(c, pe.C.shape[0], 'c')
    return demote(c @ pe.C @ right_chain(pe, freqs, b, deriv_at=i)[-1])


def _chain_with_derivatives(pe, freqs, b, second=False):
    """Forward-mode propagation of the right chain.

    Returns ``(vs, dvs, ddvs)``: the chain states, their first derivatives
    ``dvs[j][a]`` with respect to ``p_a`` and, if requested, second
    derivatives ``ddvs[j][(a, c)]`` for ``a <= c``.
    """
    nu = pe.p.size
    pairs = [(a, c) for a in range(nu) for c in range(a, nu)]
    vs, dvs, ddvs = [], [], []
    for j, s in enumerate(freqs):
        if j == 0:
            r = (pe.B @ b)[:, None]
            dr = {a: (pe.d1(a)[3] @ b)[:, None] for a in range(nu)}
            ddr = {ac: (pe.d2(*ac)[3] @ b)[:, None] for ac in pairs} if second else {}
        else:
            w, dw, ddw = vs[-1], dvs[-1], ddvs[-1] if second else None
            r = n_apply(pe.N, w)
            dr = {a: n_apply(pe.d1(a)[2], w) + n_apply(pe.N, dw[a]) for a in range(nu)}
            if second:
                ddr = {}
                for a, c in pairs:
                    ddr[a, c] = (n_apply(pe.d2(a, c)[2], w) + n_apply(pe.d1(a)[2], dw[c])
                                 + n_apply(pe.d1(c)[2], dw[a]) + n_apply(pe.N, ddw[a, c]))
        v = pe.solve(s, r)
        dA = {a: s * pe.d1(a)[0] - pe.d1(a)[1] for a in range(nu)}
        dv = {a: pe.solve(s, dr[a] - dA[a] @ v) for a in range(nu)}
        ddv = {}
        if second:
            for a, c in pairs:
                ddA = s * pe.d2(a, c)[0] - pe.d2(a, c)[1]
                ddv[a, c] = pe.solve(s, ddr[a, c] - ddA @ v - dA[a] @ dv[c] - dA[c] @ dv[a])
        vs.append(v)
        dvs.append(dv)
        ddvs.append(ddv)
    return vs, dvs, ddvs


def param_jacobian(sys, freqs, p, b, c):
    """Parameter Jacobian of the bitangential value, shape ``(m^(k-1), nu)``."""
    _check_k(freqs)
    pe = _at(sys, p)
    b = _vec(b, pe.B.shape[1], 'b')
    c = _vec(c, pe.C.shape[0], 'c')
    vs, dvs, _ = _chain_with_derivatives(pe, freqs, b)
    v, dv = vs[-1], dvs[-1]
    cols = [c @ (pe.d1(a)[4] @ v + pe.C @ dv[a]) for a in range(pe.p.size)]
    return demote(np.stack(cols, axis=-1))


def param_hessian(sys, freqs, p, b, c):
    """Parameter Hessian of the bitangential value, shape ``(m^(k-1), nu, nu)``.

    Computed analytically for every k by second-order forward propagation;
    the result is symmetrized.
    """
    _check_k(freqs)
    pe = _at(sys, p)
    b = _vec(b, pe.B.shape[1], 'b')
    c = _vec(c, pe.C.shape[0], 'c')
    nu = pe.p.size
    vs, dvs, ddvs = _chain_with_derivatives(pe, freqs, b, second=True)
    v, dv, ddv = vs[-1], dvs[-1], ddvs[-1]
    vals = {}
    for a in range(nu):
        for cc in range(a, nu):
            vals[a, cc] = c @ (pe.d2(a, cc)[4] @ v + pe.d1(a)[4] @ dv[cc] + pe.d1(cc)[4] @ dv[a] + pe.C @ ddv[a, cc])
    out = np.zeros((v.shape[1], nu, nu), dtype=np.result_type(*vals.values()))
    for (a, cc), val in vals.items():
        out[:, a, cc] = val
        out[:, cc, a] = val
    return demote(out)


# finite-difference oracles ---------------------------------------------------

def fd_freq_derivative(sys, freqs, p, b, c, i, rel_step=FD_STEP):
    """Central difference of the bitangential value in ``s_i``."""
    freqs = list(freqs)
    s = complex(freqs[i - 1])
    h = rel_step * max(1.0, abs(s))
    plus, minus = list(freqs), list(freqs)
    plus[i - 1], minus[i - 1] = s + h, s - h
    return demote((eval_Hk_bitangential(sys, plus, p, b, c)
                   - eval_Hk_bitangential(sys, minus, p, b, c)) / (2 * h))


def fd_param_jacobian(sys, freqs, p, b, c, rel_step=FD_STEP):
    """Central differences of the bitangential value in each parameter."""
    p = as_param(p, sys.nu)
    hs = rel_step * np.maximum(1.0, np.abs(p))
    cols = []
    for a in range(p.size):
        e = np.zeros_like(p)
        e[a] = hs[a]
        cols.append((eval_Hk_bitangential(sys, freqs, p + e, b, c)
                     - eval_Hk_bitangential(sys, freqs, p - e, b, c)) / (2 * hs[a]))
    return demote(np.stack(cols, axis=-1))


def fd_param_hessian(sys, freqs, p, b, c, rel_step=FD_STEP_HESSIAN):
    """Central differences of :func:`param_jacobian` (nested in ``p``)."""
    p = as_param(p, sys.nu)
    hs = rel_step * np.maximum(1.0, np.abs(p))
    rows = []
    for a in range(p.size):
        e = np.zeros_like(p)
        e[a] = hs[a]
        rows.append((param_jacobian(sys, freqs, p + e, b, c)
                     - param_jacobian(sys, freqs, p - e, b, c)) / (2 * hs[a]))
    H = np.stack(rows, axis=1)
    return demote(0.5 * (H + np.swapaxes(H, 1, 2)))
