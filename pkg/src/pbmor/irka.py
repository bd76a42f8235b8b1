"""Frequency shifts from IRKA on the linearized model at a fixed parameter."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from pbmor.basis import InterpolationSpec, orth_truncate, realify_columns
from pbmor.errors import DegenerateBasisError, ShiftAtEigenvalueError
from pbmor.kron import ShiftedSolver
from pbmor.system import as_param

logger = logging.getLogger(__name__)


@dataclass
class IrkaResult:
    shifts: np.ndarray
    b: np.ndarray  # (r, m)
    c: np.ndarray  # (r, l)
    converged: bool
    iterations: int
    p_hat: np.ndarray
    history: list = field(default_factory=list)

    def specs(self, ordering='sequential'):
        """One single-shift :class:`InterpolationSpec` per shift."""
        return [InterpolationSpec([s], bi, ci, self.p_hat, ordering=ordering)
                for s, bi, ci in zip(self.shifts, self.b, self.c)]


def _solver(E, A, s):
    try:
        return ShiftedSolver(E, A, s), s
    except ShiftAtEigenvalueError:
        s2 = s * (1 + 1e-8) if s != 0 else 1e-8
        logger.info('shift %s hits the spectrum, retrying with %s', s, s2)
        return ShiftedSolver(E, A, s2), s2


def _clean_real(vals, tol=1e-10):
    vals = np.array(vals, dtype=complex)
    small = np.abs(vals.imag) <= tol * np.abs(vals)
    vals[small] = vals[small].real
    return vals


def _order(shifts):
    return np.lexsort((shifts.imag, shifts.real))


def initial_shifts(E, A, r):
    """``r`` log-spaced real shifts over ``[1e-2, 1e2]`` times a spectral scale."""
    scale = np.linalg.norm(A, 1) / max(np.linalg.norm(E, 1), 1e-300)
    if r == 1:
        return np.array([scale], dtype=complex)
    return scale * np.logspace(-2, 2, r).astype(complex)


def irka_linear(sys, p_hat, r, init_shifts=None, max_iter=100, tol=1e-6, realify=True):
    """Tangential IRKA for the linear part ``(E, A, B, C)`` of ``sys`` at ``p_hat``.

    Each sweep builds rational Krylov bases at the current shifts and
    directions, projects, and replaces the shifts by the mirrored reduced
    poles and the directions by the reduced residue directions.  Iteration
    stops once the largest relative shift movement drops below ``tol``.

    Returns an :class:`IrkaResult`; ``converged`` is ``False`` if
    ``max_iter`` sweeps were not enough (the last iterate is returned).
    """
    p_hat = as_param(p_hat, sys.nu)
    mats = sys.evaluate(p_hat)
    E, A, B, C = mats['E'], mats['A'], mats['B'], mats['C']
    n, m, l = sys.n, sys.m, sys.l
    if r < 1 or r > n:
        raise ValueError(f'reduced order r = {r} must lie in 1..{n}')
    if n <= 2000:
        ev = spla.eigvals(A, E)
        if np.any(ev.real >= 0):
            warnings.warn(f'linearized model at p = {p_hat} has eigenvalues with nonnegative real part',
                          stacklevel=2)
    real_sys = not any(np.iscomplexobj(X) for X in (E, A, B, C))
    sigma = np.asarray(init_shifts, dtype=complex) if init_shifts is not None else initial_shifts(E, A, r)
    if sigma.size != r:
        raise ValueError(f'{sigma.size} initial shifts for r = {r}')
    bdir = np.ones((r, m), dtype=complex)
    cdir = np.ones((r, l), dtype=complex)
    history = [sigma.copy()]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Vc, Wc = [], []
        for i, s in enumerate(sigma):
            sol, s_used = _solver(E, A, s)
            sigma[i] = s_used
            Vc.append(sol.solve(B @ bdir[i]))
            Wc.append(sol.solve(C.T @ cdir[i], trans=True))
        V = np.column_stack(Vc)
        W = np.column_stack(Wc)
        if realify and real_sys:
            V, W = realify_columns(V), realify_columns(W)
        V = orth_truncate(V, 1e-12)[0]
        W = orth_truncate(W, 1e-12)[0]
        if V.shape[1] != r or W.shape[1] != r:
            raise DegenerateBasisError(f'IRKA bases lost rank ({V.shape[1]}, {W.shape[1]} < {r})')
        Er, Ar = W.T @ E @ V, W.T @ A @ V
        Br, Cr = W.T @ B, C @ V
        lam, Yl, Xr = spla.eig(Ar, Er, left=True, right=True)
        lam = _clean_real(lam)
        scal = np.einsum('ij,ij->j', Yl.conj(), Er @ Xr)
        new_b = (Yl.conj().T @ Br) / scal[:, None]
        new_c = (Cr @ Xr).T
        new_sigma = -lam
        o_new, o_old = _order(new_sigma), _order(sigma)
        change = np.max(np.abs(new_sigma[o_new] - sigma[o_old]) / np.maximum(np.abs(new_sigma[o_new]), 1e-300))
        sigma, bdir, cdir = new_sigma, new_b, new_c
        history.append(sigma.copy())
        logger.debug('IRKA sweep %d: shift change %.3e', it, change)
        if change < tol:
            converged = True
            break
    o = _order(sigma)
    sigma, bdir, cdir = sigma[o], bdir[o], cdir[o]
    if real_sys:
        real = sigma.imag == 0
        bdir[real] = bdir[real].real
        cdir[real] = cdir[real].real
    return IrkaResult(sigma, bdir, cdir, converged, it, p_hat, history)


def irka_specs(sys, p_hats, r, shared=False, ordering='all-orderings', hessian='none', **kwargs):
    """Interpolation specs with IRKA shifts, one spec per parameter sample.

    Each spec takes the shifts and the first pair of tangential directions of
    the IRKA run.  With ``shared=False`` (the default) IRKA runs at every
    sample; with ``shared=True`` it runs once at the first sample and the
    result is reused at the others.

    Returns
    -------
    (list of InterpolationSpec, list of IrkaResult)
    """
    specs, runs = [], []
    for i, ph in enumerate(p_hats):
        if i == 0 or not shared:
            res = irka_linear(sys, ph, r, **kwargs)
            if not res.converged:
                logger.warning('IRKA did not converge at p = %s after %d sweeps', res.p_hat, res.iterations)
            runs.append(res)
        res = runs[-1]
        specs.append(InterpolationSpec(res.shifts, res.b[0], res.c[0], ph, ordering=ordering, hessian=hessian,
                                       label=f'irka r={r} at p={res.p_hat.tolist()}'))
    return specs, runs
