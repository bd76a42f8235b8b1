"""Fixed-step time integration of bilinear systems and of the nonlinear RC ladder.

The scheme is IMEX Euler: the linear term is implicit (backward Euler),
bilinear and input terms are explicit at the step start,

    (E - dt A) x_{k+1} = E x_k + dt (sum_j N_j x_k u_j(t_k) + B u(t_k)).

It is first order in ``dt``.  The factorization of ``E - dt A`` is cached
per (system, parameter, dt).
"""

from __future__ import annotations

import csv
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sp
import scipy.sparse.linalg as spla_sparse
from scipy.integrate import trapezoid

from pbmor import config
from pbmor.benchmarks import rc_A1, rc_f
from pbmor.errors import SingularMassError
from pbmor.kron import lu_rcond
from pbmor.system import as_param

logger = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
#: state magnitude treated as blow-up by the integrators
DIVERGENCE_BOUND = 1e100
DEFAULT_T_SPAN = (0.0, 5.0)


class InputSignal:
    """``m`` scalar input functions of time.

    Parameters
    ----------
    functions
        Callables ``t -> float``; one per input.
    names
        Optional labels used in CSV headers.
    horizon
        Interval on which the signal is defined (``None`` means everywhere).
    label
        Short name of the whole signal, used in sweep tables.
    """

    def __init__(self, functions: Sequence[Callable], names=None, horizon=None, label=''):
        self.functions = list(functions)
        self.label = label
        self.names = list(names) if names is not None else [f'u_{j + 1}' for j in range(len(self.functions))]
        self.horizon = horizon

    @property
    def m(self):
        return len(self.functions)

    def __call__(self, t):
        return np.array([f(t) for f in self.functions], dtype=float)

    def sample(self, t):
        """Values on a time grid, shape ``(len(t), m)``."""
        t = np.asarray(t, dtype=float)
        if self.horizon is not None:
            lo, hi = self.horizon
            if t[0] < lo - 1e-12 or t[-1] > hi + 1e-12:
                raise ValueError(f'input defined on [{lo}, {hi}] but grid spans [{t[0]}, {t[-1]}]')
        return np.column_stack([np.vectorize(f, otypes=[float])(t) for f in self.functions])

    @classmethod
    def exp_decay(cls, m=1, rate=1.0):
        """``u_j(t) = exp(-rate t)`` on every input."""
        return cls([lambda t: np.exp(-rate * t)] * m, label='exp-decay')

    @classmethod
    def cosine(cls, m=1, freq=5 * np.pi):
        """``u_j(t) = (cos(freq t) + 1) / 2`` on every input."""
        return cls([lambda t: 0.5 * (np.cos(freq * t) + 1.0)] * m, label='cosine')

    @classmethod
    def constant(cls, values):
        values = np.atleast_1d(values).astype(float)
        return cls([lambda t, v=v: v for v in values])

    @classmethod
    def from_samples(cls, t, U):
        """Linear interpolation of sampled trajectories ``U`` (``len(t) x m``)."""
        t = np.asarray(t, dtype=float)
        U = np.asarray(U, dtype=float).reshape(t.size, -1)
        if np.any(np.diff(t) <= 0):
            raise ValueError('sample times must be strictly increasing')
        fns = [lambda s, col=U[:, j]: np.interp(s, t, col) for j in range(U.shape[1])]
        return cls(fns, horizon=(t[0], t[-1]), label='file')

    @classmethod
    def from_file(cls, path):
        """CSV with a header; first column time, remaining columns inputs."""
        data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
        return cls.from_samples(data[:, 0], data[:, 1:])

    @classmethod
    def named(cls, kind, m=1, path=None):
        if kind == 'exp-decay':
            return cls.exp_decay(m)
        if kind == 'cosine':
            return cls.cosine(m)
        if kind == 'file':
            if path is None:
                raise ValueError('file input needs a path')
            sig = cls.from_file(path)
            if sig.m != m:
                raise ValueError(f'input file has {sig.m} columns, system has {m} inputs')
            return sig
        raise ValueError(f'unknown input kind {kind!r}')


@dataclass
class SimulationResult:
    t: np.ndarray
    y: np.ndarray  # (T, l)
    u: np.ndarray  # (T, m)
    x: Optional[np.ndarray] = None  # (T, n) if requested
    diverged: bool = False

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError('time grid must be strictly increasing')
        if self.y.shape[0] != self.t.size:
            raise ValueError('output length does not match the time grid')

    def to_csv(self, path):
        """Columns ``t, u_1..u_m, y_1..y_l``."""
        header = ['t'] + [f'u_{j + 1}' for j in range(self.u.shape[1])] + [f'y_{i + 1}' for i in range(self.y.shape[1])]
        with open(path, 'w', newline='') as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in np.column_stack([self.t, self.u, self.y]):
                w.writerow([repr(float(v)) for v in row])
        return Path(path)


def time_grid(t_span, dt):
    t0, t1 = map(float, t_span)
    if dt <= 0 or t1 <= t0:
        raise ValueError('need dt > 0 and t_end > t_start')
    steps = int(round((t1 - t0) / dt))
    if steps < 1 or abs(steps * dt - (t1 - t0)) > 1e-9 * max(1.0, t1 - t0):
        raise ValueError(f'horizon {t1 - t0} is not a multiple of dt = {dt}')
    return t0 + dt * np.arange(steps + 1)


class _Stepper:
    """Cached ``E - dt A`` factorization plus the explicit-side matrices."""

    def __init__(self, mats, dt):
        E, A = mats['E'], mats['A']
        n = A.shape[0]
        mats_all = [E, A] + list(mats['N'])
        density = max(np.count_nonzero(M) for M in mats_all) / float(n * n)
        self.sparse = n >= config.SPARSE_MIN_SIZE and density <= config.SPARSE_MAX_DENSITY
        K = E - dt * A
        if self.sparse:
            self.E = sp.csr_matrix(E)
            self.N = [sp.csr_matrix(Nj) for Nj in mats['N'] if np.any(Nj)]
            self.N_index = [j for j, Nj in enumerate(mats['N']) if np.any(Nj)]
            try:
                self.lu = spla_sparse.splu(sp.csc_matrix(K))
            except RuntimeError as exc:
                raise SingularMassError(f'E - dt A is singular: {exc}') from exc
            self._solve = self.lu.solve
        else:
            self.E = E
            self.N_index = [j for j, Nj in enumerate(mats['N']) if np.any(Nj)]
            self.N = [mats['N'][j] for j in self.N_index]
            lu, piv, rc = lu_rcond(K)
            if rc < config.RCOND_TOL:
                raise SingularMassError(f'E - dt A is singular (rcond {rc:.2e})')
            self._solve = lambda r: spla.lu_solve((lu, piv), r, check_finite=False)
        self.B, self.C, self.dt = mats['B'], mats['C'], dt

    def run(self, x0, U, store_states=False):
        T = U.shape[0]
        x = x0.astype(float, copy=True)
        Y = np.empty((T, self.C.shape[0]))
        X = np.empty((T, x.size)) if store_states else None
        dt = self.dt
        BU = dt * (U @ self.B.T)
        for k in range(T):
            Y[k] = self.C @ x
            if store_states:
                X[k] = x
            if k == T - 1:
                break
            rhs = self.E @ x + BU[k]
            for j, Nj in zip(self.N_index, self.N):
                if U[k, j] != 0.0:
                    rhs = rhs + (dt * U[k, j]) * (Nj @ x)
            x = self._solve(rhs)
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_BOUND:
                Y[k + 1:] = np.inf
                logger.warning('simulation diverged at step %d of %d', k + 1, T - 1)
                return Y, X, True
        return Y, X, False


_cache = {}
_cache_lock = threading.Lock()
_CACHE_SIZE = 16


def _stepper(sys, p, dt):
    key = (id(sys), tuple(p), float(dt))
    with _cache_lock:
        hit = _cache.get(key)
    if hit is not None and hit[0] is sys:
        return hit[1]
    st = _Stepper(sys.evaluate(p), dt)
    with _cache_lock:
        if len(_cache) >= _CACHE_SIZE:
            _cache.pop(next(iter(_cache)))
        _cache[key] = (sys, st)
    return st


def simulate_bilinear(sys, p, u: InputSignal, t_span=DEFAULT_T_SPAN, dt=DEFAULT_DT, x0=None,
                      store_states=False):
    """Integrate a full or reduced bilinear system with the IMEX Euler scheme.

    Parameters
    ----------
    sys
        :class:`~pbmor.system.BilinearSystem` (or a reduced one).
    p
        Parameter point.
    u
        :class:`InputSignal` with ``sys.m`` inputs.
    t_span, dt
        Horizon and fixed step; the horizon must be a multiple of ``dt``.
    x0
        Initial state, zero by default.

    Returns
    -------
    SimulationResult
    """
    p = as_param(p, sys.nu)
    if u.m != sys.m:
        raise ValueError(f'input has {u.m} channels, system has {sys.m}')
    t = time_grid(t_span, dt)
    U = u.sample(t)
    x0 = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    Y, X, diverged = _stepper(sys, p, dt).run(x0, U, store_states)
    return SimulationResult(t, Y, U, X, diverged)


def richardson_check(sys, p, u, t_span=DEFAULT_T_SPAN, dt=DEFAULT_DT, x0=None):
    """Error estimate from a half-step rerun.

    For a first-order method ``y_dt - y_{dt/2}`` estimates the error of the
    half-step solution.  Returns ``(estimate, extrapolated)`` where
    ``estimate`` is the relative L2 size of that difference and
    ``extrapolated = 2 y_{dt/2} - y_dt`` on the coarse grid.
    """
    coarse = simulate_bilinear(sys, p, u, t_span, dt, x0)
    fine = simulate_bilinear(sys, p, u, t_span, dt / 2, x0)
    yf = fine.y[::2]
    return relative_l2_error(yf, coarse.y, coarse.t), SimulationResult(coarse.t, 2 * yf - coarse.y, coarse.u)


def simulate_rc_nonlinear(N, p, u: InputSignal, t_span=DEFAULT_T_SPAN, dt=DEFAULT_DT, v0=None):
    """Integrate the nonlinear RC ladder ``v' = f(v; p) + e_1 u``, ``y = v_1``.

    The linearization ``A_1(p) v`` is stepped implicitly and the remainder
    ``f(v; p) - A_1(p) v`` explicitly, matching :func:`simulate_bilinear`.
    """
    p = float(np.atleast_1d(p)[0])
    t = time_grid(t_span, dt)
    U = u.sample(t)[:, 0]
    A1 = rc_A1(N, p)
    lu = spla.lu_factor(np.eye(N) - dt * A1)
    v = np.zeros(N) if v0 is None else np.asarray(v0, dtype=float).copy()
    Y = np.empty((t.size, 1))
    for k in range(t.size):
        Y[k, 0] = v[0]
        if k == t.size - 1:
            break
        rhs = v + dt * (rc_f(v, p) - A1 @ v)
        rhs[0] += dt * U[k]
        v = spla.lu_solve(lu, rhs, check_finite=False)
    return SimulationResult(t, Y, U[:, None])


def relative_l2_error(y_ref, y_test, t=None):
    """``||y_ref - y_test|| / ||y_ref||`` in L2 over the grid (trapezoid rule).

    Multiple outputs are combined as ``sqrt(int sum_i |y_i|^2 dt)``.  Returns
    ``inf`` for a zero reference with nonzero difference and 0 if both vanish.
    """
    y_ref = np.asarray(y_ref, dtype=float).reshape(len(y_ref), -1)
    y_test = np.asarray(y_test, dtype=float).reshape(len(y_test), -1)
    if y_ref.shape != y_test.shape:
        raise ValueError(f'shape mismatch {y_ref.shape} vs {y_test.shape}')
    x = np.arange(y_ref.shape[0], dtype=float) if t is None else np.asarray(t, dtype=float)
    if not (np.all(np.isfinite(y_ref)) and np.all(np.isfinite(y_test))):
        return np.inf
    with np.errstate(over='ignore'):
        num = np.sqrt(trapezoid(np.sum((y_ref - y_test) ** 2, axis=1), x))
        den = np.sqrt(trapezoid(np.sum(y_ref ** 2, axis=1), x))
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return float(num / den)
