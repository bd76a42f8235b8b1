"""Interpolation certificates and parameter sweeps.

:func:`verify` evaluates full and reduced transfer data at the interpolation
points of each spec and marks every condition as *warranted* when the
basis provenance satisfies the hypotheses of the matching interpolation
result:

* right values ``H_k (I (x) b)``: right blocks in ``range(V)``;
* left values ``c^T H_k``: left blocks in ``range(W)``;
* frequency derivatives and parameter Jacobians of ``c^T H_k (I (x) b)``:
  all-orderings blocks on both sides;
* parameter Hessians (``k <= 2``): the above with ``q <= 2`` plus the
  parameter derivatives of the blocks on one side.

A basis of full rank ``n`` warrants everything.  Conditions that are not
warranted are still evaluated and reported.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from pbmor import transfer as tf
from pbmor.simulation import DEFAULT_DT, DEFAULT_T_SPAN, relative_l2_error, simulate_bilinear

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {'value': 1e-8, 'freq': 1e-6, 'jacobian': 1e-5, 'hessian': 1e-4}
REL_FLOOR = 1e-14
MAX_TUPLES = 4096

CONDITIONS = ('value-right', 'value-left', 'freq-derivative', 'jacobian', 'hessian')
_TOL_KEY = {'value-right': 'value', 'value-left': 'value', 'freq-derivative': 'freq',
            'jacobian': 'jacobian', 'hessian': 'hessian'}


def _jsonable(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return np.stack([x.real, x.imag], axis=-1).tolist()
    return x.tolist()


def relative_mismatch(full, reduced, floor=REL_FLOOR):
    full, reduced = np.asarray(full), np.asarray(reduced)
    a = float(np.linalg.norm((full - reduced).ravel()))
    return a, a / max(float(np.linalg.norm(full.ravel())), floor)


@dataclass
class VerificationRecord:
    condition: str
    spec_index: int
    k: int
    shift_indices: list
    shifts: list
    p_hat: list
    full: object
    reduced: object
    abs_mismatch: float
    rel_mismatch: float
    tol: float
    passed: bool
    warranted: bool
    derivative_index: Optional[int] = None
    fd_relative: Optional[float] = None
    note: str = ''

    def line(self):
        mark = 'PASS' if self.passed else 'FAIL'
        w = 'warranted' if self.warranted else 'unwarranted'
        extra = f' i={self.derivative_index}' if self.derivative_index is not None else ''
        return (f'{mark} {self.condition:<15} spec={self.spec_index} k={self.k} '
                f'shifts={self.shift_indices}{extra} rel={self.rel_mismatch:.2e} tol={self.tol:.0e} {w}')


@dataclass
class VerificationReport:
    records: list
    tolerances: dict
    notes: list = field(default_factory=list)

    @property
    def warranted(self):
        return [r for r in self.records if r.warranted]

    @property
    def ok(self):
        """True iff every warranted condition passes."""
        return all(r.passed for r in self.warranted)

    @property
    def exit_code(self):
        return 0 if self.ok else 1

    def select(self, condition=None, warranted=None, spec_index=None, k=None):
        out = self.records
        if condition is not None:
            out = [r for r in out if r.condition == condition]
        if warranted is not None:
            out = [r for r in out if r.warranted == warranted]
        if spec_index is not None:
            out = [r for r in out if r.spec_index == spec_index]
        if k is not None:
            out = [r for r in out if r.k == k]
        return out

    def max_mismatch(self, condition, warranted=None):
        recs = self.select(condition, warranted)
        return max((r.rel_mismatch for r in recs), default=0.0)

    def summary(self):
        lines = [r.line() for r in self.records]
        w = self.warranted
        lines.append(f'{sum(r.passed for r in w)}/{len(w)} warranted conditions pass; '
                     f'{len(self.records) - len(w)} unwarranted evaluated')
        return '\n'.join(lines)

    def to_dict(self):
        recs = []
        for r in self.records:
            d = asdict(r)
            d['full'] = _jsonable(r.full)
            d['reduced'] = _jsonable(r.reduced)
            d['shifts'] = _jsonable(np.asarray(r.shifts, dtype=complex))
            recs.append(d)
        return {'ok': self.ok, 'tolerances': self.tolerances, 'notes': self.notes, 'records': recs}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def _scope(basis, spec_index, spec):
    """Which conditions the basis provenance warrants for one spec."""
    if basis is None:
        return dict.fromkeys(CONDITIONS, False), 'no basis provenance'
    if basis.V.shape[1] == basis.V.shape[0]:
        return dict.fromkeys(CONDITIONS, True), 'full-rank basis'
    hasV = (spec_index, 'V') in basis.v_contents
    hasW = (spec_index, 'W') in basis.w_contents
    hasdV = (spec_index, 'dV') in basis.v_contents
    hasdW = (spec_index, 'dW') in basis.w_contents
    allord = spec.ordering == 'all-orderings'
    both = hasV and hasW and allord
    return {'value-right': hasV, 'value-left': hasW, 'freq-derivative': both, 'jacobian': both,
            'hessian': both and spec.q <= 2 and (hasdV or hasdW)}, ''


def _tuples(spec, k, side):
    q = spec.q
    if spec.ordering == 'all-orderings':
        if q ** k > MAX_TUPLES:
            raise ValueError(f'{q ** k} shift tuples at k = {k} exceed {MAX_TUPLES}')
        return [tuple(t) for t in itertools.product(range(q), repeat=k)]
    if side == 'W':
        return [tuple(range(q - k, q))]
    return [tuple(range(k))]


def _match_spec(basis, spec):
    if basis is None:
        return None
    target = spec.to_dict()
    for i, s in enumerate(basis.specs):
        if s.to_dict() == target:
            return i
    return None


def verify(sys, rsys, specs=None, tolerances=None, conditions=CONDITIONS, fd_check=True, max_k=None):
    """Check the interpolation conditions of every spec.

    Parameters
    ----------
    sys, rsys
        Full and reduced systems.
    specs
        Interpolation specs; defaults to those stored with ``rsys.basis``.
        Specs without matching provenance are evaluated but unwarranted.
    tolerances
        Overrides for the keys ``value``, ``freq``, ``jacobian``, ``hessian``.
    conditions
        Subset of :data:`CONDITIONS` to evaluate.
    fd_check
        Cross-check analytic full-model derivatives by finite differences
        (stored in ``fd_relative``).
    max_k
        Highest subsystem index checked (default ``q`` of each spec).

    Returns
    -------
    VerificationReport
    """
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(tolerances or {})
    basis = getattr(rsys, 'basis', None)
    if specs is None:
        specs = list(getattr(basis, 'specs', []) or [])
    records, notes = [], []
    for si, spec in enumerate(specs):
        spec.validate(sys)
        idx = _match_spec(basis, spec)
        if idx is None:
            scope, note = _scope(None, si, spec)
            if basis is not None and basis.V.shape[1] == basis.V.shape[0]:
                scope, note = _scope(basis, si, spec)
            else:
                notes.append(f'spec {si}: no matching provenance in the basis; conditions unwarranted')
        else:
            scope, note = _scope(basis, idx, spec)
        full_pe = tf.PointEvaluation(sys, spec.p_hat)
        red_pe = tf.PointEvaluation(rsys, spec.p_hat)
        kmax = spec.q if max_k is None else min(max_k, spec.q)

        def add(cond, k, t, full, red, deriv=None, fd=None):
            a, r = relative_mismatch(full, red)
            tol = tols[_TOL_KEY[cond]]
            warranted = scope[cond] and (cond != 'hessian' or k <= 2)
            records.append(VerificationRecord(
                cond, si, k, list(t), [complex(spec.shifts[i]) for i in t], spec.p_hat.tolist(),
                np.asarray(full), np.asarray(red), a, r, tol, bool(r <= tol), bool(warranted), deriv, fd, note))

        for k in range(1, kmax + 1):
            if 'value-right' in conditions:
                for t in _tuples(spec, k, 'V'):
                    fr = [spec.shifts[i] for i in t]
                    add('value-right', k, t, tf.eval_Hk_right(full_pe, fr, None, spec.b),
                        tf.eval_Hk_right(red_pe, fr, None, spec.b))
            if 'value-left' in conditions:
                for t in _tuples(spec, k, 'W'):
                    fr = [spec.shifts[i] for i in t]
                    add('value-left', k, t, tf.eval_Hk_left(full_pe, fr, None, spec.c),
                        tf.eval_Hk_left(red_pe, fr, None, spec.c))
            for t in _tuples(spec, k, 'V'):
                fr = [spec.shifts[i] for i in t]
                if 'freq-derivative' in conditions:
                    for i in range(1, k + 1):
                        f = tf.freq_derivative(full_pe, fr, None, spec.b, spec.c, i)
                        fd = None
                        if fd_check:
                            fd = relative_mismatch(f, tf.fd_freq_derivative(sys, fr, spec.p_hat, spec.b, spec.c, i))[1]
                        add('freq-derivative', k, t, f,
                            tf.freq_derivative(red_pe, fr, None, spec.b, spec.c, i), i, fd)
                if 'jacobian' in conditions:
                    f = tf.param_jacobian(full_pe, fr, None, spec.b, spec.c)
                    fd = None
                    if fd_check:
                        fd = relative_mismatch(f, tf.fd_param_jacobian(sys, fr, spec.p_hat, spec.b, spec.c))[1]
                    add('jacobian', k, t, f, tf.param_jacobian(red_pe, fr, None, spec.b, spec.c), fd=fd)
                if 'hessian' in conditions and k <= 2:
                    f = tf.param_hessian(full_pe, fr, None, spec.b, spec.c)
                    fd = None
                    if fd_check:
                        fd = relative_mismatch(f, tf.fd_param_hessian(sys, fr, spec.p_hat, spec.b, spec.c))[1]
                    add('hessian', k, t, f, tf.param_hessian(red_pe, fr, None, spec.b, spec.c), fd=fd)
    return VerificationReport(records, tols, notes)


# sweeps -------------------------------------------------------------------

@dataclass
class SweepResult:
    params: np.ndarray  # (count, nu)
    input_names: list
    errors: np.ndarray  # (count, n_inputs)
    seed: Optional[int] = None

    def stats(self):
        out = []
        for j, name in enumerate(self.input_names):
            e = self.errors[:, j]
            w = int(np.argmax(e))
            out.append({'input': name, 'max': float(e[w]), 'mean': float(np.mean(e)),
                        'worst_index': w, 'worst_param': self.params[w].tolist()})
        return out

    def to_csv(self, path):
        with open(path, 'w', newline='') as fh:
            wr = csv.writer(fh)
            wr.writerow(['index'] + [f'p{j + 1}' for j in range(self.params.shape[1])] + list(self.input_names))
            for i, (p, e) in enumerate(zip(self.params, self.errors)):
                wr.writerow([i] + [repr(float(v)) for v in p] + [repr(float(v)) for v in e])
        return Path(path)

    def to_dict(self):
        return {'seed': self.seed, 'count': int(self.params.shape[0]), 'stats': self.stats()}


def linear_points(lo, hi, count):
    """``count`` equispaced scalar parameters on ``[lo, hi]`` as a column."""
    return np.linspace(lo, hi, count)[:, None]


def random_points(lo, hi, count, seed=0, fix=None, log_axes=()):
    """Uniform draws in a box from ``numpy.random.default_rng(seed)``.

    Axes listed in ``log_axes`` are drawn uniformly in ``ln``; ``lo``/``hi``
    are then bounds on the logarithm.  ``fix`` maps axis index to a value.
    """
    rng = np.random.default_rng(seed)
    lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
    P = lo + (hi - lo) * rng.random((count, lo.size))
    for j in log_axes:
        P[:, j] = np.exp(P[:, j])
    for j, v in (fix or {}).items():
        P[:, j] = v
    return P


def sweep(sys, rsys, params, inputs, t_span=DEFAULT_T_SPAN, dt=DEFAULT_DT, workers=None, seed=None):
    """Relative L2 output error of ``rsys`` against ``sys`` at many parameters.

    Points are simulated concurrently; results are collected in input order
    so the table does not depend on completion order.

    Parameters
    ----------
    params
        ``(count, nu)`` parameter points (a 1-D array is read as ``nu = 1``).
    inputs
        Sequence of :class:`~pbmor.simulation.InputSignal`.
    seed
        Recorded in the result when the points were drawn at random.
    """
    P = np.asarray(params, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    inputs = list(inputs)

    def one(p):
        row = []
        for u in inputs:
            yf = simulate_bilinear(sys, p, u, t_span, dt)
            yr = simulate_bilinear(rsys, p, u, t_span, dt)
            row.append(relative_l2_error(yf.y, yr.y, yf.t))
        return row

    with ThreadPoolExecutor(max_workers=workers) as ex:
        rows = list(ex.map(one, P))
    names = [u.label or f'input{j + 1}' for j, u in enumerate(inputs)]
    res = SweepResult(P, names, np.asarray(rows, dtype=float), seed)
    for s in res.stats():
        logger.info('sweep %s: max %.3e mean %.3e at p = %s', s['input'], s['max'], s['mean'], s['worst_param'])
    return res
