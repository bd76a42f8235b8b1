"""Interpolatory projection bases for parametric bilinear systems.

For interpolation data (shifts, tangential directions ``b``/``c`` and a
parameter sample ``p_hat``) the right blocks are

    V_1 = R(s_1) B b,        V_k = R(s_k) N (I_m (x) V_{k-1}),

and the left blocks

    W_1 = R(s_q)^{-T} C^T c,  W_k = R(s_{q+1-k})^{-T} Nbar^T (I_m (x) W_{k-1}),

with ``R(s) = (s E(p_hat) - A(p_hat))^{-1}``.  In the all-orderings variant
every level uses every shift, so the subspaces contain the chain vectors for
all shift tuples including repetitions.  Hessian enrichment appends the
parameter derivatives of the blocks.  :func:`assemble_global` merges blocks
from several samples into one orthonormal (and optionally real) pair.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pbmor import config
from pbmor.errors import EmptyBasisError, InstanceTooLargeError
from pbmor.kron import demote
from pbmor.system import as_param
from pbmor.transfer import PointEvaluation, n_apply, nbar_t_apply

ORDERINGS = ('sequential', 'all-orderings')
ENRICHMENTS = ('none', 'on-V', 'on-W')


def _complex_from_json(x):
    if isinstance(x, (list, tuple)):
        return complex(x[0], x[1])
    return complex(x)


def _complex_to_json(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


@dataclass
class InterpolationSpec:
    """Interpolation data for one parameter sample.

    Attributes
    ----------
    shifts
        Frequency shifts ``sigma_1..sigma_q``.
    b, c
        Right (length m) and left (length l) tangential directions.
    p_hat
        Parameter sample.
    ordering
        ``'sequential'`` (shift order as given) or ``'all-orderings'``.
    hessian
        ``'none'``, ``'on-V'`` or ``'on-W'``.
    """

    shifts: list
    b: np.ndarray
    c: np.ndarray
    p_hat: np.ndarray
    ordering: str = 'all-orderings'
    hessian: str = 'none'
    label: str = ''

    def __post_init__(self):
        self.shifts = [complex(s) for s in np.atleast_1d(self.shifts)]
        self.b = np.atleast_1d(np.asarray(self.b)).ravel()
        self.c = np.atleast_1d(np.asarray(self.c)).ravel()
        self.p_hat = as_param(self.p_hat)
        if not self.shifts:
            raise ValueError('at least one shift is required')
        if not np.any(self.b) or not np.any(self.c):
            raise ValueError('tangential directions b and c must be nonzero')
        if self.ordering not in ORDERINGS:
            raise ValueError(f'ordering must be one of {ORDERINGS}')
        if self.hessian not in ENRICHMENTS:
            raise ValueError(f'hessian must be one of {ENRICHMENTS}')

    @property
    def q(self):
        return len(self.shifts)

    def validate(self, sys):
        if self.b.size != sys.m or self.c.size != sys.l or self.p_hat.size != sys.nu:
            raise ValueError(f'spec dimensions (b {self.b.size}, c {self.c.size}, p {self.p_hat.size}) '
                             f'do not match system (m {sys.m}, l {sys.l}, nu {sys.nu})')

    def to_dict(self):
        return {'shifts': [_complex_to_json(s) for s in self.shifts],
                'b': [_complex_to_json(x) for x in self.b],
                'c': [_complex_to_json(x) for x in self.c],
                'p_hat': self.p_hat.tolist(), 'ordering': self.ordering,
                'hessian': self.hessian, 'label': self.label}

    @classmethod
    def from_dict(cls, d):
        return cls(shifts=[_complex_from_json(s) for s in d['shifts']],
                   b=demote(np.array([_complex_from_json(x) for x in d['b']])),
                   c=demote(np.array([_complex_from_json(x) for x in d['c']])),
                   p_hat=d['p_hat'], ordering=d.get('ordering', 'all-orderings'),
                   hessian=d.get('hessian', 'none'), label=d.get('label', ''))


@dataclass
class BasisBlock:
    """Columns of one subspace level with a provenance record per column.

    ``kind`` is one of ``'V'``, ``'W'`` (interpolation blocks) or ``'dV'``,
    ``'dW'`` (parameter-derivative enrichment).
    """

    kind: str
    k: int
    matrix: np.ndarray
    records: list
    spec_index: int = 0

    @property
    def side(self):
        return self.kind[-1]


def _level_shifts(spec, side, k):
    """Indices of the shifts used at level ``k`` (1-based)."""
    if spec.ordering == 'all-orderings':
        return list(range(spec.q))
    return [k - 1] if side == 'V' else [spec.q - k]


def _recursion(sys, spec, side, spec_index=0, derivatives=False, pe=None):
    """Run the V or W block recursion, optionally with p-derivatives."""
    spec.validate(sys)
    pe = pe or PointEvaluation(sys, spec.p_hat)
    trans = side == 'W'
    expand = nbar_t_apply if trans else n_apply
    start = pe.C.T @ spec.c if trans else pe.B @ spec.b
    nu = pe.p.size
    construction = 'all-orderings' if spec.ordering == 'all-orderings' else 'sequential'
    convention = 'forward' if (side == 'V' or spec.ordering == 'all-orderings') else 'reversed'

    def pencil_d(s, j):
        dE, dA = pe.d1(j)[0], pe.d1(j)[1]
        M = s * dE - dA
        return M.T if trans else M

    blocks, dblocks = [], []
    prev, dprev, prev_rec = None, None, None
    width = 0
    for k in range(1, spec.q + 1):
        idx = _level_shifts(spec, side, k)
        if prev is None:
            R = start[:, None]
            dR = {}
            if derivatives:
                for j in range(nu):
                    dR[j] = ((pe.d1(j)[4].T @ spec.c) if trans else (pe.d1(j)[3] @ spec.b))[:, None]
            base_rec = [((), ())]
        else:
            R = expand(pe.N, prev)
            dR = {}
            if derivatives:
                dN = {j: pe.d1(j)[2] for j in range(nu)}
                for j in range(nu):
                    dR[j] = expand(dN[j], prev) + expand(pe.N, dprev[j])
            base_rec = [(t, path + (inp,)) for inp in range(sys.m) for (t, path) in prev_rec]
        width = len(idx) * R.shape[1]
        if width > config.MAX_BASIS_COLUMNS:
            raise InstanceTooLargeError(f'level {k} would have {width} columns (cap {config.MAX_BASIS_COLUMNS})')
        cols, dcols, recs = [], {j: [] for j in range(nu)}, []
        for i in idx:
            s = spec.shifts[i]
            X = pe.solve(s, R, trans=trans)
            cols.append(X)
            if derivatives:
                for j in range(nu):
                    dcols[j].append(pe.solve(s, dR[j] - pencil_d(s, j) @ X, trans=trans))
            for t, path in base_rec:
                recs.append(((i,) + t if trans else t + (i,), path))
        prev = np.hstack(cols)
        prev_rec = recs
        if derivatives:
            dprev = {j: np.hstack(dcols[j]) for j in range(nu)}

        def record(t, path, deriv=None):
            return {'spec_index': spec_index, 'side': side, 'construction': construction, 'k': k,
                    'shift_indices': list(t), 'shifts': [_complex_to_json(spec.shifts[i]) for i in t],
                    'input_path': list(path), 'derivative': deriv, 'convention': convention}

        blocks.append(BasisBlock(side, k, prev, [record(t, path) for t, path in recs], spec_index))
        if derivatives:
            for j in range(nu):
                dblocks.append(BasisBlock('d' + side, k, dprev[j],
                                          [record(t, path, j) for t, path in recs], spec_index))
    return blocks, dblocks


def _force(spec, ordering):
    d = spec.to_dict()
    d['ordering'] = ordering
    return InterpolationSpec.from_dict(d)


def build_V_sequential(sys, spec, spec_index=0):
    """Right blocks ``V_1..V_q`` for the shifts in the given order."""
    return _recursion(sys, _force(spec, 'sequential'), 'V', spec_index)[0]


def build_W_sequential(sys, spec, spec_index=0):
    """Left blocks ``W_1..W_q``; level k uses shift ``sigma_{q+1-k}``."""
    return _recursion(sys, _force(spec, 'sequential'), 'W', spec_index)[0]


def build_all_orderings(sys, spec, spec_index=0):
    """Right and left blocks over every shift at every level.

    Returns
    -------
    (list of BasisBlock, list of BasisBlock)
        The ``V`` and ``W`` blocks; level k has ``q (q m)^(k-1)`` columns.
    """
    spec = _force(spec, 'all-orderings')
    pe = PointEvaluation(sys, spec.p_hat)
    return (_recursion(sys, spec, 'V', spec_index, pe=pe)[0],
            _recursion(sys, spec, 'W', spec_index, pe=pe)[0])


def build_hessian_enrichment(sys, spec, spec_index=0, side=None):
    """Parameter derivatives of the V (or W) blocks at ``p_hat``.

    One block per level and parameter.  Hessian matching is established for
    ``q <= 2``; larger ``q`` triggers a warning and the columns are still
    produced.
    """
    side = side or ('W' if spec.hessian == 'on-W' else 'V')
    if spec.q > 2:
        warnings.warn(f'Hessian enrichment is only established for q <= 2 (got q = {spec.q})', stacklevel=2)
    return _recursion(sys, spec, side, spec_index, derivatives=True)[1]


def build_blocks(sys, specs):
    """All blocks requested by a list of specs, in spec order."""
    out = []
    for i, spec in enumerate(specs):
        pe = PointEvaluation(sys, spec.p_hat)
        for side in ('V', 'W'):
            enrich = spec.hessian == f'on-{side}'
            blocks, dblocks = _recursion(sys, spec, side, i, derivatives=enrich, pe=pe)
            out.extend(blocks)
            out.extend(dblocks)
    return out


@dataclass
class ReductionBasis:
    """A finalized projection pair with provenance.

    Attributes
    ----------
    V, W
        ``n x r`` matrices with orthonormal columns.
    specs
        Interpolation specs whose blocks were used.
    v_contents, w_contents
        Sets of ``(spec_index, kind)`` pairs whose columns lie in the range
        of ``V`` and ``W``.
    records_V, records_W
        Per-column provenance of the uncompressed input columns.
    truncation
        Discarded singular values and rank bookkeeping.
    """

    V: np.ndarray
    W: np.ndarray
    specs: list = field(default_factory=list)
    v_contents: set = field(default_factory=set)
    w_contents: set = field(default_factory=set)
    records_V: list = field(default_factory=list)
    records_W: list = field(default_factory=list)
    truncation: dict = field(default_factory=dict)
    one_sided: bool = False

    @property
    def r(self):
        return self.V.shape[1]

    @property
    def n(self):
        return self.V.shape[0]

    @classmethod
    def identity(cls, n):
        I = np.eye(n)
        return cls(I, I.copy(), truncation={'note': 'identity'})

    def to_dict(self):
        return {'r': self.r, 'n': self.n, 'one_sided': self.one_sided,
                'specs': [s.to_dict() for s in self.specs],
                'v_contents': sorted(map(list, self.v_contents)),
                'w_contents': sorted(map(list, self.w_contents)),
                'records_V': self.records_V, 'records_W': self.records_W,
                'truncation': self.truncation}


def realify_columns(X, tol=None):
    """Replace complex columns by their real and imaginary parts."""
    X = np.asarray(X)
    if not np.iscomplexobj(X):
        return X
    tol = config.IMAG_TOL if tol is None else tol
    out = []
    for x in X.T:
        if np.max(np.abs(x.imag)) <= tol * max(np.max(np.abs(x)), 1e-300):
            out.append(x.real)
        else:
            out.extend([x.real, x.imag])
    return np.column_stack(out) if out else np.zeros((X.shape[0], 0))


def orth_truncate(X, trunc_tol):
    """Orthonormal basis of ``range(X)`` keeping singular values above ``trunc_tol * s_max``.

    Columns are normalized first so that the cut does not depend on their
    scaling.
    """
    if X.shape[1] == 0:
        return X, np.array([]), np.array([])
    norms = np.linalg.norm(X, axis=0)
    keep = norms > 0
    Xn = X[:, keep] / norms[keep]
    if Xn.shape[1] == 0:
        return X[:, :0], np.array([]), np.array([])
    U, s, _ = np.linalg.svd(Xn, full_matrices=False)
    r = int(np.sum(s > trunc_tol * s[0]))
    return U[:, :r], s[:r], s[r:]


def _pad(Q, other, need, trunc_tol):
    """Extend ``Q`` by ``need`` orthonormal directions taken from ``range(other)``."""
    P = other - Q @ (Q.conj().T @ other)
    P = P - Q @ (Q.conj().T @ P)
    U, s, _ = np.linalg.svd(P, full_matrices=False)
    ok = int(np.sum(s > max(trunc_tol, 1e-12) * max(np.linalg.norm(other, 2), 1e-300)))
    take = min(ok, need)
    return np.hstack([Q, U[:, :take]]), take


def assemble_global(blocks, realify=True, trunc_tol=1e-10, one_sided=False, equalize='pad', specs=None):
    """Combine blocks from one or more specs into a :class:`ReductionBasis`.

    Parameters
    ----------
    blocks
        :class:`BasisBlock` objects, or bare ``(kind, matrix)`` pairs.
    realify
        Split complex columns into real and imaginary parts.
    trunc_tol
        Relative singular value cutoff of the SVD truncation.
    one_sided
        Use the span of all blocks for both ``V`` and ``W``.
    equalize
        How to reconcile different ranks of ``V`` and ``W``: ``'pad'``
        extends the smaller basis with directions from the larger one (this
        keeps every subspace inclusion); ``'cut'`` drops trailing singular
        directions of the larger one.
    specs
        The specs the blocks came from, stored for verification.
    """
    blocks = [b if isinstance(b, BasisBlock) else BasisBlock(b[0], 0, np.asarray(b[1]), []) for b in blocks]
    if not blocks:
        raise EmptyBasisError('no blocks given')
    n = blocks[0].matrix.shape[0]
    if any(b.matrix.shape[0] != n for b in blocks):
        raise ValueError('all blocks must have the same number of rows')

    def gather(side_blocks):
        mats = [np.atleast_2d(b.matrix.reshape(n, -1)) for b in side_blocks]
        X = np.hstack(mats) if mats else np.zeros((n, 0))
        recs = [r for b in side_blocks for r in b.records]
        return (realify_columns(X) if realify else X), recs

    vb = [b for b in blocks if b.side == 'V']
    wb = [b for b in blocks if b.side == 'W']
    report = {'trunc_tol': trunc_tol, 'realify': realify, 'equalize': equalize}
    if one_sided:
        X, recs = gather(blocks)
        V, kept, dropped = orth_truncate(X, trunc_tol)
        if V.shape[1] == 0:
            raise EmptyBasisError('all columns degenerate after truncation')
        W = V
        contents = {(b.spec_index, b.kind) for b in blocks}
        report.update(columns=X.shape[1], rank=V.shape[1], kept=kept.tolist(), discarded=dropped.tolist())
        return ReductionBasis(V, W.copy(), list(specs or []), contents, set(contents), recs, recs,
                              report, one_sided=True)

    XV, recV = gather(vb)
    XW, recW = gather(wb)
    V, kV, dV = orth_truncate(XV, trunc_tol)
    W, kW, dW = orth_truncate(XW, trunc_tol)
    if V.shape[1] == 0 and W.shape[1] == 0:
        raise EmptyBasisError('all columns degenerate after truncation')
    report.update(columns_V=XV.shape[1], columns_W=XW.shape[1], rank_V=V.shape[1], rank_W=W.shape[1],
                  discarded_V=dV.tolist(), discarded_W=dW.tolist())
    v_contents = {(b.spec_index, b.kind) for b in vb}
    w_contents = {(b.spec_index, b.kind) for b in wb}
    rv, rw = V.shape[1], W.shape[1]
    if rv != rw:
        if equalize == 'pad':
            if rv < rw:
                V, added = _pad(V, W, rw - rv, trunc_tol)
                report['padded_V'] = added
            else:
                W, added = _pad(W, V, rv - rw, trunc_tol)
                report['padded_W'] = added
        r = min(V.shape[1], W.shape[1])
        if V.shape[1] != W.shape[1]:
            report['cut_to'] = r
            if V.shape[1] > r:
                v_contents = set()
            if W.shape[1] > r:
                w_contents = set()
            V, W = V[:, :r], W[:, :r]
    if V.shape[1] == 0:
        raise EmptyBasisError('equal-rank enforcement left no columns')
    report['r'] = V.shape[1]
    return ReductionBasis(V, W, list(specs or []), v_contents, w_contents, recV, recW, report)


def build_basis(sys, specs, realify=True, trunc_tol=1e-10, one_sided=False, sides='both', equalize='pad'):
    """Blocks for every spec followed by :func:`assemble_global`.

    ``sides`` restricts which interpolation blocks are used: ``'both'``,
    ``'V'`` or ``'W'``.  A single side implies a one-sided projection.
    """
    blocks = build_blocks(sys, specs)
    if sides in ('V', 'W'):
        blocks = [b for b in blocks if b.side == sides]
        one_sided = True
    elif sides != 'both':
        raise ValueError("sides must be 'both', 'V' or 'W'")
    return assemble_global(blocks, realify=realify, trunc_tol=trunc_tol, one_sided=one_sided,
                           equalize=equalize, specs=specs)
