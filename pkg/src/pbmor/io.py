"""On-disk formats: JSON manifests plus Matrix Market matrices.

A system directory holds ``manifest.json`` and one ``.mtx`` file per
constant matrix and per affine term.  Coefficient functions are stored by
tag and rebuilt through a registry of tag patterns; see :func:`register_tag`.
A stacked term of ``K`` matrices is written as one ``K x (rows*cols)``
sparse matrix.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from pbmor.basis import InterpolationSpec, ReductionBasis
from pbmor.errors import CoefficientEvaluationError
from pbmor.system import (AffineMatrix, BilinearSystem, constant_coefficient, exp_coefficient,
                          linear_coefficient, square_coefficient)

FORMAT_VERSION = 1

_FLOAT = r'[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?'
_registry = []


def register_tag(pattern, factory):
    """Resolve tags matching the regex ``pattern`` with ``factory(match)``."""
    _registry.append((re.compile(pattern + r'\Z'), factory))


def _advdiff_source(mt):
    from pbmor.benchmarks import advdiff_grid, gaussian_coefficient
    grid = int(mt.group(1))
    x, y, _ = advdiff_grid(grid)
    return gaussian_coefficient(x, y, tag=mt.group(0))


register_tag(rf'(?:({_FLOAT})\*)?p\[(\d+)\]\^2',
             lambda mt: square_coefficient(int(mt.group(2)), float(mt.group(1) or 1.0)))
register_tag(rf'(?:({_FLOAT})\*)?p\[(\d+)\]',
             lambda mt: linear_coefficient(int(mt.group(2)), float(mt.group(1) or 1.0)))
register_tag(r'exp\(p\[(\d+)\]\)', lambda mt: exp_coefficient(int(mt.group(1))))
register_tag(_FLOAT, lambda mt: constant_coefficient(float(mt.group(0))))
register_tag(r'advdiff\.source:(\d+)', _advdiff_source)


def resolve_tag(tag):
    for pat, factory in _registry:
        mt = pat.match(tag)
        if mt:
            return factory(mt)
    raise CoefficientEvaluationError(f'no coefficient registered for tag {tag!r}')


# matrices -----------------------------------------------------------------

def write_matrix(path, M, sparse_below=0.25):
    """Matrix Market file; coordinate format when the density is low."""
    M = np.asarray(M) if not sp.issparse(M) else M
    if not sp.issparse(M) and M.size and np.count_nonzero(M) / M.size <= sparse_below:
        M = sp.coo_matrix(M)
    scipy.io.mmwrite(str(path), M, precision=17)
    return Path(path)


def read_matrix(path):
    M = scipy.io.mmread(str(path))
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def _write_affine(M: AffineMatrix, directory, stem):
    entry = {'shape': list(M.shape), 'constant': f'{stem}.mtx', 'terms': []}
    write_matrix(directory / entry['constant'], M.constant)
    for i, t in enumerate(M.terms):
        fn = f'{stem}.term{i}.mtx'
        K = t.matrices.shape[0]
        write_matrix(directory / fn, t.matrices.reshape(K, -1))
        entry['terms'].append({'tag': t.coefficient.tag, 'file': fn, 'K': K})
    return entry


def _read_affine(entry, directory, coefficients=None):
    shape = tuple(entry['shape'])
    const = read_matrix(directory / entry['constant']).reshape(shape)
    terms = []
    for t in entry['terms']:
        coef = (coefficients or {}).get(t['tag']) or resolve_tag(t['tag'])
        mats = read_matrix(directory / t['file']).reshape((t['K'],) + shape)
        terms.append((coef, mats))
    return AffineMatrix(const, terms)


# systems ------------------------------------------------------------------

def save_system(sys, directory, metadata=None):
    """Write ``sys`` to ``directory`` (created if needed)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    mats = {'E': _write_affine(sys.E, d, 'E'), 'A': _write_affine(sys.A, d, 'A'),
            'B': _write_affine(sys.B, d, 'B'), 'C': _write_affine(sys.C, d, 'C'),
            'N': [_write_affine(Nj, d, f'N{j + 1}') for j, Nj in enumerate(sys.N)]}
    manifest = {'format': 'pbmor-system', 'version': FORMAT_VERSION, 'name': sys.name,
                'n': sys.n, 'm': sys.m, 'l': sys.l, 'nu': sys.nu, 'matrices': mats,
                'metadata': metadata or {}}
    if getattr(sys, 'basis', None) is not None:
        save_basis(sys.basis, d / 'basis')
        manifest['kind'] = 'reduced'
        manifest['basis'] = 'basis'
    (d / 'manifest.json').write_text(json.dumps(manifest, indent=2))
    return d


def load_system(directory, coefficients=None):
    """Read a system written by :func:`save_system`.

    ``coefficients`` maps tags to :class:`~pbmor.system.CoefficientFunction`
    objects for tags that the registry cannot rebuild.
    """
    from pbmor.projection import ReducedBilinearSystem

    d = Path(directory)
    man = json.loads((d / 'manifest.json').read_text())
    if man.get('format') != 'pbmor-system':
        raise ValueError(f'{d} is not a system directory')
    m = man['matrices']
    args = dict(E=_read_affine(m['E'], d, coefficients), A=_read_affine(m['A'], d, coefficients),
                N=[_read_affine(e, d, coefficients) for e in m['N']],
                B=_read_affine(m['B'], d, coefficients), C=_read_affine(m['C'], d, coefficients),
                nu=man['nu'], name=man.get('name', ''))
    if man.get('kind') == 'reduced':
        return ReducedBilinearSystem(basis=load_basis(d / man['basis']), **args)
    return BilinearSystem(**args)


def load_metadata(directory):
    return json.loads((Path(directory) / 'manifest.json').read_text()).get('metadata', {})


# bases and specs ----------------------------------------------------------

def save_specs(specs, path):
    Path(path).write_text(json.dumps([s.to_dict() for s in specs], indent=2))
    return Path(path)


def load_specs(path):
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get('specs', [data])
    return [InterpolationSpec.from_dict(d) for d in data]


def save_basis(basis, directory):
    """``V.mtx``, ``W.mtx`` and a ``provenance.json`` sidecar."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(d / 'V.mtx'), basis.V, precision=17)
    scipy.io.mmwrite(str(d / 'W.mtx'), basis.W, precision=17)
    (d / 'provenance.json').write_text(json.dumps(basis.to_dict(), indent=2))
    return d


def load_basis(directory):
    d = Path(directory)
    prov = json.loads((d / 'provenance.json').read_text())
    return ReductionBasis(
        V=np.asarray(scipy.io.mmread(str(d / 'V.mtx'))), W=np.asarray(scipy.io.mmread(str(d / 'W.mtx'))),
        specs=[InterpolationSpec.from_dict(s) for s in prov.get('specs', [])],
        v_contents={tuple(x) for x in prov.get('v_contents', [])},
        w_contents={tuple(x) for x in prov.get('w_contents', [])},
        records_V=prov.get('records_V', []), records_W=prov.get('records_W', []),
        truncation=prov.get('truncation', {}), one_sided=prov.get('one_sided', False))


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, default=_default))
    return Path(path)


def _default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f'cannot serialize {type(x).__name__}')
