"""Command-line interface.

Systems live in directories written by :func:`pbmor.io.save_system`.  The
``verify`` command exits with status 0 iff every warranted interpolation
condition passes; the other commands exit 0 on success and 2 on errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys as _sys

import numpy as np

from pbmor import io
from pbmor.errors import PBMORError

log = logging.getLogger('pbmor')


def _floats(text):
    return [float(x) for x in str(text).split(',') if x.strip()]


def _kv_floats(items, what):
    out = {}
    for item in items or []:
        for part in item.split(','):
            if not part.strip():
                continue
            key, _, val = part.partition('=')
            if not val:
                raise ValueError(f'{what} entries look like key=value, got {part!r}')
            out[key.strip()] = float(val)
    return out


def _fix(items):
    """``p4=5`` (1-based) -> ``{3: 5.0}``."""
    out = {}
    for key, val in _kv_floats(items, '--fix').items():
        if not key.startswith('p'):
            raise ValueError(f'--fix keys are p1, p2, ..., got {key!r}')
        out[int(key[1:]) - 1] = val
    return out


def cmd_gen_rc(args):
    from pbmor.benchmarks import gen_rc
    sys = gen_rc(args.N)
    io.save_system(sys, args.out, metadata={'generator': 'rc', 'N': args.N,
                                            'param_box': {'lo': [0.0], 'hi': [70.0], 'log_axes': []}})
    print(f'wrote {sys.name} (n={sys.n}) to {args.out}')
    return 0


def cmd_gen_advdiff(args):
    from pbmor.benchmarks import ADVDIFF_BOX, gen_advdiff
    sys = gen_advdiff(args.grid)
    keys = ('log_p1', 'p2', 'p3', 'p4')
    io.save_system(sys, args.out, metadata={
        'generator': 'advdiff', 'grid': args.grid,
        'param_box': {'lo': [ADVDIFF_BOX[k][0] for k in keys], 'hi': [ADVDIFF_BOX[k][1] for k in keys],
                      'log_axes': [0]}})
    print(f'wrote {sys.name} (n={sys.n}) to {args.out}')
    return 0


def cmd_shifts(args):
    from pbmor.irka import irka_specs
    sys = io.load_system(args.system)
    p_hats = [_floats(p) for p in args.p_hat]
    specs, runs = irka_specs(sys, p_hats, args.r, shared=args.shared, ordering=args.ordering,
                             hessian=args.hessian, max_iter=args.max_iter, tol=args.tol)
    for res in runs:
        print(f'p = {res.p_hat.tolist()}: shifts {np.round(res.shifts, 10).tolist()} '
              f'converged={res.converged} after {res.iterations} sweeps')
    if args.out:
        io.save_specs(specs, args.out)
        print(f'wrote {len(specs)} specs to {args.out}')
    return 0


def cmd_reduce(args):
    from pbmor.basis import build_basis
    from pbmor.projection import reduce
    sys = io.load_system(args.system)
    specs = io.load_specs(args.spec)
    basis = build_basis(sys, specs, trunc_tol=args.trunc_tol, one_sided=args.one_sided, sides=args.sides,
                        equalize=args.equalize)
    rsys = reduce(sys, basis)
    io.save_system(rsys, args.out, metadata=io.load_metadata(args.system))
    print(f'reduced n={sys.n} to r={basis.r}; wrote {args.out}')
    return 0


def cmd_verify(args):
    from pbmor.verify import verify
    sys = io.load_system(args.system)
    rsys = io.load_system(args.reduced)
    specs = io.load_specs(args.spec) if args.spec else None
    tols = _kv_floats(args.tol_overrides, '--tol-overrides')
    report = verify(sys, rsys, specs, tolerances=tols, fd_check=not args.no_fd)
    print(report.summary())
    for note in report.notes:
        print('note:', note)
    if args.report:
        report.to_json(args.report)
    return report.exit_code


def cmd_simulate(args):
    from pbmor.simulation import InputSignal, simulate_bilinear
    sys = io.load_system(args.system)
    u = InputSignal.named(args.input, sys.m, args.input_file)
    res = simulate_bilinear(sys, _floats(args.p), u, (args.t_start, args.t_end), args.dt)
    if args.out:
        res.to_csv(args.out)
        print(f'wrote {res.t.size} samples to {args.out}')
    else:
        print(f'y(t_end) = {res.y[-1].tolist()}')
    return 0


def cmd_sweep(args):
    from pbmor.simulation import InputSignal
    from pbmor.verify import linear_points, random_points, sweep
    sys = io.load_system(args.system)
    rsys = io.load_system(args.reduced)
    box = io.load_metadata(args.system).get('param_box', {})
    lo = _floats(args.lo) if args.lo else box.get('lo')
    hi = _floats(args.hi) if args.hi else box.get('hi')
    if lo is None or hi is None:
        raise ValueError('no parameter box; pass --lo and --hi')
    log_axes = box.get('log_axes', []) if not args.lo else []
    mode = args.mode or ('linear' if len(lo) == 1 else 'random')
    if mode == 'linear':
        if len(lo) != 1:
            raise ValueError('linear sweeps need a scalar parameter')
        P = linear_points(lo[0], hi[0], args.count)
    else:
        P = random_points(lo, hi, args.count, args.seed, _fix(args.fix), log_axes)
    inputs = [InputSignal.named(k, sys.m, args.input_file) for k in args.input]
    res = sweep(sys, rsys, P, inputs, (0.0, args.t_end), args.dt, workers=args.workers,
                seed=args.seed if mode == 'random' else None)
    for s in res.stats():
        print(f"{s['input']}: max {s['max']:.3e} mean {s['mean']:.3e} worst p = {s['worst_param']}")
    if args.out:
        res.to_csv(args.out)
    if args.report:
        io.write_json(res.to_dict(), args.report)
    return 0


def cmd_deim(args):
    from pbmor.deim import fit_deim
    if args.snapshots:
        S = io.read_matrix(args.snapshots)
        seed = None
    else:
        from pbmor.benchmarks import advdiff_source_snapshots, sample_advdiff_params
        rng = np.random.default_rng(args.seed)
        S = advdiff_source_snapshots(args.grid, sample_advdiff_params(rng, args.count))
        seed = args.seed
    model = fit_deim(S, args.tol)
    print(f'POD kept M={model.M} of {S.shape[1]} snapshots (tol {args.tol:g}); rows {model.row_indices.tolist()}')
    if args.out:
        model.save(args.out)
        if seed is not None:
            io.write_json({'seed': seed, 'grid': args.grid, 'count': args.count}, args.out + '.snapshots.json')
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog='pbmor', description='Interpolatory reduction of parametric bilinear systems')
    p.add_argument('-v', '--verbose', action='store_true')
    sub = p.add_subparsers(dest='command', required=True)

    s = sub.add_parser('gen-rc', help='Carleman-bilinearized RC ladder')
    s.add_argument('--N', type=int, default=10)
    s.add_argument('--out', required=True)
    s.set_defaults(func=cmd_gen_rc)

    s = sub.add_parser('gen-advdiff', help='advection-diffusion benchmark')
    s.add_argument('--grid', type=int, default=21)
    s.add_argument('--out', required=True)
    s.set_defaults(func=cmd_gen_advdiff)

    s = sub.add_parser('shifts', help='IRKA shifts on the linearized model')
    s.add_argument('--system', required=True)
    s.add_argument('--r', type=int, default=2)
    s.add_argument('--p-hat', action='append', required=True, help='comma-separated; repeat for several samples')
    s.add_argument('--shared', action='store_true', help='run IRKA at the first sample only')
    s.add_argument('--ordering', default='all-orderings', choices=['sequential', 'all-orderings'])
    s.add_argument('--hessian', default='none', choices=['none', 'on-V', 'on-W'])
    s.add_argument('--max-iter', type=int, default=100)
    s.add_argument('--tol', type=float, default=1e-6)
    s.add_argument('--out')
    s.set_defaults(func=cmd_shifts)

    s = sub.add_parser('reduce', help='build bases and project')
    s.add_argument('--system', required=True)
    s.add_argument('--spec', required=True)
    s.add_argument('--out', required=True)
    s.add_argument('--one-sided', action='store_true')
    s.add_argument('--sides', default='both', choices=['both', 'V', 'W'])
    s.add_argument('--trunc-tol', type=float, default=1e-10)
    s.add_argument('--equalize', default='pad', choices=['pad', 'cut'])
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser('verify', help='check interpolation conditions')
    s.add_argument('--system', required=True)
    s.add_argument('--reduced', required=True)
    s.add_argument('--spec')
    s.add_argument('--tol-overrides', action='append', help='e.g. value=1e-8,hessian=1e-3')
    s.add_argument('--no-fd', action='store_true', help='skip finite-difference cross-checks')
    s.add_argument('--report')
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser('simulate', help='time-domain simulation')
    s.add_argument('--system', required=True)
    s.add_argument('--p', required=True)
    s.add_argument('--input', default='exp-decay', choices=['exp-decay', 'cosine', 'file'])
    s.add_argument('--input-file')
    s.add_argument('--dt', type=float, default=1e-3)
    s.add_argument('--t-start', type=float, default=0.0)
    s.add_argument('--t-end', type=float, default=5.0)
    s.add_argument('--out')
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser('sweep', help='output error of a reduced model over parameters')
    s.add_argument('--system', required=True)
    s.add_argument('--reduced', required=True)
    s.add_argument('--count', type=int, default=100)
    s.add_argument('--seed', type=int, default=0)
    s.add_argument('--mode', choices=['linear', 'random'])
    s.add_argument('--lo')
    s.add_argument('--hi')
    s.add_argument('--fix', action='append', help='e.g. p4=5 (1-based)')
    s.add_argument('--input', action='append', choices=['exp-decay', 'cosine', 'file'])
    s.add_argument('--input-file')
    s.add_argument('--dt', type=float, default=1e-3)
    s.add_argument('--t-end', type=float, default=5.0)
    s.add_argument('--workers', type=int)
    s.add_argument('--out')
    s.add_argument('--report')
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser('deim', help='POD + Q-DEIM for the advection-diffusion source')
    s.add_argument('--snapshots', help='Matrix Market snapshot matrix (default: sample the source)')
    s.add_argument('--grid', type=int, default=21)
    s.add_argument('--count', type=int, default=200)
    s.add_argument('--seed', type=int, default=0)
    s.add_argument('--tol', type=float, default=1e-5)
    s.add_argument('--out')
    s.set_defaults(func=cmd_deim)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, 'input', None) is None and args.command == 'sweep':
        args.input = ['exp-decay', 'cosine']
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except (PBMORError, ValueError, OSError) as exc:
        print(f'error: {exc}', file=_sys.stderr)
        return 2


if __name__ == '__main__':
    _sys.exit(main())
