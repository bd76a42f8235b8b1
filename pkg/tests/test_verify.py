import json

import numpy as np
import pytest

from oracles import random_system
from pbmor.basis import InterpolationSpec, ReductionBasis, build_basis
from pbmor.benchmarks import gen_rc
from pbmor.projection import reduce
from pbmor.simulation import InputSignal
from pbmor.verify import linear_points, random_points, relative_mismatch, sweep, verify


@pytest.fixture(scope='module')
def rc_setup():
    sys = gen_rc(6)
    spec = InterpolationSpec([0.7, 4.0], [1.0], [1.0], [1.0])
    return sys, spec


def test_relative_mismatch_floor():
    assert relative_mismatch([0.0], [0.0]) == (0.0, 0.0)
    a, r = relative_mismatch([0.0], [1e-15])
    assert r == pytest.approx(0.1)
    assert relative_mismatch([2.0], [1.0])[1] == 0.5


def test_identity_reduction_everything_passes(rng):
    sys = random_system(rng, n=5, nu=2)
    spec = InterpolationSpec([1.0, 2.0], [1.0], [1.0], [0.1, 0.2])
    rsys = reduce(sys, ReductionBasis.identity(5))
    rep = verify(sys, rsys, [spec], tolerances={'value': 1e-12, 'freq': 1e-12, 'jacobian': 1e-12, 'hessian': 1e-12},
                 fd_check=False)
    assert rep.ok and all(r.warranted and r.passed for r in rep.records)
    assert {r.condition for r in rep.records} == {'value-right', 'value-left', 'freq-derivative', 'jacobian', 'hessian'}


def test_two_sided_scope(rc_setup):
    sys, spec = rc_setup
    rsys = reduce(sys, build_basis(sys, [spec]))
    rep = verify(sys, rsys)
    assert rep.ok and rep.exit_code == 0
    for cond in ('value-right', 'value-left', 'freq-derivative', 'jacobian'):
        recs = rep.select(cond)
        assert recs and all(r.warranted for r in recs)
    assert not any(r.warranted for r in rep.select('hessian'))
    # four shift tuples at k = 2
    assert len(rep.select('value-right', k=2)) == 4
    fd = [r.fd_relative for r in rep.records if r.fd_relative is not None]
    assert fd and max(fd) < 1e-5


def test_enrichment_warrants_hessian(rc_setup):
    sys, spec = rc_setup
    sp = InterpolationSpec(spec.shifts, [1.0], [1.0], [1.0], hessian='on-V')
    rep = verify(sys, reduce(sys, build_basis(sys, [sp])))
    hs = rep.select('hessian')
    assert hs and all(r.warranted and r.passed for r in hs)


def test_one_sided_scope(rc_setup):
    sys, spec = rc_setup
    rv = reduce(sys, build_basis(sys, [spec], sides='V'))
    rep = verify(sys, rv)
    assert all(r.warranted for r in rep.select('value-right'))
    assert not any(r.warranted for r in rep.select('value-left'))
    assert not any(r.warranted for r in rep.select('jacobian'))
    assert rep.ok
    rw = reduce(sys, build_basis(sys, [spec], sides='W'))
    rep = verify(sys, rw)
    assert all(r.warranted for r in rep.select('value-left'))
    assert not any(r.warranted for r in rep.select('value-right'))
    assert rep.ok


def test_sequential_ordering_scope(rc_setup):
    sys, spec = rc_setup
    sp = InterpolationSpec(spec.shifts, [1.0], [1.0], [1.0], ordering='sequential')
    rep = verify(sys, reduce(sys, build_basis(sys, [sp])))
    assert len(rep.select('value-right', k=2)) == 1
    assert rep.select('value-left', k=1)[0].shift_indices == [1]
    assert not any(r.warranted for r in rep.select('freq-derivative'))
    assert rep.ok


def test_unknown_spec_is_unwarranted(rc_setup):
    sys, spec = rc_setup
    rsys = reduce(sys, build_basis(sys, [spec]))
    other = InterpolationSpec([2.5], [1.0], [1.0], [3.0])
    rep = verify(sys, rsys, [other], fd_check=False)
    assert rep.records and not rep.warranted and rep.notes
    assert rep.exit_code == 0


def test_failing_warranted_check_exits_nonzero(rc_setup):
    sys, spec = rc_setup
    rsys = reduce(sys, build_basis(sys, [spec]))
    rep = verify(sys, rsys, tolerances={'value': 1e-30}, fd_check=False)
    assert not rep.ok and rep.exit_code == 1


def test_report_deterministic_and_serializable(rc_setup, tmp_path):
    sys, spec = rc_setup
    rsys = reduce(sys, build_basis(sys, [spec]))
    a = verify(sys, rsys).to_json()
    b = verify(sys, rsys).to_json()
    assert a == b
    verify(sys, rsys).to_json(tmp_path / 'r.json')
    data = json.loads((tmp_path / 'r.json').read_text())
    assert data['ok'] and data['records']


def test_tolerance_monotone(rc_setup):
    sys, spec = rc_setup
    rsys = reduce(sys, build_basis(sys, [InterpolationSpec(spec.shifts, [1.0], [1.0], [1.0], ordering='sequential')]))
    tight = verify(sys, rsys, fd_check=False, tolerances={'value': 1e-14, 'freq': 1e-14, 'jacobian': 1e-3})
    loose = verify(sys, rsys, fd_check=False, tolerances={'value': 1e-10, 'freq': 1e-4, 'jacobian': 1e-1})
    assert any(not r.passed for r in tight.records)
    for a, b in zip(tight.records, loose.records):
        assert (a.condition, a.k, a.shift_indices) == (b.condition, b.k, b.shift_indices)
        assert b.passed or not a.passed


def test_points():
    P = linear_points(0, 70, 100)
    assert P.shape == (100, 1) and P[0, 0] == 0 and P[-1, 0] == 70
    a = random_points([-3, -1, -1, 1], [1, 1, 1, 10], 50, seed=4, fix={3: 5.0}, log_axes=[0])
    b = random_points([-3, -1, -1, 1], [1, 1, 1, 10], 50, seed=4, fix={3: 5.0}, log_axes=[0])
    assert np.array_equal(a, b)
    assert np.all(a[:, 3] == 5.0)
    assert np.all((a[:, 0] >= np.exp(-3)) & (a[:, 0] <= np.e))


def test_sweep_identity_and_order(tmp_path):
    sys = gen_rc(3)
    rsys = reduce(sys, ReductionBasis.identity(sys.n))
    P = linear_points(0, 10, 5)
    res = sweep(sys, rsys, P, [InputSignal.exp_decay(), InputSignal.cosine()], (0, 0.5), 1e-2, workers=3)
    assert res.errors.shape == (5, 2) and not np.any(res.errors)
    assert np.array_equal(res.params, P)
    assert [s['input'] for s in res.stats()] == ['exp-decay', 'cosine']
    res.to_csv(tmp_path / 's.csv')
    assert (tmp_path / 's.csv').read_text().splitlines()[0] == 'index,p1,exp-decay,cosine'


def test_sweep_reports_worst_case():
    sys = gen_rc(4)
    rsys = reduce(sys, build_basis(sys, [InterpolationSpec([0.7, 4.0], [1.0], [1.0], [1.0])]))
    P = linear_points(0, 6, 4)
    a = sweep(sys, rsys, P, [InputSignal.exp_decay()], (0, 1), 1e-2, workers=2)
    b = sweep(sys, rsys, P, [InputSignal.exp_decay()], (0, 1), 1e-2, workers=1)
    assert np.array_equal(a.errors, b.errors)
    s = a.stats()[0]
    assert s['max'] == a.errors[:, 0].max() and s['worst_param'] == P[s['worst_index']].tolist()
