import numpy as np
import pytest

from sthdg.amr import (AmrRecord, ErrorIndicatorField, amr_loop,
                       mark_fixed_fraction, zz_estimate)
from sthdg.cases import build_case_mesh, make_layer1d, make_polyexact
from sthdg.hdg import project
from sthdg.mesh import bisect_refine


@pytest.fixture(scope="module")
def mesh():
    m = build_case_mesh(make_polyexact(1), 5, 4, mode="all_at_once")
    # refine a few elements so the vertex patches are not all structured
    return bisect_refine(m, [0, 3, 11])


def test_zz_vanishes_on_globally_linear_fields(mesh):
    lin = lambda pts: 2.0 + 3.0 * pts[:, 0] - 1.5 * pts[:, 1]
    field = zz_estimate(mesh, project(mesh, 2, lin), 2)
    assert field.eta.max() < 1e-12
    assert field.global_estimate < 1e-11


def test_zz_invariant_under_constant_shift(mesh):
    f = lambda pts: np.sin(pts[:, 0]) * pts[:, 1]
    e1 = zz_estimate(mesh, project(mesh, 2, f), 2).eta
    e2 = zz_estimate(mesh, project(mesh, 2, lambda p: f(p) + 11.0), 2).eta
    assert np.allclose(e1, e2, atol=1e-11)


def test_zz_flags_jump_layer(mesh):
    step = lambda pts: (pts[:, 1] > 0.05).astype(float)
    field = zz_estimate(mesh, project(mesh, 1, step), 1)
    worst = np.argmax(field.eta)
    xs = mesh.vertices[mesh.elements[worst], 1]
    assert xs.min() - 0.2 <= 0.05 <= xs.max() + 0.2
    # elements far from the jump carry much smaller indicators
    far = [k for k in range(mesh.n_elements)
           if np.all(np.abs(mesh.vertices[mesh.elements[k], 1] - 0.05) > 0.3)]
    assert field.eta[far].max() < 0.2 * field.eta[worst]


def test_global_estimate_consistent():
    field = ErrorIndicatorField(np.array([3.0, 4.0]))
    assert np.isclose(field.global_estimate, 5.0)
    with pytest.raises(ValueError):
        ErrorIndicatorField(np.array([1.0, -0.5]))


def test_mark_fixed_fraction_rules():
    field = ErrorIndicatorField(np.array([3.0, 1.0, 2.0]))
    assert list(mark_fixed_fraction(field, 1 / 3)) == [0]
    assert list(mark_fixed_fraction(field, 1.0)) == [0, 1, 2]
    ties = ErrorIndicatorField(np.array([1.0, 2.0, 2.0, 0.5]))
    assert list(mark_fixed_fraction(ties, 0.5)) == [1, 2]
    with pytest.raises(ValueError):
        mark_fixed_fraction(field, 0.0)
    # identical fields mark identical sets
    again = ErrorIndicatorField(np.array([3.0, 1.0, 2.0]))
    assert np.array_equal(mark_fixed_fraction(field, 0.67),
                          mark_fixed_fraction(again, 0.67))


def test_amr_loop_zero_cycles_is_single_solve():
    recs = amr_loop(make_layer1d(), 1, 0, n0=4)
    assert len(recs) == 1
    assert isinstance(recs[0], AmrRecord)
    assert recs[0].cycle == 0 and recs[0].n_coupled > 0


def test_amr_loop_grows_and_improves():
    recs = amr_loop(make_layer1d(), 1, 3, n0=8, fraction=0.2)
    ns = [r.n_coupled for r in recs]
    errs = [r.l2_error for r in recs]
    assert all(b > a for a, b in zip(ns, ns[1:]))
    assert errs[-1] < 0.5 * errs[0]
    assert all(r.iterations >= 1 for r in recs)
    assert all(r.mesh is None for r in recs)


def test_amr_loop_stops_once_indicator_hits_roundoff():
    # the moving-front solution becomes exactly representable once the
    # refinement lines up facets with the characteristic, so the loop
    # should quit instead of refining on noise
    recs = amr_loop(make_layer1d(), 1, 8, n0=8, fraction=0.3)
    assert len(recs) < 9
    assert recs[-1].l2_error < 1e-12
