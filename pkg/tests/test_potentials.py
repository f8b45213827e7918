import math

import numpy as np
import pytest

from src.core.errors import InvalidInputError, PhysicsDomainError
from src.core.potentials import (CoreSpec, HardSphere, ModelPotential, SquareWell, TabulatedPotential, ZeroPotential,
                                 core_for_minimum, load_tabulated, make_pair, pair_from_potentials, well_summary)
from src.core.scales import TailSpec


def test_model_minimum_matches_closed_form(tail):
    for c12 in (1e-9, 3.3e-7, 2.0):
        summary = well_summary(ModelPotential(c12, tail))
        assert summary.r_min == pytest.approx((3.0 * c12 / tail.C_n) ** 0.125, rel=1e-8)
        assert summary.v_depth > 0
        assert -summary.v_depth == pytest.approx(float(ModelPotential(c12, tail).value(summary.r_min)))


def test_minimum_doubles_under_scaling(tail):
    c12 = 1e-6
    base = well_summary(ModelPotential(c12, tail)).r_min
    scaled = well_summary(ModelPotential(2.0 ** 12 * c12, TailSpec(4, 2.0 ** 4 * tail.C_n))).r_min
    assert scaled == pytest.approx(2.0 * base, rel=1e-10)


def test_core_for_minimum(tail):
    for r_min in (0.05, 0.08, 1.3):
        summary = well_summary(ModelPotential(core_for_minimum(tail, r_min), tail))
        assert summary.r_min == pytest.approx(r_min, rel=1e-9)
    with pytest.raises(InvalidInputError):
        core_for_minimum(tail, 0.0)


def test_tail_sharing(model_pair):
    R = model_pair.boundary_R
    r = np.geomspace(R, 1e3 * R, 2000)
    assert np.all(model_pair.tail_mismatch(r) < 1e-12)
    assert model_pair.va.tail is model_pair.vb.tail
    # the cores differ well inside the boundary
    assert np.max(model_pair.tail_mismatch(np.linspace(0.05, 0.2, 50))) > 1e-3


def test_pair_labels_and_depth(model_pair):
    assert (model_pair.va.label, model_pair.vb.label) == ('a', 'b')
    depths = [well_summary(ch).v_depth for ch in model_pair.channels()]
    assert model_pair.v_depth() == min(depths)
    # 12-4 well: depth = (2/3) C4 / r_min^4
    assert depths[0] == pytest.approx(2.0 / 3.0 / 0.08 ** 4, rel=1e-8)


def test_make_pair_rejects_foreign_tail(tail, mu):
    other = ModelPotential(1e-9, TailSpec(4, 2.0))
    with pytest.raises(PhysicsDomainError):
        make_pair(CoreSpec(1e-9), other, tail, mu)
    with pytest.raises(InvalidInputError):
        make_pair(CoreSpec(1e-9), CoreSpec(2e-9), tail, 0.0)


def test_core_power_must_exceed_tail(tail):
    with pytest.raises(PhysicsDomainError):
        ModelPotential(1.0, tail, power=4)


def test_no_minimum_is_an_error():
    with pytest.raises(PhysicsDomainError):
        well_summary(HardSphere(1.0))


def test_square_well_edge_and_summary():
    well = SquareWell(depth=4.0, radius=2.0)
    np.testing.assert_allclose(well.value(np.array([1.0, 2.0, 2.5])), [-4.0, -2.0, 0.0])
    assert well.breakpoints() == (2.0,)
    assert well_summary(well).v_depth == 4.0


def test_test_potentials_pair(mu):
    pair = pair_from_potentials(SquareWell(1.0, 1.0), HardSphere(0.5), mu)
    assert pair.tail is None
    assert pair.boundary_R == 1.0
    assert pair.vb.label == 'b'
    assert float(ZeroPotential().value_at_origin()) == 0.0


def _write_curve(path, tail, r):
    v = ModelPotential(core_for_minimum(tail, 0.1), tail).value(r)
    np.savetxt(path, np.column_stack([r, v]), header="r V")
    return v


def test_tabulated_reproduces_model(tmp_path, tail):
    r = np.linspace(0.07, 5.0, 4000)
    path = tmp_path / "curve.dat"
    _write_curve(path, tail, r)
    tab = load_tabulated(str(path), tail, splice_radius=4.0, label='b')
    model = ModelPotential(core_for_minimum(tail, 0.1), tail)
    radii = np.linspace(0.095, 3.9, 200)
    np.testing.assert_allclose(tab.value(radii), model.value(radii), rtol=1e-5, atol=1e-3)
    outer = np.array([4.0, 7.0, 50.0])
    np.testing.assert_array_equal(tab.value(outer), tail.value(outer))
    # r^-12 wall inside the first sample
    assert float(tab.value(np.array([0.035]))[0]) == pytest.approx(float(tab.value(np.array([0.07]))[0]) * 2.0 ** 12)
    assert well_summary(tab).r_min == pytest.approx(0.1, rel=1e-4)


def test_tabulated_validation(tmp_path, tail):
    with pytest.raises(InvalidInputError):
        load_tabulated(str(tmp_path / "missing.dat"), tail, 1.0)
    with pytest.raises(InvalidInputError):
        TabulatedPotential([1.0, 0.5, 2.0, 3.0], [1.0, 0.0, -1.0, -0.5], tail, 2.0)
    with pytest.raises(InvalidInputError):
        TabulatedPotential([0.1, 0.2, 0.3, 0.4], [1.0, -1.0, -0.5, -0.2], tail, 1.0)
    with pytest.raises(PhysicsDomainError):
        TabulatedPotential([0.1, 0.2, 0.3, 0.4], [-1.0, -2.0, -0.5, -0.2], tail, 0.3)
    bad = tmp_path / "three.dat"
    bad.write_text("0.1 1 2\n0.2 1 2\n")
    with pytest.raises(InvalidInputError):
        load_tabulated(str(bad), tail, 0.15)
