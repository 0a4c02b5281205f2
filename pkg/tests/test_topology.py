import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from berryemf import (AmbiguousEnclosure, InvalidConfig, PolyLoop, QuadratureFailure,
                      SingularLoop, VortexConfig, berry_connection_field, chi_gradient,
                      line_integral, quadrature_winding, verify_quantization, winding_number)
from berryemf.field_core import ZERO_FIELD, VectorField2D
from berryemf.quadrature import polyline_integral, triangles_integral
from berryemf.topology import area_integral

from conftest import random_config, random_star_loop

UNIT = PolyLoop.square((5.0, 5.0), 1.0)   # unit square centred on the origin core


def origin_core(w=1):
    return VortexConfig.from_cores([(5.0, 5.0, w)], 10, 10)


class TestPolyLoop:
    def test_needs_three_vertices(self):
        with pytest.raises(InvalidConfig):
            PolyLoop([[0, 0], [1, 0]])

    def test_rejects_duplicates(self):
        with pytest.raises(InvalidConfig):
            PolyLoop([[0, 0], [1, 0], [1, 0], [0, 1]])

    def test_rejects_zero_area(self):
        with pytest.raises(InvalidConfig):
            PolyLoop([[0, 0], [1, 0], [2, 0]])

    def test_rejects_bowtie(self):
        with pytest.raises(InvalidConfig, match="self-intersecting"):
            PolyLoop([[0, 0], [2, 2], [2, 0], [0, 1]])

    def test_orientation(self):
        ccw = PolyLoop.rectangle(0, 0, 2, 1)
        assert ccw.orientation == 1 and ccw.signed_area == pytest.approx(2.0)
        assert ccw.reversed().orientation == -1

    def test_contains_even_odd(self):
        # a concave "U"
        u = PolyLoop([[0, 0], [3, 0], [3, 3], [2, 3], [2, 1], [1, 1], [1, 3], [0, 3]])
        inside = u.contains(np.array([[0.5, 2.0], [1.5, 2.0], [2.5, 0.5], [4, 1]]), 1e-9)
        assert inside.tolist() == [True, False, True, False]

    def test_contains_band_raises(self):
        with pytest.raises(AmbiguousEnclosure):
            UNIT.contains(np.array([[5.5, 5.2]]), 1e-6)

    def test_triangulation_area(self):
        u = PolyLoop([[0, 0], [3, 0], [3, 3], [2, 3], [2, 1], [1, 1], [1, 3], [0, 3]])
        tris = u.triangulate()
        e1, e2 = tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]
        area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]).sum()
        assert area == pytest.approx(7.0, abs=1e-14)


class TestLineIntegral:
    def test_zero_field(self):
        assert line_integral(ZERO_FIELD, UNIT, 1e-10) == 0.0

    def test_two_pi_around_core(self):
        val = line_integral(chi_gradient(origin_core()), UNIT, 1e-10)
        assert abs(val - 2 * math.pi) < 1e-10

    def test_shifted_square_empty(self):
        loop = PolyLoop.rectangle(7, 7, 8, 8)
        assert abs(line_integral(chi_gradient(origin_core()), loop, 1e-10)) < 1e-10

    def test_singular_loop(self):
        loop = PolyLoop.rectangle(5.0 - 1e-7, 4, 6, 6)
        with pytest.raises(SingularLoop):
            line_integral(chi_gradient(origin_core()), loop, 1e-10)

    def test_quadrature_failure(self):
        wild = VectorField2D(lambda p: np.stack([np.sin(1e4 * p[:, 0] ** 2), 0 * p[:, 0]], -1))
        with pytest.raises(QuadratureFailure):
            polyline_integral(wild.evaluate, [[0, 0]], [[10, 0]], 1e-14, max_depth=3)

    def test_core_very_close_to_edge(self):
        cfg = VortexConfig.from_cores([(5.0, 5.5 - 1e-6, 1)], 10, 10, eps_core=1e-8)
        assert abs(quadrature_winding(cfg, UNIT) - 1) < 1e-10

    def test_deterministic(self):
        cfg = VortexConfig.from_cores([(5.1, 4.8, 1), (5.3, 5.4, -1), (4.6, 5.2, 1)], 10, 10)
        a = berry_connection_field(cfg)
        assert line_integral(a, UNIT, 1e-10) == line_integral(a, UNIT, 1e-10)


class TestWinding:
    def test_single(self):
        assert winding_number(origin_core(), UNIT) == 1

    def test_sum(self):
        cfg = VortexConfig.from_cores([(5.1, 5.1, 1), (4.9, 4.9, 1), (5.2, 4.8, -1)], 10, 10)
        assert winding_number(cfg, UNIT) == 1

    def test_empty_loop(self):
        assert winding_number(origin_core(), PolyLoop.rectangle(1, 1, 2, 2)) == 0

    def test_core_on_boundary(self):
        cfg = VortexConfig.from_cores([(5.5, 5.0, 1)], 10, 10)
        with pytest.raises(AmbiguousEnclosure):
            winding_number(cfg, UNIT)

    def test_reversal(self):
        cfg = origin_core()
        assert winding_number(cfg, UNIT.reversed()) == -1
        assert abs(quadrature_winding(cfg, UNIT.reversed()) + 1) < 1e-10


class TestQuantization:
    def test_single_meron(self):
        r = verify_quantization(origin_core(), UNIT, 1e-10)
        assert r.nearest_quantum == -1 and r.deviation < 1e-10
        assert r.numeric_integral == pytest.approx(-math.pi, abs=1e-10)
        assert r.quantum_unit == math.pi and r.consistent

    def test_empty(self):
        r = verify_quantization(VortexConfig.empty(10, 10), UNIT, 1e-10)
        assert r.nearest_quantum == 0 and r.deviation == 0.0

    def test_pair_cancels(self):
        cfg = VortexConfig.from_cores([(5.2, 5.1, 1), (4.8, 4.9, -1)], 10, 10)
        r = verify_quantization(cfg, UNIT, 1e-10)
        assert r.nearest_quantum == 0 and r.deviation < 1e-10

    def test_deviation_definition(self):
        r = verify_quantization(origin_core(-1), UNIT, 1e-10)
        assert r.deviation == abs(r.numeric_integral - r.nearest_quantum * r.quantum_unit)


def test_deformation_invariance():
    cfg = VortexConfig.from_cores([(5.0, 5.0, 1), (5.3, 4.7, 1), (8, 8, -1)], 10, 10)
    g = chi_gradient(cfg)
    tol = 1e-10
    a = line_integral(g, UNIT, tol)
    b = line_integral(g, PolyLoop([[3, 3], [6.5, 3.2], [6, 6.8], [4.2, 6.1], [3.5, 7]]), tol)
    assert abs(a - b) <= 2 * tol


def test_additivity_over_partition():
    cfg = VortexConfig.from_cores([(4.7, 5.0, 1), (5.3, 5.2, 1), (5.4, 4.7, -1), (4.6, 4.6, 1)],
                                  10, 10)
    left, right = PolyLoop.rectangle(4.5, 4.5, 5.0, 5.5), PolyLoop.rectangle(5.0, 4.5, 5.5, 5.5)
    assert winding_number(cfg, UNIT) == winding_number(cfg, left) + winding_number(cfg, right)
    whole = quadrature_winding(cfg, UNIT)
    parts = quadrature_winding(cfg, left) + quadrature_winding(cfg, right)
    assert abs(whole - parts) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_census_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    cfg, loop = random_config(rng, 8), random_star_loop(rng)
    try:
        w = winding_number(cfg, loop)
    except AmbiguousEnclosure:
        return
    assert abs(quadrature_winding(cfg, loop) - w) < 1e-8
    assert winding_number(cfg, loop.reversed()) == -w


class TestSurfaceQuadrature:
    def test_polynomial_exact(self):
        loop = PolyLoop([[0, 0], [2, 0], [2, 1], [1, 2], [0, 1]])
        # int x^2 y over the pentagon, by splitting into rectangle + triangle
        rect = 2 ** 3 / 3 * 0.5
        tri = triangles_integral(lambda p: p[:, 0] ** 2 * p[:, 1], [[[0, 1], [2, 1], [1, 2]]], 1e-14)
        assert area_integral(lambda p: p[:, 0] ** 2 * p[:, 1], loop, 1e-13) == pytest.approx(
            rect + tri, abs=1e-12)

    def test_area(self):
        loop = PolyLoop([[0, 0], [3, 0], [3, 3], [2, 3], [2, 1], [1, 1], [1, 3], [0, 3]])
        assert area_integral(lambda p: np.ones(len(p)), loop, 1e-13) == pytest.approx(7.0, abs=1e-13)

    def test_smooth_adaptive(self):
        loop = PolyLoop.rectangle(0, 0, math.pi, math.pi)
        val = area_integral(lambda p: np.sin(p[:, 0]) * np.sin(p[:, 1]), loop, 1e-12)
        assert val == pytest.approx(4.0, abs=1e-11)
