"""Geometry, exterior-sphere contact, cone-ball chains, cap growth."""

import math

import numpy as np
import pytest

from impscat.geometry import (
    GeometryError,
    ObstacleGeometry,
    build_cone_chain,
    chain_ball_count,
    chain_ratio,
    check_GA2,
    exterior_contact_point,
)
from impscat.specfun import gauss_product_rule


def perturbed_geometry(eps=0.05):
    # eps * (real Y_2^0) bump
    coeffs = np.zeros(9)
    coeffs[6] = eps
    return ObstacleGeometry(radius=1.0, perturbation=coeffs)


class TestObstacleGeometry:
    def test_sphere_defaults(self):
        geom = ObstacleGeometry()
        assert geom.is_sphere
        assert geom.kind == "sphere"
        assert geom.diameter() == 2.0

    def test_validation(self):
        with pytest.raises(GeometryError):
            ObstacleGeometry(radius=-1.0)
        with pytest.raises(GeometryError):
            ObstacleGeometry(cone_half_angle=2.0)
        with pytest.raises(GeometryError):
            ObstacleGeometry(perturbation=np.array([-10.0]))

    def test_sphere_normal_is_radial(self):
        geom = ObstacleGeometry()
        rule = gauss_product_rule(6)
        nu = geom.outward_normal(rule.mu, rule.phi)
        assert np.allclose(nu, rule.points())

    def test_perturbed_normal_unit_and_consistent(self):
        geom = perturbed_geometry()
        rule = gauss_product_rule(10)
        nu = geom.outward_normal(rule.mu, rule.phi)
        assert np.allclose(np.linalg.norm(nu, axis=1), 1.0)
        # normal is orthogonal to a boundary tangent from finite differences
        mu0, phi0 = 0.3, 1.1
        h = 1e-6
        th = np.arccos(mu0)

        def pt(t, p):
            r = geom.boundary_radius(np.cos(t), p)[0]
            return r * np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p),
                                 np.cos(t)])

        tang_t = (pt(th + h, phi0) - pt(th - h, phi0)) / (2 * h)
        tang_p = (pt(th, phi0 + h) - pt(th, phi0 - h)) / (2 * h)
        n0 = geom.outward_normal(mu0, phi0)[0]
        assert abs(tang_t @ n0) < 1e-5 * np.linalg.norm(tang_t)
        assert abs(tang_p @ n0) < 1e-5 * np.linalg.norm(tang_p)

    def test_surface_element_total_area(self):
        geom = ObstacleGeometry(radius=2.0)
        rule = gauss_product_rule(8)
        area = np.sum(geom.surface_element(rule.mu, rule.phi) * rule.weights)
        assert area == pytest.approx(16 * np.pi, rel=1e-12)

    def test_contains(self):
        geom = ObstacleGeometry()
        inside = geom.contains(np.array([[0.0, 0.0, 0.5], [0.0, 0.0, 1.5]]))
        assert inside.tolist() == [True, False]

    def test_distance_to_boundary_sphere(self):
        geom = ObstacleGeometry()
        d = geom.distance_to_boundary(np.array([[0.0, 0.0, 3.0]]))
        assert d[0] == pytest.approx(2.0)


class TestExteriorContact:
    def test_north_pole(self):
        geom = ObstacleGeometry()
        x0 = exterior_contact_point(geom, np.array([0.0, 0.0, 1.0]))
        assert np.allclose(x0, [0.0, 0.0, 0.5])

    def test_off_boundary_point_rejected(self):
        geom = ObstacleGeometry()
        with pytest.raises(GeometryError):
            exterior_contact_point(geom, np.array([0.0, 0.0, 1.5]))

    def test_perturbed_contact(self):
        geom = perturbed_geometry()
        rule = gauss_product_rule(12)
        bnd = geom.boundary_points(rule)
        x0 = exterior_contact_point(geom, bnd[17])
        # ball center at distance rho from the contact point
        assert np.linalg.norm(bnd[17] - x0) == pytest.approx(
            geom.exterior_sphere_radius)


class TestConeChain:
    def test_ratio(self):
        assert chain_ratio(math.pi / 6) == pytest.approx(8.0 / 7.0, abs=1e-15)

    def test_count_acceptance_configuration(self):
        assert chain_ball_count(0.1, 8.0, math.pi / 6) == 22

    def test_count_brute_force_oracle(self):
        # largest N with (r/2) mu^N <= R/8 reachable by whole steps
        for r, big_r, theta in [(0.1, 8.0, math.pi / 6), (0.2, 16.0, 0.4),
                                (0.05, 8.0, math.pi / 4)]:
            mu = chain_ratio(theta)
            n = 0
            while mu ** (n + 1) <= big_r / (4.0 * r) * (1 + 1e-12):
                n += 1
            assert chain_ball_count(r, big_r, theta) == n

    def test_count_validation(self):
        with pytest.raises(ValueError):
            chain_ball_count(-0.1, 8.0, 0.5)
        with pytest.raises(ValueError):
            chain_ball_count(1.0, 2.0, 0.5)

    def test_nesting_and_containment(self):
        geom = ObstacleGeometry()
        chain = build_cone_chain(np.array([0.0, 0.0, 1.0]), 0.1, geom, 8.0)
        assert chain.count == 22
        assert chain.centers.shape == (23, 3)
        # nesting |x_{k+1}-x_k| + rho_{k+1} <= 2 rho_k holds with equality
        assert np.max(np.abs(chain.nesting_residuals())) < 1e-12
        # triple-radius balls stay inside the domain
        dist = geom.distance_to_boundary(chain.centers)
        assert np.all(dist > 3.0 * chain.radii)
        assert np.all(np.linalg.norm(chain.centers, axis=1)
                      + 3.0 * chain.radii <= 8.0)

    def test_distances_geometric(self):
        geom = ObstacleGeometry()
        chain = build_cone_chain(np.array([1.0, 0.0, 0.0]), 0.1, geom, 8.0)
        ratios = chain.distances[1:] / chain.distances[:-1]
        assert np.allclose(ratios, chain.ratio, rtol=1e-14)
        assert chain.distances[0] == pytest.approx(0.05)

    def test_rejects_small_outer_radius(self):
        geom = ObstacleGeometry()
        with pytest.raises(GeometryError):
            build_cone_chain(np.array([0.0, 0.0, 1.0]), 0.1, geom, 3.0)


class TestGA2:
    def test_sphere_exponent(self):
        geom = ObstacleGeometry()
        c, kappa = check_GA2(geom, [0.4, 0.2, 0.1, 0.05])
        assert np.isfinite(c) and c > 0
        assert 0.0 < kappa <= 1.0

    def test_perturbed_exponent(self):
        geom = perturbed_geometry()
        c, kappa = check_GA2(geom, [0.4, 0.2, 0.1, 0.05])
        assert np.isfinite(c) and c > 0
        assert 0.0 < kappa <= 1.0

    def test_bad_radii(self):
        with pytest.raises(ValueError):
            check_GA2(ObstacleGeometry(), [0.1, -0.1])
