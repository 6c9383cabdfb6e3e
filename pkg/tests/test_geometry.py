import numpy as np
import pytest

from igamortar.errors import ConfigError, DegenerateJacobianError
from igamortar.geometry import (
    PatchGeometry,
    bilinear_patch,
    builtin_geometry,
    eval_geometry,
    load_geometry,
    quartercircle3_patches,
    refine_uniform,
    save_geometry,
    tensor_space,
)
from igamortar.quadrature import gauss_legendre


def fd_jacobian(patch, u, v, h=1e-6):
    J = np.empty((2, 2))
    J[:, 0] = (patch.eval_point(u + h, v) - patch.eval_point(u - h, v)) / (2 * h)
    J[:, 1] = (patch.eval_point(u, v + h) - patch.eval_point(u, v - h)) / (2 * h)
    return J


def fd_hessian(patch, u, v, h=1e-4):
    H = np.empty((2, 2, 2))
    f = patch.eval_point
    H[:, 0, 0] = (f(u + h, v) - 2 * f(u, v) + f(u - h, v)) / h**2
    H[:, 1, 1] = (f(u, v + h) - 2 * f(u, v) + f(u, v - h)) / h**2
    Hxy = (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4 * h**2)
    H[:, 0, 1] = H[:, 1, 0] = Hxy
    return H


class TestEvalGeometry:
    def test_identity_map(self):
        patch = bilinear_patch((0, 0), (1, 0), (1, 1), (0, 1))
        for u, v in [(0.0, 0.0), (0.3, 0.7), (1.0, 1.0)]:
            jet = eval_geometry(patch, u, v)
            np.testing.assert_allclose(jet.point, [u, v], atol=1e-15)
            np.testing.assert_allclose(jet.jacobian, np.eye(2), atol=1e-15)
            np.testing.assert_allclose(jet.hess, 0.0, atol=1e-15)
            assert jet.det == pytest.approx(1.0)

    def test_quartercircle_arc_points_on_circle(self):
        patches = quartercircle3_patches()
        # outer edges: east of patch 1 (u=1), north of patch 2 (v=1)
        for patch, fix in [(patches[1], "east"), (patches[2], "north")]:
            for t in np.linspace(0, 1, 23):
                uv = (1.0, t) if fix == "east" else (t, 1.0)
                x, y = patch.eval_point(*uv)
                assert abs(x * x + y * y - 1.0) <= 1e-12

    def test_bilinear_quad_jacobian_matches_fd(self):
        patch = bilinear_patch((0, 0), (2, 0), (2.5, 1.5), (0, 1))
        jet = eval_geometry(patch, 0.5, 0.5)
        np.testing.assert_allclose(jet.jacobian, fd_jacobian(patch, 0.5, 0.5), atol=1e-6)

    def test_rational_jet_matches_fd(self):
        patch = quartercircle3_patches()[1]
        for u, v in [(0.3, 0.4), (0.8, 0.9), (0.5, 0.05)]:
            jet = eval_geometry(patch, u, v)
            np.testing.assert_allclose(jet.jacobian, fd_jacobian(patch, u, v),
                                       rtol=1e-5, atol=1e-6)
            np.testing.assert_allclose(jet.hess, fd_hessian(patch, u, v),
                                       rtol=1e-4, atol=1e-4)

    def test_inverse_jacobian_identity(self):
        patch = bilinear_patch((0, 0), (2, 0), (2.5, 1.5), (0, 1))
        jet = eval_geometry(patch, 0.21, 0.84)
        np.testing.assert_allclose(jet.jacobian @ jet.inv_jacobian, np.eye(2),
                                   atol=1e-12)

    def test_degenerate_jacobian_raises(self):
        patch = bilinear_patch((0, 0), (1, 0), (0, 0), (0, 1))
        with pytest.raises(DegenerateJacobianError):
            eval_geometry(patch, 0.99, 0.99)

    def test_positive_jacobian_at_gauss_points_all_builtins(self):
        rule = gauss_legendre(4)
        for name in ("square2", "square4", "square12", "quartercircle3"):
            patches, _, _ = builtin_geometry(name)
            for patch in patches:
                for u in rule.nodes:
                    for v in rule.nodes:
                        assert eval_geometry(patch, float(u), float(v)).det > 0


class TestFlatIndexing:
    def test_round_trip(self):
        ts = tensor_space(2, np.linspace(0, 1, 4), np.linspace(0, 1, 3))
        n1, n2 = ts.shape
        for i in range(n1):
            for j in range(n2):
                assert ts.multi_index(ts.flat_index(i, j)) == (i, j)
        assert ts.num_dofs == n1 * n2
        assert ts.num_elements == (3, 2)


class TestRefineUniform:
    def test_element_count_and_mesh_size(self):
        patch = bilinear_patch((0, 0), (1, 0), (1, 1), (0, 1))
        refined = refine_uniform(patch, 2)
        assert refined.space.num_elements == (4, 4)
        assert refined.space.mesh_size == pytest.approx(0.25)

    def test_geometry_invariance(self):
        rng = np.random.default_rng(7)
        for patch in [bilinear_patch((0, 0), (2, 0), (2.5, 1.5), (0, 1)),
                      quartercircle3_patches()[2]]:
            refined = refine_uniform(patch, 2)
            for u, v in rng.random((100, 2)):
                d = refined.eval_point(u, v) - patch.eval_point(u, v)
                assert np.linalg.norm(d) <= 1e-12

    def test_quasi_uniformity_preserved(self):
        patch = bilinear_patch((0, 0), (1, 0), (1, 1), (0, 1))
        refined = refine_uniform(patch, 3)
        assert refined.space.space_u.quasi_uniformity == pytest.approx(1.0)

    def test_zero_levels_is_identity(self):
        patch = bilinear_patch((0, 0), (1, 0), (1, 1), (0, 1))
        assert refine_uniform(patch, 0) is patch

    def test_negative_levels_rejected(self):
        patch = bilinear_patch((0, 0), (1, 0), (1, 1), (0, 1))
        with pytest.raises(ConfigError):
            refine_uniform(patch, -1)


class TestGeometryFiles:
    def test_round_trip(self, tmp_path):
        patches, _, _ = builtin_geometry("quartercircle3")
        path = tmp_path / "geo.json"
        save_geometry(path, patches, dirichlet_sides=[(0, "south"), (0, "west")])
        loaded, overrides, dirichlet = load_geometry(path)
        assert overrides is None
        assert dirichlet == [(0, "south"), (0, "west")]
        assert len(loaded) == 3
        rng = np.random.default_rng(1)
        for orig, new in zip(patches, loaded):
            for u, v in rng.random((20, 2)):
                np.testing.assert_allclose(
                    orig.eval_point(u, v), new.eval_point(u, v), atol=1e-14)

    def test_weights_must_be_positive(self):
        sp = tensor_space(1, [0, 1], [0, 1])
        cp = np.zeros((2, 2, 2))
        with pytest.raises(ConfigError):
            PatchGeometry(sp, cp, weights=np.array([[1.0, -1.0], [1.0, 1.0]]))
