"""Built-in benchmark scenarios and config loading."""

import numpy as np
import pytest
import yaml

from spacetimedd.scenarios import (
    SECONDS_PER_YEAR,
    config_hash,
    load_config,
    scenario_from_config,
    scenario_test1,
    scenario_test2,
)


class TestScenarioTest1:
    def test_defaults(self):
        sc = scenario_test1(ratio=100, scale=1)
        assert sc.nx == sc.ny == 200
        assert [c.diffusion for c in sc.coefficients] == [0.002, 0.2]
        assert [c.porosity for c in sc.coefficients] == [1.0, 1.0]
        assert [p.n_slabs for p in sc.partitions] == [50, 200]
        assert sc.final_time == 1.0
        # initial bump: exp((x-0.55)^2 + (y-0.5)^2/2)
        np.testing.assert_allclose(sc.c0_fn(0.55, 0.5), 1.0)
        np.testing.assert_allclose(sc.c0_fn(0.0, 0.5), np.exp(0.55**2))

    def test_ratio_variants(self):
        assert scenario_test1(ratio=10).coefficients[0].diffusion == 0.02
        assert scenario_test1(ratio=10).partitions[0].n_slabs == 150
        assert scenario_test1(ratio=1000).coefficients[0].diffusion == 0.0002
        with pytest.raises(ValueError):
            scenario_test1(ratio=7)

    def test_scale_divides_resolution(self):
        sc = scenario_test1(ratio=100, scale=4)
        assert sc.nx == 50
        assert [p.n_slabs for p in sc.partitions] == [12, 50]

    def test_odd_cell_count_rejected(self):
        # the subdomain split at x = 0.5 needs an even cell count
        with pytest.raises(ValueError):
            scenario_test1(ratio=100, scale=8)

    def test_n_slabs_override(self):
        sc = scenario_test1(ratio=100, scale=4, n_slabs=(7, 7))
        assert [p.n_slabs for p in sc.partitions] == [7, 7]

    def test_decomposition_splits_at_midline(self):
        sc = scenario_test1(ratio=100, scale=10)
        d = sc.decomposition()
        assert d.n_subdomains == 2
        mids = d.mesh.edge_midpoints()[d.interfaces[(0, 1)].edges]
        np.testing.assert_allclose(mids[:, 0], 0.5)

    def test_with_partitions_copies(self):
        from spacetimedd.timegrid import TimePartition

        sc = scenario_test1(scale=10)
        sc2 = sc.with_partitions([TimePartition.uniform(1.0, 3)] * 2)
        assert sc2.partitions[0].n_slabs == 3
        assert sc.partitions[0].n_slabs == 5  # original untouched


class TestScenarioTest2:
    def test_geometry_and_materials(self):
        sc = scenario_test2(T_years=2e5, scale=10)
        assert len(sc.boxes) == 9
        rep = sc.meta["repository_subdomain"]
        assert sc.boxes[rep] == (500.0, 3450.0, 65.0, 75.0)
        assert sc.coefficients[rep].porosity == 0.2
        assert sc.coefficients[rep].diffusion == 2e-9
        for s in range(9):
            if s != rep:
                assert sc.coefficients[s].porosity == 0.05
                assert sc.coefficients[s].diffusion == 5e-12

    def test_time_partitions_in_years(self):
        sc = scenario_test2(T_years=2e5, scale=1)
        rep = sc.meta["repository_subdomain"]
        assert sc.partitions[rep].n_slabs == 100  # 2e5 / 2000
        assert sc.partitions[0].n_slabs == 20  # 2e5 / 10000
        np.testing.assert_allclose(sc.final_time, 2e5 * SECONDS_PER_YEAR)
        # slab widths come back as whole years exactly
        np.testing.assert_allclose(
            sc.partitions[rep].widths / SECONDS_PER_YEAR, 2000.0
        )

    def test_source_cutoff(self):
        sc = scenario_test2(T_years=2e5, scale=10)
        x, y = np.array([2000.0]), np.array([70.0])
        yr = SECONDS_PER_YEAR
        np.testing.assert_allclose(sc.f_fn(x, y, 0.0, 1e4 * yr), 1e-5)
        # slab straddling the 1e5-year cutoff gets the covered fraction
        np.testing.assert_allclose(
            sc.f_fn(x, y, 0.9e5 * yr, 1.1e5 * yr), 0.5e-5
        )
        np.testing.assert_allclose(sc.f_fn(x, y, 1.2e5 * yr, 1.4e5 * yr), 0.0)
        # and nothing outside the repository
        np.testing.assert_allclose(sc.f_fn(np.array([100.0]), y, 0.0, 1e4 * yr), 0.0)

    def test_graded_mesh_resolves_band(self):
        sc = scenario_test2(scale=10)
        mesh = sc.mesh()
        # uniform inside the repository band, coarser outside
        in_band = (mesh.xs[:-1] >= 500.0 - 1e-6) & (mesh.xs[1:] <= 3450.0 + 1e-6)
        band_dx = mesh.dx[in_band]
        np.testing.assert_allclose(band_dx, band_dx[0])
        assert mesh.dx.max() > band_dx[0]
        # subdomain corners stay on mesh lines (decompose would raise)
        assert sc.decomposition().n_subdomains == 9

    def test_boundary_layout(self):
        sc = scenario_test2(scale=10)
        assert sc.boundary["top"][0] == "dirichlet"
        assert sc.boundary["bottom"][0] == "dirichlet"
        assert sc.boundary["left"][0] == "neumann"
        assert sc.boundary["right"][0] == "neumann"


class TestRobinParams:
    def test_explicit(self):
        sc = scenario_test1(scale=10, robin_source="explicit",
                            explicit_alphas={(0, 1): 3.0, (1, 0): 4.0})
        assert sc.robin_params() == {(0, 1): 3.0, (1, 0): 4.0}

    def test_explicit_missing(self):
        sc = scenario_test1(scale=10, robin_source="explicit")
        with pytest.raises(ValueError):
            sc.robin_params()

    def test_optimized_positive_and_directed(self):
        sc = scenario_test1(scale=10, robin_source="opt1")
        a = sc.robin_params()
        assert set(a) == {(0, 1), (1, 0)}
        assert all(v > 0.0 for v in a.values())

    def test_opt2_differs_from_opt1(self):
        s1 = scenario_test1(scale=10, robin_source="opt1").robin_params()
        s2 = scenario_test1(scale=10, robin_source="opt2").robin_params()
        assert not np.allclose(
            [s1[(0, 1)], s1[(1, 0)]], [s2[(0, 1)], s2[(1, 0)]], rtol=1e-6
        )


class TestConfig:
    def test_load_and_overrides(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        p.write_text(yaml.safe_dump({
            "scenario": "test1", "ratio": 10, "scale": 10,
            "method": "method2-jacobi", "tol": 1e-7, "seed": 9,
            "alphas": {"0,1": 2.0, "1,0": 3.0},
        }))
        sc, raw = load_config(p)
        assert sc.name == "test1-ratio10"
        assert sc.method == "method2-jacobi"
        assert sc.tol == 1e-7
        assert sc.seed == 9
        assert sc.robin_source == "explicit"
        assert sc.explicit_alphas == {(0, 1): 2.0, (1, 0): 3.0}

    def test_unknown_scenario(self):
        with pytest.raises(ValueError):
            scenario_from_config({"scenario": "test3"})

    def test_config_hash_order_independent(self):
        a = {"x": 1, "y": [1, 2]}
        b = {"y": [1, 2], "x": 1}
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash({"x": 2, "y": [1, 2]})
        assert len(config_hash(a)) == 16
