"""End-to-end runners: artifacts, streaming reference errors, studies."""

import json

import numpy as np
import pytest

from spacetimedd import runner
from spacetimedd import solvers as sv
from spacetimedd.scenarios import scenario_test1, scenario_test2
from spacetimedd.timegrid import TimePartition


def tiny_test1(**kw):
    return scenario_test1(ratio=100, scale=20, n_slabs=(4, 4), **kw)


class TestRun:
    def test_monodomain_artifacts(self, tmp_path):
        art = runner.run(tiny_test1(), tmp_path, method="monodomain")
        assert (tmp_path / "manifest.json").exists()
        snaps = list((tmp_path / "snapshots").glob("*.csv"))
        assert len(snaps) == 3
        assert len(list((tmp_path / "snapshots").glob("*.png"))) == 3
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert "config_hash" in manifest and "timings_s" in manifest

    def test_method1_report_and_figures(self, tmp_path):
        sc = tiny_test1(tol=1e-9)
        art = runner.run(sc, tmp_path, method="method1")
        assert art.summary["converged"]
        assert (tmp_path / "report.csv").exists()
        assert (tmp_path / "convergence.png").exists()
        header = (tmp_path / "report.csv").read_text().splitlines()[0]
        assert header == "iteration,subdomain_solves,rel_residual,err_c,err_r"

    def test_method2_variants_agree(self, tmp_path):
        sc = tiny_test1(tol=1e-10, robin_source="explicit",
                        explicit_alphas={(0, 1): 1.0, (1, 0): 1.0})
        a = runner.run(sc, tmp_path / "g", method="method2-gmres")
        b = runner.run(sc, tmp_path / "j", method="method2-jacobi", max_iter=400)
        for fa, fb in zip(a.fields, b.fields):
            assert np.abs(fa.c - fb.c).max() < 1e-7

    def test_unknown_method(self, tmp_path):
        with pytest.raises(ValueError):
            runner.run(tiny_test1(), tmp_path, method="method3")

    def test_rerun_bit_identical(self, tmp_path):
        sc = tiny_test1(tol=1e-9)
        runner.run(sc, tmp_path / "a", method="method1", render_figures=False)
        runner.run(sc, tmp_path / "b", method="method1", render_figures=False)
        assert (tmp_path / "a/report.csv").read_bytes() == \
               (tmp_path / "b/report.csv").read_bytes()

    def test_probe_written_for_repository_scenario(self, tmp_path):
        sc = scenario_test2(T_years=2e5, scale=10, tol=1e-6)
        art = runner.run(sc, tmp_path, method="monodomain")
        assert (tmp_path / "probe.csv").exists()
        rows = (tmp_path / "probe.csv").read_text().splitlines()
        assert rows[0] == "t,c"
        assert len(rows) - 1 == sc.partitions[0].n_slabs

    def test_probe_cell_sits_above_repository(self):
        sc = scenario_test2(T_years=2e5, scale=10)
        cell = runner.probe_cell(sc)
        mesh = sc.mesh()
        x, y = mesh.cell_centers()[cell]
        assert 500.0 < x < 3450.0
        assert 75.0 < y < 75.0 + 3 * mesh.dy.max()


class TestStreamingReferenceError:
    def test_matches_direct_error(self):
        # the streamed-integral error formula must reproduce the direct
        # field-vs-field computation when the reference field is stored
        sc = tiny_test1(tol=1e-11)
        T = sc.final_time
        collect = TimePartition.uniform(T, 8)
        ref_part = TimePartition.uniform(T, 32)
        system, _, _, _ = sc.monodomain()
        acc = runner._ReferenceAccumulator(system, ref_part, collect)
        ref_fld, _ = runner.solve_monodomain(sc, partition=ref_part,
                                             slab_callback=acc)
        ctx = sc.context()
        alphas = {(0, 1): 1.0, (1, 0): 1.0}
        xi, _ = sv.solve_method2_gmres(ctx, alphas, tol=1e-11)
        fields = sv.reconstruct_method2(ctx, xi, alphas)
        ec_s, er_s = runner._error_vs_accumulated(ctx, fields, acc)
        ec_d, er_d = sv.multidomain_error(ctx, fields, ref_fld, system)
        np.testing.assert_allclose(ec_s, ec_d, rtol=1e-9)
        np.testing.assert_allclose(er_s, er_d, rtol=1e-9)

    def test_reference_against_itself_is_zero(self):
        sc = tiny_test1()
        T = sc.final_time
        part = TimePartition.uniform(T, 8)
        system, bcs, c0, f = sc.monodomain(part)
        acc = runner._ReferenceAccumulator(system, part, part)
        from spacetimedd import mixedfem as mf

        fld = mf.march(system, part, c0, bcs, f=f, slab_callback=acc)
        # treat the monodomain itself as a 1-subdomain run via the context
        # of a single-box decomposition
        err2 = acc.norm_c2 - 2 * float(np.sum(system.areas * fld.c * acc.Ic)) \
            + float(part.widths @ np.sum(system.areas * fld.c**2, axis=1))
        assert abs(err2) < 1e-12 * acc.norm_c2


class TestTimeGridStudy:
    def test_tiny_study_artifacts_and_slopes(self, tmp_path):
        sc = tiny_test1(tol=1e-10)
        art = runner.time_grid_study(sc, dt_coarse=1.0 / 4, dt_fine=1.0 / 8,
                                     n_refinements=2, out_dir=tmp_path,
                                     tol=1e-10, ref_factor=4)
        assert (tmp_path / "errors_vs_dt.csv").exists()
        assert (tmp_path / "errors_vs_dt.png").exists()
        assert len(art.rows) == 8  # 4 layouts x 2 levels
        assert set(art.slopes) == {(l, k) for l in
                                   ("fine-fine", "coarse-fine", "fine-coarse",
                                    "coarse-coarse") for k in ("err_c", "err_r")}
        # refining must not increase the error on any layout
        for layout in ("fine-fine", "coarse-coarse"):
            sel = sorted((r for r in art.rows if r["layout"] == layout),
                         key=lambda r: r["level"])
            assert sel[1]["err_c"] <= sel[0]["err_c"]

    def test_bad_dt_ordering(self):
        with pytest.raises(ValueError):
            runner.time_grid_study(tiny_test1(), dt_coarse=0.1, dt_fine=0.2,
                                   n_refinements=1)


class TestLandscape:
    def test_smoke(self, tmp_path):
        sc = tiny_test1()
        art = runner.landscape(sc, 1e-2, 1e2, n=4, n_iter=5, seed=0,
                               out_dir=tmp_path)
        assert art.residuals.shape == (4, 4)
        assert np.all(np.isfinite(art.residuals))
        assert (tmp_path / "landscape.csv").exists()
        assert (tmp_path / "landscape.png").exists()
        a12, a21 = art.summary["optimized_point"]
        assert a12 > 0 and a21 > 0
