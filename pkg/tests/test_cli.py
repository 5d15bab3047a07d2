import csv
import json

import numpy as np
import pytest
from PIL import Image

from cgs import io as cgs_io
from cgs.cli import main
from cgs.core import TrainConfig
from cgs.synth import ChartSpec, DEFAULT_PALETTE, gen_grid_chart


@pytest.fixture
def small_chart(tmp_path):
    """A 36x24 six-block chart plus config tuned for fast CLI fits."""
    spec = ChartSpec(kind="grid", width=36, height=24)
    image, lm = gen_grid_chart(spec)
    image_path = tmp_path / "target.png"
    labels_path = tmp_path / "labels.png"
    cgs_io.save_image(image, image_path)
    cgs_io.save_label_map(lm, labels_path)
    cfg = TrainConfig(num_gaussians=6, total_iterations=120,
                      warmup_refresh_interval=10, rng_seed=9)
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg.to_dict()))
    return image_path, labels_path, cfg_path


def run(args):
    return main([str(a) for a in args])


class TestGenChart:
    def test_grid_outputs(self, tmp_path, capsys):
        assert run(["gen-chart", "--kind", "grid", "--out-dir", tmp_path]) == 0
        info = json.loads(capsys.readouterr().out)
        assert (info["width"], info["height"], info["regions"]) == (300, 200, 6)
        img = cgs_io.load_image(tmp_path / "target.png")
        assert img.shape == (200, 300, 3)
        lm = cgs_io.load_label_map(tmp_path / "labels.png")
        assert lm.region_count == 6

    def test_pie_outputs(self, tmp_path, capsys):
        assert run(["gen-chart", "--kind", "pie", "--out-dir", tmp_path]) == 0
        info = json.loads(capsys.readouterr().out)
        assert (info["width"], info["height"]) == (300, 300)
        assert cgs_io.load_image(tmp_path / "target.png").shape == (300, 300, 3)

    def test_missing_out_dir(self, tmp_path, capsys):
        rc = run(["gen-chart", "--kind", "grid", "--out-dir", tmp_path / "absent"])
        assert rc == 2

    def test_custom_spec(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({"kind": "grid", "width": 30, "height": 20}))
        assert run(["gen-chart", "--kind", "grid", "--out-dir", tmp_path,
                    "--spec", spec_path]) == 0
        assert json.loads(capsys.readouterr().out)["width"] == 30


class TestFit:
    def test_full_run_artifacts(self, tmp_path, small_chart, capsys):
        image, labels, cfg = small_chart
        out = tmp_path / "model.cgs"
        rc = run(["fit", "--image", image, "--labels", labels,
                  "--config", cfg, "--out", out])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert "ef_psnr" in summary["metrics"]
        assert summary["model_bytes"] == 4 + 8 + 40 * 6
        assert out.exists()
        assert out.with_suffix(".render.png").exists()
        report = json.loads(out.with_suffix(".report.json").read_text())
        assert "ef_psnr" in report["final_metrics"]
        with open(out.with_suffix(".loss.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["iteration"] for r in rows] == ["100"]
        assert float(rows[0]["loss"]) >= 0.0

    def test_baseline_flags(self, tmp_path, small_chart):
        image, labels, cfg = small_chart
        out = tmp_path / "base.cgs"
        rc = run(["fit", "--image", image, "--labels", labels, "--config", cfg,
                  "--out", out, "--no-guidance", "--no-warmup", "--clamp"])
        assert rc == 0
        gs = cgs_io.load_model(out)
        assert np.all(gs.region_ids == 0)

    def test_no_guidance_requires_no_warmup(self, tmp_path, small_chart):
        image, labels, cfg = small_chart
        rc = run(["fit", "--image", image, "--labels", labels, "--config", cfg,
                  "--out", tmp_path / "x.cgs", "--no-guidance"])
        assert rc == 1

    def test_invalid_config_key(self, tmp_path, small_chart):
        image, labels, _ = small_chart
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"gaussians": 5}))
        rc = run(["fit", "--image", image, "--labels", labels, "--config", bad,
                  "--out", tmp_path / "x.cgs"])
        assert rc == 1

    def test_labels_required_with_guidance(self, tmp_path, small_chart):
        image, _, cfg = small_chart
        rc = run(["fit", "--image", image, "--config", cfg,
                  "--out", tmp_path / "x.cgs"])
        assert rc == 1

    def test_preset_overrides_budget(self, tmp_path, small_chart, capsys):
        image, labels, cfg = small_chart
        out = tmp_path / "pre.cgs"
        rc = run(["fit", "--image", image, "--labels", labels, "--config", cfg,
                  "--out", out, "--preset", "chart", "--iterations", "40"])
        assert rc == 0
        gs = cgs_io.load_model(out)
        assert gs.n == 20  # preset budget; iterations overridden for speed


class TestRender:
    def test_matches_fit_render_within_quantum(self, tmp_path, small_chart, capsys):
        image, labels, cfg = small_chart
        out = tmp_path / "model.cgs"
        assert run(["fit", "--image", image, "--labels", labels,
                    "--config", cfg, "--out", out]) == 0
        capsys.readouterr()
        re_out = tmp_path / "re.png"
        rc = run(["render", "--model", out, "--labels", labels,
                  "--width", 36, "--height", 24, "--out", re_out])
        assert rc == 0
        a = cgs_io.load_image(out.with_suffix(".render.png"))
        b = cgs_io.load_image(re_out)
        assert np.abs(a - b).max() <= 1.0 / 255 + 1e-12

    def test_upscale_moves_peak(self, tmp_path, capsys):
        from cgs.core import GaussianSet

        gs = GaussianSet(np.array([[8.25, 6.25]]), np.array([[2.0, 0.0, 2.0]]),
                         np.array([[1.0, 1.0, 1.0]]), np.array([1.0]),
                         np.zeros(1, np.int32))
        model = tmp_path / "one.cgs"
        cgs_io.save_model(gs, model)
        small = tmp_path / "s.png"
        big = tmp_path / "b.png"
        assert run(["render", "--model", model, "--width", 16, "--height", 12,
                    "--out", small]) == 0
        assert run(["render", "--model", model, "--width", 32, "--height", 24,
                    "--base-width", 16, "--base-height", 12, "--out", big]) == 0
        lum_s = cgs_io.load_image(small).sum(axis=2)
        lum_b = cgs_io.load_image(big).sum(axis=2)
        ys, xs = np.unravel_index(np.argmax(lum_s), lum_s.shape)
        yb, xb = np.unravel_index(np.argmax(lum_b), lum_b.shape)
        assert abs(xb - (2 * xs + 0.5)) <= 1.0
        assert abs(yb - (2 * ys + 0.5)) <= 1.0

    def test_guided_model_needs_labels(self, tmp_path, small_chart):
        image, labels, cfg = small_chart
        out = tmp_path / "model.cgs"
        assert run(["fit", "--image", image, "--labels", labels,
                    "--config", cfg, "--out", out]) == 0
        rc = run(["render", "--model", out, "--width", 36, "--height", 24,
                  "--out", tmp_path / "no.png"])
        assert rc == 1

    def test_bad_magic_is_runtime_error(self, tmp_path):
        bad = tmp_path / "bad.cgs"
        bad.write_bytes(b"JUNKJUNKJUNKJUNK")
        rc = run(["render", "--model", bad, "--width", 8, "--height", 8,
                  "--out", tmp_path / "x.png"])
        assert rc == 2


class TestEval:
    def test_identical_files(self, tmp_path, capsys):
        assert run(["gen-chart", "--kind", "grid", "--out-dir", tmp_path]) == 0
        capsys.readouterr()
        rc = run(["eval", "--ref", tmp_path / "target.png",
                  "--test", tmp_path / "target.png",
                  "--labels", tmp_path / "labels.png"])
        assert rc == 0
        bundle = json.loads(capsys.readouterr().out)
        assert bundle["psnr"] == 99.0
        assert bundle["ms_ssim"] == 1.0
        assert bundle["ef_psnr"] == 99.0

    def test_band_zero_uses_boundary_only(self, tmp_path, capsys):
        assert run(["gen-chart", "--kind", "grid", "--out-dir", tmp_path]) == 0
        capsys.readouterr()
        rc = run(["eval", "--ref", tmp_path / "target.png",
                  "--test", tmp_path / "target.png",
                  "--labels", tmp_path / "labels.png", "--band", 0])
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["band_pixels"] > 0

    def test_single_region_warns_and_nulls(self, tmp_path, capsys):
        img = tmp_path / "i.png"
        cgs_io.save_image(np.full((180, 180, 3), 0.5), img)
        lbl = tmp_path / "l.png"
        Image.fromarray(np.ones((180, 180), np.uint8), "L").save(lbl)
        rc = run(["eval", "--ref", img, "--test", img, "--labels", lbl])
        assert rc == 0
        out = capsys.readouterr()
        bundle = json.loads(out.out)
        assert bundle["ef_psnr"] is None
        assert "single region" in out.err


class TestAblate:
    def test_six_rows_and_determinism(self, tmp_path, small_chart, capsys):
        image, labels, _ = small_chart
        cfg = TrainConfig(num_gaussians=4, total_iterations=20,
                          warmup_refresh_interval=5, rng_seed=4)
        cfg_path = tmp_path / "ab.json"
        cfg_path.write_text(json.dumps(cfg.to_dict()))
        outs = []
        for run_dir in ("r1", "r2"):
            d = tmp_path / run_dir
            d.mkdir()
            rc = run(["ablate", "--image", image, "--labels", labels,
                      "--config", cfg_path, "--out-dir", d])
            assert rc == 0
            outs.append((d / "ablation.csv").read_text())
        assert outs[0] == outs[1]
        with open(tmp_path / "r1" / "ablation.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        toggles = [(r["contour_guidance"], r["warm_up"], r["remove_clamp"])
                   for r in rows]
        assert toggles == [("0", "0", "0"), ("0", "0", "1"), ("1", "0", "0"),
                           ("1", "0", "1"), ("1", "1", "0"), ("1", "1", "1")]
        for i in range(6):
            tag = f"g{toggles[i][0]}w{toggles[i][1]}c{toggles[i][2]}"
            assert (tmp_path / "r1" / f"render_{tag}.png").exists()
