import numpy as np
import pytest

from cgs.errors import BadSpec
from cgs.metrics import edge_band
from cgs.synth import ChartSpec, DEFAULT_PALETTE, ORANGE_INDEX, gen_grid_chart, gen_pie_chart


class TestGridChart:
    def test_default_geometry(self):
        image, lm = gen_grid_chart(ChartSpec.default_grid())
        assert image.shape == (200, 300, 3)
        assert lm.region_count == 6
        assert lm.labels[0, 0] == 1
        assert lm.labels[199, 299] == 6

    def test_block_boundaries(self):
        _, lm = gen_grid_chart(ChartSpec.default_grid())
        assert np.all(lm.labels[99, :100] == 1) and np.all(lm.labels[100, :100] == 4)
        assert lm.labels[0, 99] == 1 and lm.labels[0, 100] == 2
        assert lm.labels[0, 199] == 2 and lm.labels[0, 200] == 3

    def test_blocks_are_constant_and_bijective(self):
        image, lm = gen_grid_chart(ChartSpec.default_grid())
        palette = np.asarray(DEFAULT_PALETTE, float) / 255.0
        for rid in range(1, 7):
            block = image[lm.labels == rid]
            assert np.array_equal(block, np.tile(palette[rid - 1], (block.shape[0], 1)))

    def test_orange_block_present(self):
        assert DEFAULT_PALETTE[ORANGE_INDEX] == (255, 165, 0)

    def test_deterministic(self):
        a_img, a_lm = gen_grid_chart(ChartSpec.default_grid())
        b_img, b_lm = gen_grid_chart(ChartSpec.default_grid())
        assert np.array_equal(a_img, b_img)
        assert np.array_equal(a_lm.labels, b_lm.labels)

    def test_bad_specs(self):
        with pytest.raises(BadSpec):
            gen_grid_chart(ChartSpec(kind="pie"))
        with pytest.raises(BadSpec):
            gen_grid_chart(ChartSpec(kind="grid", width=301))
        spec = ChartSpec(kind="grid", colors=DEFAULT_PALETTE[:4])
        with pytest.raises(BadSpec):
            gen_grid_chart(spec)

    def test_edge_band_nonempty(self):
        _, lm = gen_grid_chart(ChartSpec.default_grid())
        assert edge_band(lm).pixel_count > 0


class TestPieChart:
    def test_default_geometry(self):
        image, lm = gen_pie_chart(ChartSpec.default_pie())
        assert image.shape == (300, 300, 3)
        assert lm.region_count == 7  # 6 sectors + background

    def test_four_equal_sectors_membership(self):
        spec = ChartSpec(kind="pie", width=300, height=300,
                         colors=DEFAULT_PALETTE[:4], fractions=(0.25,) * 4,
                         blur_sigma=0.0)
        image, lm = gen_pie_chart(spec)
        # 45 degrees (x right, y down): inside sector 1's [0, 90) span.
        y, x = 200, 200  # relative to center (150, 150): dx=dy=+50.5
        assert lm.labels[y, x] == 1
        assert np.array_equal(image[y, x], np.asarray(DEFAULT_PALETTE[0], float) / 255)
        # 135 degrees falls in sector 2.
        assert lm.labels[200, 100] == 2

    def test_center_tie_break_lowest_sector(self):
        spec = ChartSpec(kind="pie", width=301, height=301, center=(150.5, 150.5),
                         radius=120.0, colors=DEFAULT_PALETTE[:6],
                         fractions=(1 / 6,) * 6)
        _, lm = gen_pie_chart(spec)
        assert lm.labels[150, 150] == 1

    def test_outside_disc_is_background(self):
        _, lm = gen_pie_chart(ChartSpec.default_pie())
        assert lm.labels[0, 0] == 7
        assert lm.labels[299, 299] == 7

    def test_blur_touches_image_not_labels(self):
        crisp = gen_pie_chart(ChartSpec(kind="pie", width=300, height=300,
                                        blur_sigma=0.0,
                                        colors=DEFAULT_PALETTE,
                                        fractions=(1 / 6,) * 6))
        soft = gen_pie_chart(ChartSpec.default_pie())
        assert np.array_equal(crisp[1].labels, soft[1].labels)
        assert not np.array_equal(crisp[0], soft[0])

    def test_deterministic(self):
        a = gen_pie_chart(ChartSpec.default_pie())
        b = gen_pie_chart(ChartSpec.default_pie())
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1].labels, b[1].labels)

    def test_bad_specs(self):
        with pytest.raises(BadSpec):
            gen_pie_chart(ChartSpec.default_grid())
        with pytest.raises(BadSpec):
            gen_pie_chart(ChartSpec(kind="pie", width=300, height=300, radius=200.0))
        with pytest.raises(BadSpec):
            gen_pie_chart(ChartSpec(kind="pie", width=300, height=300,
                                    fractions=(0.5, 0.6), colors=DEFAULT_PALETTE[:2]))

    def test_edge_band_nonempty(self):
        _, lm = gen_pie_chart(ChartSpec.default_pie())
        assert edge_band(lm).pixel_count > 0


class TestChartSpecFromDict:
    def test_round_trip_defaults(self):
        spec = ChartSpec.from_dict({"kind": "grid"})
        assert spec.width == 300 and spec.height == 200

    def test_unknown_key(self):
        with pytest.raises(BadSpec):
            ChartSpec.from_dict({"kind": "grid", "shape": "round"})
