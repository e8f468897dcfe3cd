import numpy as np
import pytest

import reference
from airwayseg import (
    BinaryMask,
    DegenerateDepthError,
    DepthImage,
    InstanceMap,
    Peak,
    PipelineConfig,
    area_filter,
    compact_watershed,
    compose,
    detect_peaks,
    invert_depth,
    kmeans2_depth,
    run_pipeline,
    smooth_depth,
)
from airwayseg import backend, generate, random_scene
from airwayseg.depthseg import min_peak_distance


def depth_of(rows) -> DepthImage:
    return DepthImage(data=np.asarray(rows, dtype=np.float64))


class TestKmeans2Depth:
    def test_bimodal_example_matches_brute_force(self):
        d = depth_of([[1, 1, 2, 9, 10]])
        mask, thr = kmeans2_depth(d)
        assert mask.data.tolist() == [[False, False, False, True, True]]
        assert 2 < thr < 9
        oracle = reference.brute_force_two_means(d.data.ravel())
        assert np.array_equal(mask.data.ravel(), oracle)

    def test_constant_image_degenerate(self):
        with pytest.raises(DegenerateDepthError, match="one cluster"):
            kmeans2_depth(depth_of([[5.0, 5.0], [5.0, 5.0]]))

    def test_all_invalid_degenerate(self):
        d = DepthImage(data=np.ones((4, 4)), valid=np.zeros((4, 4), bool))
        with pytest.raises(DegenerateDepthError, match="invalid"):
            kmeans2_depth(d)

    def test_two_point_symmetry(self):
        mask, thr = kmeans2_depth(depth_of([[0.0, 10.0]]))
        assert mask.data.tolist() == [[False, True]]
        assert thr == 5.0

    def test_invalid_pixels_excluded_and_false(self):
        data = np.array([[1.0, 1.0, 9.0, 50.0]])
        valid = np.array([[True, True, True, False]])
        mask, thr = kmeans2_depth(DepthImage(data=data, valid=valid))
        # the 50 is invalid: clusters must form from {1,1,9} only
        assert thr < 9
        assert mask.data.tolist() == [[False, False, True, False]]

    def test_partition_matches_brute_force_on_random_mixtures(self, rng):
        # balanced two-mode samples: the regime where the (min, max)-seeded
        # Lloyd fixed point coincides with the global WCSS optimum
        for _ in range(30):
            n = int(rng.integers(8, 400))
            n1 = max(1, int(round(float(rng.uniform(0.2, 0.8)) * n)))
            lo = rng.normal(2.0, 0.3, n1)
            hi = rng.normal(7.0, 0.4, max(1, n - n1))
            vals = np.clip(np.concatenate([lo, hi]), 0, None)
            if np.unique(vals).size < 2:
                continue
            d = DepthImage(data=vals.reshape(1, -1))
            mask, _ = kmeans2_depth(d)
            assert np.array_equal(
                mask.data.ravel(), reference.brute_force_two_means(vals)
            )


class TestSmoothDepth:
    def test_impulse_response(self, backend_name):
        img = np.zeros((5, 5))
        img[2, 2] = 9.0
        out = smooth_depth(depth_of(img), PipelineConfig(smoothing_passes=1))
        expected = np.zeros((5, 5))
        expected[1:4, 1:4] = 1.0
        assert np.array_equal(out.data, expected)

    def test_constant_unchanged(self, backend_name):
        img = np.full((8, 8), 3.5)
        out = smooth_depth(depth_of(img), PipelineConfig(smoothing_passes=4))
        assert np.allclose(out.data, 3.5)

    def test_matches_naive_triple_convolution(self, backend_name, rng):
        data = rng.random((16, 16)) * 5
        cfg = PipelineConfig(smoothing_passes=3, smoothing_kernel=3)
        out = smooth_depth(depth_of(data), cfg)
        oracle = reference.naive_box_smooth(data, np.ones((16, 16), bool), 3, 3)
        assert np.allclose(out.data, oracle, rtol=1e-12, atol=1e-12)

    def test_invalid_pixels_excluded(self, backend_name):
        data = np.zeros((5, 5))
        data[2, 2] = 9.0
        valid = np.ones((5, 5), bool)
        valid[2, 1] = False
        out = smooth_depth(
            DepthImage(data=data, valid=valid), PipelineConfig(smoothing_passes=1)
        )
        oracle = reference.naive_box_smooth(np.where(valid, data, 0.0), valid, 3, 1)
        assert np.allclose(out.data, oracle, rtol=1e-12, atol=1e-12)
        assert out.data[2, 1] == 0.0  # invalid stays zeroed
        assert np.array_equal(out.valid, valid)

    def test_mirror_commutation_exact_on_integers(self, backend_name, rng):
        data = rng.integers(0, 100, (12, 17)).astype(np.float64)
        cfg = PipelineConfig(smoothing_passes=1)
        a = smooth_depth(depth_of(data[:, ::-1]), cfg).data
        b = smooth_depth(depth_of(data), cfg).data[:, ::-1]
        assert np.array_equal(a, b)
        a = smooth_depth(depth_of(data[::-1, :]), cfg).data
        b = smooth_depth(depth_of(data), cfg).data[::-1, :]
        assert np.array_equal(a, b)

    def test_mirror_commutation_float(self, backend_name, rng):
        data = rng.random((10, 14)) * 3
        cfg = PipelineConfig(smoothing_passes=3)
        a = smooth_depth(depth_of(data[:, ::-1]), cfg).data
        b = smooth_depth(depth_of(data), cfg).data[:, ::-1]
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_kernel_five(self, backend_name, rng):
        data = rng.random((9, 9))
        cfg = PipelineConfig(smoothing_passes=2, smoothing_kernel=5)
        out = smooth_depth(depth_of(data), cfg)
        oracle = reference.naive_box_smooth(data, np.ones((9, 9), bool), 5, 2)
        assert np.allclose(out.data, oracle, rtol=1e-12, atol=1e-12)


def row_signal_image(values):
    """Embed a 1-D signal in row 0 of a 10-row image, mask restricted to row 0."""
    sig = np.zeros((10, len(values)))
    sig[0, :] = values
    mask = np.zeros_like(sig, dtype=bool)
    mask[0, :] = True
    return depth_of(sig), BinaryMask(mask)


class TestDetectPeaks:
    def test_greedy_suppression_example(self, backend_name):
        # signal [0,5,0,0,4,0,0,0,3,0], min distance 4: col 4 suppressed by
        # col 1, plateau zero at col 6 suppressed by col 8
        img, mask = row_signal_image([0, 5, 0, 0, 4, 0, 0, 0, 3, 0])
        cfg = PipelineConfig(peak_spacing_fraction=0.4)  # ceil(0.4*10) = 4
        peaks = detect_peaks(img, mask, cfg)
        assert [(p.row, p.col) for p in peaks] == [(0, 1), (0, 8)]
        assert peaks[0].value == 5.0

    @pytest.mark.parametrize("fraction", [0.05, 0.3, 0.9])
    def test_single_global_maximum(self, backend_name, fraction):
        # strictly concave surface: the only >=-all-neighbors pixel is the top,
        # so any minimum distance yields exactly one peak
        rr, cc = np.mgrid[0:10, 0:10].astype(float)
        img = 100.0 - ((rr - 4) ** 2 + (cc - 7) ** 2)
        peaks = detect_peaks(
            depth_of(img),
            BinaryMask(np.ones((10, 10), bool)),
            PipelineConfig(peak_spacing_fraction=fraction),
        )
        assert [(p.row, p.col) for p in peaks] == [(4, 7)]

    def test_equal_maxima_tiebreak_row_major(self, backend_name):
        img = np.zeros((12, 12))
        img[2, 0] = 7.0
        img[2, 10] = 7.0  # 10 px apart, min distance 5
        cfg = PipelineConfig(peak_spacing_fraction=5 / 12)
        assert min_peak_distance(cfg, 12, 12) == 5
        peaks = detect_peaks(depth_of(img), BinaryMask(np.ones((12, 12), bool)), cfg)
        assert [(p.row, p.col) for p in peaks[:2]] == [(2, 0), (2, 10)]

    def test_empty_mask_gives_empty_list(self, backend_name):
        img = np.ones((8, 8))
        peaks = detect_peaks(depth_of(img), BinaryMask(np.zeros((8, 8), bool)), PipelineConfig())
        assert peaks == []

    def test_pairwise_distances_and_mask_membership(self, backend_name, rng):
        for _ in range(20):
            data = rng.random((20, 20))
            mask = rng.random((20, 20)) > 0.3
            cfg = PipelineConfig(peak_spacing_fraction=0.2)
            peaks = detect_peaks(depth_of(data), BinaryMask(mask), cfg)
            dist = min_peak_distance(cfg, 20, 20)
            for i, p in enumerate(peaks):
                assert mask[p.row, p.col]
                for q in peaks[i + 1 :]:
                    d2 = (p.row - q.row) ** 2 + (p.col - q.col) ** 2
                    assert d2 >= dist * dist

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimensions"):
            detect_peaks(
                depth_of(np.ones((8, 8))), BinaryMask(np.ones((4, 4), bool)), PipelineConfig()
            )


class TestInvertDepth:
    def test_reflects_about_valid_max(self):
        data = np.array([[1.0, 3.0], [7.0, 2.0]])
        valid = np.array([[True, True], [False, True]])
        inv = invert_depth(DepthImage(data=data, valid=valid))
        # the invalid 7.0 is ignored: max over valid pixels is 3.0
        assert inv.data.tolist() == [[2.0, 0.0], [0.0, 1.0]]
        assert np.array_equal(inv.valid, valid)


class TestCompactWatershed:
    def test_two_marker_ramp(self, backend_name):
        inv = depth_of([[0.0, 1, 2, 2, 1, 0]])
        cfg = PipelineConfig(compactness=0.0)
        out = compact_watershed(inv, [Peak(0, 0, 0.0), Peak(0, 5, 0.0)], cfg)
        assert out.labels.tolist() == [[1, 1, 1, 2, 2, 2]]

    def test_single_marker_floods_everything(self, backend_name, rng):
        inv = depth_of(rng.random((9, 9)))
        out = compact_watershed(inv, [Peak(4, 4, 0.0)], PipelineConfig())
        assert (out.labels == 1).all()

    def test_matches_naive_flood_oracle(self, backend_name, rng):
        for trial in range(15):
            data = rng.random((16, 16))
            n_markers = int(rng.integers(1, 5))
            cells = rng.choice(256, size=n_markers, replace=False)
            markers = [Peak(int(c // 16), int(c % 16), 0.0) for c in cells]
            for compactness in (0.0, 0.5, 2.0):
                cfg = PipelineConfig(compactness=compactness)
                inv = depth_of(data)
                got = compact_watershed(inv, markers, cfg)
                vals = data
                norm = (vals - vals.min()) / (vals.max() - vals.min())
                want = reference.naive_priority_flood(
                    norm, np.ones((16, 16), bool),
                    [(p.row, p.col) for p in markers], compactness, 4, 16.0,
                )
                assert np.array_equal(got.labels, want), (
                    f"trial {trial} compactness {compactness}"
                )

    def test_eight_connectivity_matches_oracle(self, backend_name, rng):
        data = rng.random((12, 12))
        markers = [Peak(2, 2, 0.0), Peak(9, 9, 0.0)]
        cfg = PipelineConfig(compactness=0.5, connectivity=8)
        got = compact_watershed(depth_of(data), markers, cfg)
        norm = (data - data.min()) / (data.max() - data.min())
        want = reference.naive_priority_flood(
            norm, np.ones((12, 12), bool), [(2, 2), (9, 9)], 0.5, 8, 12.0
        )
        assert np.array_equal(got.labels, want)

    def test_marker_pixels_keep_their_labels(self, backend_name, rng):
        data = rng.random((10, 10))
        markers = [Peak(1, 1, 0.0), Peak(8, 8, 0.0), Peak(1, 8, 0.0)]
        out = compact_watershed(depth_of(data), markers, PipelineConfig())
        for k, p in enumerate(markers, start=1):
            assert out.labels[p.row, p.col] == k

    def test_labels_partition_valid_domain(self, backend_name, rng):
        data = rng.random((10, 10))
        markers = [Peak(0, 0, 0.0), Peak(9, 9, 0.0)]
        out = compact_watershed(depth_of(data), markers, PipelineConfig())
        assert (out.labels > 0).all()
        assert set(np.unique(out.labels)) == {1, 2}

    def test_invalid_pixels_stay_zero(self, backend_name):
        data = np.ones((8, 8))
        data[0, 0] = 2.0
        valid = np.ones((8, 8), bool)
        valid[4, :] = False  # split the domain in two bands
        img = DepthImage(data=data, valid=valid)
        out = compact_watershed(img, [Peak(0, 0, 0.0)], PipelineConfig())
        assert (out.labels[4, :] == 0).all()
        assert (out.labels[:4, :] == 1).all()
        # lower band unreachable from the marker: stays background
        assert (out.labels[5:, :] == 0).all()

    def test_zero_markers_rejected(self):
        with pytest.raises(ValueError, match="at least one marker"):
            compact_watershed(depth_of(np.ones((8, 8))), [], PipelineConfig())

    def test_marker_on_invalid_pixel_rejected(self):
        valid = np.ones((8, 8), bool)
        valid[3, 3] = False
        img = DepthImage(data=np.ones((8, 8)), valid=valid)
        with pytest.raises(ValueError, match="invalid pixel"):
            compact_watershed(img, [Peak(3, 3, 0.0)], PipelineConfig())

    def test_duplicate_markers_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            compact_watershed(
                depth_of(np.ones((8, 8))),
                [Peak(1, 1, 0.0), Peak(1, 1, 0.0)],
                PipelineConfig(),
            )

    def test_large_compactness_approaches_voronoi(self, backend_name):
        """On a flat image, priority is purely distance: strictly-closer
        pixels must take their nearest marker's label."""
        flat = depth_of(np.ones((21, 21)))
        markers = [Peak(5, 5, 0.0), Peak(15, 16, 0.0)]
        out = compact_watershed(flat, markers, PipelineConfig(compactness=8.0))
        rr, cc = np.mgrid[0:21, 0:21]
        d0 = (rr - 5) ** 2 + (cc - 5) ** 2
        d1 = (rr - 15) ** 2 + (cc - 16) ** 2
        strict0 = d0 < d1
        strict1 = d1 < d0
        assert (out.labels[strict0] == 1).all()
        assert (out.labels[strict1] == 2).all()

    def test_backends_agree_bitwise(self, rng):
        if len(backend.available_backends()) < 2:
            pytest.skip("compiled backend not built")
        data = rng.random((16, 16))
        markers = [Peak(2, 3, 0.0), Peak(12, 12, 0.0), Peak(3, 13, 0.0)]
        results = []
        for name in backend.available_backends():
            backend.set_backend(name)
            out = compact_watershed(depth_of(data), markers, PipelineConfig(compactness=0.7))
            results.append(out.labels)
        backend.set_backend("auto")
        assert np.array_equal(results[0], results[1])


class TestCompose:
    def test_full_mask_identity(self):
        inst = InstanceMap(np.array([[1, 1], [2, 2]], dtype=np.int32))
        out = compose(inst, BinaryMask(np.ones((2, 2), bool)))
        assert np.array_equal(out.labels, inst.labels)

    def test_empty_mask_clears(self):
        inst = InstanceMap(np.array([[1, 1], [2, 2]], dtype=np.int32))
        out = compose(inst, BinaryMask(np.zeros((2, 2), bool)))
        assert out.n_instances == 0
        assert (out.labels == 0).all()

    def test_erased_label_recompacted(self):
        inst = InstanceMap(np.array([[1, 1, 2, 2]], dtype=np.int32))
        mask = BinaryMask(np.array([[False, False, True, True]]))
        out = compose(inst, mask)
        assert out.labels.tolist() == [[0, 0, 1, 1]]
        assert out.n_instances == 1

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimensions"):
            compose(
                InstanceMap(np.zeros((2, 2), dtype=np.int32)),
                BinaryMask(np.ones((3, 3), bool)),
            )


class TestAreaFilter:
    def test_dominating_instance_removed(self):
        labels = np.zeros((10, 10), dtype=np.int32)
        labels[:, :6] = 1  # 60% of pixels
        out = area_filter(InstanceMap(labels), PipelineConfig(area_threshold=0.5))
        assert out.n_instances == 0

    def test_threshold_one_is_identity(self):
        labels = np.ones((10, 10), dtype=np.int32)
        out = area_filter(InstanceMap(labels), PipelineConfig(area_threshold=1.0))
        assert np.array_equal(out.labels, labels)

    def test_only_small_survives(self):
        labels = np.zeros((10, 10), dtype=np.int32)
        labels[0, :10] = 1          # 10%
        labels[2:8, :9] = 2         # 54%
        labels[9, 0] = 3            # 1%
        out = area_filter(InstanceMap(labels), PipelineConfig(area_threshold=0.5))
        assert out.n_instances == 2
        assert (out.labels[0, :10] == 1).all()
        assert out.labels[9, 0] == 2
        assert not (out.labels == 3).any()


class TestRunPipeline:
    def test_three_planted_basins(self, backend_name):
        spec = random_scene(96, 96, 3, seed=11, noise_sigma=0.0)
        depth, _ = generate(spec)
        res = run_pipeline(depth)
        assert not res.flagged
        assert res.instances.n_instances == 3
        for o in spec.orifices:
            r, c = int(round(o.center_row)), int(round(o.center_col))
            assert res.instances.labels[r, c] > 0

    def test_constant_frame_flagged_empty(self, backend_name):
        res = run_pipeline(depth_of(np.full((16, 16), 2.0)))
        assert res.flagged
        assert "degenerate" in res.flag_reason
        assert res.instances.n_instances == 0

    def test_instances_subset_of_mask(self, backend_name, rng):
        for _ in range(5):
            depth = depth_of(rng.random((32, 32)) * 4)
            res = run_pipeline(depth)
            if res.flagged:
                continue
            inside = res.instances.labels > 0
            assert not (inside & ~res.mask.data).any()

    def test_repeated_runs_identical(self, backend_name):
        spec = random_scene(64, 64, 2, seed=3)
        depth, _ = generate(spec)
        a = run_pipeline(depth)
        b = run_pipeline(depth)
        assert np.array_equal(a.instances.labels, b.instances.labels)
        assert a.peaks == b.peaks

    def test_too_small_image_rejected(self):
        with pytest.raises(ValueError, match="at least"):
            run_pipeline(depth_of(np.random.rand(4, 4)))

    def test_all_invalid_flagged(self, backend_name):
        img = DepthImage(data=np.zeros((16, 16)), valid=np.zeros((16, 16), bool))
        res = run_pipeline(img)
        assert res.flagged


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"smoothing_kernel": 2},
            {"smoothing_kernel": 0},
            {"smoothing_passes": -1},
            {"peak_spacing_fraction": 0.0},
            {"peak_spacing_fraction": 1.0},
            {"compactness": -0.1},
            {"area_threshold": 0.0},
            {"area_threshold": 1.5},
            {"connectivity": 6},
        ],
    )
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PipelineConfig(**kwargs)
