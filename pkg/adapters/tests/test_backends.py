"""The mock backends: exact boxes, masks, and descriptors on hand-built images."""

from __future__ import annotations

import numpy as np
import pytest

from mudikit import Image
from mudikit.dnc import DetectionBox

from mudikit_adapters import AdapterError, MockDetector, MockEmbedder, MockSegmenter

from corpus import blob_image, dark_image


class TestMockDetector:
    def test_finds_both_blobs_with_exact_boxes(self):
        boxes = MockDetector().detect(blob_image(), ["toy"])
        assert boxes == (
            DetectionBox("toy", 3, 2, 9, 8, 1.0),
            DetectionBox("toy", 11, 12, 16, 17, 1.0),
        )

    def test_labels_cycle_through_queries_in_scan_order(self):
        boxes = MockDetector().detect(blob_image(), ["cat", "dog"])
        assert [box.label for box in boxes] == ["cat", "dog"]

    def test_dark_image_has_no_detections(self):
        assert MockDetector().detect(dark_image(), ["toy"]) == ()

    def test_confidence_is_fill_ratio(self):
        data = np.zeros((8, 8, 3))
        data[1, 1] = data[2, 1] = data[2, 2] = 1.0  # L shape: 3 pixels in a 2x2 box
        boxes = MockDetector(min_pixels=1).detect(Image(8, 8, 3, data), ["toy"])
        assert len(boxes) == 1
        assert boxes[0].confidence == 0.75

    def test_min_pixels_filters_speckles(self):
        data = np.zeros((8, 8, 3))
        data[1, 1] = data[1, 2] = data[2, 1] = 1.0  # 3-pixel blob
        image = Image(8, 8, 3, data)
        assert MockDetector(min_pixels=4).detect(image, ["toy"]) == ()
        assert len(MockDetector(min_pixels=3).detect(image, ["toy"])) == 1

    def test_threshold_is_strict(self):
        data = np.full((6, 6, 3), 0.5)
        assert MockDetector(threshold=0.5).detect(Image(6, 6, 3, data), ["toy"]) == ()

    def test_detection_is_deterministic(self):
        image = blob_image()
        assert MockDetector().detect(image, ["toy"]) == MockDetector().detect(image, ["toy"])

    def test_validation(self):
        with pytest.raises(AdapterError):
            MockDetector(threshold=1.0)
        with pytest.raises(AdapterError):
            MockDetector(min_pixels=0)
        with pytest.raises(AdapterError):
            MockDetector().detect(blob_image(), [])


class TestMockSegmenter:
    def test_mask_covers_bright_pixels_inside_the_box_only(self):
        image = blob_image()
        box = DetectionBox("toy", 3, 2, 9, 8, 1.0)
        mask = MockSegmenter().segment(image, box)
        expected = np.zeros((20, 20), dtype=np.uint8)
        expected[2:8, 3:9] = 1
        assert np.array_equal(mask.data, expected)  # the blue blob stays out

    def test_partial_box_masks_only_the_bright_part(self):
        image = blob_image()
        box = DetectionBox("toy", 0, 0, 20, 20, 1.0)
        mask = MockSegmenter().segment(image, box)
        assert mask.foreground_count() == 36 + 25

    def test_box_outside_canvas_rejected(self):
        with pytest.raises(AdapterError):
            MockSegmenter().segment(blob_image(), DetectionBox("toy", 10, 10, 21, 21, 1.0))

    def test_validation(self):
        with pytest.raises(AdapterError):
            MockSegmenter(threshold=-0.1)


class TestMockEmbedder:
    def test_dimension_is_grid_squared_times_channels(self):
        box = DetectionBox("toy", 3, 2, 9, 8, 1.0)
        assert MockEmbedder(grid=4).embed(blob_image(), box).shape == (48,)
        assert MockEmbedder(grid=2).embed(blob_image(), box).shape == (12,)

    def test_flat_crop_embeds_to_the_tiled_color(self):
        box = DetectionBox("toy", 3, 2, 9, 8, 1.0)
        vector = MockEmbedder(grid=2).embed(blob_image(), box)
        np.testing.assert_allclose(vector, np.tile((0.9, 0.1, 0.1), 4), atol=1e-15)

    def test_crop_smaller_than_grid_repeats_pixels(self):
        data = np.zeros((6, 6, 3))
        data[2, 2] = (0.2, 0.4, 0.6)
        vector = MockEmbedder(grid=4).embed(
            Image(6, 6, 3, data), DetectionBox("toy", 2, 2, 3, 3, 1.0)
        )
        assert np.array_equal(vector, np.tile((0.2, 0.4, 0.6), 16))

    def test_pixel_doubling_does_not_change_the_descriptor(self):
        rng = np.random.default_rng(11)
        small = rng.random((6, 6, 3))
        big = np.repeat(np.repeat(small, 2, axis=0), 2, axis=1)
        embedder = MockEmbedder(grid=3)
        a = embedder.embed(Image(6, 6, 3, small), DetectionBox("toy", 0, 0, 6, 6, 1.0))
        b = embedder.embed(Image(12, 12, 3, big), DetectionBox("toy", 0, 0, 12, 12, 1.0))
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_deterministic(self):
        box = DetectionBox("toy", 3, 2, 9, 8, 1.0)
        image = blob_image()
        assert np.array_equal(MockEmbedder().embed(image, box), MockEmbedder().embed(image, box))

    def test_validation(self):
        with pytest.raises(AdapterError):
            MockEmbedder(grid=0)
        with pytest.raises(AdapterError):
            MockEmbedder().embed(blob_image(), DetectionBox("toy", 15, 15, 25, 25, 1.0))
