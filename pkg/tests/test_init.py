"""Layouts, canvas composition, encoders, and the mean-shifted latent."""

from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import make_subject
from mudikit import (
    BlockAverageEncoder,
    FileBackedEncoder,
    Image,
    InitConfig,
    LatentGrid,
    LayoutBox,
    RandomSource,
    compose_canvas,
    latent_initialize,
    load_llm_layout,
    random_layout,
    read_layout_file,
    resize_mask,
)
from mudikit.errors import (
    ContractError,
    DoesNotFitError,
    LayoutValidationError,
    ParameterError,
    SaturationWarning,
    SchemaError,
)
from mudikit.init import SATURATION_GAMMA
from mudikit.sandbox import make_schedule

RED = (0.8, 0.1, 0.1)
BLUE = (0.1, 0.1, 0.8)


class TestLatentGrid:
    def test_flatten_round_trip(self):
        rng = np.random.default_rng(42)
        grid = LatentGrid(2, 3, 4, rng.normal(size=(2, 3, 4)))
        again = LatentGrid.from_flat(grid.flattened(), 2, 3, 4)
        assert np.array_equal(again.data, grid.data)

    def test_from_flat_size_mismatch(self):
        with pytest.raises(ContractError):
            LatentGrid.from_flat(np.zeros(5), 2, 3, 1)

    def test_validation(self):
        with pytest.raises(ParameterError):
            LatentGrid(0, 2, 2, np.zeros((0, 2, 2)))
        with pytest.raises(ParameterError):
            LatentGrid(2, 2, 1, np.full((2, 2, 1), np.inf))


class TestBlockAverageEncoder:
    def test_two_by_two_block_means(self):
        data = np.array(
            [[0.0, 1.0, 0.5, 0.5], [1.0, 0.0, 0.5, 0.5]]
        )
        latent = BlockAverageEncoder(2).encode(Image.from_array(data))
        np.testing.assert_allclose(latent.data[:, :, 0], [[0.5, 0.5]])

    def test_non_dividing_factor_rejected(self):
        with pytest.raises(ContractError):
            BlockAverageEncoder(3).encode(Image.from_array(np.zeros((4, 4))))

    def test_factor_validation(self):
        with pytest.raises(ParameterError):
            BlockAverageEncoder(0)


class TestFileBackedEncoder:
    def test_register_then_encode(self):
        encoder = FileBackedEncoder(2)
        image = Image.from_array(np.full((4, 4), 0.5))
        latent = LatentGrid(2, 2, 1, np.ones((2, 2, 1)))
        encoder.register(image, latent)
        assert np.array_equal(encoder.encode(image).data, latent.data)

    def test_unregistered_image_rejected(self):
        encoder = FileBackedEncoder(2)
        with pytest.raises(ContractError):
            encoder.encode(Image.from_array(np.zeros((4, 4))))

    def test_register_shape_mismatch(self):
        encoder = FileBackedEncoder(2)
        image = Image.from_array(np.zeros((4, 4)))
        with pytest.raises(ContractError):
            encoder.register(image, LatentGrid(3, 3, 1, np.zeros((3, 3, 1))))


class TestRandomLayout:
    def test_two_subjects_flush_at_zero_margin(self, subject_pair):
        boxes = random_layout(subject_pair, (16, 16), RandomSource(0), max_margin=0)
        assert boxes[0].x == 0
        assert boxes[1].x == 16 - subject_pair[1].width
        assert [b.subject_index for b in boxes] == [0, 1]

    def test_draw_order_margin_then_vertical(self, subject_pair):
        seed = 12
        boxes = random_layout(subject_pair, (16, 16), RandomSource(seed), max_margin=2)
        replay = RandomSource(seed)
        m0 = replay.integers(0, 3)
        y0 = replay.integers(0, 11)
        m1 = replay.integers(0, 3)
        y1 = replay.integers(0, 11)
        assert (boxes[0].x, boxes[0].y) == (0 + m0, y0)
        assert (boxes[1].x, boxes[1].y) == (16 - m1 - 6, y1)

    def test_single_subject_uniform_x(self, subject_pair):
        seed = 5
        boxes = random_layout(subject_pair[:1], (16, 16), RandomSource(seed))
        replay = RandomSource(seed)
        assert boxes[0].x == replay.integers(0, 11)
        assert boxes[0].y == replay.integers(0, 11)

    def test_subject_too_large(self):
        big = make_subject(20, 20, RED, "big", "c")
        with pytest.raises(DoesNotFitError):
            random_layout([big], (16, 16), RandomSource(0))

    def test_validation(self, subject_pair):
        with pytest.raises(ParameterError):
            random_layout([], (16, 16), RandomSource(0))
        with pytest.raises(ParameterError):
            random_layout(subject_pair, (16, 16), RandomSource(0), max_margin=-1)


class TestReadLayoutFile:
    def write(self, tmp_path, doc) -> str:
        path = tmp_path / "layout.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)

    def test_valid_document(self, tmp_path):
        path = self.write(
            tmp_path,
            {
                "canvas": [32, 32],
                "boxes": [
                    {"subject": 0, "x": 0, "y": 0, "w": 16, "h": 32},
                    {"subject": 1, "x": 16, "y": 0, "w": 16, "h": 32},
                ],
            },
        )
        canvas, boxes = read_layout_file(path)
        assert canvas == (32, 32)
        assert boxes[1] == LayoutBox(1, 16, 0, 16, 32)

    def test_identifier_resolution(self, tmp_path):
        path = self.write(
            tmp_path,
            {"canvas": [8, 8], "boxes": [{"subject": "b", "x": 0, "y": 0, "w": 4, "h": 4}]},
        )
        boxes = load_llm_layout(path, identifiers=["a", "b"])
        assert boxes[0].subject_index == 1

    def test_unknown_identifier_rejected(self, tmp_path):
        path = self.write(
            tmp_path,
            {"canvas": [8, 8], "boxes": [{"subject": "zz", "x": 0, "y": 0, "w": 4, "h": 4}]},
        )
        with pytest.raises(LayoutValidationError):
            read_layout_file(path, identifiers=["a", "b"])

    def test_unknown_key_named(self, tmp_path):
        path = self.write(tmp_path, {"canvas": [8, 8], "boxes": [], "extra": 1})
        with pytest.raises(SchemaError, match="extra"):
            read_layout_file(path)

    def test_box_outside_canvas(self, tmp_path):
        path = self.write(
            tmp_path,
            {"canvas": [8, 8], "boxes": [{"subject": 0, "x": 5, "y": 0, "w": 4, "h": 4}]},
        )
        with pytest.raises(LayoutValidationError):
            read_layout_file(path)

    def test_bool_coordinates_rejected(self, tmp_path):
        path = self.write(
            tmp_path,
            {"canvas": [8, 8], "boxes": [{"subject": 0, "x": True, "y": 0, "w": 4, "h": 4}]},
        )
        with pytest.raises(LayoutValidationError):
            read_layout_file(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(SchemaError):
            read_layout_file(path)


class TestComposeCanvas:
    def test_pastes_resized_to_boxes(self, subject_pair):
        layout = [LayoutBox(0, 0, 0, 8, 16), LayoutBox(1, 8, 0, 8, 16)]
        image, mask = compose_canvas(subject_pair, layout, (16, 16))
        assert np.allclose(image.data[:, :8], RED)
        assert np.allclose(image.data[:, 8:], BLUE)
        assert mask.foreground_count() == 256

    def test_painter_order(self, subject_pair):
        layout = [LayoutBox(0, 0, 0, 16, 16), LayoutBox(1, 0, 0, 16, 16)]
        image, _ = compose_canvas(subject_pair, layout, (16, 16))
        assert np.allclose(image.data, BLUE)

    def test_layout_count_mismatch(self, subject_pair):
        with pytest.raises(ContractError):
            compose_canvas(subject_pair, [LayoutBox(0, 0, 0, 4, 4)], (16, 16))

    def test_channel_mismatch(self, subject_pair):
        gray = make_subject(6, 6, RED, "g", "c")
        gray_image = Image.from_array(gray.image.data[:, :, :1])
        from mudikit import Mask, SegmentedSubject

        gray = SegmentedSubject(
            image=gray_image,
            mask=Mask.from_array(np.ones((6, 6), dtype=np.uint8)),
            identifier="g",
            class_text="c",
        )
        layout = [LayoutBox(0, 0, 0, 4, 4), LayoutBox(1, 8, 0, 4, 4)]
        with pytest.raises(ContractError):
            compose_canvas([subject_pair[0], gray], layout, (16, 16))


def half_split(canvas: int = 32) -> list[LayoutBox]:
    half = canvas // 2
    return [LayoutBox(0, 0, 0, half, canvas), LayoutBox(1, half, 0, half, canvas)]


class TestLatentInitialize:
    def latent(self, subjects, gamma, seed, variant="mean_shift", schedule=None):
        config = InitConfig(gamma=gamma, noise_seed=seed, schedule_variant=variant)
        return latent_initialize(
            subjects,
            half_split(),
            BlockAverageEncoder(8),
            config,
            RandomSource(0),
            canvas=(32, 32),
            schedule=schedule,
        )

    def test_gamma_linearity_is_exact(self, subject_pair):
        # Independent oracle: recompute the gated shift from scratch (block
        # means by hand, nearest-neighbor gate by hand) and check each z(γ)
        # equals gate * γ + noise bit for bit.
        composed, union = compose_canvas(subject_pair, half_split(), (32, 32))
        pooled = composed.data.reshape(4, 8, 4, 8, 3).mean(axis=(1, 3))
        centers = np.floor((np.arange(4) + 0.5) * 8).astype(int)
        gate = union.data[np.ix_(centers, centers)][:, :, np.newaxis]
        shift = pooled * gate
        noise = RandomSource(77).normal((4, 4, 3))
        for gamma in (0.0, 1.0, 2.0, 3.5):
            z = self.latent(subject_pair, gamma, seed=77).data
            assert np.array_equal(z, shift * gamma + noise)

    def test_gamma_linearity_in_differences(self, subject_pair):
        z0 = self.latent(subject_pair, 0.0, seed=77).data
        z1 = self.latent(subject_pair, 1.0, seed=77).data
        z2 = self.latent(subject_pair, 2.0, seed=77).data
        np.testing.assert_allclose(z2 - z0, 2.0 * (z1 - z0), atol=1e-12)

    def test_gamma_zero_is_pure_noise_bit_exact(self, subject_pair):
        z0 = self.latent(subject_pair, 0.0, seed=123).data
        expected = RandomSource(123).normal((4, 4, 3))
        assert np.array_equal(z0, expected)

    def test_cells_outside_mask_carry_only_noise(self, subject_pair):
        # Subjects in the left half only: right latent columns sit outside
        # the downsampled union mask, so the shift term vanishes there.
        layout = [LayoutBox(0, 0, 0, 8, 16), LayoutBox(1, 0, 16, 8, 16)]
        config = InitConfig(gamma=3.0, noise_seed=55)
        z = latent_initialize(
            subject_pair,
            layout,
            BlockAverageEncoder(8),
            config,
            RandomSource(0),
            canvas=(32, 32),
        )
        noise = RandomSource(55).normal((4, 4, 3))
        _, union = compose_canvas(subject_pair, layout, (32, 32))
        gate = resize_mask(union, 4, 4).data
        assert gate[:, 2:].max() == 0  # the right half really is ungated
        assert np.array_equal(z.data[gate == 0], noise[gate == 0])
        assert not np.array_equal(z.data[gate == 1], noise[gate == 1])

    def test_saturation_warning_at_gamma_four(self, subject_pair):
        assert SATURATION_GAMMA == 4.0
        with pytest.warns(SaturationWarning):
            self.latent(subject_pair, 4.0, seed=1)

    def test_forward_noise_variant_matches_formula(self, subject_pair):
        schedule = make_schedule("cosine", 100)
        z = self.latent(subject_pair, 1.0, seed=9, variant="forward_noise", schedule=schedule)
        shift = self.latent(subject_pair, 1.0, seed=9).data - RandomSource(9).normal((4, 4, 3))
        noise = RandomSource(9).normal((4, 4, 3))
        expected = schedule.signal_scale(100) * shift + schedule.noise_scale(100) * noise
        np.testing.assert_allclose(z.data, expected, atol=1e-15)

    def test_forward_noise_variant_requires_schedule(self, subject_pair):
        with pytest.raises(ParameterError):
            self.latent(subject_pair, 1.0, seed=9, variant="forward_noise")

    def test_canvas_must_divide_by_factor(self, subject_pair):
        config = InitConfig()
        with pytest.raises(ContractError):
            latent_initialize(
                subject_pair,
                [LayoutBox(0, 0, 0, 8, 16), LayoutBox(1, 8, 0, 8, 16)],
                BlockAverageEncoder(8),
                config,
                RandomSource(0),
                canvas=(20, 20),
            )

    def test_lying_encoder_rejected(self, subject_pair):
        class LyingEncoder:
            downscale_factor = 8

            def encode(self, image):
                return LatentGrid(2, 2, 3, np.zeros((2, 2, 3)))

        with pytest.raises(ContractError):
            latent_initialize(
                subject_pair,
                half_split(),
                LyingEncoder(),
                InitConfig(),
                RandomSource(0),
                canvas=(32, 32),
            )

    def test_noise_from_caller_stream_when_no_seed(self, subject_pair):
        config = InitConfig(gamma=0.0)
        z = latent_initialize(
            subject_pair,
            half_split(),
            BlockAverageEncoder(8),
            config,
            RandomSource(31),
            canvas=(32, 32),
        )
        assert np.array_equal(z.data, RandomSource(31).normal((4, 4, 3)))

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            InitConfig(gamma=-1.0)
        with pytest.raises(ParameterError):
            InitConfig(layout_source="nope")
        with pytest.raises(ParameterError):
            InitConfig(schedule_variant="nope")
