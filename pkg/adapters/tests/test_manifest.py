"""Provenance manifest: validation, round trip, atomic writes."""

from __future__ import annotations

import json

import pytest

from mudikit_adapters import AdapterError, AdapterManifest, load_manifest, save_manifest


def sample(**overrides) -> AdapterManifest:
    fields = dict(
        model_name="owl-like-detector",
        model_revision="2026.03",
        input_glob="shots/*.png",
        output_dir="out",
        device="cuda:0",
        notes="center crop, 224px resize",
    )
    fields.update(overrides)
    return AdapterManifest(**fields)


class TestAdapterManifest:
    def test_round_trip(self, tmp_path):
        manifest = sample()
        save_manifest(manifest, tmp_path / "manifest.json")
        assert load_manifest(tmp_path / "manifest.json") == manifest

    def test_every_provenance_field_is_required(self):
        for field in ("model_name", "model_revision", "input_glob", "output_dir", "device"):
            with pytest.raises(AdapterError):
                sample(**{field: ""})
            with pytest.raises(AdapterError):
                sample(**{field: 7})

    def test_notes_may_be_empty_but_must_be_a_string(self):
        assert sample(notes="").notes == ""
        with pytest.raises(AdapterError):
            sample(notes=None)

    def test_write_is_byte_deterministic_and_leaves_no_temp_files(self, tmp_path):
        save_manifest(sample(), tmp_path / "a.json")
        save_manifest(sample(), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert [p.name for p in tmp_path.iterdir()] == sorted(["a.json", "b.json"])

    def test_overwrites_existing_file(self, tmp_path):
        path = tmp_path / "manifest.json"
        save_manifest(sample(), path)
        save_manifest(sample(model_revision="2026.04"), path)
        assert load_manifest(path).model_revision == "2026.04"

    def test_load_rejects_bad_json(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(AdapterError):
            load_manifest(path)

    def test_load_rejects_wrong_fields(self, tmp_path):
        path = tmp_path / "manifest.json"
        doc = {
            "model_name": "m", "model_revision": "r", "input_glob": "g",
            "output_dir": "o", "device": "cpu", "notes": "",
        }
        missing = dict(doc)
        del missing["device"]
        path.write_text(json.dumps(missing), encoding="utf-8")
        with pytest.raises(AdapterError):
            load_manifest(path)
        extra = dict(doc, extra="x")
        path.write_text(json.dumps(extra), encoding="utf-8")
        with pytest.raises(AdapterError):
            load_manifest(path)
