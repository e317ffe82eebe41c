"""Optimizer step semantics and the binary checkpoint format."""

import json

import numpy as np
import pytest

from gestar.checkpoint import MAGIC, file_digest, load_checkpoint, save_checkpoint, sidecar_path
from gestar.errors import ShapeError, ValidationError
from gestar.optim import make_optimizer_state, optimizer_step


class TestOptimizerStep:
    def test_zero_lr_is_identity(self):
        state = make_optimizer_state("sgd", 0.0, 3)
        params = np.array([1.0, -2.0, 3.0])
        out = optimizer_step(params, np.array([5.0, 5.0, 5.0]), state)
        assert np.array_equal(out, params)

    def test_plain_descent_hand_value(self):
        state = make_optimizer_state("sgd", 0.5, 1)
        out = optimizer_step(np.array([1.0]), np.array([2.0]), state)
        assert out.tolist() == [0.0]
        assert state.step == 1

    def test_length_mismatch_rejected(self):
        state = make_optimizer_state("sgd", 0.1, 2)
        with pytest.raises(ShapeError):
            optimizer_step(np.zeros(2), np.zeros(3), state)

    def test_bit_identical_runs(self):
        def run():
            rng = np.random.default_rng(42)
            state = make_optimizer_state("adam", 1e-3, 10)
            p = rng.normal(size=10)
            for _ in range(25):
                p = optimizer_step(p, rng.normal(size=10), state)
            return p

        assert np.array_equal(run(), run())

    def test_adam_moments_track_parameters(self):
        state = make_optimizer_state("adam", 0.01, 4)
        p = np.zeros(4)
        for i in range(5):
            p = optimizer_step(p, np.ones(4), state)
        assert state.step == 5
        assert state.m.shape == (4,) and state.v.shape == (4,)
        assert (p < 0).all()  # descending against a positive gradient


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        vec = np.random.default_rng(0).normal(size=257)
        modules = {"encoder": (0, 200), "head": (200, 57)}
        path = save_checkpoint(tmp_path / "model.bin", vec, modules, meta={"round": 3})
        loaded, sidecar = load_checkpoint(path)
        assert np.array_equal(loaded, vec)
        assert sidecar["modules"]["head"] == {"offset": 200, "length": 57}
        assert sidecar["meta"]["round"] == 3

    def test_magic_guard(self, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ValidationError, match="magic"):
            load_checkpoint(bad)

    def test_layout_is_little_endian_f64(self, tmp_path):
        vec = np.array([1.5, -2.25])
        path = save_checkpoint(tmp_path / "m.bin", vec, {"all": (0, 2)})
        raw = path.read_bytes()
        assert raw[:8] == MAGIC
        assert int.from_bytes(raw[8:12], "little") == 1  # version
        assert int.from_bytes(raw[12:20], "little") == 2  # count
        assert np.frombuffer(raw[20:], dtype="<f8").tolist() == [1.5, -2.25]

    def test_sidecar_is_json(self, tmp_path):
        path = save_checkpoint(tmp_path / "m.bin", np.zeros(4), {"all": (0, 4)})
        with open(sidecar_path(path)) as fh:
            payload = json.load(fh)
        assert payload["n_params"] == 4

    def test_digest_stability(self, tmp_path):
        vec = np.linspace(0, 1, 64)
        p1 = save_checkpoint(tmp_path / "a.bin", vec, {"all": (0, 64)})
        p2 = save_checkpoint(tmp_path / "b.bin", vec, {"all": (0, 64)})
        assert file_digest(p1) == file_digest(p2)
