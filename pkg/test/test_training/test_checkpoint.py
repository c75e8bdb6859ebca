import hashlib

import numpy as np
import pytest

from mman.training.checkpoint import (
    MAGIC, Checkpoint, checkpoint_load, checkpoint_save, decode_checkpoint, encode_checkpoint,
)
from mman.training.optimizer import AdamState


def _checkpoint() -> Checkpoint:
    rng = np.random.default_rng(0)
    weight = rng.normal(size=(4, 3, 2, 2)).astype(np.float32)
    gamma = rng.normal(size=(4,))
    return Checkpoint(
        manifest="[encoder.0]\n  conv 3->4",
        config_text="seed = 0\n",
        config_digest=hashlib.sha256(b"seed = 0\n").hexdigest(),
        iteration=12,
        params={"generator": {"w": weight, "gamma": gamma}, "micro": {"b": np.arange(3.0)}},
        optimizer={"generator": AdamState({"w": weight * 0.5}, {"w": weight ** 2}, 12)},
        rng_state={"dropout": {"state": {"state": 2 ** 100 + 7, "inc": 3}}},
        trace=[{"iter": 0, "L_G": 1.25, "lr": 0.0002}],
    )


def _reseal(body: bytes) -> bytes:
    return body + hashlib.sha256(body).digest()


class TestCheckpointCodec:
    def test_round_trip_is_bit_identical(self):
        ckpt = _checkpoint()
        data = encode_checkpoint(ckpt)
        restored = decode_checkpoint(data)
        assert encode_checkpoint(restored) == data
        for module, params in ckpt.params.items():
            for name, array in params.items():
                assert restored.params[module][name].dtype == array.dtype
                np.testing.assert_array_equal(restored.params[module][name], array)
        assert restored.optimizer["generator"].step == 12
        assert restored.rng_state == ckpt.rng_state
        assert restored.trace == ckpt.trace
        assert restored.iteration == 12

    def test_starts_with_magic(self):
        assert encode_checkpoint(_checkpoint()).startswith(MAGIC)

    def test_corruption_is_caught_before_parsing(self):
        data = bytearray(encode_checkpoint(_checkpoint()))
        data[len(data) // 2] ^= 0xFF
        with pytest.raises(ValueError) as ve:
            decode_checkpoint(bytes(data))
        assert "checksum" in str(ve.value)

    def test_bad_magic(self):
        body = encode_checkpoint(_checkpoint())[:-32]
        with pytest.raises(ValueError) as ve:
            decode_checkpoint(_reseal(b"NOTACKPT" + body[8:]))
        assert "magic" in str(ve.value)

    def test_unsupported_version(self):
        body = encode_checkpoint(_checkpoint())[:-32]
        with pytest.raises(ValueError) as ve:
            decode_checkpoint(_reseal(body[:8] + (99).to_bytes(4, "little") + body[12:]))
        assert "version 99" in str(ve.value)

    def test_truncated(self):
        with pytest.raises(ValueError):
            decode_checkpoint(b"MMANCKPT")

    def test_digest_must_be_sha256_hex(self):
        ckpt = _checkpoint()
        ckpt.config_digest = "abc"
        with pytest.raises(ValueError):
            encode_checkpoint(ckpt)


class TestCheckpointFiles:
    def test_save_and_load(self, tmp_path):
        path = checkpoint_save(_checkpoint(), tmp_path / "run" / "checkpoint.mman")
        assert path.exists()
        assert not path.with_suffix(".mman.tmp").exists()
        assert encode_checkpoint(checkpoint_load(path)) == encode_checkpoint(_checkpoint())

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            checkpoint_load(tmp_path / "absent.mman")
