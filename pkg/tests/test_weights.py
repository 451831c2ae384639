"""Weight file format: round-trips, corruption detection, truncation."""

import numpy as np
import pytest

from pentimento.errors import WeightFormatError, WeightTruncationError
from pentimento.weights import LayerWeights, WeightStore, load_weights, save_weights


def small_store():
    rng = np.random.default_rng(11)
    return WeightStore(
        entries={
            "conv1": LayerWeights(
                kernel=rng.standard_normal((2, 1, 3, 3)).astype(np.float32),
                bias=rng.standard_normal(2).astype(np.float32),
            )
        },
        metadata={"source": "unit-test", "mean_r": "1.5", "mean_g": "2.5",
                  "mean_b": "3.5"},
    )


class TestRoundTrip:
    def test_zero_layers(self, tmp_path):
        path = tmp_path / "empty.nstw"
        save_weights(WeightStore(), path)
        store = load_weights(path)
        assert store.entries == {}

    def test_bit_exact_reload(self, tmp_path):
        path = tmp_path / "w.nstw"
        original = small_store()
        save_weights(original, path)
        loaded = load_weights(path)
        assert set(loaded.entries) == {"conv1"}
        np.testing.assert_array_equal(
            loaded.entries["conv1"].kernel, original.entries["conv1"].kernel
        )
        np.testing.assert_array_equal(
            loaded.entries["conv1"].bias, original.entries["conv1"].bias
        )
        assert loaded.metadata == original.metadata

    def test_save_load_save_is_identical_bytes(self, tmp_path):
        p1, p2 = tmp_path / "a.nstw", tmp_path / "b.nstw"
        save_weights(small_store(), p1)
        save_weights(load_weights(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_channel_means_parsed(self, tmp_path):
        path = tmp_path / "w.nstw"
        save_weights(small_store(), path)
        assert load_weights(path).channel_means() == (1.5, 2.5, 3.5)

    def test_means_default_to_zero(self, tmp_path):
        path = tmp_path / "w.nstw"
        save_weights(WeightStore(metadata={"source": "x"}), path)
        assert load_weights(path).channel_means() == (0.0, 0.0, 0.0)


class TestCorruption:
    def test_every_flipped_payload_byte_detected(self, tmp_path):
        """Single-byte corruption anywhere in the body trips the CRC."""
        path = tmp_path / "w.nstw"
        save_weights(small_store(), path)
        blob = bytearray(path.read_bytes())
        rng = np.random.default_rng(12)
        for pos in rng.choice(len(blob) - 4, size=12, replace=False):
            corrupted = bytearray(blob)
            corrupted[pos] ^= 0xFF
            bad = tmp_path / "bad.nstw"
            bad.write_bytes(bytes(corrupted))
            with pytest.raises(WeightFormatError):
                load_weights(bad)

    def test_checksum_error_reports_offset(self, tmp_path):
        path = tmp_path / "w.nstw"
        save_weights(small_store(), path)
        blob = bytearray(path.read_bytes())
        blob[-10] ^= 0x01  # inside the last tensor payload
        path.write_bytes(bytes(blob))
        with pytest.raises(WeightFormatError, match="checksum"):
            load_weights(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "w.nstw"
        save_weights(small_store(), path)
        blob = bytearray(path.read_bytes())
        blob[0] = ord("X")
        path.write_bytes(bytes(blob))
        with pytest.raises(WeightFormatError, match="magic") as err:
            load_weights(path)
        assert err.value.offset == 0

    def test_bad_version(self, tmp_path):
        path = tmp_path / "w.nstw"
        save_weights(small_store(), path)
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(WeightFormatError, match="version") as err:
            load_weights(path)
        assert err.value.offset == 4

    def test_truncation(self, tmp_path):
        path = tmp_path / "w.nstw"
        save_weights(small_store(), path)
        blob = path.read_bytes()
        for cut in (len(blob) // 2, len(blob) - 2):
            short = tmp_path / "short.nstw"
            short.write_bytes(blob[:cut])
            with pytest.raises(WeightTruncationError):
                load_weights(short)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "w.nstw"
        save_weights(small_store(), path)
        path.write_bytes(path.read_bytes() + b"extra")
        with pytest.raises(WeightFormatError):
            load_weights(path)
