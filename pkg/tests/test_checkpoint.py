import struct

import numpy as np
import pytest

from ppikit.checkpoint import (
    Checkpoint,
    checkpoint_from_model,
    load_checkpoint,
    load_into_model,
    restore_model,
    save_checkpoint,
)
from ppikit.errors import CorruptFile, IoFailure, ModelKindMismatch, VersionMismatch
from ppikit.models import build_fc_model, build_recurrent_model
from ppikit.training import TrainingConfig, train

from test_models import random_batch, tiny_recurrent
from test_training import quick_config, separable_pairs, tiny_model


def trained_checkpoint(tmp_path, seed=0):
    model = tiny_model(seed=seed)
    data = separable_pairs(24, seed=seed)
    val = separable_pairs(12, seed=seed + 1)
    log, best = train(model, data, val, quick_config(max_epochs=4, seed=seed))
    path = tmp_path / "model.ckpt"
    save_checkpoint(best, path)
    return model, log, best, path


def test_round_trip_tensors_identical(tmp_path):
    _, _, best, path = trained_checkpoint(tmp_path)
    loaded = load_checkpoint(path)
    assert loaded.kind == best.kind
    assert loaded.epoch == best.epoch
    assert loaded.config == best.config
    assert set(loaded.tensors) == set(best.tensors)
    for name, value in best.tensors.items():
        np.testing.assert_array_equal(loaded.tensors[name], value)


def test_round_trip_inference_bit_identical(tmp_path):
    _, _, best, path = trained_checkpoint(tmp_path)
    first = restore_model(best)
    second = restore_model(load_checkpoint(path))
    rng = np.random.default_rng(3)
    for _ in range(10):
        xa, xb, _ = random_batch(first, batch=2, seed=int(rng.integers(1e6)))
        np.testing.assert_array_equal(
            first.forward_pair(xa, xb, train=False),
            second.forward_pair(xa, xb, train=False),
        )


def test_checkpoint_reproduces_logged_best_validation_loss(tmp_path):
    from ppikit.training import _dataset_loss_acc

    model = tiny_model(seed=2)
    data = separable_pairs(24, seed=2)
    val = separable_pairs(12, seed=3)
    log, best = train(model, data, val, quick_config(max_epochs=6, seed=2))
    restored = restore_model(best)
    val_loss, _ = _dataset_loss_acc(restored, val, batch_size=16)
    assert abs(val_loss - log.best_val_loss) < 1e-9


def test_expected_kind_mismatch(tmp_path):
    path = tmp_path / "fc.ckpt"
    save_checkpoint(checkpoint_from_model(build_fc_model(max_len=8), 0), path)
    with pytest.raises(ModelKindMismatch):
        load_checkpoint(path, expected_kind="recurrent")


def test_load_into_model_of_other_kind(tmp_path):
    ckpt = checkpoint_from_model(build_fc_model(max_len=8), 0)
    with pytest.raises(ModelKindMismatch):
        load_into_model(tiny_recurrent(), ckpt)


def test_truncated_file_is_corrupt(tmp_path):
    _, _, _, path = trained_checkpoint(tmp_path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptFile):
        load_checkpoint(path)


def test_flipped_byte_fails_checksum(tmp_path):
    _, _, _, path = trained_checkpoint(tmp_path)
    data = bytearray(path.read_bytes())
    data[25] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptFile):
        load_checkpoint(path)


def test_unsupported_version(tmp_path):
    _, _, _, path = trained_checkpoint(tmp_path)
    data = bytearray(path.read_bytes())
    data[4:8] = struct.pack("<I", 99)  # version field follows the magic
    import zlib
    payload = bytes(data[:-4])
    data[-4:] = struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    path.write_bytes(bytes(data))
    with pytest.raises(VersionMismatch):
        load_checkpoint(path)


def test_missing_file_is_io_failure(tmp_path):
    with pytest.raises(IoFailure):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_bad_magic_is_corrupt(tmp_path):
    _, _, _, path = trained_checkpoint(tmp_path)
    data = bytearray(path.read_bytes())
    data[0:4] = b"NOPE"
    import zlib
    data[-4:] = struct.pack("<I", zlib.crc32(bytes(data[:-4])) & 0xFFFFFFFF)
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptFile):
        load_checkpoint(path)


def test_batchnorm_statistics_survive_round_trip(tmp_path):
    model = tiny_recurrent(seed=1)
    xa, xb, _ = random_batch(model, batch=6, seed=1)
    model.forward_pair(xa, xb, train=True)
    ckpt = checkpoint_from_model(model, 1)
    path = tmp_path / "bn.ckpt"
    save_checkpoint(ckpt, path)
    restored = restore_model(load_checkpoint(path))
    # inference works immediately: moving statistics and counters were kept
    out_original = model.forward_pair(xa, xb, train=False)
    out_restored = restored.forward_pair(xa, xb, train=False)
    np.testing.assert_array_equal(out_original, out_restored)


def test_restore_rebuilds_reduced_geometry(tmp_path):
    model = build_recurrent_model(
        max_len=20, conv_filters=2, kernel_size=5, pool_size=2,
        conv_blocks=1, lstm_units=3, head_units=4, seed=8,
    )
    path = tmp_path / "geom.ckpt"
    save_checkpoint(checkpoint_from_model(model, 0), path)
    restored = restore_model(load_checkpoint(path))
    assert restored.max_len == 20
    assert restored.build_config == model.build_config
