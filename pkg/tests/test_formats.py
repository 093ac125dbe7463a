from __future__ import annotations

import numpy as np
import pytest

from kernel_rmt.formats import load_dataset, load_kernel, load_ternary, save_dataset, save_kernel, save_ternary
from kernel_rmt.hermite import parse_function
from kernel_rmt.kernel import build_kernel, quantize_ternary
from kernel_rmt.prototype import PiecewiseProto


def _X():
    return np.random.default_rng(0).standard_normal((7, 30))


def test_dataset_round_trip(tmp_path):
    X = _X()
    save_dataset(tmp_path / "d.bin", X)
    raw = (tmp_path / "d.bin").read_bytes()
    assert raw[:8] == b"KRMTDSET" and len(raw) == 16 + 8 * X.size
    np.testing.assert_array_equal(load_dataset(tmp_path / "d.bin"), X)


def test_dense_kernel_round_trip(tmp_path):
    K = build_kernel(_X(), parse_function("sign"))
    save_kernel(tmp_path / "k.bin", K)
    np.testing.assert_array_equal(load_kernel(tmp_path / "k.bin").data, K.data)


def test_ternary_round_trip(tmp_path):
    tk = quantize_ternary(_X(), PiecewiseProto(1.3, -0.2, 0.7))
    save_ternary(tmp_path / "t.bin", tk)
    assert (tmp_path / "t.bin").stat().st_size == tk.nbytes
    back = load_ternary(tmp_path / "t.bin")
    assert (back.n, back.t, back.r, back.scale) == (tk.n, tk.t, tk.r, tk.scale)
    np.testing.assert_array_equal(back.decompress(), tk.decompress())


def test_wrong_magic_rejected(tmp_path):
    save_dataset(tmp_path / "d.bin", _X())
    with pytest.raises(ValueError):
        load_kernel(tmp_path / "d.bin")
    with pytest.raises(ValueError):
        load_ternary(tmp_path / "d.bin")
    save_kernel(tmp_path / "k.bin", build_kernel(_X(), parse_function("sign")))
    with pytest.raises(ValueError):
        load_dataset(tmp_path / "k.bin")
