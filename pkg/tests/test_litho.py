import pickle
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskforge.errors import DimensionError, KernelFormatError
from maskforge.litho import (DoseSpec, Kernel, KernelSet, ResistConfig, aerial_image, calibrate,
                             clear_field_intensity, default_kernels, file_digest, identity_kernels,
                             load_kernels, print_corners, print_image, resist, save_kernels, synthetic_kernels)


def direct_aerial(mask, kernels):
    """Spatial-domain sum of coherent systems: sum_k w_k |sum_ab h_k[a,b] m[i+c-a, j+c-b]|^2."""
    h, w = mask.shape
    s = kernels.side
    c = s // 2
    padded = np.zeros((h + 2 * s, w + 2 * s))
    padded[s:s + h, s:s + w] = mask
    out = np.zeros((h, w))
    for k in kernels.kernels:
        field = np.zeros((h, w), dtype=complex)
        for a in range(s):
            for b in range(s):
                field += k.values[a, b] * padded[s + c - a:s + c - a + h, s + c - b:s + c - b + w]
        out += k.weight * np.abs(field) ** 2
    return out


def random_kernels(rng, n=2, side=7):
    return KernelSet([Kernel(rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side)), rng.uniform(0.1, 1))
                      for _ in range(n)])


def test_fft_matches_direct_convolution():
    rng = np.random.default_rng(3)
    mask = (rng.random((40, 40)) > 0.6).astype(float)
    ks = random_kernels(rng)
    ref = direct_aerial(mask, ks)
    got = aerial_image(mask, ks)
    assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) < 1e-10


def test_zero_mask_and_impulse_response():
    ks = random_kernels(np.random.default_rng(0), n=1, side=9)
    assert not aerial_image(np.zeros((32, 32)), ks).any()
    m = np.zeros((32, 32))
    m[16, 16] = 1
    i = aerial_image(m, ks)
    k = ks.kernels[0]
    np.testing.assert_allclose(i[12:21, 12:21], k.weight * np.abs(k.values) ** 2, rtol=1e-9, atol=1e-12)
    assert np.count_nonzero(i > 1e-12) == 81


def test_two_distant_impulses_superpose():
    ks = random_kernels(np.random.default_rng(1), n=1, side=7)
    a = np.zeros((48, 48))
    b = np.zeros((48, 48))
    a[10, 10] = 1
    b[35, 30] = 1
    np.testing.assert_allclose(aerial_image(a + b, ks), aerial_image(a, ks) + aerial_image(b, ks), atol=1e-12)


def test_kernel_larger_than_mask_is_rejected():
    with pytest.raises(DimensionError):
        aerial_image(np.zeros((20, 20)), default_kernels(10))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_intensity_non_negative(seed):
    rng = np.random.default_rng(seed)
    assert aerial_image(rng.random((24, 24)), random_kernels(rng, 3, 5)).min() >= 0


def test_translation_equivariance_away_from_borders():
    ks = default_kernels(3.0, 2)
    m = np.zeros((64, 64))
    m[20:30, 22:28] = 1
    shifted = np.roll(np.roll(m, 7, axis=0), -5, axis=1)
    a = aerial_image(m, ks)
    b = aerial_image(shifted, ks)
    np.testing.assert_allclose(np.roll(np.roll(a, 7, axis=0), -5, axis=1)[15:50, 10:45], b[15:50, 10:45], atol=1e-12)


def test_resist_examples():
    cfg = ResistConfig()
    np.testing.assert_allclose(resist(np.full((2, 2), 0.225), cfg), 0.5)
    assert resist(np.array([0.245]), cfg)[0] == pytest.approx(1 / (1 + np.exp(-1)), abs=1e-12)
    assert resist(np.array([0.2251]), ResistConfig(alpha=1e6))[0] > 0.999
    z = resist(np.linspace(0, 0.5, 200), cfg)   # strictly increasing below float saturation
    assert np.all(np.diff(z) > 0) and z.min() > 0 and z.max() < 1
    assert np.all(np.diff(resist(np.linspace(0, 5, 200), cfg)) >= 0)


def test_config_validation():
    for kw in ({"alpha": 0}, {"i_th": -1}, {"print_threshold": 1.0}):
        with pytest.raises(ValueError):
            ResistConfig(**kw)
    with pytest.raises(ValueError):
        DoseSpec(1.0, 1.01, 1.02)
    with pytest.raises(ValueError):
        print_image(np.zeros((8, 8)), identity_kernels(), dose=0)


def test_zero_mask_prints_nothing_and_identity_prints_mask():
    assert not print_image(np.zeros((16, 16)), default_kernels(2.0), dose=1.02).any()
    m = np.random.default_rng(0).random((16, 16)) > 0.5
    assert np.array_equal(print_image(m.astype(float), identity_kernels()), m)


def test_large_square_bias_regression():
    # frozen from one run of the default optics: +1 nm of bias at mid-edge, rounded corners
    m = np.zeros((160, 160))
    m[48:112, 48:112] = 1
    z = print_image(m, default_kernels(10))
    rows = np.nonzero(z[:, 80])[0]
    cols = np.nonzero(z[80])[0]
    assert (rows.min(), rows.max() + 1, cols.min(), cols.max() + 1) == (47, 113, 47, 113)
    assert int(z.sum()) == 3932


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 1.5), st.floats(0.5, 1.5))
def test_dose_nesting(seed, d1, d2):
    lo, hi = sorted((d1, d2))
    rng = np.random.default_rng(seed)
    m = (rng.random((32, 32)) > 0.5).astype(float)
    ks = default_kernels(2.0)
    inner = print_image(m, ks, dose=lo)
    outer = print_image(m, ks, dose=hi)
    assert not np.any(inner & ~outer)


def test_print_corners_order():
    m = np.zeros((32, 32))
    m[8:24, 8:24] = 1
    ks = default_kernels(3.0)
    nom, mx, mn = print_corners(m, ks)
    assert np.array_equal(nom, print_image(m, ks))
    assert np.array_equal(mx, print_image(m, ks, dose=1.02))
    assert np.array_equal(mn, print_image(m, ks, dose=0.98))


def test_synthetic_kernels_contract():
    ks = synthetic_kernels(1, 10.0, [1.0])
    assert len(ks) == 1 and ks.side == 61
    assert np.linalg.norm(ks.kernels[0].values) == pytest.approx(1.0, abs=1e-12)
    many = synthetic_kernels(4, 2.5)
    assert many.side == 15 and list(many.weights) == [1.0, 0.5, 0.25, 0.125]
    for k in many.kernels:
        assert np.linalg.norm(k.values) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        synthetic_kernels(1, 0.0)
    with pytest.raises(ValueError):
        synthetic_kernels(0, 1.0)


def test_calibration_gives_unit_clear_field():
    ks = default_kernels(4.0, 3)
    assert clear_field_intensity(ks) == pytest.approx(1.0)
    open_mask = np.ones((64, 64))
    assert aerial_image(open_mask, ks)[32, 32] == pytest.approx(1.0)
    assert clear_field_intensity(calibrate(ks, 2.0)) == pytest.approx(2.0)


def test_kernel_validation():
    with pytest.raises(KernelFormatError):
        Kernel(np.ones((2, 2)), 1.0)
    with pytest.raises(KernelFormatError):
        Kernel(np.full((3, 3), np.nan), 1.0)
    with pytest.raises(KernelFormatError):
        Kernel(np.ones((3, 3)), -1.0)
    with pytest.raises(KernelFormatError):
        KernelSet([Kernel(np.ones((3, 3)), 1.0), Kernel(np.ones((5, 5)), 1.0)])
    with pytest.raises(KernelFormatError):
        KernelSet([])


def test_kernel_file_round_trip_is_bit_identical(tmp_path):
    ks = random_kernels(np.random.default_rng(5), n=3, side=5)
    path = tmp_path / "k.lkrn"
    save_kernels(path, ks)
    raw = path.read_bytes()
    assert raw[:4] == b"LKRN" and struct.unpack_from("<II", raw, 4) == (3, 5)
    assert len(raw) == 12 + 3 * (8 + 25 * 16)
    back = load_kernels(path)
    for a, b in zip(ks.kernels, back.kernels):
        assert a.weight == b.weight and np.array_equal(a.values, b.values)
    assert back.to_bytes() == raw
    assert file_digest(path) == ks.digest()


def test_kernel_file_declaring_more_kernels_than_present(tmp_path):
    one = synthetic_kernels(1, 1.0).to_bytes()
    bad = one[:4] + struct.pack("<II", 2, 7) + one[12:]
    (tmp_path / "k.lkrn").write_bytes(bad)
    with pytest.raises(KernelFormatError, match="2 kernels"):
        load_kernels(tmp_path / "k.lkrn")
    (tmp_path / "m.lkrn").write_bytes(b"XXXX" + one[4:])
    with pytest.raises(KernelFormatError, match="magic"):
        load_kernels(tmp_path / "m.lkrn")


def test_kernel_set_pickles_without_cache():
    ks = default_kernels(2.0)
    aerial_image(np.zeros((16, 16)), ks)
    clone = pickle.loads(pickle.dumps(ks))
    assert clone._imagers == {} and clone.digest() == ks.digest()
