"""Dynamics extraction, image slicing, normalization, and dataset files."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csiloc.chansim import (ChannelParams, CsiBatch, simulate_batch,
                            target_effect)
from csiloc.geometry import build_scenario
from csiloc.mltf import (Dataset, LocationVector, MltfImage, WindowMismatch,
                         amplitude_dynamic, build_images, compute_norm_stats,
                         load_dataset, normalize, save_dataset)

DESK = build_scenario(3.0, 3.0, 1.0, 4)


def test_location_vector_basics():
    v = LocationVector.from_grids(9, [2, 5])
    assert v.k == 2
    assert v.grids() == (2, 5)
    assert len(v) == 9
    assert v.array().tolist() == [0, 0, 1, 0, 0, 1, 0, 0, 0]
    assert LocationVector.from_grids(4, []).k == 0


def test_location_vector_validation():
    with pytest.raises(ValueError):
        LocationVector((0, 2, 0))
    with pytest.raises(IndexError):
        LocationVector.from_grids(4, [4])
    with pytest.raises(IndexError):
        LocationVector.from_grids(4, [-1])


def test_dynamic_noiseless_no_target_is_zero():
    params = ChannelParams(noise_std=0.0)
    # power-of-two packet count: the ambient average is then bit-exact
    batch = simulate_batch(params, DESK, 0, [], n_packets=4, packet_seed=0)
    np.testing.assert_array_equal(amplitude_dynamic(batch), np.zeros((4, params.d)))
    # odd counts leave at most an ulp of averaging round-off
    batch = simulate_batch(params, DESK, 0, [], n_packets=5, packet_seed=0)
    assert np.max(np.abs(amplitude_dynamic(batch))) <= 1e-12


def test_dynamic_noiseless_equals_effect_rows():
    params = ChannelParams(noise_std=0.0)
    batch = simulate_batch(params, DESK, 1, [4], n_packets=7, packet_seed=0)
    dyn = amplitude_dynamic(batch)
    effect = target_effect(params, DESK, 1, [4])
    for row in dyn:
        np.testing.assert_allclose(row, effect, atol=1e-12)


def test_dynamic_constant_offset():
    base = np.random.default_rng(3).normal(size=(1, 6))
    ambient = np.repeat(base, 4, axis=0)
    batch = CsiBatch(link=0, amplitudes=ambient + 2.5, ambient=ambient)
    np.testing.assert_array_equal(amplitude_dynamic(batch), np.full((4, 6), 2.5))


def test_dynamic_commutes_with_row_permutation():
    rng = np.random.default_rng(9)
    amplitudes = rng.normal(size=(6, 5))
    ambient = rng.normal(size=(6, 5))
    perm = rng.permutation(6)
    direct = amplitude_dynamic(CsiBatch(link=0, amplitudes=amplitudes, ambient=ambient))
    shuffled = amplitude_dynamic(
        CsiBatch(link=0, amplitudes=amplitudes[perm], ambient=ambient)
    )
    np.testing.assert_array_equal(direct[perm], shuffled)


def test_dynamic_column_means_near_effect():
    # column means concentrate on the true effect as 3*sigma/sqrt(T);
    # seeded draw, so the statistical bound is checked deterministically
    params = ChannelParams(
        n_subcarriers_per_pair=5, n_antenna_pairs=2, noise_std=1.5
    )
    t = 4000
    batch = simulate_batch(params, DESK, 2, [3], n_packets=t, packet_seed=8)
    effect = target_effect(params, DESK, 2, [3])
    err = amplitude_dynamic(batch).mean(axis=0) - effect
    assert np.max(np.abs(err)) <= 3.0 * params.noise_std / np.sqrt(t)


def test_build_images_single_window():
    dyn = [np.arange(12.0).reshape(4, 3)]
    images = build_images(dyn, LocationVector((1,)), window=4)
    assert len(images) == 1
    np.testing.assert_array_equal(images[0].tensor[..., 0], dyn[0])


def test_build_images_reference_counts():
    label = LocationVector((0, 1))
    dyn = [np.zeros((9000, 2))]
    assert len(build_images(dyn, label, window=90)) == 100


def test_build_images_matches_loop_slicer():
    rng = np.random.default_rng(0)
    t_total, t, d, m = 180, 90, 4, 2
    dyn = [rng.normal(size=(t_total, d)) for _ in range(m)]
    label = LocationVector((1, 0, 0))
    images = build_images(dyn, label, window=t)
    assert len(images) == 2
    for i, im in enumerate(images):
        assert im.tensor.shape == (t, d, m)
        assert im.label is label
        for tt in range(t):
            for k in range(d):
                for mm in range(m):
                    assert im.tensor[tt, k, mm] == dyn[mm][i * t + tt, k]


@settings(max_examples=30, deadline=None)
@given(
    n_windows=st.integers(1, 5),
    t=st.integers(1, 6),
    d=st.integers(1, 4),
    m=st.integers(1, 3),
    seed=st.integers(0, 10),
)
def test_build_images_lossless(n_windows, t, d, m, seed):
    rng = np.random.default_rng(seed)
    dyn = [rng.normal(size=(n_windows * t, d)) for _ in range(m)]
    images = build_images(dyn, LocationVector((0,)), window=t)
    rebuilt = np.concatenate([im.tensor for im in images], axis=0)
    np.testing.assert_array_equal(rebuilt, np.stack(dyn, axis=-1))


def test_build_images_rejects_bad_window():
    dyn = [np.zeros((10, 3))]
    label = LocationVector((1,))
    with pytest.raises(WindowMismatch):
        build_images(dyn, label, window=3)
    with pytest.raises(WindowMismatch):
        build_images(dyn, label, window=0)
    with pytest.raises(WindowMismatch):
        build_images([], label, window=1)
    with pytest.raises(WindowMismatch):
        build_images([np.zeros((10, 3)), np.zeros((8, 3))], label, window=2)


def _random_images(rng, count, shape, n_grids):
    out = []
    for _ in range(count):
        tensor = rng.normal(size=shape).astype(np.float32) * 3.0 + 1.5
        grids = rng.choice(n_grids, size=rng.integers(0, 3), replace=False)
        out.append(MltfImage(tensor, LocationVector.from_grids(n_grids, grids)))
    return out


def test_normalize_restandardizes():
    rng = np.random.default_rng(5)
    images = _random_images(rng, 40, (6, 5, 3), 4)
    stats = compute_norm_stats(images)
    redone = compute_norm_stats(normalize(images, stats))
    np.testing.assert_allclose(redone.mean, np.zeros(3), atol=1e-6)
    np.testing.assert_allclose(redone.std, np.ones(3), atol=1e-6)


def test_normalize_constant_channel_centered_only():
    tensor = np.full((4, 3, 2), 7.0, dtype=np.float32)
    tensor[..., 1] = np.random.default_rng(1).normal(size=(4, 3))
    images = [MltfImage(tensor, LocationVector((1,)))]
    stats = compute_norm_stats(images)
    assert stats.std[0] == 0.0
    out = normalize(images, stats)
    np.testing.assert_array_equal(out[0].tensor[..., 0], np.zeros((4, 3)))


def test_normalize_keeps_labels():
    rng = np.random.default_rng(2)
    images = _random_images(rng, 5, (3, 2, 2), 6)
    out = normalize(images, compute_norm_stats(images))
    for before, after in zip(images, out):
        assert after.label is before.label


def test_norm_stats_empty_rejected():
    with pytest.raises(ValueError):
        compute_norm_stats([])


def _toy_dataset(seed=0):
    rng = np.random.default_rng(seed)
    make = lambda n: _random_images(rng, n, (5, 4, 2), 6)
    return Dataset(
        train=make(6), val=make(2), test=make(3),
        window=5, d=4, n_links=2, n_grids=6, seed=seed,
    )


def test_dataset_roundtrip(tmp_path):
    ds = _toy_dataset()
    first = tmp_path / "a"
    save_dataset(ds, first)
    loaded = load_dataset(first)
    assert (loaded.window, loaded.d, loaded.n_links, loaded.n_grids) == (5, 4, 2, 6)
    for orig, back in zip(ds.all_images(), loaded.all_images()):
        np.testing.assert_array_equal(orig.tensor.astype(np.float32), back.tensor)
        assert orig.label.bits == back.label.bits
    second = tmp_path / "b"
    save_dataset(loaded, second)
    for name in ("manifest.txt", "records.bin"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_dataset_truncated_rejected(tmp_path):
    save_dataset(_toy_dataset(), tmp_path)
    records = tmp_path / "records.bin"
    records.write_bytes(records.read_bytes()[:-3])
    with pytest.raises(ValueError, match="truncated"):
        load_dataset(tmp_path)


def test_dataset_trailing_bytes_rejected(tmp_path):
    save_dataset(_toy_dataset(), tmp_path)
    with open(tmp_path / "records.bin", "ab") as fh:
        fh.write(b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_dataset(tmp_path)


def test_dataset_bad_version_rejected(tmp_path):
    save_dataset(_toy_dataset(), tmp_path)
    manifest = tmp_path / "manifest.txt"
    manifest.write_text(manifest.read_text().replace("format_version=1", "format_version=9"))
    with pytest.raises(ValueError, match="version"):
        load_dataset(tmp_path)


def test_mltf_image_validation():
    with pytest.raises(ValueError):
        MltfImage(np.zeros((3, 3)), LocationVector((1,)))
    bad = np.zeros((2, 2, 1))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        MltfImage(bad, LocationVector((1,)))
