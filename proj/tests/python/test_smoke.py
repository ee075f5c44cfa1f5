# Copyright 2026 The lbscan Authors.
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

import lbscan


def params(seed, B=2, L=37, E=3, N=4):
    rng = np.random.default_rng(seed)
    return (
        rng.uniform(0.0, 1.0, (B, L, E, N)),
        rng.uniform(-1.0, 1.0, (B, L, E, N)),
        rng.uniform(-1.0, 1.0, (B, L, N)),
        rng.uniform(-1.0, 1.0, (B, L, E)),
    )


def numpy_scan(abar, bx, c, dx, tile_len=None, reverse=False):
    """Plain loops: forward recurrence plus, when tile_len is set, the
    exclusive in-tile backward recurrence."""
    B, L, E, N = abar.shape
    order = range(L - 1, -1, -1) if reverse else range(L)
    y = dx.copy()
    h = np.zeros((B, E, N))
    for t in order:
        h = abar[:, t] * h + bx[:, t]
        y[:, t] += np.einsum("ben,bn->be", h, c[:, t])
    if tile_len:
        r = np.zeros((B, E, N))
        for t in range(L - 1, -1, -1):
            end = (t + 1) % tile_len == 0 or t == L - 1
            r = np.zeros((B, E, N)) if end else abar[:, t] * (r + bx[:, t + 1])
            y[:, t] += np.einsum("ben,bn->be", r, c[:, t])
    return y


@pytest.mark.parametrize("tile_len", [1, 3, 4, 16])
@pytest.mark.parametrize("workers", [1, 4])
def test_lbm_scan_matches_numpy(tile_len, workers):
    p = params(tile_len)
    got = lbscan.lbm_scan(*p, tile_len=tile_len, workers=workers)["y"]
    np.testing.assert_allclose(got, numpy_scan(*p, tile_len=tile_len), rtol=1e-12, atol=1e-12)
    ref = lbscan.lbm_scan_ref(*p, tile_len=tile_len)["y"]
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_forward_and_bidir_match_numpy():
    pf, pb = params(5), params(6)
    np.testing.assert_allclose(lbscan.forward_scan(*pf, tile_len=4)["y"], numpy_scan(*pf),
                               rtol=1e-12, atol=1e-12)
    want = numpy_scan(*pf) + numpy_scan(*pb, reverse=True)
    got = lbscan.global_bidir_scan(pf, pb, tile_len=8, workers=2)["y"]
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_single_precision_is_close():
    p = params(7)
    single = lbscan.lbm_scan(*p, tile_len=4, precision="single")["y"]
    double = lbscan.lbm_scan(*[a.astype(np.float32).astype(np.float64) for a in p], tile_len=4)["y"]
    assert np.max(np.abs(single - double)) / np.max(np.abs(double)) <= 1e-5


def test_tile_ends_equal_forward_and_costs():
    p = params(8, L=32)
    lbm = lbscan.lbm_scan(*p, tile_len=8)
    fwd = lbscan.forward_scan(*p, tile_len=8)
    ends = [7, 15, 23, 31]
    assert np.array_equal(lbm["y"][:, ends], fwd["y"][:, ends])
    assert lbm["cost"]["tile_exchanges"] == fwd["cost"]["tile_exchanges"]
    assert lbm["cost"]["hbm_elems"] == fwd["cost"]["hbm_elems"]
    ratio = lbscan.scan_cost("lbm", 1, 4096, 64, 16, 16)["flops"] / lbscan.scan_cost(
        "forward", 1, 4096, 64, 16, 16)["flops"]
    assert 1.20 <= ratio <= 1.35
    assert [lbscan.select_tile_len(n) for n in (1024, 200, 64)] == [16, 8, 4]


def test_bad_shapes_raise():
    abar, bx, c, dx = params(9)
    with pytest.raises(ValueError):
        lbscan.lbm_scan(abar, bx, c[:, :-1], dx, tile_len=4)


def test_verify_sweep_passes():
    count, failures, worst = lbscan.verify()
    assert count > 0 and failures == 0 and worst <= 1e-5


SMALL = {"image_size": "32", "patch_size": "8", "embed_dim": "8", "inner_dim": "16",
         "state_dim": "4", "depth": "2", "num_classes": "2"}


def test_model_forward_and_checkpoint(tmp_path):
    model = lbscan.Model(SMALL, seed=3)
    images, labels = lbscan.gen_task("global", 1, 4)
    assert images.shape == (4, 32, 32, 1) and labels.shape == (4,)
    logits = model.forward(images)
    assert logits.shape == (4, 2) and np.all(np.isfinite(logits))

    path = str(tmp_path / "m.lbck")
    model.save(path)
    back = lbscan.Model.load(path)
    for name, value in model.weights().items():
        assert np.array_equal(back.weights()[name], value), name
    assert np.array_equal(back.forward(images), logits)
    with pytest.raises(IOError):
        lbscan.Model.load(str(tmp_path / "missing.lbck"))


def test_zero_steps_keeps_initialization():
    model = lbscan.Model(SMALL, seed=4)
    before = model.weights()
    assert model.train("local", steps=0) == []
    after = model.weights()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_training_reduces_loss_on_local_task():
    cfg = dict(SMALL, depth="1", embed_dim="16", inner_dim="32")
    model = lbscan.Model(cfg, seed=1)
    log = model.train("local", steps=150, batch=32, lr=3e-3, warmup=20)
    assert log[-1][0] == 150 and log[-1][2] < log[0][2]
    images, labels = lbscan.gen_task("local", 999999, 200)
    assert model.evaluate(images, labels) >= 0.9


def test_erf_single_block_sparsity():
    cfg = {"image_size": "16", "patch_size": "4", "embed_dim": "8", "inner_dim": "8",
           "state_dim": "4", "depth": "1", "tile_len": "4", "num_classes": "2"}
    model = lbscan.Model(cfg, seed=1)
    images = np.random.default_rng(0).uniform(-1, 1, (2, 16, 16, 1))
    raw, heat, token = model.erf(images)
    assert token == 10 and heat.max() == 1.0
    patch = (np.arange(16)[:, None] // 4) * 4 + np.arange(16)[None, :] // 4
    assert np.all(raw[patch > 11] == 0.0) and np.all(raw[patch <= 11] > 0.0)


def test_model_cost_and_weights_roundtrip():
    cost = lbscan.model_cost(SMALL)
    assert cost["total_flops"] == (cost["embed_flops"] + cost["block_flops"] +
                                   cost["scan_flops"] + cost["head_flops"])
    model = lbscan.Model(SMALL, seed=5)
    w = model.weights()
    w["head.b2"] = np.array([0.5, -0.5])
    model.set_weights(w)
    assert np.array_equal(model.weights()["head.b2"], [0.5, -0.5])
    with pytest.raises(ValueError):
        model.set_weights({"head.b2": np.zeros(3)})
