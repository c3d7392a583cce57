import math

import numpy as np
import pytest

import seatlab


def tiny_config(**overrides):
    fields = dict(
        image_size=16,
        widths=[4, 4, 4, 4],
        n_train_src=3,
        n_train_trg=3,
        n_eval_trg=2,
        n_eval_src=2,
        max_iters=4,
        eval_interval=2,
    )
    fields.update(overrides)
    return seatlab.config(**fields)


def test_conv2d_matches_direct_sum():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 5, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    out = seatlab.conv2d(x, w, b, stride=1, padding=1)
    assert out.shape == (3, 5, 6)
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    ref = np.empty_like(out)
    for co in range(3):
        for y in range(5):
            for xx in range(6):
                ref[co, y, xx] = b[co] + np.sum(w[co] * padded[:, y : y + 3, xx : xx + 3])
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_softmax_and_fuse_stay_on_simplex():
    rng = np.random.default_rng(1)
    p = seatlab.softmax_channels(rng.normal(size=(4, 3, 3)))
    q = seatlab.softmax_channels(rng.normal(size=(4, 3, 3)))
    np.testing.assert_allclose(p.sum(axis=0), 1.0, atol=1e-12)
    f = seatlab.fuse(p, q, 0.25)
    np.testing.assert_allclose(f, 0.25 * p + 0.75 * q, atol=1e-15)


def test_analytic_loss_values():
    half = [np.full((1, 2, 2), 0.5)]
    assert seatlab.loss_dis(half, half) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert seatlab.loss_adv(half) == pytest.approx(math.log(2), abs=1e-12)
    labels = [np.array([[0, 1], [2, seatlab.IGNORE_INDEX]], dtype=np.uint8)]
    assert seatlab.loss_seg([np.full((3, 2, 2), 1 / 3)], labels) == pytest.approx(math.log(3), abs=1e-12)
    assert seatlab.poly_lr(50, 100, 1.0) == pytest.approx(0.5**0.9, abs=1e-15)
    r = seatlab.ce_kl_identity([0.2, 0.8], [0.5, 0.5])
    assert abs(r["residual"]) < 1e-12


def test_miou_and_pseudo_labels():
    gt = np.array([[0, 0], [1, 1]], dtype=np.uint8)
    pred = np.zeros((2, 2), dtype=np.uint8)
    r = seatlab.miou([pred], [gt], 2)
    assert r["miou"] == pytest.approx(0.25)
    probs = np.array([[[0.95]], [[0.05]]])
    labels, coverage = seatlab.pseudo_label(probs, 0.9)
    assert labels[0, 0] == 0 and coverage == 1.0
    labels, coverage = seatlab.pseudo_label(probs, 0.99)
    assert labels[0, 0] == seatlab.IGNORE_INDEX and coverage == 0.0


def test_scene_geometry_is_shared_across_domains():
    src_img, src_lbl = seatlab.generate_scene(3, "source", size=16)
    trg_img, trg_lbl = seatlab.generate_scene(3, "target", size=16)
    assert src_img.shape == (3, 16, 16)
    np.testing.assert_array_equal(src_lbl, trg_lbl)
    assert not np.array_equal(src_img, trg_img)


def test_config_round_trip_and_validation():
    cfg = tiny_config(alpha=0.1)
    back = seatlab.TrainConfig.from_text(cfg.to_text())
    assert back.fingerprint() == cfg.fingerprint()
    assert back.norm_mode == "seat"
    with pytest.raises(AttributeError):
        seatlab.config(alpah=0.1)
    with pytest.raises(ValueError):
        seatlab.config(alpha=1.5)


def test_train_and_evaluate(tmp_path):
    cfg = tiny_config()
    ckpt = tmp_path / "model.bin"
    history = seatlab.train(cfg, ckpt)
    assert [row["iter"] for row in history] == [2, 4]
    assert seatlab.train(cfg)[-1] == history[-1]
    report = seatlab.evaluate(ckpt)
    assert report["miou"] == pytest.approx(history[-1]["miou_target"], abs=1e-12)
    switched = seatlab.evaluate(ckpt, layer_switch="1-4")
    tagged = seatlab.evaluate(ckpt, split="target_eval")
    assert 0 <= switched["miou"] <= 1 and 0 <= tagged["miou"] <= 1


def test_gradient_suite_passes():
    entries = seatlab.gradient_suite(1)
    assert entries
    assert max(e["max_rel_error"] for e in entries) < 1e-4


def test_cli_usage_error():
    code, _, err = seatlab.cli(["train", "--no-such-flag"])
    assert code == 2
    assert "Usage" in err
