import math
import os
from pathlib import Path

import numpy as np
import pytest

import trajguide as tg

SOURCE_DIR = Path(os.environ.get("TRAJGUIDE_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def rng():
    return np.random.default_rng(0)


def test_schedule_levels():
    s = tg.NoiseSchedule.uniform_flow(4)
    assert s.steps == 4
    assert s.level(4) == (0.0, 1.0)
    assert s.level(1) == pytest.approx((0.75, 0.25))
    d = tg.NoiseSchedule.ddim_from_flow(4, 0.999)
    assert d.alpha_bar(2) == pytest.approx((1 - 0.999 * 2 / 4) ** 2, rel=1e-12)


def test_perfect_denoiser_reaches_target():
    target = rng().normal(size=(2, 3, 4, 5))
    oracle = tg.DenoiserOracle.tabulated(target, tg.OutputConvention.VELOCITY)
    noise = rng().normal(size=target.shape)
    out = tg.sample(noise, oracle, tg.NoiseSchedule.uniform_flow(10))
    np.testing.assert_array_equal(out, target)


def test_posterior_of_isotropic_gaussian():
    oracle = tg.DenoiserOracle.isotropic_gaussian(np.zeros((1, 1, 2, 2)), 1.0)
    x = np.full((1, 1, 2, 2), 2.0)
    eps, x0 = oracle.posterior(x, 0.6, 0.8)
    np.testing.assert_allclose(0.6 * x0 + 0.8 * eps, x, atol=1e-12)


def test_fuse_and_renoise():
    x0 = np.zeros((1, 1, 2, 2))
    z = np.ones((1, 1, 2, 2))
    mask = np.array([[[[True, False], [False, True]]]])
    fused = tg.fuse_masked(x0, z, mask)
    np.testing.assert_array_equal(fused, mask.astype(float))
    eps = np.full_like(fused, 3.0)
    np.testing.assert_allclose(tg.irr_renoise(fused, eps, 0.25), 0.75 * fused + 0.75)


def test_flf_select_threshold():
    sel = tg.flf_select([0.2, 0.9, None, 0.5], 1.0)
    mu = np.mean([0.2, 0.9, 0.5])
    assert sel["mu"] == pytest.approx(mu)
    assert sel["delta"] == pytest.approx(mu - np.std([0.2, 0.9, 0.5]))
    assert sel["selected"] == [1, 3]
    assert tg.flf_select([0.4, 0.4], 0.0)["selected"] == [0, 1]


def test_dsg_closed_form():
    g = rng()
    a = g.normal(size=(1, 1, 3, 3))
    b = g.normal(size=(1, 1, 3, 3))
    np.testing.assert_array_equal(tg.dsg_correct(a, b, 0.0)["v_corr"], a)
    r = tg.dsg_correct(a, b, 0.7)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    alpha = np.sum(a * b) / (na * nb)
    beta = math.sqrt(1 - alpha**2)
    assert r["alpha"] == pytest.approx(alpha, abs=1e-12)
    assert r["beta"] == pytest.approx(beta, abs=1e-12)
    np.testing.assert_allclose(r["v_corr"], a + 0.7 * beta * (a - alpha * na / nb * b), atol=1e-12)
    assert not tg.dsg_correct(np.zeros_like(a), b, 1.0)["defined"]


def test_flow_metrics_and_similarity():
    gt = np.zeros((2, 1, 3, 3))
    pred = np.zeros((2, 1, 3, 3))
    pred[0] = 3.0
    pred[1] = 4.0
    mask = np.ones((1, 1, 3, 3), dtype=bool)
    assert tg.masked_epe(pred, gt, mask) == pytest.approx(5.0)
    assert tg.fl_all(pred, gt, mask) == 1.0
    assert tg.similarity_score(5.0, math.radians(15.0), 0.25) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(tg.TrajguideError):
        tg.masked_epe(pred, gt, np.zeros_like(mask))


def test_guided_sample_full_mask_adheres():
    target = rng().normal(size=(2, 3, 8, 8))
    oracle = tg.DenoiserOracle.tabulated(target, tg.OutputConvention.VELOCITY)
    noise = rng().normal(size=target.shape)
    mask = np.ones((1, 3, 8, 8), dtype=bool)
    out, trace = tg.guided_sample(noise, oracle, target, mask, tg.NoiseSchedule.uniform_flow(8),
                                  {"flf": False, "dsg": False})
    assert len(trace) == 8
    assert np.max(np.abs(out - target)) <= 1e-12
    assert all(e["selection"] is None and e["dsg"] is None for e in trace)


def test_warp_identity():
    src = rng().uniform(size=(3, 1, 6, 7))
    depth = np.full((6, 7), 2.0)
    K = np.array([[5.0, 0, 3.0], [0, 5.0, 2.5], [0, 0, 1]])
    img, mask, _ = tg.warp(src, depth, K, np.eye(3), np.zeros(3), np.eye(3), np.zeros(3))
    np.testing.assert_array_equal(img, src)
    assert mask.all()


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def test_sim3_recovers_transform():
    g = rng()
    ref = np.tile(np.eye(4), (6, 1, 1))
    for i in range(6):
        ref[i, :3, :3] = rot_z(0.1 * i)
        ref[i, :3, 3] = g.normal(size=3)
    R, s, t = rot_z(0.4), 2.5, np.array([1.0, -2.0, 0.5])
    est = ref.copy()
    for i in range(6):
        est[i, :3, :3] = R.T @ ref[i, :3, :3]
        est[i, :3, 3] = R.T @ (ref[i, :3, 3] - t) / s
    aligned, tf = tg.align_sim3(est, ref)
    assert tf["s"] == pytest.approx(s, rel=1e-9)
    np.testing.assert_allclose(tf["R"], R, atol=1e-9)
    np.testing.assert_allclose(aligned[:, :3, 3], ref[:, :3, 3], atol=1e-9)
    m = tg.evaluate_trajectory(est, ref)
    assert m["ate"]["rmse"] < 1e-9
    assert m["rpe_r"]["rmse"] < 1e-6


def test_config_hash_ignores_placement():
    base = {"name": "x", "seeds": [1], "scene": {"planes": [{"center": [0, 0, 6]}]}}
    assert tg.config_hash(base) == tg.config_hash({**base, "output_dir": "/tmp/elsewhere"})
    assert tg.config_hash(base) != tg.config_hash({**base, "seeds": [2]})
    assert tg.normalize_config(base)["name"] == "x"
    with pytest.raises(tg.TrajguideError):
        tg.config_hash({"guidance": {"rhoo": 1}})


def test_run_experiment(tmp_path):
    cfg = tmp_path / "tiny.json"
    cfg.write_text("""{
      "name": "tiny", "height": 16, "width": 16,
      "scene": {"channels": 2,
                "planes": [{"center": [0, 0, 7], "half_width": 6, "half_height": 6,
                            "texture": {"kind": "value_noise", "scale": 0.6, "seed": 3}}]},
      "trajectory": {"kind": "orbit", "frames": 3, "sweep_deg": 6},
      "schedule": {"steps": 4},
      "oracle": {"kind": "gaussian_mixture", "distractors": [{"texture_seed_shift": 2}]},
      "seeds": [0], "ablation": ["dsg"]
    }""")
    man = tg.run_experiment(cfg, tmp_path / "runs", plots=True)
    assert man["success"]
    assert len(man["cells"]) == 2
    again = tg.run_experiment(cfg, tmp_path / "runs2")
    assert again["manifest_hash"] == man["manifest_hash"]


def test_shipped_config_parses():
    text = (SOURCE_DIR / "configs" / "desk_benchmark.json").read_text()
    assert len(tg.config_hash(text)) > 0
