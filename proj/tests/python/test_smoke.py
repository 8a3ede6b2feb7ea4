import math

import numpy as np
import pytest

import fearec


def test_rfft_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=13)
    np.testing.assert_allclose(np.array(fearec.rfft(x.tolist())), np.fft.rfft(x), atol=1e-12)


def test_round_trip():
    x = np.random.default_rng(1).normal(size=16).tolist()
    np.testing.assert_allclose(fearec.irfft(fearec.rfft(x), 16), x, atol=1e-12)


def test_correlation_paths_agree():
    rng = np.random.default_rng(2)
    q, k = rng.normal(size=10).tolist(), rng.normal(size=10).tolist()
    np.testing.assert_allclose(fearec.cross_correlation_fft(q, k), fearec.brute_cross_correlation(q, k), atol=1e-12)


def test_ramp_full_band():
    bands = fearec.ramp_bands(3, 26, 1.0)
    assert [(b.start, b.end) for b in bands] == [(0, 26)] * 3


def test_losses():
    assert fearec.rec_loss([float("-inf")] + [0.0] * 10, 3) == pytest.approx(math.log(10), abs=1e-9)
    assert fearec.freq_reg_loss([1, 0, 0, 0], [0, 0, 0, 0]) == pytest.approx(3.0)
    v = np.ones((2, 4)) * 0.5
    assert fearec.contrastive_loss(v, v, 1.0) == pytest.approx(2 * math.log(3), abs=1e-9)


def test_metrics():
    assert fearec.rank_of_target([float("-inf"), 0.5, 0.5, 0.1], 1) == 2
    hr, ndcg = fearec.metrics_from_ranks([2], 5)
    assert hr == 1.0 and ndcg == pytest.approx(1 / math.log2(3))


def test_model_scores_and_checkpoint(tmp_path):
    cfg = fearec.ModelConfig()
    cfg.num_items, cfg.max_len, cfg.dim, cfg.num_layers = 20, 10, 8, 1
    model = fearec.Model(cfg, seed=3)
    seq = fearec.synthetic_periodic(1, 20, 3, 10, 0)[0][:6]
    scores = model.scores(seq)
    assert len(scores) == 21 and scores[0] == float("-inf")
    assert len(model.delays(seq)[0]) == cfg.num_heads
    path = str(tmp_path / "m.ckpt")
    model.save(path)
    again = fearec.Model.load(path)
    np.testing.assert_allclose(again.scores(seq), scores, rtol=1e-5)


def test_invalid_config_rejected():
    cfg = fearec.ModelConfig()
    cfg.num_items, cfg.dim, cfg.num_heads = 10, 10, 3
    with pytest.raises(ValueError):
        fearec.Model(cfg)


def test_grad_check():
    assert fearec.grad_check("rec") < 1e-3
