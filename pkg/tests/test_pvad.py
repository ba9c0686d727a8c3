import numpy as np
import pytest

from pvad_lab import nn
from pvad_lab.features import FeatureSequence
from pvad_lab.pvad import (
    PvadConfig,
    init_pvad,
    pvad_config_from_params,
    pvad_forward,
    standard_vad_forward,
)


def stacked(t_len=10, dim=12, seed=0):
    rng = np.random.default_rng(seed)
    return FeatureSequence(rng.normal(size=(t_len, dim)), "context_stacked",
                           n_mels=dim // 9, context=1)


@pytest.fixture(scope="module")
def model():
    cfg = PvadConfig(input_dim=27, embed_dim=4, hidden=5, n_layers=4)
    return cfg, init_pvad(cfg, np.random.default_rng(0))


@pytest.fixture(scope="module")
def vad_model():
    cfg = PvadConfig(input_dim=27, embed_dim=0, hidden=5, n_layers=4)
    return cfg, init_pvad(cfg, np.random.default_rng(1))


class TestForward:
    def test_rows_sum_to_one(self, model):
        cfg, params = model
        feats = FeatureSequence(np.random.default_rng(2).normal(size=(14, 27)),
                                "context_stacked", n_mels=3, context=1)
        emb = np.random.default_rng(3).normal(size=4)
        post = pvad_forward(feats, emb, params)
        assert post.shape == (14, 2)
        assert np.allclose(post.sum(axis=1), 1.0, atol=1e-9)

    def test_causality_bitwise(self, model):
        _, params = model
        rng = np.random.default_rng(4)
        base = rng.normal(size=(12, 27))
        emb = rng.normal(size=4)
        f1 = FeatureSequence(base, "context_stacked", n_mels=3, context=1)
        edited = base.copy()
        edited[8:] = rng.normal(size=(4, 27))
        f2 = FeatureSequence(edited, "context_stacked", n_mels=3, context=1)
        p1 = pvad_forward(f1, emb, params)
        p2 = pvad_forward(f2, emb, params)
        assert np.array_equal(p1[:8], p2[:8])
        assert not np.array_equal(p1[8:], p2[8:])

    def test_vad_causality_and_normalization(self, vad_model):
        _, params = vad_model
        rng = np.random.default_rng(5)
        base = rng.normal(size=(10, 27))
        f1 = FeatureSequence(base, "context_stacked", n_mels=3, context=1)
        edited = base.copy()
        edited[6:] += 1.0
        f2 = FeatureSequence(edited, "context_stacked", n_mels=3, context=1)
        p1 = standard_vad_forward(f1, params)
        p2 = standard_vad_forward(f2, params)
        assert np.allclose(p1.sum(axis=1), 1.0, atol=1e-9)
        assert np.array_equal(p1[:6], p2[:6])

    def test_eval_mode_deterministic_and_dropout_free(self, model):
        _, params = model
        feats = stacked(9, 27, seed=6)
        emb = np.random.default_rng(7).normal(size=4)
        a = pvad_forward(feats, emb, params, mode="eval")
        b = pvad_forward(feats, emb, params, mode="eval")
        assert np.array_equal(a, b)

    def test_train_mode_dropout_changes_output(self, model):
        _, params = model
        feats = stacked(9, 27, seed=8)
        emb = np.random.default_rng(9).normal(size=4)
        a = pvad_forward(feats, emb, params, mode="train", rng=1)
        b = pvad_forward(feats, emb, params, mode="train", rng=2)
        assert not np.array_equal(a, b)

    def test_embedding_changes_posteriors(self, model):
        _, params = model
        feats = stacked(9, 27, seed=10)
        p1 = pvad_forward(feats, np.zeros(4), params)
        p2 = pvad_forward(feats, np.ones(4), params)
        assert not np.array_equal(p1, p2)

    def test_dimension_mismatch_names_parameter(self, model):
        _, params = model
        feats = stacked(5, 27, seed=11)
        with pytest.raises(nn.ShapeMismatchError, match="lstm0.W_x"):
            pvad_forward(feats, np.zeros(9), params)


class TestConfigRoundTrip:
    def test_config_recovered(self, model):
        cfg, params = model
        got = pvad_config_from_params(params, embed_dim=4)
        assert got == cfg

    def test_checkpoint_metadata(self, model, tmp_path):
        cfg, params = model
        meta = {"input_dim": cfg.input_dim, "embed_dim": cfg.embed_dim,
                "hidden": cfg.hidden, "classes": 2}
        nn.save_checkpoint(tmp_path / "p.ckpt", params, metadata=meta)
        loaded, got_meta, _ = nn.load_checkpoint(tmp_path / "p.ckpt")
        assert got_meta == meta
        feats = stacked(6, 27, seed=12)
        emb = np.random.default_rng(13).normal(size=4)
        assert np.array_equal(pvad_forward(feats, emb, params),
                              pvad_forward(feats, emb, loaded))
