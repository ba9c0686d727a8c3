import numpy as np
import pytest

from pvad_lab.augment import augment_embedding, freq_mask
from pvad_lab.config import AugConfig, FeatureConfig
from pvad_lab.corpus import make_speakers, synth_utterance
from pvad_lab.features import FeatureSequence, extract_static, finish_pipeline
from pvad_lab.speaker import SpeakerEncoderConfig, encode, init_speaker_encoder

FEAT = FeatureConfig(n_mels=8, context=1)


def random_static(t_len=12, n_mels=8, seed=0):
    rng = np.random.default_rng(seed)
    return FeatureSequence(rng.normal(size=(t_len, n_mels)), "static", n_mels=n_mels)


@pytest.fixture(scope="module")
def encoder():
    return init_speaker_encoder(SpeakerEncoderConfig(FEAT.stacked_dim, hidden=4),
                                np.random.default_rng(3))


class TestFreqMask:
    def test_zero_fraction_is_identity(self):
        feats = random_static()
        out = freq_mask(feats, 0.0, 0)
        assert np.array_equal(out.values, feats.values)

    def test_third_of_40_bins_masks_exactly_13(self):
        feats = random_static(t_len=6, n_mels=40, seed=1)
        out = freq_mask(feats, 1.0 / 3.0, 5)
        zero_cols = np.where(np.all(out.values == 0.0, axis=0))[0]
        assert zero_cols.size == 13  # round(40/3)
        assert np.array_equal(zero_cols, np.arange(zero_cols[0], zero_cols[0] + 13))

    def test_unmasked_entries_bitwise_equal(self):
        feats = random_static(seed=2)
        out = freq_mask(feats, 0.25, 7)
        masked_cols = np.where(np.all(out.values == 0.0, axis=0))[0]
        kept = np.setdiff1d(np.arange(feats.values.shape[1]), masked_cols)
        assert np.array_equal(out.values[:, kept], feats.values[:, kept])
        assert np.all(out.values[:, masked_cols] == 0.0)

    def test_fraction_one_rejected(self):
        with pytest.raises(ValueError):
            freq_mask(random_static(), 1.0, 0)

    def test_requires_static_layout(self):
        stacked = FeatureSequence(np.zeros((3, 72)), "context_stacked",
                                  n_mels=8, context=1)
        with pytest.raises(ValueError, match="static"):
            freq_mask(stacked, 0.3, 0)

    def test_scattered_shape_masks_distinct_bins(self):
        feats = random_static(t_len=5, n_mels=12, seed=3)
        out = freq_mask(feats, 0.5, 11, shape="scattered")
        zero_cols = np.where(np.all(out.values == 0.0, axis=0))[0]
        assert zero_cols.size == 6  # round(12/2)

    def test_mask_start_uniform_over_valid_range(self):
        feats = random_static(t_len=3, n_mels=8, seed=4)
        starts = set()
        for seed in range(200):
            out = freq_mask(feats, 0.25, seed)  # width 2 of 8 -> starts 0..6
            zero_cols = np.where(np.all(out.values == 0.0, axis=0))[0]
            starts.add(int(zero_cols[0]))
        assert starts == set(range(7))


class TestAugmentEmbedding:
    def test_eval_mode_is_plain_encode(self, encoder):
        utt_static = random_static(t_len=20, seed=5)
        aug_cfg = AugConfig(fraction=0.3333, dropout_p=0.5)
        got = augment_embedding(utt_static, encoder, FEAT, aug_cfg,
                                np.random.default_rng(0), "eval")
        want = encode(finish_pipeline(utt_static, FEAT), encoder)
        assert np.array_equal(got, want)

    def test_no_mask_no_dropout_equals_plain_encode(self, encoder):
        utt_static = random_static(t_len=20, seed=6)
        aug_cfg = AugConfig(fraction=0.0, dropout_p=0.0)
        got = augment_embedding(utt_static, encoder, FEAT, aug_cfg,
                                np.random.default_rng(0), "train")
        want = encode(finish_pipeline(utt_static, FEAT), encoder)
        assert np.array_equal(got, want)

    def test_deterministic_under_fixed_seed(self, encoder):
        utt_static = random_static(t_len=16, seed=7)
        aug_cfg = AugConfig()
        a = augment_embedding(utt_static, encoder, FEAT, aug_cfg, 123, "train")
        b = augment_embedding(utt_static, encoder, FEAT, aug_cfg, 123, "train")
        assert np.array_equal(a, b)

    def test_two_draws_differ(self, encoder):
        utt_static = random_static(t_len=16, seed=8)
        aug_cfg = AugConfig()
        a = augment_embedding(utt_static, encoder, FEAT, aug_cfg, 1, "train")
        b = augment_embedding(utt_static, encoder, FEAT, aug_cfg, 2, "train")
        assert not np.array_equal(a, b)

    def test_post_stack_stage_masks_stacked_dims(self, encoder):
        utt_static = random_static(t_len=16, seed=9)
        aug_cfg = AugConfig(fraction=0.25, dropout_p=0.0, mask_stage="post_stack")
        emb = augment_embedding(utt_static, encoder, FEAT, aug_cfg, 3, "train")
        assert emb.shape == (8,)
        assert np.all(np.isfinite(emb))

    def test_bad_mode_rejected(self, encoder):
        with pytest.raises(ValueError, match="mode"):
            augment_embedding(random_static(), encoder, FEAT, AugConfig(), 0, "score")

    def test_masked_bins_have_zero_deltas_downstream(self):
        # pre-delta masking zeroes the masked bins in all three blocks
        utt_static = random_static(t_len=15, n_mels=8, seed=10)
        masked = freq_mask(utt_static, 0.25, 13)
        zero_cols = np.where(np.all(masked.values == 0.0, axis=0))[0]
        full = finish_pipeline(masked, FeatureConfig(n_mels=8, context=0))
        for block in range(3):  # static, delta, accel
            assert np.all(full.values[:, block * 8 + zero_cols] == 0.0)


class TestOnRealUtterances:
    def test_augmented_pair_similarity_below_one(self, encoder):
        spk = make_speakers(1, np.random.default_rng(1))[0]
        utt = synth_utterance(spk, 0.8, 4, FEAT)
        static = extract_static(utt.audio, FEAT)
        aug_cfg = AugConfig()
        a = augment_embedding(static, encoder, FEAT, aug_cfg, 10, "train")
        b = augment_embedding(static, encoder, FEAT, aug_cfg, 11, "train")
        from pvad_lab.speaker import cosine_similarity

        assert cosine_similarity(a, b) < 1.0
