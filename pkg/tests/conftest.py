import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pvad_lab.config import CorpusConfig, FeatureConfig, NoiseConfig

TINY_FEAT = FeatureConfig(n_mels=8, context=1)


@pytest.fixture(scope="session")
def tiny_feat_cfg():
    return TINY_FEAT


@pytest.fixture(scope="session")
def tiny_corpus():
    """Small deterministic corpus shared by fast tests."""
    from pvad_lab.corpus import build_corpus

    corpus_cfg = CorpusConfig(
        n_speakers=4,
        utts_per_speaker=9,
        duration_min_s=0.7,
        duration_max_s=1.0,
        train_utts_per_speaker=5,
        val_utts_per_speaker=2,
    )
    noise_cfg = NoiseConfig(clips_per_kind=1, clip_duration_s=4.0,
                            test_snrs_db=(5.0, 20.0))
    return build_corpus(corpus_cfg, noise_cfg, TINY_FEAT, seed=0)


def make_utterance_with_labels(labels, feat_cfg, utterance_id="u",
                               speaker_id=None, seed=0):
    """Hand-built utterance whose VAD labels are exactly `labels`."""
    from pvad_lab.corpus import Utterance
    from pvad_lab.features import Waveform

    labels = np.asarray(labels, dtype=np.int8)
    win, hop = feat_cfg.win_samples, feat_cfg.hop_samples
    n = (labels.size - 1) * hop + win
    rng = np.random.default_rng(seed)
    samples = np.zeros(n)
    for t, lab in enumerate(labels):
        if lab:
            samples[t * hop : t * hop + win] = rng.uniform(-0.4, 0.4, win)
    return Utterance(Waveform(samples, feat_cfg.sample_rate), labels,
                     utterance_id, speaker_id)
