"""End-to-end experiment driver: corpus, pretraining, regime matrix, tables.

A matrix run lives under one directory keyed by config hash; each seed gets
its own subdirectory with corpus artifacts, checkpoints, histories and the
clean/noisy result tables. Reruns refuse to overwrite unless forced, and a
rerun with the same config and seeds reproduces every file byte for byte.
"""

from __future__ import annotations

import json
import shutil
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import nn
from .config import ExperimentConfig
from .corpus import Corpus, build_corpus, build_enroll_full_example, save_corpus
from .evaluation import (
    evaluate_pvad,
    evaluate_standard_vad,
    similarity_study,
    write_similarity_csv,
)
from .speaker import SpeakerEncoderConfig, pretrain_classifier
from .training import train_pvad, train_standard_vad, write_history_csv

CLEAN_TABLE_REGIMES = (
    "vad",
    "enroll_full_no_aug",
    "enroll_full_aug",
    "enroll_less_no_aug",
    "enroll_less_aug",
)
NOISY_TABLE_REGIMES = ("enroll_full_no_aug", "enroll_less_aug")

PVAD_REGIME_ARGS = {
    "enroll_full_no_aug": ("enroll_full", False),
    "enroll_full_aug": ("enroll_full", True),
    "enroll_less_no_aug": ("enroll_less", False),
    "enroll_less_aug": ("enroll_less", True),
}


class StageError(RuntimeError):
    """A matrix stage failed; partial results stay on disk."""

    def __init__(self, stage: str, original: BaseException):
        super().__init__(f"stage {stage!r} failed: {original}")
        self.stage = stage


def build_test_examples(corpus: Corpus, cfg: ExperimentConfig, seed: int,
                        snr_db: float | None = None):
    """Enrollment-disjoint test examples; same groupings for every SNR."""
    by_speaker = corpus.by_speaker(corpus.test)
    speakers = sorted(s for s, items in by_speaker.items() if len(items) >= 2)
    if not speakers:
        raise ValueError("test split has no speaker with >= 2 utterances")
    examples = []
    for idx in range(cfg.n_test_examples):
        rng = np.random.default_rng((seed, 0x7E, idx))
        spk = speakers[int(rng.integers(len(speakers)))]
        pool = by_speaker[spk]
        pair = rng.choice(len(pool), size=2, replace=False)
        targets = [pool[int(i)] for i in pair]
        others = [s for s in speakers if s != spk]
        distractors = []
        for _ in range(int(rng.integers(0, 3))):
            other = others[int(rng.integers(len(others)))]
            cands = by_speaker[other]
            distractors.append(cands[int(rng.integers(len(cands)))])
        if snr_db is None:
            noise = None
            snr = np.inf
        else:
            noise = corpus.noise.pick_test(np.random.default_rng((seed, 0x7F, idx)))
            snr = snr_db
        examples.append(build_enroll_full_example(
            targets, distractors, rng, cfg.feature,
            gap_range_s=(cfg.corpus.gap_min_s, cfg.corpus.gap_max_s),
            noise=noise, snr_db=snr,
        ))
    return examples


def _write_table_clean(path, rows, config_hash: str, seed: int) -> None:
    lines = [f"# config_hash={config_hash} seed={seed}",
             "regime,ap_ns_nts,ap_ts,map"]
    for regime in CLEAN_TABLE_REGIMES:
        m = rows[regime]
        lines.append(f"{regime},{m['ap_ns_nts']:.6f},{m['ap_ts']:.6f},{m['map']:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def _write_table_noisy(path, rows, config_hash: str, seed: int) -> None:
    lines = [f"# config_hash={config_hash} seed={seed}",
             "snr_db,regime,ap_ns_nts,ap_ts,map"]
    for snr in sorted(rows):
        for regime in NOISY_TABLE_REGIMES:
            m = rows[snr][regime]
            lines.append(
                f"{snr:g},{regime},{m['ap_ns_nts']:.6f},{m['ap_ts']:.6f},{m['map']:.6f}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def _write_metrics_json(path, regime: str, aug, noise_condition: str,
                        metrics: dict, config_hash: str) -> None:
    payload = {
        "regime": regime,
        "aug": aug,
        "noise_condition": noise_condition,
        "ap_ns_nts": round(metrics["ap_ns_nts"], 6),
        "ap_ts": round(metrics["ap_ts"], 6),
        "map": round(metrics["map"], 6),
        "n_frames": metrics["n_frames"],
        "config_hash": config_hash,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def run_seed(cfg: ExperimentConfig, seed: int, seed_dir: Path,
             save_corpus_files: bool = True) -> dict:
    """Full pipeline for one seed; returns the table data."""
    seed_dir = Path(seed_dir)
    seed_dir.mkdir(parents=True, exist_ok=True)
    config_hash = cfg.config_hash()
    seed_cfg_json = json.loads(cfg.to_json())
    seed_cfg_json["seed"] = seed
    (seed_dir / "config.json").write_text(
        json.dumps(seed_cfg_json, sort_keys=True, indent=2) + "\n"
    )

    stage = "synth-corpus"
    try:
        corpus = build_corpus(cfg.corpus, cfg.noise, cfg.feature, seed)
        if save_corpus_files:
            save_corpus(corpus, seed_dir / "corpus")
    except Exception as exc:  # noqa: BLE001 - stage tagging
        raise StageError(stage, exc) from exc

    stage = "pretrain-speaker"
    try:
        enc_cfg = SpeakerEncoderConfig(cfg.feature.stacked_dim, cfg.speaker_hidden)
        speaker_params, pre_info = pretrain_classifier(
            corpus, enc_cfg, cfg.speaker_train, cfg.feature, seed
        )
        nn.save_checkpoint(
            seed_dir / "speaker.ckpt", speaker_params,
            metadata={"K": enc_cfg.embedding_dim, "frozen": True},
        )
        write_history_csv(seed_dir / "pretrain_history.csv",
                          pre_info["history"], config_hash)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise StageError(stage, exc) from exc

    trained: dict[str, nn.ModelParams] = {}
    for regime in CLEAN_TABLE_REGIMES:
        stage = f"train-{regime}"
        try:
            if regime == "vad":
                params, info = train_standard_vad(
                    corpus, cfg.pvad_train, cfg.feature, cfg.noise,
                    hidden=cfg.pvad_hidden, seed=seed,
                )
                meta = {"input_dim": cfg.feature.stacked_dim, "embed_dim": 0,
                        "hidden": cfg.pvad_hidden, "classes": 2}
            else:
                sub_regime, aug = PVAD_REGIME_ARGS[regime]
                params, info = train_pvad(
                    corpus, sub_regime, aug, speaker_params, cfg.pvad_train,
                    cfg.feature, cfg.aug, cfg.noise,
                    hidden=cfg.pvad_hidden, seed=seed,
                )
                meta = {"input_dim": cfg.feature.stacked_dim,
                        "embed_dim": cfg.embedding_dim,
                        "hidden": cfg.pvad_hidden, "classes": 2}
            nn.save_checkpoint(seed_dir / f"{regime}.ckpt", params, metadata=meta)
            write_history_csv(seed_dir / f"{regime}_history.csv",
                              info["history"], config_hash)
            trained[regime] = params
        except StageError:
            raise
        except Exception as exc:  # noqa: BLE001
            raise StageError(stage, exc) from exc

    metrics_dir = seed_dir / "metrics"
    metrics_dir.mkdir(exist_ok=True)

    stage = "evaluate-clean"
    try:
        clean_examples = build_test_examples(corpus, cfg, seed)
        clean_rows = {}
        for regime in CLEAN_TABLE_REGIMES:
            if regime == "vad":
                metrics = evaluate_standard_vad(trained[regime], clean_examples)
            else:
                metrics = evaluate_pvad(trained[regime], clean_examples,
                                        speaker_params, cfg.feature)
            clean_rows[regime] = metrics
            _write_metrics_json(
                metrics_dir / f"{regime}_clean.json", regime,
                regime.endswith("_aug"), "clean", metrics, config_hash,
            )
        _write_table_clean(seed_dir / "table_clean.csv", clean_rows,
                           config_hash, seed)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise StageError(stage, exc) from exc

    stage = "evaluate-noisy"
    try:
        noisy_rows: dict[float, dict] = {}
        for snr in cfg.noise.test_snrs_db:
            noisy_examples = build_test_examples(corpus, cfg, seed, snr_db=snr)
            noisy_rows[snr] = {}
            for regime in NOISY_TABLE_REGIMES:
                metrics = evaluate_pvad(trained[regime], noisy_examples,
                                        speaker_params, cfg.feature)
                noisy_rows[snr][regime] = metrics
                _write_metrics_json(
                    metrics_dir / f"{regime}_snr{snr:g}.json", regime,
                    regime.endswith("_aug"), f"snr_{snr:g}_db", metrics,
                    config_hash,
                )
        _write_table_noisy(seed_dir / "table_noisy.csv", noisy_rows,
                           config_hash, seed)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise StageError(stage, exc) from exc

    return {
        "seed": seed,
        "clean": {r: _round_metrics(m) for r, m in clean_rows.items()},
        "noisy": {f"{snr:g}": {r: _round_metrics(m) for r, m in by_regime.items()}
                  for snr, by_regime in noisy_rows.items()},
        "pretrain_best_val_loss": pre_info["best_val_loss"],
    }


def _round_metrics(m: dict) -> dict:
    return {k: (round(v, 6) if isinstance(v, float) else v) for k, v in m.items()}


def _run_seed_entry(args):
    cfg_json, seed, seed_dir = args
    cfg = ExperimentConfig.from_dict(json.loads(cfg_json))
    return run_seed(cfg, seed, Path(seed_dir))


def run_matrix(cfg: ExperimentConfig, out_dir, force: bool = False,
               jobs: int = 1) -> Path:
    """All seeds x all regimes; writes per-seed tables plus summary.json."""
    out_dir = Path(out_dir)
    run_dir = out_dir / f"matrix_{cfg.config_hash()}"
    if run_dir.exists() and any(run_dir.iterdir()):
        if not force:
            raise FileExistsError(
                f"run directory {run_dir} already exists; pass --force to redo"
            )
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(cfg.to_json() + "\n")

    seed_dirs = {seed: run_dir / f"seed{seed:03d}" for seed in cfg.seeds}
    if jobs > 1 and len(cfg.seeds) > 1:
        tasks = [(cfg.to_json(), seed, str(seed_dirs[seed])) for seed in cfg.seeds]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_seed_entry, tasks))
    else:
        results = [run_seed(cfg, seed, seed_dirs[seed]) for seed in cfg.seeds]

    summary = {
        "config_hash": cfg.config_hash(),
        "seeds": {str(r["seed"]): r for r in results},
    }
    (run_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n"
    )
    return run_dir


def run_similarity_study(cfg: ExperimentConfig, speaker_params, corpus: Corpus,
                         out_dir, seed: int) -> Path:
    """Fig.-2-style three-panel histogram CSV over the test split."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    study = similarity_study(
        speaker_params, corpus.test, cfg.feature, cfg.aug,
        np.random.default_rng((seed, 0x51)),
    )
    path = out_dir / "similarity_hist.csv"
    write_similarity_csv(path, study, cfg.config_hash())
    return path
