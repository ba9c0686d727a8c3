"""Command line driver: `pvad-lab <subcommand>`.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import nn
from .config import ConfigError, CorpusConfig, ExperimentConfig
from .corpus import build_corpus, load_corpus, save_corpus
from .evaluation import evaluate_pvad, evaluate_standard_vad, precision_recall_rows
from .experiment import (
    CLEAN_TABLE_REGIMES,
    PVAD_REGIME_ARGS,
    StageError,
    build_test_examples,
    run_matrix,
    run_seed,
    run_similarity_study,
)
from .features import extract_stacked, read_wav
from .gradsuite import run_grad_suite
from .pvad import pvad_forward, standard_vad_forward
from .speaker import SpeakerEncoderConfig, encode, pretrain_classifier
from .training import train_pvad, train_standard_vad, write_history_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class DataError(RuntimeError):
    pass


def _load_config(path: str | None, seed: int | None) -> ExperimentConfig:
    if path is None:
        cfg = ExperimentConfig()
    else:
        file = Path(path)
        if not file.exists():
            raise ConfigError(f"config file {path} does not exist")
        cfg = ExperimentConfig.from_json(file.read_text())
    if seed is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": seed})
    return cfg


def _load_speaker(path) -> nn.ModelParams:
    file = Path(path)
    if not file.exists():
        raise DataError(f"speaker checkpoint {path} does not exist")
    params, _, _ = nn.load_checkpoint(file)
    params.freeze_all()
    return params


def _load_corpus_dir(path):
    try:
        return load_corpus(path)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from exc


# --- subcommand implementations ----------------------------------------------


def cmd_synth_corpus(args) -> int:
    cfg = _load_config(args.config, args.seed)
    corpus_cfg = cfg.corpus
    if args.speakers or args.utts_per_speaker:
        raw = cfg.to_dict()
        if args.speakers:
            raw["corpus"]["n_speakers"] = args.speakers
        if args.utts_per_speaker:
            raw["corpus"]["utts_per_speaker"] = args.utts_per_speaker
            raw["corpus"]["train_utts_per_speaker"] = max(
                1, int(args.utts_per_speaker * 0.7)
            )
            raw["corpus"]["val_utts_per_speaker"] = max(
                1, int(args.utts_per_speaker * 0.1)
            )
        cfg = ExperimentConfig.from_dict(raw)
        corpus_cfg = cfg.corpus
    corpus = build_corpus(corpus_cfg, cfg.noise, cfg.feature, cfg.seed)
    out = Path(args.out)
    save_corpus(corpus, out)
    print(f"wrote {len(corpus.all_utterances)} utterances to {out}")
    return EXIT_OK


def cmd_pretrain_speaker(args) -> int:
    cfg = _load_config(args.config, args.seed)
    corpus = _load_corpus_dir(args.corpus)
    enc_cfg = SpeakerEncoderConfig(cfg.feature.stacked_dim, cfg.speaker_hidden)
    params, info = pretrain_classifier(corpus, enc_cfg, cfg.speaker_train,
                                       cfg.feature, cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nn.save_checkpoint(out / "speaker.ckpt", params,
                       metadata={"K": enc_cfg.embedding_dim, "frozen": True})
    write_history_csv(out / "pretrain_history.csv", info["history"],
                      cfg.config_hash())
    print(f"pretrained speaker encoder: best val loss {info['best_val_loss']:.4f}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args.config, args.seed)
    corpus = _load_corpus_dir(args.corpus)
    aug = args.aug == "on"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.regime == "vad":
        params, info = train_standard_vad(corpus, cfg.pvad_train, cfg.feature,
                                          cfg.noise, cfg.pvad_hidden, cfg.seed)
        name = "vad"
        meta = {"input_dim": cfg.feature.stacked_dim, "embed_dim": 0,
                "hidden": cfg.pvad_hidden, "classes": 2}
    else:
        if not args.speaker_ckpt:
            raise ConfigError("--speaker-ckpt is required for PVAD regimes")
        speaker_params = _load_speaker(args.speaker_ckpt)
        regime = args.regime.replace("-", "_")
        params, info = train_pvad(corpus, regime, aug, speaker_params,
                                  cfg.pvad_train, cfg.feature, cfg.aug,
                                  cfg.noise, cfg.pvad_hidden, cfg.seed)
        name = f"{regime}_{'aug' if aug else 'no_aug'}"
        meta = {"input_dim": cfg.feature.stacked_dim,
                "embed_dim": cfg.embedding_dim,
                "hidden": cfg.pvad_hidden, "classes": 2}
    nn.save_checkpoint(out / f"{name}.ckpt", params, metadata=meta)
    write_history_csv(out / f"{name}_history.csv", info["history"], cfg.config_hash())
    print(f"trained {name}: best val loss {info['best_val_loss']:.4f} "
          f"(epoch {info['best_epoch']})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config, args.seed)
    corpus = _load_corpus_dir(args.corpus)
    model_path = Path(args.model_ckpt)
    if not model_path.exists():
        raise DataError(f"model checkpoint {model_path} does not exist")
    params, meta, _ = nn.load_checkpoint(model_path)
    examples = build_test_examples(corpus, cfg, cfg.seed, snr_db=args.snr)
    if meta.get("embed_dim", 0) > 0:
        if not args.speaker_ckpt:
            raise ConfigError("--speaker-ckpt is required to evaluate a PVAD model")
        speaker_params = _load_speaker(args.speaker_ckpt)
        metrics = evaluate_pvad(params, examples, speaker_params, cfg.feature)
        scores = None
    else:
        metrics = evaluate_standard_vad(params, examples)
        scores = None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    noise_condition = "clean" if args.snr is None else f"snr_{args.snr:g}_db"
    payload = {
        "regime": model_path.stem,
        "aug": model_path.stem.endswith("_aug") and not model_path.stem.endswith("_no_aug"),
        "noise_condition": noise_condition,
        "ap_ns_nts": round(metrics["ap_ns_nts"], 6),
        "ap_ts": round(metrics["ap_ts"], 6),
        "map": round(metrics["map"], 6),
        "n_frames": metrics["n_frames"],
        "config_hash": cfg.config_hash(),
    }
    (out / "metrics.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    _write_pr_curves(out, params, meta, examples, args, cfg)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def _write_pr_curves(out, params, meta, examples, args, cfg) -> None:
    from .evaluation import collect_pvad_scores, collect_vad_scores

    if meta.get("embed_dim", 0) > 0:
        speaker_params = _load_speaker(args.speaker_ckpt)
        post, labels = collect_pvad_scores(params, examples, speaker_params, cfg.feature)
    else:
        post, labels = collect_vad_scores(params, examples)
    for cls, name in ((1, "ts"), (0, "ns_nts")):
        rows = precision_recall_rows(post[:, cls], (labels == cls).astype(int))
        lines = [f"# config_hash={cfg.config_hash()}", "threshold,precision,recall"]
        lines += [f"{t:.6f},{p:.6f},{r:.6f}" for t, p, r in rows]
        (Path(out) / f"pr_curve_{name}.csv").write_text("\n".join(lines) + "\n")


def cmd_infer(args) -> int:
    model_dir = Path(args.model_dir)
    cfg_file = model_dir / "config.json"
    if not cfg_file.exists():
        raise DataError(f"{model_dir} has no config.json")
    cfg = ExperimentConfig.from_json(cfg_file.read_text())
    ckpt = model_dir / f"{args.regime}.ckpt"
    if not ckpt.exists():
        raise DataError(f"missing checkpoint {ckpt}")
    params, meta, _ = nn.load_checkpoint(ckpt)
    try:
        input_wav = read_wav(args.input)
        enroll_wav = read_wav(args.enroll) if args.enroll else None
    except (FileNotFoundError, ValueError, EOFError) as exc:
        raise DataError(f"cannot read WAV: {exc}") from exc

    feats = extract_stacked(input_wav, cfg.feature)
    if meta.get("embed_dim", 0) > 0:
        if enroll_wav is None:
            raise ConfigError("--enroll is required for PVAD inference")
        speaker_params = _load_speaker(model_dir / "speaker.ckpt")
        emb = encode(extract_stacked(enroll_wav, cfg.feature), speaker_params)
        post = pvad_forward(feats, emb, params, mode="eval")
    else:
        post = standard_vad_forward(feats, params, mode="eval")
    decisions = np.argmax(post, axis=1)
    segments = decisions_to_segments(decisions, cfg.feature)

    payload = {
        "n_frames": int(decisions.size),
        "frame_decisions": [int(d) for d in decisions],
        "segments": [{"start_s": round(s, 3), "end_s": round(e, 3)}
                     for s, e in segments],
    }
    text = json.dumps(payload, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def decisions_to_segments(decisions: np.ndarray, feat_cfg) -> list[tuple[float, float]]:
    """Run-length encode frame decisions into (start_s, end_s) segments."""
    hop_s = feat_cfg.frame_shift_ms / 1000.0
    win_s = feat_cfg.frame_length_ms / 1000.0
    segments = []
    start = None
    for t, d in enumerate(decisions):
        if d == 1 and start is None:
            start = t
        elif d == 0 and start is not None:
            segments.append((start * hop_s, (t - 1) * hop_s + win_s))
            start = None
    if start is not None:
        segments.append((start * hop_s, (len(decisions) - 1) * hop_s + win_s))
    return segments


def cmd_run_matrix(args) -> int:
    cfg = _load_config(args.config, args.seed)
    run_dir = run_matrix(cfg, args.out, force=args.force, jobs=args.jobs)
    print(f"matrix complete: {run_dir}")
    return EXIT_OK


def cmd_similarity_study(args) -> int:
    cfg = _load_config(args.config, args.seed)
    speaker_params = _load_speaker(args.speaker_ckpt)
    corpus = _load_corpus_dir(args.corpus)
    path = run_similarity_study(cfg, speaker_params, corpus, args.out, cfg.seed)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    report = run_grad_suite(tolerance=args.tolerance)
    worst = 0.0
    for block, err in report.items():
        status = "ok" if err < args.tolerance else "FAIL"
        print(f"{block:<24s} max_rel_err={err:.3e} {status}")
        worst = max(worst, err)
    if worst >= args.tolerance:
        print(f"gradient check failed: {worst:.3e} >= {args.tolerance:g}")
        return EXIT_NUMERIC
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pvad-lab",
        description="Desk-scale enrollment-less personalized VAD lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth-corpus", help="synthesize a labeled speaker corpus")
    common(p)
    p.add_argument("--speakers", type=int, default=0)
    p.add_argument("--utts-per-speaker", type=int, default=0)
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("pretrain-speaker", help="train the speaker encoder")
    common(p)
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_pretrain_speaker)

    p = sub.add_parser("train", help="train the VAD baseline or a PVAD regime")
    common(p)
    p.add_argument("--regime", required=True,
                   choices=["vad", "enroll-full", "enroll-less"])
    p.add_argument("--aug", choices=["on", "off"], default="off")
    p.add_argument("--corpus", required=True)
    p.add_argument("--speaker-ckpt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="AP metrics of a trained checkpoint")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--model-ckpt", required=True)
    p.add_argument("--speaker-ckpt")
    p.add_argument("--snr", type=float, default=None,
                   help="evaluate with held-out noise at this SNR (dB)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("infer", help="frame decisions for one WAV")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--regime", default="enroll_less_aug")
    p.add_argument("--enroll")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("run-matrix", help="full multi-seed experiment matrix")
    common(p)
    p.add_argument("--force", action="store_true",
                   help="overwrite an existing run directory")
    p.add_argument("--jobs", type=int, default=1,
                   help="seed-level process parallelism")
    p.set_defaults(func=cmd_run_matrix)

    p = sub.add_parser("similarity-study", help="embedding similarity histograms")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--speaker-ckpt", required=True)
    p.set_defaults(func=cmd_similarity_study)

    p = sub.add_parser("grad-check", help="finite-difference gradient suite")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileExistsError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, nn.NonDeterministicClosureError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except StageError as exc:
        cause = exc.__cause__
        if isinstance(cause, FloatingPointError):
            print(f"numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
