"""Command-line entry point for the paraphrasing pipeline.

One subcommand per pipeline stage, a structured config file with
command-line overrides, per-stage seeds, and a manifest in every run
directory recording the config hash and input hashes needed to re-issue
the command. Exit codes: 0 success, 2 config error, 3 missing input,
4 backend failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import yaml

from . import __version__
from .adversary import HypothesisOnlyAdversary
from .augmentation import (
    AugmentationMode,
    EntailmentExample,
    export_adversarial_candidates,
    generate_augmentations,
    write_adversarial_csv,
)
from .dataio import load_pairs, read_jsonl, save_pairs, write_jsonl
from .errors import BackendError
from .generator import ConditioningMode, GeneratorConfig, RelationParaphraser, make_rng
from .metrics import EvalRow, evaluate, rerank
from .oracle import (
    HTTPNLIBackend,
    NLIBackend,
    SyntheticWorldBackend,
    weak_label_corpus,
)
from .recast import EXPECTED_SICK_COUNTS, counts_match, filter_for_training, load_sick, recast
from .relations import (
    DecodeStrategy,
    EntailmentRelation,
    GenerationRequest,
    RewardConfig,
    SentencePair,
    detokenize,
    tokenize,
)
from .scorers import ScorerBackends, TokenOverlapSimilarity, score_sample
from .training import FinetuneConfig, PretrainConfig, finetune, pretrain

log = logging.getLogger(__name__)

NLI_ENDPOINT_ENV = "RELPARA_NLI_ENDPOINT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_BACKEND = 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Shared plumbing


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"missing required path for {what}")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _write_manifest(
    out_dir: Path,
    command: str,
    config: dict,
    inputs: list[Path],
    seeds: dict,
    complete: bool = True,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    config_json = json.dumps(config, sort_keys=True, default=str)
    manifest = {
        "command": command,
        "config": json.loads(config_json),
        "config_hash": _sha256_text(config_json),
        "seeds": seeds,
        "inputs": {str(p): _sha256_file(p) for p in inputs},
        "version": __version__,
        "complete": complete,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _make_oracle(args: argparse.Namespace) -> NLIBackend:
    kind = getattr(args, "oracle", "synthetic")
    if kind == "synthetic":
        return SyntheticWorldBackend()
    if kind == "http":
        endpoint = getattr(args, "nli_endpoint", None) or os.environ.get(
            NLI_ENDPOINT_ENV
        )
        if not endpoint:
            raise ConfigError(
                f"http oracle needs --nli-endpoint or ${NLI_ENDPOINT_ENV}"
            )
        return HTTPNLIBackend(endpoint)
    raise ConfigError(f"unknown oracle backend {kind!r}")


def _make_backends(args: argparse.Namespace, adversary=None) -> ScorerBackends:
    return ScorerBackends(
        similarity=TokenOverlapSimilarity(),
        oracle=_make_oracle(args),
        adversary=adversary,
    )


def _reward_config(args: argparse.Namespace) -> RewardConfig:
    base = RewardConfig()
    overrides = {
        name: getattr(args, name)
        for name in ("alpha", "beta", "delta", "n_rollouts", "gamma", "sim_low", "sim_high")
        if getattr(args, name, None) is not None
    }
    return replace(base, **overrides)


def _relation(value: str) -> EntailmentRelation:
    try:
        return EntailmentRelation(value.upper())
    except ValueError:
        raise ConfigError(f"unknown relation {value!r}") from None


def _load_config_file(args: argparse.Namespace) -> None:
    """Fill unset args from a YAML config file; explicit flags win."""
    if not getattr(args, "config", None):
        return
    path = _require_file(args.config, "config file")
    with open(path, "r", encoding="utf-8") as fh:
        payload = yaml.safe_load(fh) or {}
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a mapping")
    for key, value in payload.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None and hasattr(args, attr):
            setattr(args, attr, value)


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_recast(args: argparse.Namespace) -> int:
    sick_path = _require_file(args.sick, "SICK file")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = recast(load_sick(sick_path))
    for split, pairs in dataset.pairs.items():
        save_pairs(out_dir / f"{split.value.lower()}.jsonl", pairs)
    for split, pairs in dataset.others.items():
        save_pairs(out_dir / f"others_{split.value.lower()}.jsonl", pairs)
    write_jsonl(
        out_dir / "rejects.jsonl",
        (
            {
                "sentence_a": r.sentence_a,
                "sentence_b": r.sentence_b,
                "transformation_group": r.transformation_group,
                "split": r.split.value,
            }
            for r in dataset.rejects
        ),
    )
    counts = dataset.counts()
    with open(out_dir / "counts.json", "w", encoding="utf-8") as fh:
        json.dump(counts, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not counts_match(counts, EXPECTED_SICK_COUNTS):
        log.warning("recast counts differ from the published table: %s", counts)
    if args.filtered_out:
        filtered = filter_for_training(dataset, seed=args.seed)
        filtered_dir = Path(args.filtered_out)
        filtered_dir.mkdir(parents=True, exist_ok=True)
        for split, pairs in filtered.items():
            save_pairs(filtered_dir / f"{split.value.lower()}.jsonl", pairs)
    _write_manifest(
        out_dir, "recast", {"sick": str(sick_path)}, [sick_path], {"balance": args.seed}
    )
    print(json.dumps(counts, sort_keys=True))
    return EXIT_OK


def _cmd_weak_label(args: argparse.Namespace) -> int:
    in_path = _require_file(args.input, "pair file")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    backend = _make_oracle(args)
    labeled, stats = weak_label_corpus(read_jsonl(in_path), backend)
    save_pairs(out_dir / "labeled.jsonl", labeled)
    with open(out_dir / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out_dir, "weak-label", {"oracle": args.oracle}, [in_path], {})
    print(json.dumps(stats.to_json(), sort_keys=True))
    return EXIT_OK


def _generator_config(args: argparse.Namespace) -> GeneratorConfig:
    config = (
        GeneratorConfig.full_scale() if args.preset == "full" else GeneratorConfig()
    )
    overrides = {
        name: getattr(args, name)
        for name in ("layers", "d_model", "heads", "ffn_dim", "dropout", "label_smoothing")
        if getattr(args, name, None) is not None
    }
    return replace(config, seed=args.seed, **overrides)


def _cmd_pretrain(args: argparse.Namespace) -> int:
    train_path = _require_file(args.train, "training pairs")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mode = ConditioningMode(args.mode.upper())
    corpus = load_pairs(train_path)
    dev = None
    inputs = [train_path]
    if args.dev:
        dev_path = _require_file(args.dev, "dev pairs")
        dev = load_pairs(dev_path)
        inputs.append(dev_path)
    config = PretrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        min_len=args.min_len,
        max_len=args.max_len,
        seed=args.seed,
        generator=_generator_config(args),
    )
    oracle = _make_oracle(args) if dev is not None else None
    model, report = pretrain(corpus, mode, config, dev=dev, oracle_backend=oracle)
    model.save(out_dir / "generator.pt")
    write_jsonl(out_dir / "report.jsonl", report)
    _write_manifest(
        out_dir,
        "pretrain",
        {"mode": mode.value, **asdict(config)},
        inputs,
        {"shuffle": args.seed, "init": args.seed},
    )
    print(json.dumps(report[-1] if report else {}, sort_keys=True))
    return EXIT_OK


def _cmd_finetune(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_path = _require_file(args.train, "training pairs")
    dataset = load_pairs(train_path)
    inputs = [train_path]
    dev = None
    if args.dev:
        dev_path = _require_file(args.dev, "dev pairs")
        dev = load_pairs(dev_path)
        inputs.append(dev_path)
    start_epoch = 0
    adversary = None
    if args.resume:
        resume_dir = _require_file(args.resume, "resume checkpoint")
        model = RelationParaphraser.load(resume_dir / "generator.pt")
        adversary_path = resume_dir / "adversary.pt"
        if adversary_path.exists():
            adversary = HypothesisOnlyAdversary.load(adversary_path)
        start_epoch = int(resume_dir.name.removeprefix("epoch_"))
    else:
        model_path = _require_file(args.model, "pre-trained generator")
        model = RelationParaphraser.load(model_path)
        inputs.append(model_path)
    if adversary is None and not args.no_adversary:
        adversary = HypothesisOnlyAdversary(model.vocab)
    config = FinetuneConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        min_len=args.min_len,
        max_len=args.max_len,
        seed=args.seed,
        adversary_enabled=not args.no_adversary,
        reward=_reward_config(args),
        checkpoint_dir=str(out_dir),
    )
    backends = _make_backends(args)
    model, report = finetune(
        model,
        dataset,
        config,
        backends,
        dev=dev,
        adversary=adversary,
        start_epoch=start_epoch,
    )
    model.save(out_dir / "generator.pt")
    _write_manifest(
        out_dir,
        "finetune",
        asdict(config),
        inputs,
        {"shuffle": args.seed, "sampling": args.seed},
    )
    print(json.dumps(report[-1] if report else {}, sort_keys=True))
    return EXIT_OK


def _read_inputs(args: argparse.Namespace) -> list[str]:
    if args.x is not None:
        return [args.x]
    in_path = _require_file(args.input, "input sentences")
    return [line.strip() for line in in_path.read_text("utf-8").splitlines() if line.strip()]


def _cmd_generate(args: argparse.Namespace) -> int:
    model = RelationParaphraser.load(_require_file(args.model, "generator"))
    relation = _relation(args.relation)
    rng = make_rng(args.seed)
    for sentence in _read_inputs(args):
        request = GenerationRequest(
            x=sentence,
            relation=relation,
            decode=DecodeStrategy(args.decode.upper()),
            min_len=args.min_len,
            max_len=args.max_len,
        )
        print(detokenize(model.generate(request, rng=rng)))
    return EXIT_OK


def _cmd_rerank(args: argparse.Namespace) -> int:
    model = RelationParaphraser.load(_require_file(args.model, "generator"))
    relation = _relation(args.relation)
    backends = _make_backends(args)
    config = _reward_config(args)
    for sentence in _read_inputs(args):
        chosen = rerank(
            model,
            sentence,
            relation,
            args.k,
            config,
            backends,
            seed=args.seed,
            min_len=args.min_len,
            max_len=args.max_len,
        )
        print(detokenize(chosen))
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    pred_path = _require_file(args.pred, "prediction file")
    rows = [EvalRow.from_record(rec) for rec in read_jsonl(pred_path)]
    oracle = _make_oracle(args) if args.oracle != "none" else None
    report = evaluate(rows, oracle)
    payload = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(payload + "\n", "utf-8")
    print(payload)
    return EXIT_OK


def _cmd_score(args: argparse.Namespace) -> int:
    backends = _make_backends(args)
    report = score_sample(
        tokenize(args.x),
        tokenize(args.y),
        _relation(args.relation),
        _reward_config(args),
        backends,
    )
    print(json.dumps(asdict(report), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_augment(args: argparse.Namespace) -> int:
    data_path = _require_file(args.data, "entailment data")
    model = RelationParaphraser.load(_require_file(args.model, "generator"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [EntailmentExample.from_record(rec) for rec in read_jsonl(data_path)]
    relations = [_relation(r) for r in args.relations.split(",") if r]
    mode = AugmentationMode(args.mode.upper())

    def paraphraser(sentence: str, relation: EntailmentRelation | None) -> str:
        request = GenerationRequest(
            x=sentence,
            relation=relation or EntailmentRelation.EQ,
            decode=DecodeStrategy.BEAM,
            min_len=args.min_len,
            max_len=args.max_len,
        )
        return detokenize(model.generate(request))

    augmented, stats = generate_augmentations(rows, paraphraser, relations, mode)
    write_jsonl(out_dir / "augmented.jsonl", (r.to_record() for r in augmented))
    with open(out_dir / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(
        out_dir,
        "augment",
        {"relations": args.relations, "mode": mode.value},
        [data_path],
        {},
    )
    print(json.dumps(stats.to_json(), sort_keys=True))
    return EXIT_OK


def _cmd_export_adversarial(args: argparse.Namespace) -> int:
    from .augmentation import AugmentedExample

    augmented_path = _require_file(args.augmented, "augmented data")
    rows = [AugmentedExample.from_record(rec) for rec in read_jsonl(augmented_path)]
    candidates = export_adversarial_candidates(rows, _make_oracle(args))
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    n = write_adversarial_csv(candidates, out_path)
    print(json.dumps({"candidates": n, "rows": len(rows)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_oracle_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--oracle", default="synthetic", choices=["synthetic", "http", "none"])
    sub.add_argument("--nli-endpoint", default=None)


def _add_reward_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--alpha", type=float, default=None)
    sub.add_argument("--beta", type=float, default=None)
    sub.add_argument("--delta", type=float, default=None)
    sub.add_argument("--n-rollouts", type=int, default=None, dest="n_rollouts")
    sub.add_argument("--gamma", type=float, default=None)
    sub.add_argument("--sim-low", type=float, default=None, dest="sim_low")
    sub.add_argument("--sim-high", type=float, default=None, dest="sim_high")


def _add_decode_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--min-len", type=int, default=5, dest="min_len")
    sub.add_argument("--max-len", type=int, default=40, dest="max_len")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relpara",
        description="Entailment-relation-controlled paraphrasing pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", default=None, help="YAML defaults; flags win")
    parser.add_argument("--verbose", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("recast", help="recast a SICK file into relation pairs")
    sub.add_argument("--sick", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--filtered-out", default=None, dest="filtered_out")
    sub.add_argument("--seed", type=int, default=0)

    sub = commands.add_parser("weak-label", help="oracle-label raw paraphrase pairs")
    sub.add_argument("--input", required=True)
    sub.add_argument("--out", required=True)
    _add_oracle_args(sub)

    sub = commands.add_parser("pretrain", help="supervised pre-training")
    sub.add_argument("--train", required=True)
    sub.add_argument("--dev", default=None)
    sub.add_argument("--mode", default="aware", choices=["aware", "unaware"])
    sub.add_argument("--out", required=True)
    sub.add_argument("--epochs", type=int, default=20)
    sub.add_argument("--batch-size", type=int, default=256, dest="batch_size")
    sub.add_argument("--lr", type=float, default=1e-4)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--preset", default="desk", choices=["desk", "full"])
    sub.add_argument("--layers", type=int, default=None)
    sub.add_argument("--d-model", type=int, default=None, dest="d_model")
    sub.add_argument("--heads", type=int, default=None)
    sub.add_argument("--ffn-dim", type=int, default=None, dest="ffn_dim")
    sub.add_argument("--dropout", type=float, default=None)
    sub.add_argument("--label-smoothing", type=float, default=None, dest="label_smoothing")
    _add_decode_args(sub)
    _add_oracle_args(sub)

    sub = commands.add_parser("finetune", help="RL fine-tuning with the evaluator")
    sub.add_argument("--model", default=None)
    sub.add_argument("--resume", default=None, help="epoch checkpoint dir to continue from")
    sub.add_argument("--train", required=True)
    sub.add_argument("--dev", default=None)
    sub.add_argument("--out", required=True)
    sub.add_argument("--epochs", type=int, default=1)
    sub.add_argument("--batch-size", type=int, default=16, dest="batch_size")
    sub.add_argument("--lr", type=float, default=2e-5)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--no-adversary", action="store_true", dest="no_adversary")
    _add_decode_args(sub)
    _add_oracle_args(sub)
    _add_reward_args(sub)

    sub = commands.add_parser("generate", help="decode paraphrases")
    sub.add_argument("--model", required=True)
    sub.add_argument("--relation", required=True)
    sub.add_argument("--x", default=None)
    sub.add_argument("--input", default=None)
    sub.add_argument("--decode", default="beam", choices=["beam", "nucleus"])
    sub.add_argument("--seed", type=int, default=0)
    _add_decode_args(sub)

    sub = commands.add_parser("rerank", help="sample k candidates, keep best-scoring")
    sub.add_argument("--model", required=True)
    sub.add_argument("--relation", required=True)
    sub.add_argument("--x", default=None)
    sub.add_argument("--input", default=None)
    sub.add_argument("--k", type=int, default=5)
    sub.add_argument("--seed", type=int, default=0)
    _add_decode_args(sub)
    _add_oracle_args(sub)
    _add_reward_args(sub)

    sub = commands.add_parser("evaluate", help="corpus metrics over prediction rows")
    sub.add_argument("--pred", required=True)
    sub.add_argument("--out", default=None)
    _add_oracle_args(sub)

    sub = commands.add_parser("score", help="score one pair with the evaluator")
    sub.add_argument("--x", required=True)
    sub.add_argument("--y", required=True)
    sub.add_argument("--relation", required=True)
    _add_oracle_args(sub)
    _add_reward_args(sub)

    sub = commands.add_parser("augment", help="label-projected augmentation")
    sub.add_argument("--data", required=True)
    sub.add_argument("--model", required=True)
    sub.add_argument("--relations", default="EQ")
    sub.add_argument("--mode", default="aware", choices=["aware", "unaware"])
    sub.add_argument("--out", required=True)
    _add_decode_args(sub)

    sub = commands.add_parser(
        "export-adversarial", help="export oracle-disputed augmentations"
    )
    sub.add_argument("--augmented", required=True)
    sub.add_argument("--out", required=True)
    _add_oracle_args(sub)

    return parser


_HANDLERS = {
    "recast": _cmd_recast,
    "weak-label": _cmd_weak_label,
    "pretrain": _cmd_pretrain,
    "finetune": _cmd_finetune,
    "generate": _cmd_generate,
    "rerank": _cmd_rerank,
    "evaluate": _cmd_evaluate,
    "score": _cmd_score,
    "augment": _cmd_augment,
    "export-adversarial": _cmd_export_adversarial,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        _load_config_file(args)
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        log.error("missing input: %s", exc)
        return EXIT_MISSING_INPUT
    except BackendError as exc:
        log.error("backend failure: %s", exc)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
