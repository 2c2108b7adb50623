"""Command-line interface.

Subcommands: augment, train, eval, score, gradcheck.  Exit codes:
0 success, 1 failed check, 2 input/config errors, 3 training divergence,
4 corrupt checkpoint.  RETRORANK_SEED supplies a default seed when
neither a flag nor a config file sets one; the seed in effect is always
echoed in outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import checkpoint as ckpt
from . import corpus, datagen, evaluation, gradcheck, training, transforms
from .numcore.prng import Prng

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_DIVERGED = 3
EXIT_CHECKPOINT = 4


def _env_seed() -> int | None:
    raw = os.environ.get("RETRORANK_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"RETRORANK_SEED must be an integer, got {raw!r}")


def _punct_set(raw: str | None):
    if raw is None:
        return corpus.DEFAULT_PUNCTUATION
    return frozenset(raw.split())


def _load_corpus(path, punct, cjk):
    try:
        return corpus.load_corpus(path, punctuation=punct, cjk_per_char=cjk)
    except FileNotFoundError:
        print(f"error: corpus file not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)
    except corpus.CorpusError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def cmd_augment(args) -> int:
    punct = _punct_set(args.punct)
    examples = _load_corpus(getattr(args, "in"), punct, args.cjk)
    try:
        plan = transforms.AugmentationPlan.parse(args.ctx_transforms, args.resp_transforms)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    with open(args.out, "w", encoding="utf-8") as fh:
        for ex in examples:
            for i, j, view in transforms.apply_plan(
                    ex, plan, transforms.CONTEXT_AND_RESPONSE, punct):
                record = corpus.example_to_json(view)
                record["ctx_transform"] = plan.context_transforms[i].value
                record["resp_transform"] = plan.response_transforms[j].value
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return EXIT_OK


_CONFIG_FLAGS = ["model_kind", "t", "learning_rate", "dropout_rate", "max_epochs",
                 "patience", "batch_size", "seed", "ctx_transforms", "resp_transforms",
                 "scope", "embed_dim", "hidden_size", "candidate_k", "min_count"]


def _build_config(args) -> training.TrainingConfig:
    values: dict = {}
    if args.config:
        values.update(training.read_config_values(args.config))
    if "seed" not in values and _env_seed() is not None:
        values["seed"] = _env_seed()
    for name in _CONFIG_FLAGS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return training.TrainingConfig.from_mapping(values)


def cmd_train(args) -> int:
    try:
        config = _build_config(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    punct = _punct_set(args.punct)
    train_examples = _load_corpus(args.train, punct, args.cjk)
    valid_examples = _load_corpus(args.valid, punct, args.cjk)
    vocab = corpus.Vocab.build(train_examples, min_count=config.min_count)

    pretrained = None
    if args.embeddings:
        try:
            pretrained = corpus.load_embeddings(
                args.embeddings, vocab, config.embed_dim,
                Prng(config.seed).substream("embeddings"))
        except (OSError, corpus.CorpusError) as exc:
            print(f"error: {args.embeddings}: {exc}", file=sys.stderr)
            return EXIT_INPUT

    try:
        valid_sets = corpus.build_candidate_sets(
            valid_examples, config.candidate_k,
            Prng(config.seed).substream("candidates"))
    except (ValueError, corpus.SamplingExhaustedError) as exc:
        print(f"error: building validation candidate sets: {exc}", file=sys.stderr)
        return EXIT_INPUT

    try:
        model, report = training.train(config, train_examples, valid_sets, vocab,
                                       pretrained=pretrained, punctuation=punct)
    except training.DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    ckpt.save_checkpoint(args.out_checkpoint, model, config)
    report_path = args.out_checkpoint + ".report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    print(json.dumps({"seed": config.seed, "best_epoch": report.best_epoch,
                      "best_recall_at_1": max(report.valid_recalls),
                      "checkpoint": args.out_checkpoint,
                      "report": report_path}, sort_keys=True))
    return EXIT_OK


def _load_checkpoint(path):
    try:
        return ckpt.load_checkpoint(path)
    except FileNotFoundError:
        print(f"error: checkpoint not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)
    except ckpt.CheckpointError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CHECKPOINT)


def cmd_eval(args) -> int:
    model, config = _load_checkpoint(args.checkpoint)
    test_examples = _load_corpus(args.test, model.punctuation, args.cjk)
    seed = args.seed if args.seed is not None else (
        _env_seed() if _env_seed() is not None else config.seed)
    k = args.k if args.k is not None else config.candidate_k
    try:
        sets = corpus.build_candidate_sets(test_examples, k,
                                           Prng(seed).substream("candidates"))
    except (ValueError, corpus.SamplingExhaustedError) as exc:
        print(f"error: building candidate sets: {exc}", file=sys.stderr)
        return EXIT_INPUT
    ranked = evaluation.rank_all(model, sets)
    report = {
        "recall_at_1": evaluation.recall_at_k(ranked, 1),
        "recall_at_2": evaluation.recall_at_k(ranked, 2),
        "recall_at_5": evaluation.recall_at_k(ranked, 5),
        "num_sets": len(ranked),
        "k": k,
        "seed": seed,
    }
    line = json.dumps(report, sort_keys=True)
    print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(line + "\n")
    if args.per_set:
        with open(args.per_set, "w", encoding="utf-8") as fh:
            for idx, r in enumerate(ranked):
                rank = r.order.index(r.positive_index) + 1
                fh.write(f"{idx}\t{rank}\n")
    return EXIT_OK


def cmd_score(args) -> int:
    model, _config = _load_checkpoint(args.checkpoint)
    texts = [part.strip() for part in args.context.split("||") if part.strip()]
    if not texts:
        print("error: --context is empty", file=sys.stderr)
        return EXIT_INPUT
    context = [corpus.Message("", corpus.tokenize(t, model.punctuation, args.cjk))
               for t in texts]
    try:
        with open(args.candidates, encoding="utf-8") as fh:
            lines = [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not lines:
        print("error: candidates file is empty", file=sys.stderr)
        return EXIT_INPUT
    candidates = [corpus.tokenize(t, model.punctuation, args.cjk) for t in lines]
    from .numcore.autodiff import no_grad
    from .numcore.kernels import sigmoid as _sig
    with no_grad():
        logits = [float(n.value) for n in model.candidate_logits(context, candidates)]
    order = sorted(range(len(logits)), key=lambda i: (-logits[i], i))
    for idx in order:
        prob = float(_sig(logits[idx]))
        print(f"{logits[idx]:+.6f}\t{prob:.6f}\t{lines[idx]}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    failed = False
    for augmented in (False, True):
        errors = gradcheck.toy_model_errors(args.model_kind, dims=args.dims,
                                            seed=seed, augmented=augmented)
        worst = gradcheck.max_error(errors)
        plan = "2x2 identity/flip" if augmented else "identity-only"
        status = "ok" if worst < gradcheck.DEFAULT_TOLERANCE else "FAIL"
        print(f"{args.model_kind} {plan}: max relative error {worst:.3e} [{status}]")
        if status == "FAIL":
            failed = True
            for name, err in sorted(errors.items(), key=lambda kv: -kv[1]):
                if err >= gradcheck.DEFAULT_TOLERANCE:
                    print(f"  {name}: {err:.3e}")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retrorank",
        description="Dialog response selection with combined context/response views.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="dump the transformed corpus views")
    p_aug.add_argument("--in", required=True)
    p_aug.add_argument("--out", required=True)
    p_aug.add_argument("--ctx-transforms", dest="ctx_transforms", default="identity")
    p_aug.add_argument("--resp-transforms", dest="resp_transforms", default="identity")
    p_aug.add_argument("--punct", default=None,
                       help="space-separated punctuation tokens for flipping")
    p_aug.add_argument("--cjk", action="store_true",
                       help="split CJK text one character per token")
    p_aug.set_defaults(func=cmd_augment)

    p_train = sub.add_parser("train", help="train a scorer and write a checkpoint")
    p_train.add_argument("--config", default=None, help="key=value config file")
    p_train.add_argument("--train", required=True)
    p_train.add_argument("--valid", required=True)
    p_train.add_argument("--out-checkpoint", dest="out_checkpoint", required=True)
    p_train.add_argument("--embeddings", default=None,
                         help="word2vec text file for embedding init")
    p_train.add_argument("--punct", default=None)
    p_train.add_argument("--cjk", action="store_true")
    p_train.add_argument("--model-kind", dest="model_kind",
                         choices=["lstm_de", "hre_de", "smn"], default=None)
    p_train.add_argument("--t", type=float, default=None)
    p_train.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p_train.add_argument("--dropout-rate", dest="dropout_rate", type=float, default=None)
    p_train.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
    p_train.add_argument("--patience", type=int, default=None)
    p_train.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--ctx-transforms", dest="ctx_transforms", default=None)
    p_train.add_argument("--resp-transforms", dest="resp_transforms", default=None)
    p_train.add_argument("--scope", choices=[transforms.CONTEXT_ONLY,
                                             transforms.CONTEXT_AND_RESPONSE],
                         default=None)
    p_train.add_argument("--embed-dim", dest="embed_dim", type=int, default=None)
    p_train.add_argument("--hidden-size", dest="hidden_size", type=int, default=None)
    p_train.add_argument("--candidate-k", dest="candidate_k", type=int, default=None)
    p_train.add_argument("--min-count", dest="min_count", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="recall-at-k over sampled candidate sets")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--test", required=True)
    p_eval.add_argument("--k", type=int, default=None)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--out", default=None, help="also write the JSON report here")
    p_eval.add_argument("--per-set", dest="per_set", default=None,
                        help="TSV of per-set positive ranks")
    p_eval.add_argument("--cjk", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_score = sub.add_parser("score", help="score candidates for one context")
    p_score.add_argument("--checkpoint", required=True)
    p_score.add_argument("--context", required=True,
                         help="messages separated by ||, oldest first")
    p_score.add_argument("--candidates", required=True,
                         help="file with one candidate response per line")
    p_score.add_argument("--cjk", action="store_true")
    p_score.set_defaults(func=cmd_score)

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p_gc.add_argument("--model-kind", dest="model_kind",
                      choices=["lstm_de", "hre_de", "smn"], required=True)
    p_gc.add_argument("--dims", type=int, default=4)
    p_gc.add_argument("--seed", type=int, default=None)
    p_gc.set_defaults(func=cmd_gradcheck)

    p_synth = sub.add_parser("synth", help="write a synthetic template corpus")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--n", type=int, default=200)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--topics", type=int, default=20)
    p_synth.add_argument("--layout", choices=["topic", "position"], default="topic")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    maker = (datagen.make_topic_corpus if args.layout == "topic"
             else datagen.make_position_corpus)
    corpus.save_corpus(maker(args.n, seed, args.topics), args.out)
    print(json.dumps({"out": args.out, "n": args.n, "seed": seed,
                      "layout": args.layout}, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
