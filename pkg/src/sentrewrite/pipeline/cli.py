"""Command-line interface: ``sentrewrite <verb> [options]``.

Every verb accepts ``--config``, ``--seed`` and ``--out-dir`` and writes its
resolved configuration next to its outputs.  Failures exit with status 1
and print one JSON line ``{"error": ..., "type": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..abstractor import AbstractorTrainConfig, Seq2Seq, Seq2SeqConfig, train_abstractor
from ..extractor import Critic, DecodeMode, EncoderConfig, EncoderVariant, ExtractorPolicy
from ..oracle import METHODS, OracleLabel, format_report, oracle_report, select, sentence_match
from ..rl import RLConfig, a2c_finetune
from ..rouge import RougeVariant, rouge_l_summary, score_variant, truncate_sentences
from ..textproc import Sentence, normalize_tokens
from .config import CONFIG_FILENAME, RunConfig, load_config, save_config
from .data import ingest_jsonl, read_jsonl, serialize_jsonl, write_jsonl
from .pretrain import PretrainConfig, pretrain_extractor
from .synth import SyntheticSpec, gen_synthetic
from .system import EvalMode, abstract_sentences, evaluate, summarize


def _pairs(path):
    return [r.to_documents() for r in ingest_jsonl(path)]


def _out(args, name: str) -> Path:
    return Path(args.out_dir) / name


def _abstractor(spec: str | None):
    if spec in (None, "identity"):
        return None
    return Seq2Seq.load(spec)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# ------------------------------------------------------------------ verbs

def cmd_gen_synth(args, cfg: RunConfig):
    spec = SyntheticSpec(n_docs=args.n_docs, vocab_size=args.vocab_size,
                         near_duplicate_rate=args.near_duplicate_rate,
                         noise_rate=args.noise_rate, seed=cfg.seed)
    corpus = gen_synthetic(spec)
    serialize_jsonl(corpus.records, _out(args, "corpus.jsonl"))
    write_jsonl((t.to_json() for t in corpus.truth), _out(args, "truth.jsonl"))
    _emit({"docs": len(corpus.records), "traps": sum(t.trap for t in corpus.truth)})


def cmd_oracle(args, cfg: RunConfig):
    labels, abs_pairs = [], []
    for doc, ref in _pairs(args.input):
        labels.append(select(args.method, doc, ref, max_k=cfg.max_k).to_json())
        abs_pairs += [{"id": doc.id, "source": p.source.text(), "target": p.target.text()}
                      for p in sentence_match(doc, ref)]
    write_jsonl(labels, _out(args, "labels.jsonl"))
    write_jsonl(abs_pairs, _out(args, "abstractor_pairs.jsonl"))
    _emit({"labels": len(labels), "pairs": len(abs_pairs)})


def cmd_oracle_report(args, cfg: RunConfig):
    rows = oracle_report(_pairs(args.input), methods=args.methods, max_k=cfg.max_k)
    with open(_out(args, "oracle_report.json"), "w") as fh:
        json.dump([r.as_dict() for r in rows], fh, indent=2)
    print(format_report(rows))


def _labels_for(pairs, path, cfg):
    if path:
        labels = {o["id"]: OracleLabel.from_json(o) for o in read_jsonl(path)}
        missing = [doc.id for doc, _ in pairs if doc.id not in labels]
        if missing:
            raise ValueError("labels missing for ids: " + ", ".join(missing))
        return [labels[doc.id] for doc, _ in pairs]
    return [select("greedy", doc, ref, max_k=cfg.max_k) for doc, ref in pairs]


def cmd_pretrain_ext(args, cfg: RunConfig):
    pairs = _pairs(args.input)
    docs = [d for d, _ in pairs]
    labels = _labels_for(pairs, args.labels, cfg)
    enc = EncoderConfig(EncoderVariant(cfg.encoder), cfg.embed_dim, cfg.hidden_dim,
                        cfg.num_layers, cfg.ff_dim, cfg.max_tokens)
    policy = ExtractorPolicy(enc, ExtractorPolicy.build_vocab(docs), seed=cfg.seed)
    log = []
    pretrain_extractor(docs, labels, policy,
                       PretrainConfig(cfg.ext_epochs, cfg.lr_base, cfg.warmup, cfg.clip, cfg.seed,
                                      cfg.betas),
                       on_epoch=log.append)
    policy.save(_out(args, "extractor.ckpt"))
    write_jsonl(log, _out(args, "pretrain_log.jsonl"))
    _emit(log[-1])


def _abs_pairs(args):
    from ..oracle import AbstractorPair
    if args.pairs:
        return [AbstractorPair(Sentence.from_text(o["source"]), Sentence.from_text(o["target"]))
                for o in read_jsonl(args.pairs)]
    out = []
    for doc, ref in _pairs(args.input):
        out += sentence_match(doc, ref)
    return out


def cmd_train_abs(args, cfg: RunConfig):
    if not (args.pairs or args.input):
        raise ValueError("train-abs needs --input or --pairs")
    pairs = _abs_pairs(args)
    model = Seq2Seq(Seq2SeqConfig(cfg.abs_embed_dim, cfg.abs_hidden_dim, cfg.abs_max_len),
                    Seq2Seq.build_vocab(pairs, min_count=args.min_count), seed=cfg.seed)
    log = []
    train_abstractor(pairs, model, AbstractorTrainConfig(cfg.abs_epochs, cfg.abs_lr,
                                                         cfg.abs_batch_size, cfg.clip, cfg.seed,
                                                         cfg.betas),
                     on_epoch=log.append)
    model.save(_out(args, "abstractor.ckpt"))
    write_jsonl(log, _out(args, "abstractor_log.jsonl"))
    _emit(log[-1])


def cmd_train_rl(args, cfg: RunConfig):
    pairs = _pairs(args.input)
    actor = ExtractorPolicy.load(args.actor_ckpt)
    critic = Critic.load(args.critic_ckpt, actor) if args.critic_ckpt else None
    abstractor = _abstractor(args.abstractor)
    rewrite = None if abstractor is None else abstractor.rewrite
    rl_cfg = RLConfig(cfg.gamma, cfg.stop_lambda, cfg.rl_lr, cfg.reward_mode, cfg.stop_mode,
                      cfg.normalize_adv, cfg.clip, cfg.max_k, cfg.rl_batch_size, cfg.betas)
    log_path = _out(args, "rl_log.jsonl")
    with open(log_path, "w") as fh:
        def on_epoch(row):
            fh.write(json.dumps(row) + "\n")
            fh.flush()
        critic, history = a2c_finetune(pairs, actor, critic, rewrite, rl_cfg,
                                       epochs=cfg.rl_epochs, seed=cfg.seed, on_epoch=on_epoch)
    actor.save(_out(args, "actor_rl.ckpt"))
    critic.save(_out(args, "critic.ckpt"))
    _emit(history[-1])


def cmd_extract(args, cfg: RunConfig):
    policy = ExtractorPolicy.load(args.checkpoint)
    rows = []
    for doc, _ in _pairs(args.input):
        res = policy.run_episode(doc, DecodeMode(args.mode), max_k=args.max_k or cfg.max_k,
                                 trigram_block=args.trigram_block, seed=cfg.seed)
        row = res.to_json(doc.id)
        row["sentences"] = [doc.sentences[i].raw for i in res.selected]
        rows.append(row)
    write_jsonl(rows, _out(args, "extractions.jsonl"))
    _emit({"docs": len(rows)})


def cmd_abstract(args, cfg: RunConfig):
    model = None if args.identity else _abstractor(args.checkpoint)
    if model is None and not args.identity and args.checkpoint is None:
        raise ValueError("abstract needs --checkpoint or --identity")
    rows = []
    for obj in read_jsonl(args.input):
        sents = [Sentence.from_text(s) for s in obj["sentences"]]
        out = abstract_sentences(sents, model, beam=args.beam, use_rerank=args.rerank)
        rows.append({"id": obj["id"], "summary": [s.text() for s in out]})
    write_jsonl(rows, _out(args, "summaries.jsonl"))
    _emit({"docs": len(rows)})


def cmd_summarize(args, cfg: RunConfig):
    actor = ExtractorPolicy.load(args.actor_ckpt)
    model = _abstractor(args.abstractor)
    rows = [summarize(doc, actor, model, use_rerank=args.rerank, beam=args.beam,
                      max_k=cfg.max_k, trigram_block=args.trigram_block).to_json()
            for doc, _ in _pairs(args.input)]
    write_jsonl(rows, _out(args, "summaries.jsonl"))
    _emit({"docs": len(rows), "empty": sum(not r["summary"] for r in rows)})


def cmd_evaluate(args, cfg: RunConfig):
    refs = {r.id: [Sentence.from_text(s) for s in r.abstract] for r in ingest_jsonl(args.input)}
    outs = {o["id"]: [Sentence.from_text(s) for s in o["summary"] if normalize_tokens(s)]
            for o in read_jsonl(args.outputs)}
    report = evaluate(refs, outs, EvalMode(args.mode), stem=not args.no_stem).to_json()
    with open(_out(args, "metrics.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _emit({k: report[k] for k in ("mode", "n_docs", "rouge1", "rouge2", "rougeL", "ravg")})


def _sentence_lists(path) -> dict[str, list[Sentence]]:
    out = {}
    for obj in read_jsonl(path):
        key = next((k for k in ("summary", "sentences", "abstract") if k in obj), None)
        if key is None or "id" not in obj:
            raise ValueError(f"{path}: every line needs 'id' and one of summary/sentences/abstract")
        out[str(obj["id"])] = [Sentence.from_text(s) for s in obj[key] if normalize_tokens(s)]
    return out


def _score_pair(cand: list[Sentence], ref: list[Sentence], stem: bool, truncate: bool) -> dict:
    if stem:
        cand = [Sentence.from_text(s.raw or s.text(), stem=True) for s in cand]
        ref = [Sentence.from_text(s.raw or s.text(), stem=True) for s in ref]
    c_flat = [t for s in cand for t in s.tokens]
    r_flat = [t for s in ref for t in s.tokens]
    if truncate:
        cand = [Sentence.from_tokens(t) for t in truncate_sentences(cand, len(r_flat))]
        c_flat = c_flat[:len(r_flat)]
    return {"r1": score_variant(c_flat, r_flat, RougeVariant.R1).as_dict(),
            "r2": score_variant(c_flat, r_flat, RougeVariant.R2).as_dict(),
            "rl": rouge_l_summary(cand, ref).as_dict()}


def cmd_rouge(args, cfg: RunConfig):
    if args.candidates and args.references:
        cands, refs = _sentence_lists(args.candidates), _sentence_lists(args.references)
    elif args.candidate is not None and args.reference is not None:
        cands = {"0": [Sentence.from_text(s) for s in args.candidate.split("|")]}
        refs = {"0": [Sentence.from_text(s) for s in args.reference.split("|")]}
    else:
        raise ValueError("rouge needs --candidates/--references files or --candidate/--reference text")
    missing = sorted(set(refs) ^ set(cands))
    if missing:
        raise ValueError("id mismatch: " + ", ".join(missing))
    per_doc = [{"id": k, **_score_pair(cands[k], refs[k], args.stem, args.truncate)}
               for k in sorted(refs)]
    report = {name: {f: sum(d[name][f] for d in per_doc) / len(per_doc)
                     for f in ("precision", "recall", "f1")} for name in ("r1", "r2", "rl")}
    report["per_doc"] = per_doc
    with open(_out(args, "rouge.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _emit({name: report[name] for name in ("r1", "r2", "rl")})


# ----------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    """Usage errors become the same one-line JSON report as runtime errors."""

    def error(self, message):
        verb = self.prog.split()[-1] if " " in self.prog else None
        print(json.dumps({"error": message, "type": "UsageError", "verb": verb}), file=sys.stderr)
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", default=".")

    parser = _Parser(prog="sentrewrite",
                     description="extract-then-rewrite summarization toolkit")
    sub = parser.add_subparsers(dest="verb", required=True)

    def verb(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    p = verb("gen-synth", cmd_gen_synth, "generate a synthetic corpus")
    p.add_argument("--n-docs", type=int, default=200)
    p.add_argument("--vocab-size", type=int, default=400)
    p.add_argument("--near-duplicate-rate", type=float, default=0.0)
    p.add_argument("--noise-rate", type=float, default=0.0)

    p = verb("oracle", cmd_oracle, "oracle labels and abstractor pairs")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=METHODS, default="greedy")

    p = verb("oracle-report", cmd_oracle_report, "compare oracle methods")
    p.add_argument("--input", required=True)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))

    p = verb("pretrain-ext", cmd_pretrain_ext, "cross-entropy pre-training of the extractor")
    p.add_argument("--input", required=True)
    p.add_argument("--labels")
    p.add_argument("--epochs", type=int, dest="ext_epochs")
    p.add_argument("--lr-base", type=float)
    p.add_argument("--warmup", type=int)

    p = verb("train-abs", cmd_train_abs, "train the abstractor")
    p.add_argument("--input")
    p.add_argument("--pairs")
    p.add_argument("--epochs", type=int, dest="abs_epochs")
    p.add_argument("--lr", type=float, dest="abs_lr")
    p.add_argument("--min-count", type=int, default=1)

    p = verb("train-rl", cmd_train_rl, "actor-critic fine-tuning")
    p.add_argument("--input", required=True)
    p.add_argument("--actor-ckpt", required=True)
    p.add_argument("--critic-ckpt")
    p.add_argument("--gamma", type=float)
    p.add_argument("--stop-lambda", type=float)
    p.add_argument("--reward", choices=("summary", "sentence"), dest="reward_mode")
    p.add_argument("--abstractor", default="identity")
    p.add_argument("--epochs", type=int, dest="rl_epochs")
    p.add_argument("--lr", type=float, dest="rl_lr")
    p.add_argument("--batch-size", type=int, dest="rl_batch_size")

    p = verb("extract", cmd_extract, "run the extractor")
    p.add_argument("--input", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("greedy", "sample"), default="greedy")
    p.add_argument("--max-k", type=int)
    p.add_argument("--trigram-block", action="store_true")

    p = verb("abstract", cmd_abstract, "rewrite extracted sentences")
    p.add_argument("--input", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--identity", action="store_true")
    p.add_argument("--beam", type=int, default=1)
    p.add_argument("--rerank", action="store_true")

    p = verb("summarize", cmd_summarize, "extract and rewrite end to end")
    p.add_argument("--input", required=True)
    p.add_argument("--actor-ckpt", required=True)
    p.add_argument("--abstractor", default="identity")
    p.add_argument("--beam", type=int, default=1)
    p.add_argument("--rerank", action="store_true")
    p.add_argument("--trigram-block", action="store_true")

    p = verb("evaluate", cmd_evaluate, "score summaries against references")
    p.add_argument("--input", required=True, help="corpus JSONL with references")
    p.add_argument("--outputs", required=True, help="JSONL with id and summary")
    p.add_argument("--mode", choices=[m.value for m in EvalMode], default="full_f1")
    p.add_argument("--no-stem", action="store_true")

    p = verb("rouge", cmd_rouge, "ROUGE-1/2/L between candidate and reference summaries")
    p.add_argument("--candidates", help="JSONL with id and summary (or sentences)")
    p.add_argument("--references", help="JSONL with id and abstract (or summary)")
    p.add_argument("--candidate", help="inline candidate, sentences separated by '|'")
    p.add_argument("--reference", help="inline reference, sentences separated by '|'")
    p.add_argument("--stem", action="store_true")
    p.add_argument("--truncate", action="store_true",
                   help="cut candidates to the reference length (limited-length recall)")
    return parser


_OVERRIDES = ("seed", "ext_epochs", "lr_base", "warmup", "abs_epochs", "abs_lr", "gamma",
              "stop_lambda", "reward_mode", "rl_epochs", "rl_lr", "rl_batch_size")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = cfg.override(**{k: getattr(args, k, None) for k in _OVERRIDES})
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_config(cfg, out_dir / CONFIG_FILENAME)
        args.fn(args, cfg)
    except Exception as exc:  # noqa: BLE001 - converted to a one-line report
        print(json.dumps({"error": str(exc).splitlines()[0] if str(exc) else repr(exc),
                          "type": type(exc).__name__, "verb": args.verb}), file=sys.stderr)
        return 1
    return 0
