"""Command-line driver: training runs, corpus synthesis, statistical checks,
the two-sampler mixing demo, and coherence scoring of a snapshot.

Exit codes: 0 success, 1 usage error, 2 data error, 3 failed statistical
check.  All outputs land under --out.
"""

import argparse
import json
import os
import sys
import time

from . import __version__, backend, checks, diagnostics, tdemo
from .corpus import CorpusError, read_uci_bow, synth_corpus, write_uci_bow
from .sampler import SamplerConfig, Trainer
from .stats import load_snapshot, save_snapshot


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# defaults applied after merging config-file values
_DEFAULTS = {
    "rare_limit": 10,
    "K": 10,
    "alpha": 0.1,
    "beta": 0.01,
    "iters": 1000,
    "seed": 0,
    "workers": 1,
    "sampler": "pu",
    "out": "out",
    "L": 100,
    "top_words": 10,
    "rhos": "0.9,0.99,0.999",
    "chains": 5,
}

# per-subcommand overrides of the table above
_COMMAND_DEFAULTS = {"tdemo": {"iters": 10_000}}


def _add_common(parser):
    parser.add_argument("--corpus", help="UCI docword file")
    parser.add_argument("--vocab", help="vocabulary file, one word per line")
    parser.add_argument("--rare-limit", type=int, dest="rare_limit",
                        help="drop words with corpus frequency below this")
    parser.add_argument("-K", type=int, dest="K", help="number of topics")
    parser.add_argument("--alpha", type=float, help="document prior")
    parser.add_argument("--beta", type=float, help="word prior")
    parser.add_argument("--iters", type=int, help="iterations to run")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--workers", type=int, help="document shards / threads")
    parser.add_argument("--sampler", choices=("pu", "pc", "collapsed"),
                        help="sampler variant")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("-L", type=int, dest="L",
                        help="cached-Poisson table limit")
    parser.add_argument("--config", help="flat 'key = value' config file")


def _build_parser():
    parser = _Parser(prog="polyaurn-lda",
                     description="Doubly sparse parallel LDA trainer")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p_train = sub.add_parser("train", help="train a topic model")
    _add_common(p_train)
    p_train.add_argument("--top-words", type=int, dest="top_words",
                         help="words per topic in the top-words file")

    p_synth = sub.add_parser("synth", help="write a synthetic UCI corpus")
    _add_common(p_synth)
    p_synth.add_argument("-V", "--vocab-size", type=int, dest="vocab_size")
    p_synth.add_argument("-D", "--docs", type=int, dest="docs")
    p_synth.add_argument("--doc-len", type=int, dest="doc_len")

    p_check = sub.add_parser("ppu-check",
                             help="urn convergence / moment / GOF suite")
    _add_common(p_check)

    p_tdemo = sub.add_parser("tdemo",
                             help="collapsed vs uncollapsed mixing demo")
    _add_common(p_tdemo)
    p_tdemo.add_argument("--rhos", help="comma-separated correlation values")
    p_tdemo.add_argument("--chains", type=int, help="chains per setting")

    p_coh = sub.add_parser("eval-coherence",
                           help="topic coherence of a snapshot")
    _add_common(p_coh)
    p_coh.add_argument("--snapshot", help="snapshot directory from train")
    p_coh.add_argument("-M", type=int, dest="top_words",
                       help="top words per topic")
    return parser


def _load_config_file(path):
    values = {}
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    return values


_CONFIG_TYPES = {
    "rare_limit": int, "K": int, "iters": int, "seed": int, "workers": int,
    "L": int, "top_words": int, "chains": int, "vocab_size": int,
    "docs": int, "doc_len": int, "alpha": float, "beta": float,
    "corpus": str, "vocab": str, "sampler": str, "out": str, "rhos": str,
}


def _merge(args):
    """Flags beat config-file values beat built-in defaults."""
    merged = vars(args)
    if merged.get("config"):
        for key, raw in _load_config_file(merged["config"]).items():
            if key not in _CONFIG_TYPES:
                raise UsageError(f"unknown config key {key!r}")
            if merged.get(key) is None:
                try:
                    merged[key] = _CONFIG_TYPES[key](raw)
                except ValueError:
                    raise UsageError(
                        f"config key {key!r}: bad value {raw!r}") from None
    defaults = dict(_DEFAULTS)
    defaults.update(_COMMAND_DEFAULTS.get(merged.get("command"), {}))
    for key, value in defaults.items():
        if merged.get(key) is None:
            merged[key] = value
    return argparse.Namespace(**merged)


def _read_corpus(args):
    if not args.corpus or not args.vocab:
        raise UsageError("--corpus and --vocab are required")
    with open(args.corpus, encoding="utf-8") as dw, \
            open(args.vocab, encoding="utf-8") as vc:
        return read_uci_bow(dw, vc, args.rare_limit)


def _write_manifest(path, entries):
    with open(path, "w", encoding="utf-8") as f:
        for key, value in entries:
            f.write(f"{key} = {value}\n")


def _cmd_train(args):
    corpus = _read_corpus(args)
    config = SamplerConfig(variant=args.sampler, K=args.K, alpha=args.alpha,
                           beta=args.beta, iterations=args.iters,
                           seed=args.seed, workers=args.workers, L=args.L)
    os.makedirs(args.out, exist_ok=True)
    metrics_path = os.path.join(args.out, "metrics.csv")
    events_path = os.path.join(args.out, "events.jsonl")
    snapshot_dir = os.path.join(args.out, "snapshot")
    topwords_path = os.path.join(args.out, "top_words.txt")
    manifest_path = os.path.join(args.out, "manifest.txt")
    started = time.strftime("%Y-%m-%dT%H:%M:%S")

    with Trainer(corpus, config) as trainer, \
            open(events_path, "w", encoding="utf-8") as events:
        events.write(json.dumps({"event": "start", "backend": backend.name(),
                                 "D": corpus.num_docs, "V": corpus.vocab_size,
                                 "N": corpus.num_tokens}) + "\n")
        for _ in range(config.iterations):
            it = trainer.step()
            events.write(json.dumps({
                "event": "iteration", "iteration": it.iteration,
                "log_joint": it.log_joint,
                "phi_seconds": it.phi_phase_seconds,
                "z_seconds": it.z_phase_seconds,
                "b_work": it.b_bucket_work, "bound": it.sparsity_bound,
                "a_hits": it.a_bucket_hits, "fallbacks": it.fallback_count,
            }) + "\n")
        events.write(json.dumps({"event": "end"}) + "\n")
        diagnostics.write_trace_csv(metrics_path, trainer.history)

        meta = {"K": config.K, "V": corpus.vocab_size, "D": corpus.num_docs,
                "alpha": config.alpha, "beta": config.beta,
                "iteration": trainer.iteration, "seed": config.seed}
        save_snapshot(snapshot_dir, meta, trainer.state.m, trainer.state.n)

        tops = diagnostics.top_words(trainer.state.n, args.top_words)
        with open(topwords_path, "w", encoding="utf-8") as f:
            for k, ids in enumerate(tops):
                words = " ".join(corpus.vocab.words[v] for v in ids)
                f.write(f"{k}: {words}\n")

    _write_manifest(manifest_path, [
        ("variant", config.variant), ("K", config.K),
        ("alpha", config.alpha), ("beta", config.beta),
        ("iterations", config.iterations), ("seed", config.seed),
        ("workers", config.workers), ("L", config.L),
        ("rare_limit", args.rare_limit),
        ("corpus_D", corpus.num_docs), ("corpus_V", corpus.vocab_size),
        ("corpus_N", corpus.num_tokens),
        ("corpus_sha256", corpus.fingerprint()),
        ("backend", backend.name()), ("version", __version__),
        ("started", started), ("finished", time.strftime("%Y-%m-%dT%H:%M:%S")),
        ("metrics", "metrics.csv"), ("events", "events.jsonl"),
        ("snapshot", "snapshot"), ("top_words", "top_words.txt"),
    ])
    return 0


def _cmd_synth(args):
    for name in ("vocab_size", "docs", "doc_len"):
        if getattr(args, name, None) is None:
            raise UsageError(f"synth requires --{name.replace('_', '-')}")
    corpus, _ = synth_corpus(args.K, args.vocab_size, args.docs, args.doc_len,
                             args.alpha, args.beta, args.seed)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "docword.txt"), "w",
              encoding="utf-8") as dw, \
            open(os.path.join(args.out, "vocab.txt"), "w",
                 encoding="utf-8") as vc:
        write_uci_bow(corpus, dw, vc)
    print(f"wrote D={corpus.num_docs} V={corpus.vocab_size} "
          f"N={corpus.num_tokens} to {args.out}")
    return 0


def _cmd_ppu_check(args):
    passed, results = checks.run_all(args.seed)
    print(checks.format_results(results))
    return 0 if passed else 3


def _cmd_tdemo(args):
    try:
        rhos = [float(r) for r in args.rhos.split(",") if r.strip()]
    except ValueError:
        raise UsageError(f"bad --rhos value {args.rhos!r}") from None
    rows = tdemo.run_t_comparison(rhos, args.iters, args.seed,
                                  chains=args.chains)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "tdemo.csv")
    tdemo.write_report_csv(path, rows)
    for row in rows:
        print(f"rho={row.rho:g} {row.sampler:12s} ess={row.ess:10.1f} "
              f"var1={row.var1:6.3f} cov12={row.cov12:6.3f}")
    print(f"report written to {path}")
    return 0


def _cmd_eval_coherence(args):
    if not args.snapshot:
        raise UsageError("--snapshot is required")
    corpus = _read_corpus(args)
    _, _, n = load_snapshot(args.snapshot)
    if n.shape[1] != corpus.vocab_size:
        raise CorpusError("snapshot vocabulary size does not match the corpus")
    scores = diagnostics.topic_coherence(n, corpus, args.top_words)
    for k, score in enumerate(scores):
        print(f"{k}: {score:.4f}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "synth": _cmd_synth,
    "ppu-check": _cmd_ppu_check,
    "tdemo": _cmd_tdemo,
    "eval-coherence": _cmd_eval_coherence,
}


def run(argv):
    """Parse and dispatch; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        args = _merge(args)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (CorpusError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
