"""Command-line entry point: ``numlex <command> ...``.

Exit codes: 0 success; 1 unexpected internal error; 2 bad command-line
usage; 3 configuration errors (ParseError, ValidationError, ConfigError);
4 input and file errors (MalformedRecord, CheckpointMissing, missing files);
5 runtime errors from tokenization, tensors or training.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

from numlex.config import RunConfig, describe_keys, config_to_dict, load_config
from numlex.errors import ConfigError, NumlexError

log = logging.getLogger("numlex")

EXIT_CODES = """exit codes:
  0  success
  1  unexpected internal error
  2  bad command-line usage
  3  configuration error (TOML syntax, unknown key, value out of range)
  4  input error (malformed corpus record, missing checkpoint or file)
  5  runtime error (tokenizer offsets, shapes, numbers, training)
"""

SEED_ENV = "NUMLEX_SEED"


# -- helpers ---------------------------------------------------------------------------

def resolve_seed(cli_seed, cfg: RunConfig) -> int:
    """--seed beats $NUMLEX_SEED, which beats the config file."""
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return cfg.seed


def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    return cfg.with_seed(resolve_seed(getattr(args, "seed", None), cfg))


def _dump_lines(path: Path, rows) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _out_paths(out: str, default_name: str) -> tuple[Path, Path]:
    """(result file, directory) for an --out that is either a directory or a .json(l) path."""
    p = Path(out)
    if p.suffix in (".json", ".jsonl"):
        return p, p.parent if str(p.parent) else Path(".")
    return p / default_name, p


def _fit_tokenizer(texts, cfg: RunConfig, base: str | None = None):
    from numlex.numtok import BPETokenizer, WhitespaceTokenizer

    base = base or cfg.numtok.base
    if base == "bpe":
        return BPETokenizer.fit(texts, num_merges=cfg.numtok.bpe_merges)
    return WhitespaceTokenizer.fit(texts, max_size=cfg.numtok.vocab_size, min_freq=cfg.numtok.min_freq)


# -- tokenize --------------------------------------------------------------------------

def cmd_tokenize(args) -> int:
    from numlex.numtok import load_tokenizer, recognize_numbers, tokenize

    cfg = _config(args)
    text = Path(args.input).read_text(encoding="utf-8") if args.input else sys.stdin.read()
    lines = text.splitlines()
    out = sys.stdout
    if args.spans_only:
        for line in lines:
            out.write(json.dumps({"numbers": [s.to_dict() for s in recognize_numbers(line)]}) + "\n")
        return 0
    if args.tokenizer:
        base = load_tokenizer(args.tokenizer)
    else:
        base = _fit_tokenizer(lines, cfg, args.base)
    mode = args.mode or cfg.numtok.mode
    for line in lines:
        seq = tokenize(line, base, mode)
        out.write(json.dumps({"tokens": seq.render(), "numbers": [s.to_dict() for s in seq.numbers]}) + "\n")
    return 0


# -- probe -----------------------------------------------------------------------------

def cmd_probe_gen(args) -> int:
    from numlex.probing import probe_tasks, write_tasks

    cfg = _config(args)
    gen = cfg.numbers if args.count is None else dataclasses.replace(cfg.numbers, count=args.count)
    task = args.task or cfg.probing.task
    tasks = probe_tasks(task, cfg.seed, gen_cfg=gen, list_len=cfg.probing.list_len)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_tasks(out, tasks)
    log.info("wrote %d %s tasks to %s", len(tasks), task, out)
    return 0


def _probe_cfg(cfg: RunConfig, args):
    probe = cfg.probing.probe
    if getattr(args, "epochs", None) is not None:
        probe = dataclasses.replace(probe, epochs=args.epochs)
    gen = cfg.numbers if getattr(args, "count", None) is None else dataclasses.replace(cfg.numbers, count=args.count)
    return probe, gen


def cmd_probe_run(args) -> int:
    from numlex.manifest import RunManifest, write_json_atomic
    from numlex.probing import read_tasks, run_probe

    t0 = time.perf_counter()
    cfg = _config(args)
    probe, gen = _probe_cfg(cfg, args)
    kind = args.numbed or cfg.numbed.kind
    tasks, inputs = None, []
    if args.data:
        tasks = read_tasks(args.data)
        if not tasks:
            raise ConfigError(f"{args.data} holds no tasks")
        task = tasks[0].kind.value
        inputs.append(args.data)
    else:
        task = args.task or cfg.probing.task
    result = run_probe(kind, task, cfg.seed, tasks=tasks, gen_cfg=gen, probe_cfg=probe,
                       numbed_cfg=cfg.numbed, list_len=cfg.probing.list_len)
    metrics_path, out_dir = _out_paths(args.out, "metrics.json")
    doc = {"task": task, "numbed": kind, "seed": cfg.seed, **result.metrics.to_dict(),
           "train": result.train_metrics.to_dict(), "steps": len(result.losses),
           "final_loss": result.losses[-1] if result.losses else None}
    write_json_atomic(metrics_path, doc)
    manifest = RunManifest("probe run", {**config_to_dict(cfg), "probe_run": {"task": task, "numbed": kind}},
                           inputs, [str(metrics_path)], {"total_s": time.perf_counter() - t0})
    manifest.write(out_dir / "manifest.json")
    print(json.dumps(doc, sort_keys=True))
    return 0


def cmd_probe_compare(args) -> int:
    from numlex.manifest import RunManifest, write_json_atomic
    from numlex.probing import run_probe

    t0 = time.perf_counter()
    cfg = _config(args)
    probe, gen = _probe_cfg(cfg, args)
    kinds = [k.strip() for k in args.numbed.split(",") if k.strip()]
    seeds = [int(s) for s in args.seeds.split(",")]
    task = args.task or cfg.probing.task
    results = {}
    for kind in kinds:
        results[kind] = []
        for seed in seeds:
            r = run_probe(kind, task, seed, gen_cfg=gen, probe_cfg=probe, numbed_cfg=cfg.numbed,
                          list_len=cfg.probing.list_len)
            results[kind].append(r.metrics.to_dict())
            log.info("%s seed %d: %s", kind, seed, r.metrics)
    out = Path(args.out)
    path = out / "compare.json"
    write_json_atomic(path, {"task": task, "seeds": seeds, "results": results})
    manifest = RunManifest("probe compare", {**config_to_dict(cfg), "compare": {"task": task, "kinds": kinds,
                                                                                "seeds": seeds}},
                           [], [str(path)], {"total_s": time.perf_counter() - t0})
    manifest.write(out / "manifest.json")
    return 0


# -- pretrain --------------------------------------------------------------------------

def cmd_pretrain(args) -> int:
    from numlex.ingest import ingest_corpus
    from numlex.manifest import RunManifest, write_json_atomic
    from numlex.pretrain import (
        HostModel,
        bootstrap_checkpoint,
        generate_corpus,
        load_host,
        pretrain_run,
        save_host,
        smoothed,
    )
    from numlex.rng import stream
    from numlex.tensorcore.params import save_checkpoint

    t0 = time.perf_counter()
    cfg = _config(args)
    pre = cfg.pretrain
    over = {k: v for k, v in (("mode", args.mode), ("steps", args.steps)) if v is not None}
    pre = dataclasses.replace(pre, **over)
    numbed_cfg = cfg.numbed if args.numbed is None else dataclasses.replace(cfg.numbed, kind=args.numbed)
    numtok_mode = args.numtok or cfg.numtok.mode
    out = Path(args.out or cfg.paths.out)
    out.mkdir(parents=True, exist_ok=True)

    corpus_path = args.corpus or cfg.paths.corpus
    inputs = []
    if corpus_path:
        docs = ingest_corpus(corpus_path).documents
        inputs.append(str(corpus_path))
    else:
        docs = generate_corpus(cfg.corpus, cfg.numbers)
    if not docs:
        raise ConfigError("pre-training corpus is empty")

    outputs = []
    timings = {}
    if pre.mode == "scratch":
        tok = _fit_tokenizer(docs, cfg)
        host = HostModel(cfg.host, tok.vocab_size, numbed_cfg, stream(cfg.seed, "host-init"))
    else:
        init = args.init
        if init is None:
            # plugin-free bootstrap: train without number tokens, save, reload with the embedder
            tb = time.perf_counter()
            tok = _fit_tokenizer(docs, cfg)
            steps = args.bootstrap_steps if args.bootstrap_steps is not None else pre.steps
            boot_cfg = dataclasses.replace(pre, mode="scratch", steps=steps)
            boot = bootstrap_checkpoint(docs, tok, cfg.host, boot_cfg)
            init = out / "bootstrap.ckpt.json"
            save_host(init, boot, tok)
            outputs.append(str(init))
            timings["bootstrap_s"] = time.perf_counter() - tb
        else:
            inputs.append(str(init))
        host, tok, _ = load_host(init, numbed_cfg, rng=stream(cfg.seed, "numbed-init"))
        if tok is None:
            raise ConfigError(f"checkpoint {init} carries no tokenizer")

    tt = time.perf_counter()
    result = pretrain_run(docs, host, tok, pre, numtok_mode)
    timings["train_s"] = time.perf_counter() - tt

    rows = [m.to_dict() for m in result.metrics]
    _dump_lines(out / "metrics.jsonl", rows)
    save_host(out / "host.ckpt.json", result.student, tok)
    save_checkpoint(out / "numbed.ckpt.json", host.params.sub("numbed."), {"numbed": host.numbed_cfg.to_dict()})
    outputs += [str(out / n) for n in ("metrics.jsonl", "host.ckpt.json", "numbed.ckpt.json", "metrics.json")]
    if result.teacher is not None:
        save_host(out / "teacher.ckpt.json", result.teacher, tok)
        outputs.append(str(out / "teacher.ckpt.json"))
    l_mlm = [r["l_mlm"] for r in rows]
    summary = {"mode": pre.mode, "steps": len(rows), "numbed": numbed_cfg.kind, "numtok": numtok_mode,
               "seed": cfg.seed, "vocab_size": tok.vocab_size}
    if rows:
        sm = smoothed(l_mlm)
        summary.update(first_l_mlm=float(sum(l_mlm[:20]) / len(l_mlm[:20])), final_smoothed_l_mlm=float(sm[-1]),
                       final_total=rows[-1]["total"])
    write_json_atomic(out / "metrics.json", summary)
    timings["total_s"] = time.perf_counter() - t0
    config = config_to_dict(dataclasses.replace(cfg, pretrain=pre, numbed=numbed_cfg))
    config["numtok"]["mode"] = numtok_mode
    config["run"] = {"init": str(args.init) if args.init else None}
    RunManifest("pretrain", config, inputs, outputs, timings).write(out / "manifest.json")
    print(json.dumps(summary, sort_keys=True))
    return 0


# -- inspect / report ------------------------------------------------------------------

def cmd_inspect(args) -> int:
    import hashlib

    from numlex.tensorcore.params import read_checkpoint

    doc = read_checkpoint(args.path)
    params = [{"name": k, "shape": v["shape"], "count": len(v["data"])} for k, v in doc["params"].items()]
    config = dict(doc.get("config", {}))
    if "tokenizer" in config:
        config["tokenizer"] = {"kind": config["tokenizer"].get("kind"), "omitted": True}
    summary = {
        "path": str(args.path),
        "sha256": hashlib.sha256(Path(args.path).read_bytes()).hexdigest(),
        "format": doc["format"], "version": doc["version"], "config": config,
        "num_tensors": len(params), "num_params": sum(p["count"] for p in params),
    }
    if not args.summary:
        summary["params"] = params
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def cmd_report(args) -> int:
    from numlex import plotting

    run = Path(args.run)
    fig_dir = Path(args.figures) if args.figures else run
    sep = args.delimiter.encode().decode("unicode_escape")
    w = sys.stdout.write
    found = False
    if (run / "metrics.jsonl").exists():
        found = True
        rows = [json.loads(line) for line in (run / "metrics.jsonl").read_text().splitlines() if line.strip()]
        cols = ["step", "k", "n_num", "l_reg", "l_cla", "l_mlm", "l_distill", "total", "alpha"]
        w("# pretrain\n" + sep.join(cols) + "\n")
        for r in rows:
            if r["step"] % args.every == 0 or r is rows[-1]:
                w(sep.join(_fmt(r[c]) for c in cols) + "\n")
        if rows:
            fig = plotting.plot_pretrain(rows, fig_dir / "pretrain_loss.png")
            w(f"# figure{sep}{fig}\n")
    if (run / "compare.json").exists():
        found = True
        doc = json.loads((run / "compare.json").read_text())
        metrics = ["rmse_sig", "acc_exp", "acc"]
        w(f"# compare{sep}task={doc['task']}\n" + sep.join(["numbed", "seed"] + metrics) + "\n")
        for kind, per_seed in doc["results"].items():
            for seed, m in zip(doc["seeds"], per_seed):
                w(sep.join([kind, str(seed)] + [_fmt(m.get(c)) for c in metrics]) + "\n")
        for metric in metrics:
            if any(m.get(metric) is not None for ms in doc["results"].values() for m in ms):
                fig = plotting.plot_comparison(doc["results"], metric, fig_dir / f"compare_{metric}.png",
                                               title=f"{doc['task']}: {metric}")
                w(f"# figure{sep}{fig}\n")
    metrics_json = run / "metrics.json" if run.is_dir() else run
    if metrics_json.exists() and metrics_json.suffix == ".json":
        doc = json.loads(metrics_json.read_text())
        if "task" in doc:
            found = True
            cols = ["task", "numbed", "seed", "rmse_sig", "acc_exp", "acc"]
            w("# probe\n" + sep.join(cols) + "\n" + sep.join(_fmt(doc.get(c)) for c in cols) + "\n")
    if not found:
        raise FileNotFoundError(f"no metrics.jsonl, metrics.json or compare.json under {run}")
    return 0


# -- parser ----------------------------------------------------------------------------

def _add_common(p, config=True, seed=True):
    if config:
        p.add_argument("--config", metavar="FILE", help="TOML run config (defaults apply when omitted)")
    if seed:
        p.add_argument("--seed", type=int, help=f"root seed; overrides ${SEED_ENV} and the config")


def build_parser() -> argparse.ArgumentParser:
    epilog = describe_keys() + "\n\n" + EXIT_CODES
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="numlex", description="Number-aware tokenization, embedding, "
                                     "pre-training and probing.", epilog=epilog, formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, helptext, parent=sub):
        return parent.add_parser(name, help=helptext, description=helptext, epilog=epilog, formatter_class=fmt)

    p = command("tokenize", "rewrite text lines into number-aware token streams (JSON lines)")
    p.add_argument("--mode", choices=["addback", "replace", "addembed"], help="default: numtok.mode")
    p.add_argument("--base", choices=["ws", "bpe"], help="base tokenizer fitted on the input (default: numtok.base)")
    p.add_argument("--tokenizer", metavar="FILE", help="saved tokenizer JSON instead of fitting one")
    p.add_argument("--spans-only", action="store_true", help="emit only the recognized numbers")
    p.add_argument("--input", metavar="FILE", help="read text from FILE instead of stdin")
    _add_common(p)
    p.set_defaults(func=cmd_tokenize)

    probe = command("probe", "numeracy probing")
    psub = probe.add_subparsers(dest="probe_command", required=True)
    p = command("gen", "generate a probing dataset (JSON lines)", psub)
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--task", choices=["decode", "add", "sub", "listmax"], help="default: probing.task")
    p.add_argument("--count", type=int, help="number pool size (default: numbers.count)")
    _add_common(p)
    p.set_defaults(func=cmd_probe_gen)

    p = command("run", "train one probe and write held-out metrics", psub)
    p.add_argument("--task", choices=["decode", "add", "sub", "listmax"], help="default: probing.task")
    p.add_argument("--numbed", choices=["charlstm", "charformer", "dice"], help="default: numbed.kind")
    p.add_argument("--data", metavar="FILE", help="tasks from 'probe gen' instead of generating them")
    p.add_argument("--out", required=True, help="metrics .json path or output directory")
    p.add_argument("--epochs", type=int, help="default: probing.epochs")
    p.add_argument("--count", type=int, help="number pool size (default: numbers.count)")
    _add_common(p)
    p.set_defaults(func=cmd_probe_run)

    p = command("compare", "probe several embedders over several seeds", psub)
    p.add_argument("--task", choices=["decode", "add", "sub", "listmax"], help="default: probing.task")
    p.add_argument("--numbed", default="charlstm,charformer,dice", help="comma-separated embedder kinds")
    p.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--epochs", type=int, help="default: probing.epochs")
    p.add_argument("--count", type=int, help="number pool size (default: numbers.count)")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_probe_compare)

    p = command("pretrain", "number pre-training of a small host encoder")
    p.add_argument("--mode", choices=["scratch", "checkpoint"], help="default: pretrain.mode")
    p.add_argument("--numbed", choices=["charlstm", "charformer", "dice"], help="default: numbed.kind")
    p.add_argument("--numtok", choices=["addback", "replace", "addembed"], help="default: numtok.mode")
    p.add_argument("--steps", type=int, help="default: pretrain.steps")
    p.add_argument("--corpus", metavar="FILE", help="JSONL/CSV/text corpus (default: built-in generator)")
    p.add_argument("--init", metavar="CKPT", help="host checkpoint for --mode checkpoint")
    p.add_argument("--bootstrap-steps", type=int,
                   help="without --init: plugin-free bootstrap steps (default: pretrain.steps)")
    p.add_argument("--out", metavar="DIR", help="output directory (default: paths.out)")
    _add_common(p)
    p.set_defaults(func=cmd_pretrain)

    p = command("inspect-checkpoint", "summarize a parameter checkpoint")
    p.add_argument("path")
    p.add_argument("--summary", action="store_true", help="omit the per-tensor listing")
    p.set_defaults(func=cmd_inspect)

    p = command("report", "print a delimited summary of a run directory and render its figures")
    p.add_argument("run", help="run directory (or a probe metrics .json file)")
    p.add_argument("--figures", metavar="DIR", help="where to write PNGs (default: the run directory)")
    p.add_argument("--delimiter", default="\\t", help="column delimiter (default: tab)")
    p.add_argument("--every", type=int, default=50, help="pretrain rows: print every Nth step")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args) or 0)
    except NumlexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except BrokenPipeError:
        return 0
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
