"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line in ``RESULTS``; the conftest hook prints
them at the end of the session. Run just this suite with::

    pytest tests/test_acceptance.py -v
"""

import json
import math
import random
import time

import numpy as np
import pytest

from conftest import SAMPLE_TEXTS
from numlex.cli import main
from numlex.gradcheck import check_gradients
from numlex.numbed import NumBedConfig, build_embedder
from numlex.numeric import SigExp, decompose
from numlex.numtok import BPETokenizer, Kind, WhitespaceTokenizer, recognize_numbers, tokenize
from numlex.pretrain import (
    HostConfig,
    HostModel,
    MomentumPair,
    PretrainConfig,
    build_masking_plan,
    frame,
    generate_corpus,
    pretrain_run,
)
from numlex.pretrain.corpus import CorpusConfig
from numlex.pretrain.trainer import step_losses
from numlex.probing import compare_embedders
from numlex.tensorcore import tensor as T
from numlex.tensorcore.layers import TransformerEncoderLayer
from numlex.tensorcore.params import ParamSet
from numlex.tensorcore.tensor import Tensor

RESULTS: dict[int, str] = {}

SMALL_HOST = HostConfig(model_dim=32, layers=1, heads=2, max_len=96)
SMALL_NUMBED = NumBedConfig(kind="charlstm", char_embed_dim=8, lstm_hidden=8)


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


@pytest.fixture(scope="module")
def small_setup():
    docs = generate_corpus(CorpusConfig(docs=60, seed=0))
    tok = WhitespaceTokenizer.fit(docs)
    return docs, tok


def small_host(tok, seed=0):
    return HostModel(SMALL_HOST, tok.vocab_size, SMALL_NUMBED, np.random.default_rng(seed))


# 1 -----------------------------------------------------------------------------------

def test_c01_span_recognition(span_cases):
    t0 = time.perf_counter()
    spans = recognize_numbers("1.76%-2.50%")
    ok = [s.text for s in spans] == ["1.76%", "2.50%"]
    bad = [c["input"] for c in span_cases
           if [(s.text, s.shape.value) for s in recognize_numbers(c["input"])] != [tuple(x) for x in c["spans"]]]
    dt = time.perf_counter() - t0
    record(1, ok and not bad and len(span_cases) == 50 and dt < 1.0,
           f"range split {ok}, {50 - len(bad)}/50 fixture cases, {dt:.3f}s")


# 2 -----------------------------------------------------------------------------------

def _fuzz_strings(n, seed=0):
    rnd = random.Random(seed)
    alphabet = "0123456789" * 3 + "%+-.,,.. $abcxyz\n"
    return ["".join(rnd.choice(alphabet) for _ in range(rnd.randint(0, 40))) for _ in range(n)]


def test_c02_addback_roundtrip():
    t0 = time.perf_counter()
    strings = _fuzz_strings(10_000)
    bases = [WhitespaceTokenizer.fit(SAMPLE_TEXTS + strings[:200]),
             BPETokenizer.fit(SAMPLE_TEXTS + strings[:200], num_merges=60)]
    failures = 0
    for base in bases:
        for s in strings:
            seq = tokenize(s, base, "addback")
            nums = [t.number.text for t in seq.tokens if t.kind is Kind.NUM]
            if seq.vocab_pieces() != base.encode(s) or nums != [x.text for x in recognize_numbers(s)]:
                failures += 1
    dt = time.perf_counter() - t0
    record(2, failures == 0 and dt < 30, f"{failures} failures over 2 x 10^4 strings, {dt:.1f}s")


# 3 -----------------------------------------------------------------------------------

def test_c03_decompose():
    t0 = time.perf_counter()
    example = decompose(3142) == SigExp(3.142, 3)
    rng = np.random.default_rng(0)
    x = rng.uniform(1, 10, 10**5) * 10.0 ** rng.integers(-12, 13, 10**5) * rng.choice([-1.0, 1.0], 10**5)
    worst = max(abs(decompose(v).reconstruct() - abs(v)) / abs(v) for v in x)
    dt = time.perf_counter() - t0
    record(3, example and worst <= 1e-12 and dt < 10,
           f"decompose(3142) ok={example}, worst rel err {worst:.2e} over 10^5, {dt:.1f}s")


# 4 -----------------------------------------------------------------------------------

def test_c04_loss_algebra_and_fixed_points(small_setup):
    docs, tok = small_setup
    t0 = time.perf_counter()

    res = pretrain_run(docs, small_host(tok), tok, PretrainConfig(mode="checkpoint", steps=200, batch_size=4))
    worst = 0.0
    for m in res.metrics:
        worst = max(worst, abs(m.l_mlm - (m.l_reg + m.l_cla) / m.k),
                    abs(m.total - ((1 - m.alpha) * m.l_mlm + m.alpha * m.l_distill)))
    algebra = worst <= 1e-10 and len(res.metrics) == 200 and res.metrics[-1].alpha == 0.5

    host = small_host(tok, 1)
    teacher = host.clone()
    copies = []
    pretrain_run(docs, host, tok, PretrainConfig(mode="checkpoint", steps=200, batch_size=4, tau=0.0),
                 teacher=teacher,
                 on_step=lambda _: copies.append(teacher.params.flat().tobytes() == host.params.flat().tobytes()))
    tau_zero = len(copies) == 200 and all(copies)

    host = small_host(tok, 2)
    start = host.params.flat().tobytes()
    res = pretrain_run(docs, host, tok, PretrainConfig(mode="checkpoint", steps=200, batch_size=4, lr=0.0))
    frozen = host.params.flat().tobytes() == start and res.teacher.params.flat().tobytes() == start

    dt = time.perf_counter() - t0
    record(4, algebra and tau_zero and frozen and dt < 300,
           f"worst identity residual {worst:.1e}, tau=0 copy {sum(copies)}/200, lr=0 frozen={frozen}, {dt:.0f}s")


# 5 -----------------------------------------------------------------------------------

def test_c05_momentum_half_life(small_setup):
    docs, tok = small_setup
    t0 = time.perf_counter()
    student, teacher = small_host(tok, 3), small_host(tok, 4)
    pair = MomentumPair(student, teacher, 0.995)
    gaps = [pair.gap()]
    # frozen student: the trainer with lr=0 leaves it untouched while the teacher tracks it
    pretrain_run(docs[:8], student, tok, PretrainConfig(mode="checkpoint", steps=300, batch_size=1, lr=0.0),
                 teacher=teacher, on_step=lambda _: gaps.append(pair.gap()))
    gaps = np.array(gaps)
    first = int(np.argmax(gaps <= gaps[0] / 2))
    second = int(np.argmax(gaps <= gaps[0] / 4))
    intervals = [first, second - first]
    exact = math.log(2) / -math.log(0.995)
    dt = time.perf_counter() - t0
    record(5, all(abs(i - 139) <= 7 for i in intervals) and dt < 60,
           f"halving intervals {intervals} steps (closed form {exact:.1f}), {dt:.1f}s")


# 6 -----------------------------------------------------------------------------------

TOL = 1e-4
ALL_KINDS = ["charlstm", "charformer", "dice"]
NUMBER_POOL = ["3142", "-17", "1,234.5", ".25%", "0", "+3.5%", "999", "12.75", "-0.5%", "7"]


def _embedder_case(kind, seed):
    rng = np.random.default_rng(seed)
    d = int(rng.choice([4, 6, 8]))
    cfg = NumBedConfig(kind=kind, model_dim=d, char_embed_dim=int(rng.choice([4, 8])),
                       lstm_hidden=int(rng.integers(2, 6)), lstm_layers=int(rng.integers(1, 3)),
                       heads=int(rng.choice([1, 2])))
    emb = build_embedder(cfg, rng)
    nums = list(rng.choice(NUMBER_POOL, size=int(rng.integers(1, 4)), replace=False))
    w = rng.normal(size=(len(nums), d))
    return emb.params, lambda: T.sum_(T.mul(emb.embed_batch(nums), Tensor(w)))


def _transformer_case(seed):
    rng = np.random.default_rng(seed)
    ps = ParamSet()
    heads = int(rng.choice([1, 2]))
    d = heads * int(rng.integers(1, 4))
    layer = TransformerEncoderLayer(ps, "enc", d, heads, int(rng.integers(2, 9)), rng)
    b, t = int(rng.integers(1, 3)), int(rng.integers(1, 5))
    x = rng.normal(size=(b, t, d))
    mask = np.ones((b, t))
    mask[0, int(rng.integers(1, t + 1)):] = 0.0
    w = rng.normal(size=(b, t, d)) * mask[..., None]
    return ps, lambda: T.sum_(T.mul(layer(Tensor(x), mask), Tensor(w)))


def _tiny_host_case(seed, vocab_size, numbed_kind="charlstm"):
    rng = np.random.default_rng(seed)
    heads = int(rng.choice([1, 2]))
    cfg = HostConfig(model_dim=2 * int(rng.integers(2, 4)), layers=int(rng.integers(1, 3)), heads=heads,
                     max_len=64, head_hidden=int(rng.integers(2, 6)))
    numbed = NumBedConfig(kind=numbed_kind, char_embed_dim=4, lstm_hidden=3, heads=1)
    return HostModel(cfg, vocab_size, numbed, rng), rng


def _head_case(which, seed, vocab_size):
    host, rng = _tiny_host_case(seed, vocab_size)
    o = Tensor(rng.normal(size=(int(rng.integers(1, 5)), host.cfg.model_dim)))
    names = [n for n in host.params.names() if n.startswith(f"host.head_{which}.")]
    if which == "reg":
        target = rng.normal(size=(o.shape[0], 2))
        return host.params, names, lambda: T.mse(host.head_reg(o), target)
    labels = list(rng.integers(0, vocab_size, size=o.shape[0]))
    return host.params, names, lambda: T.cross_entropy(host.head_cla(o), labels)


def _loss_path_case(path, seed, docs, tok):
    host, rng = _tiny_host_case(seed, tok.vocab_size, ALL_KINDS[seed % 3])
    seqs = [frame(tokenize(d[:120], tok, "addback"), tok.cls_id, tok.sep_id, 64)
            for d in rng.choice(docs, size=2, replace=False)]
    plans = [build_masking_plan(s, np.random.default_rng([seed, j]), 0.3, tok.vocab_size)
             for j, s in enumerate(seqs)]
    teacher, alpha = None, 0.0
    if path == "distill":
        teacher = host.clone()
        for p in teacher.params.values():
            p.data = p.data + rng.normal(scale=0.05, size=p.data.shape)
        MomentumPair(host, teacher)
        alpha = float(rng.uniform(0.1, 1.0))
    return host.params, lambda: step_losses(host, teacher, seqs, plans, alpha).total


def test_c06_gradient_checks(small_setup):
    docs, tok = small_setup
    t0 = time.perf_counter()
    worst = {}

    def check(label, params, loss, seed, names=None, entries=3):
        err, name = check_gradients(loss, params, np.random.default_rng(seed), entries_per_param=entries,
                                    names=names)
        if err >= worst.get(label, (0.0, None))[0]:
            worst[label] = (err, name)

    for seed in range(20):
        for kind in ("charlstm", "charformer"):
            check(kind, *_embedder_case(kind, seed), seed)
        check("transformer", *_transformer_case(seed), seed)
        for which in ("reg", "cla"):
            params, names, loss = _head_case(which, seed, tok.vocab_size)
            check(f"head_{which}", params, loss, seed, names)
        for path in ("mlm", "distill"):
            check(f"loss_{path}", *_loss_path_case(path, seed, docs, tok), seed, entries=1)
    dice_free = build_embedder(NumBedConfig(kind="dice", model_dim=8)).params.num_params() == 0
    dt = time.perf_counter() - t0
    ok = all(e < TOL for e, _ in worst.values()) and dice_free and dt < 300
    detail = ", ".join(f"{k} {e:.1e}" for k, (e, _) in worst.items())
    record(6, ok, f"worst rel err over 20 configs each: {detail}; dice parameter-free={dice_free}; {dt:.0f}s")


# 7 -----------------------------------------------------------------------------------

def test_c07_masking_statistics(small_setup):
    docs, tok = small_setup
    t0 = time.perf_counter()
    total = masked = mask = 0
    i = 0
    while total < 10_000:
        seq = frame(tokenize(docs[i % len(docs)], tok, "addback"), tok.cls_id, tok.sep_id)
        plan = build_masking_plan(seq, np.random.default_rng([0, i]), 0.15, tok.vocab_size)
        total += len(seq) - 2
        masked += plan.k
        mask += plan.counts()["mask"]
        i += 1
    frac, mask_frac = masked / total, mask / masked
    dt = time.perf_counter() - t0
    record(7, 0.13 <= frac <= 0.17 and 0.75 <= mask_frac <= 0.85 and dt < 30,
           f"masked {frac:.4f} of {total} tokens, [MASK] share {mask_frac:.4f}, {dt:.1f}s")


# 8 -----------------------------------------------------------------------------------

def _majority(flags):
    return sum(flags) >= 2


def test_c08_probing_ordering():
    t0 = time.perf_counter()
    seeds = [0, 1, 2]
    kinds = ["charlstm", "charformer", "dice"]
    lm = {k: [m.acc for m in v] for k, v in compare_embedders(kinds, "listmax", seeds).items()}
    dec = {k: [m.acc_exp for m in v] for k, v in compare_embedders(kinds, "decode", seeds).items()}
    order = _majority([lm["charlstm"][i] >= lm["charformer"][i] > lm["dice"][i] for i in range(3)])
    lstm_high = float(np.mean(lm["charlstm"])) > 0.90
    dice_above_chance = float(np.mean(lm["dice"])) > 0.2 + 0.3
    decode = _majority([min(dec["charlstm"][i], dec["charformer"][i]) > dec["dice"][i] for i in range(3)])
    dt = time.perf_counter() - t0
    fmt = lambda d: {k: [round(x, 4) for x in v] for k, v in d.items()}  # noqa: E731
    record(8, order and lstm_high and dice_above_chance and decode and dt < 1800,
           f"listmax {fmt(lm)}; decode acc_exp {fmt(dec)}; ordering={order}, lstm>0.9={lstm_high}, "
           f"dice>chance+0.3={dice_above_chance}, decode={decode}; {dt:.0f}s")


# 9 -----------------------------------------------------------------------------------

def test_c09_scratch_run_learns(tmp_path, capsys):
    t0 = time.perf_counter()
    code = main(["pretrain", "--mode", "scratch", "--steps", "500", "--seed", "0", "--out", str(tmp_path)])
    capsys.readouterr()
    rows = [json.loads(line) for line in (tmp_path / "metrics.jsonl").read_text().splitlines()]
    summary = json.loads((tmp_path / "metrics.json").read_text())
    first = float(np.mean([r["l_mlm"] for r in rows[:20]]))
    end = summary["final_smoothed_l_mlm"]
    dt = time.perf_counter() - t0
    record(9, code == 0 and len(rows) == 500 and end < 0.5 * first and dt < 600,
           f"first-20 mean {first:.3f} -> smoothed end {end:.3f} (ratio {end / first:.3f}), {dt:.0f}s")


# 10 ----------------------------------------------------------------------------------

DET_TOML = """
[host]
model_dim = 32
layers = 1
heads = 2
max_len = 96
[numbed]
char_embed_dim = 8
lstm_hidden = 8
[pretrain]
steps = 200
batch_size = 4
[corpus]
docs = 60
[probing]
epochs = 3
[numbers]
count = 2000
"""


def test_c10_cli_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    cfg = tmp_path / "det.toml"
    cfg.write_text(DET_TOML)
    same = []
    for label, argv, files in [
        ("pretrain", ["pretrain", "--config", str(cfg), "--mode", "checkpoint", "--bootstrap-steps", "50"],
         ["metrics.jsonl", "metrics.json", "host.ckpt.json", "teacher.ckpt.json", "numbed.ckpt.json"]),
        ("probe", ["probe", "run", "--config", str(cfg), "--task", "listmax", "--numbed", "charlstm"],
         ["metrics.json"]),
    ]:
        # identical inputs, including --out: the second run overwrites the first in place
        out = tmp_path / label
        snapshots = []
        for _ in range(2):
            assert main(argv + ["--seed", "7", "--out", str(out)]) == 0
            manifest = json.loads((out / "manifest.json").read_text())
            manifest.pop("timings")
            snapshots.append(({f: (out / f).read_bytes() for f in files}, manifest))
        (first, m0), (second, m1) = snapshots
        same += [first[f] == second[f] for f in files]
        same.append(m0 == m1)
    capsys.readouterr()
    dt = time.perf_counter() - t0
    record(10, all(same), f"{sum(same)}/{len(same)} artifacts byte-identical across two runs, {dt:.0f}s")
