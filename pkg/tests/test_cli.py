import json
from pathlib import Path

import pytest

from stable_style import pipeline
from stable_style.cli import main
from stable_style.config import load_config
from stable_style.synthetic import write_corpus

CONFIG = """\
seed: 3
output_dir: {out}
vocab_size: 250
data: {{root: {data}, references: {data}, n_refs: 1}}
classifier: {{epochs: 3, embed_dim: 32, maps_per_filter: 16}}
eval_classifier: {{epochs: 3, embed_dim: 32, maps_per_filter: 16}}
generator: {{d_model: 32, n_heads: 2, n_layers: 1, d_ff: 64}}
train: {{epochs: 2, batch_size: 32, learning_rate: 0.001}}
lm: {{d_model: 32, n_heads: 2, n_layers: 1, d_ff: 64, epochs: 2}}
general_lm: {{d_model: 32, n_heads: 2, n_layers: 1, d_ff: 64, epochs: 1}}
sweep: {{alpha_grid: [0.5, 0.7, 0.9], beta_grid: [0.0, 0.5]}}
walk: {{n_sentences: 2}}
"""


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    data.mkdir()
    write_corpus(data, n_train=200, n_dev=40, n_test=30, seed=0)
    cfg_path = root / "run.yaml"
    cfg_path.write_text(CONFIG.format(out=root / "out", data=data))
    base = ["--config", str(cfg_path)]
    for cmd in (["train-classifier"], ["train-generator"], ["train-lm"], ["train-lm", "--kind", "general"]):
        assert main(cmd + base) == 0
    return root, base


def test_artifacts_embed_hash_and_seed(run):
    root, base = run
    out = root / "out"
    cfg = load_config(str(root / "run.yaml"))
    import torch
    for name in ("classifier.pt", "eval_classifier.pt", "generator.pt", "lm_data.pt", "lm_general.pt"):
        blob = torch.load(out / name, weights_only=False)
        assert blob["config_hash"] == cfg.digest() and blob["seed"] == 3, name
    assert json.loads((out / "config.resolved.json").read_text())["config_hash"] == cfg.digest()
    assert (out / "checkpoints" / "generator.epoch2.pt").exists()


def test_transfer_two_operating_points(run):
    root, base = run
    assert main(["transfer", *base, "--alpha", "0.7", "--beta", "0.5"]) == 0
    assert main(["transfer", *base, "--alpha", "0.7", "--beta", "0.75", "--direction", "0-1"]) == 0
    t = root / "out" / "transfer"
    a, b = t / "sst_a0.7_b0.5.0-1.txt", t / "sst_a0.7_b0.75.0-1.txt"
    assert a.exists() and b.exists() and (t / "sst_a0.7_b0.5.1-0.txt").exists()
    assert not (t / "sst_a0.7_b0.75.1-0.txt").exists()
    assert len(a.read_text().splitlines()) == 30
    meta = json.loads(Path(str(a) + ".meta.json").read_text())
    assert meta["seed"] == 3 and meta["alpha"] == 0.7 and meta["target_style"] == 1
    traces = Path(str(a) + ".trace.jsonl").read_text().splitlines()
    assert len(traces) == 30 and "stop_reason" in json.loads(traces[0])


def test_transfer_rerun_byte_identical(run):
    root, base = run
    f = root / "out" / "transfer" / "sst_a0.6_b0.5.1-0.txt"
    assert main(["transfer", *base, "--alpha", "0.6", "--direction", "1-0"]) == 0
    first = f.read_bytes()
    assert main(["transfer", *base, "--alpha", "0.6", "--direction", "1-0"]) == 0
    assert f.read_bytes() == first


def test_evaluate_input_copy_and_determinism(run, capsys):
    root, base = run
    main(["transfer", *base])
    sys_prefix = str(root / "out" / "transfer" / "sst_a0.7_b0.5")
    args = ["evaluate", *base, "--input-copy", "--system", f"sst={sys_prefix}"]
    assert main(args + ["--name", "e1"]) == 0
    assert main(args + ["--name", "e2"]) == 0
    r1 = (root / "out" / "e1" / "report.jsonl").read_text()
    assert r1 == (root / "out" / "e2" / "report.jsonl").read_text()
    recs = [json.loads(l) for l in r1.splitlines()]
    copy = recs[0]
    assert copy["system"] == "input copy" and copy["s_bleu"] == 100.0
    assert copy["style_accuracy"] < 0.5  # a copy keeps the source style
    assert all(r[k] is not None for r in recs for k in ("h_bleu", "d_ppl", "g_ppl", "semantic"))
    assert "input copy" in (root / "out" / "e1" / "table.txt").read_text()


def test_evaluate_single_system_warns(run, caplog):
    root, base = run
    assert main(["evaluate", *base, "--input-copy", "--name", "single"]) == 0
    rec = json.loads((root / "out" / "single" / "report.jsonl").read_text())
    assert rec["flags"] == [] and "at least two" in caplog.text


def test_evaluate_misaligned_names_system(run, tmp_path, capsys):
    root, base = run
    for s in (0, 1):
        (tmp_path / f"bad.{s}").write_text("only one line\n")
    assert main(["evaluate", *base, "--system", f"broken={tmp_path / 'bad'}"]) == 1
    assert "broken" in capsys.readouterr().err


def test_sweep_rows_and_monotone_deletions(run):
    root, base = run
    assert main(["sweep", *base]) == 0
    lines = (root / "out" / "sweep" / "sweep.tsv").read_text().splitlines()
    header, rows = lines[0].split("\t"), [dict(zip(lines[0].split("\t"), l.split("\t"))) for l in lines[1:]]
    assert header[:3] == ["axis", "alpha", "beta"]
    assert [(r["axis"], float(r["alpha"]), float(r["beta"])) for r in rows] == \
        [("alpha", 0.5, 0.5), ("alpha", 0.7, 0.5), ("alpha", 0.9, 0.5), ("beta", 0.7, 0.0), ("beta", 0.7, 0.5)]
    dels = [float(r["mean_deleted"]) for r in rows if r["axis"] == "alpha"]
    assert dels == sorted(dels, reverse=True)
    bdels = [float(r["mean_deleted"]) for r in rows if r["axis"] == "beta"]
    assert bdels == sorted(bdels, reverse=True)
    assert (root / "out" / "sweep" / "sweep.png").stat().st_size > 0


def test_single_point_sweep_equals_transfer_plus_eval(run):
    root, base = run
    cfg = load_config(base[1])
    res = pipeline.EvalResources.from_run(cfg)
    rows = pipeline.run_sweep(cfg, [0.8], [0.5], resources=res, plot=False)
    row = rows[0]
    pipeline.run_transfer(cfg, 0.8, 0.5)
    reps = pipeline.run_eval(cfg, {"p": str(cfg.out / "transfer" / "sst_a0.8_b0.5")}, resources=res,
                             out_name="point")
    assert row["g_bleu"] == reps[0].g_bleu and row["style_accuracy"] == reps[0].style_accuracy


def test_walk(run):
    root, base = run
    assert main(["walk", *base, "--text", "1:the food was great ."]) == 0
    rec = json.loads((root / "out" / "walk.jsonl").read_text().splitlines()[0])
    assert [w["w"] for w in rec["walk"]] == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_exit_codes(run, tmp_path):
    root, base = run
    assert main(["transfer", *base, "--direction", "0-7"]) == 1
    assert main(["transfer", *base, "--set", "nope=1"]) == 1
    assert main(["transfer", "--config", str(root / "run.yaml"), "--set", f"data.root={tmp_path}/x"]) == 1
    assert main(["sweep", *base, "--alpha-grid", ""]) == 1
    assert main(["evaluate", *base]) == 1
    broken = tmp_path / "broken.pt"
    broken.write_bytes(b"not a checkpoint")
    assert main(["transfer", *base, "--checkpoint", str(broken)]) == 2


def test_mismatched_checkpoint_is_config_error(run, tmp_path):
    root, base = run
    other = tmp_path / "other"
    assert main(["train-classifier", *base, "--out", str(other), "--set", "vocab_size=200", "--role", "style"]) == 0
    assert main(["transfer", *base, "--out", str(other), "--checkpoint", str(root / "out" / "generator.pt")]) == 1


def test_synth_data(tmp_path):
    assert main(["synth-data", str(tmp_path / "d"), "--n-train", "10", "--n-dev", "2", "--n-test", "2"]) == 0
    assert (tmp_path / "d" / "sentiment.train.0").exists()
