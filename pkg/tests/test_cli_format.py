from __future__ import annotations

import json

from leanbench import jsonl
from leanbench.cli import run_cli


def test_format_mixes_truncation_modes_per_example(tmp_path):
    # 40 long-context examples: auto truncation seeded per example should
    # produce both middle and tail cuts across the dataset.
    long_ctx = "\n".join(f"def filler{i} : Nat := {i}" for i in range(1200))
    records = [
        {
            "state": "⊢ True",
            "nextTactic": f"trivial{i}",
            "srcUpToTactic": long_ctx + f"\n\ntheorem t{i} : True := by\n  ",
            "decl": f"theorem t{i} : True",
            "declUpToTactic": f"theorem t{i} : True := by\n  ",
            "declId": f"t{i}",
        }
        for i in range(40)
    ]
    dataset = tmp_path / "next_tactic.jsonl"
    jsonl.write_jsonl(dataset, records)
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        '[checker]\nfixture = "unused.json"\n[budget]\nlimit = 512\n', encoding="utf-8"
    )
    out = tmp_path / "out"
    assert run_cli([
        "format", "--config", str(cfg), "--dataset", str(dataset), "--out", str(out),
    ]) == 0
    ft = jsonl.read_jsonl(out / "file_tuning.jsonl")
    modes = {r["truncationMode"] for r in ft}
    assert modes == {"middle", "tail"}
    assert all(r["kind"] == "fileTuning" for r in ft)
    # same config, same seed: identical bytes
    out2 = tmp_path / "out2"
    assert run_cli([
        "format", "--config", str(cfg), "--dataset", str(dataset), "--out", str(out2),
    ]) == 0
    assert (out / "file_tuning.jsonl").read_bytes() == (out2 / "file_tuning.jsonl").read_bytes()


def test_verbose_before_subcommand_keeps_traces(tmp_path, monkeypatch):
    import shutil
    from conftest import FIXTURES

    for name in ("square",):
        shutil.copytree(FIXTURES / name, tmp_path / name)
    for name in ("checker_square.json", "model_square.json"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        '[repo]\nroots = ["square"]\n'
        '[checker]\nfixture = "checker_square.json"\n'
        '[model]\nbackend = "mock"\nfixture = "model_square.json"\n',
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert run_cli(["extract", "--config", str(cfg), "--out", str(out)]) == 0
    results = out / "results.jsonl"
    assert run_cli([
        "--verbose", "evaluate", "--config", str(cfg),
        "--dataset", str(out / "benchmark.jsonl"), "--out", str(results),
    ]) == 0
    (rec,) = jsonl.read_jsonl(results)
    assert "trace" in rec and len(rec["trace"]) >= 1


def test_extract_with_states_fills_states(tmp_path):
    import shutil
    from conftest import FIXTURES

    shutil.copytree(FIXTURES / "square", tmp_path / "square")
    for name in ("checker_square.json", "model_square.json"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        '[repo]\nroots = ["square"]\n'
        '[checker]\nfixture = "checker_square.json"\n'
        '[model]\nbackend = "mock"\nfixture = "model_square.json"\n',
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert run_cli([
        "extract", "--config", str(cfg), "--out", str(out), "--with-states",
    ]) == 0
    (rec,) = jsonl.read_jsonl(out / "next_tactic.jsonl")
    assert rec["state"] == "x : ℝ\n⊢ s x = x ^ 2"
    assert rec["stateFromChecker"] is True


def test_malformed_dataset_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"notTheSchema": true}\n', encoding="utf-8")
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('[checker]\nfixture = "c.json"\n[model]\nfixture = "m.json"\n', encoding="utf-8")
    code = run_cli([
        "evaluate", "--config", str(cfg), "--dataset", str(bad),
        "--out", str(tmp_path / "r.jsonl"),
    ])
    assert code == 1
    assert "missing field" in capsys.readouterr().err


def test_fullproof_mode_through_cli(tmp_path):
    import shutil
    from conftest import FIXTURES

    for name in ("square", "rect"):
        shutil.copytree(FIXTURES / name, tmp_path / name)
    for name in ("checker_e2e.json", "model_e2e.json", "commits.tsv", "config_e2e.toml"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    cfg = str(tmp_path / "config_e2e.toml")
    out = tmp_path / "out"
    assert run_cli(["extract", "--config", cfg, "--out", str(out)]) == 0
    assert run_cli([
        "evaluate", "--config", cfg,
        "--dataset", str(out / "benchmark.jsonl"),
        "--out", str(out / "results_fp.jsonl"),
        "--mode", "fullproof",
    ]) == 0
    records = jsonl.read_jsonl(out / "results_fp.jsonl")
    assert [r["status"] for r in records] == ["proved"] * 4
    assert all(r["proof"].startswith("by") for r in records)

    # statement-only prompting: noContext + fullproof still verifies against
    # the true context on the checker side
    assert run_cli([
        "evaluate", "--config", cfg,
        "--dataset", str(out / "benchmark.jsonl"),
        "--out", str(out / "results_fp_noctx.jsonl"),
        "--mode", "fullproof", "--transform", "noContext",
    ]) == 0
    noctx = jsonl.read_jsonl(out / "results_fp_noctx.jsonl")
    assert [r["status"] for r in noctx] == ["proved"] * 4
