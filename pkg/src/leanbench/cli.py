"""Command-line entry point: the pipeline as subcommands.

    leanbench extract   --config cfg.toml [--out DIR] [--commits FILE]
    leanbench annotate  --config cfg.toml --dataset in.jsonl --out out.jsonl
    leanbench format    --config cfg.toml --dataset next_tactic.jsonl --out DIR
    leanbench evaluate  --config cfg.toml --dataset bench.jsonl --out results.jsonl
    leanbench report    --results results.jsonl --dataset bench.jsonl [--out FILE]
    leanbench transform --dataset bench.jsonl --transform KIND --out out.jsonl

Exit codes: 0 success, 1 usage or configuration error, 2 partial failure
(some entries errored).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench, jsonl
from .annotate import CommitMap, annotate_entries
from .checker import CheckerSession, MockTransport, SubprocessTransport
from .config import CliConfig, ConfigError, load_config
from .extract import (
    BenchmarkEntry,
    assign_decl_ids,
    extract_benchmark_entries,
    extract_full_proof_examples,
    extract_next_tactic_examples,
)
from .instruct import COUNTERS, TokenBudget, format_file_tuning, format_state_tactic
from .model import HttpBackendConfig, HttpCompletionBackend, MockScriptBackend
from .scanner import DeclKind, SourceFile, parse_declarations

logger = logging.getLogger(__name__)


def _load_repo(cfg: CliConfig) -> list[SourceFile]:
    files = []
    seen: dict[str, str] = {}
    for root in cfg.repo_roots:
        root_path = cfg.resolve(root)
        if not root_path.exists():
            raise FileNotFoundError(f"repository root not found: {root_path}")
        for path in sorted(root_path.rglob("*.lean")):
            rel = path.relative_to(root_path).as_posix()
            if rel in seen:
                raise ValueError(
                    f"duplicate repo-relative path {rel!r} (roots {seen[rel]!r} and {root!r})"
                )
            seen[rel] = root
            files.append(SourceFile.from_text(rel, path.read_text(encoding="utf-8")))
    return files


def _make_budget(cfg: CliConfig, limit: int | None = None) -> TokenBudget:
    return TokenBudget(
        limit=limit if limit is not None else cfg.budget_limit,
        counter=COUNTERS[cfg.counter],
    )


def _make_model(cfg: CliConfig):
    if cfg.model_backend == "mock":
        if not cfg.model_fixture:
            raise ConfigError("model.backend = 'mock' requires model.fixture")
        return MockScriptBackend.load(cfg.resolve(cfg.model_fixture))
    if cfg.model_backend == "http":
        if not cfg.model_endpoint:
            raise ConfigError("model.backend = 'http' requires model.endpoint")
        return HttpCompletionBackend(
            HttpBackendConfig(
                endpoint=cfg.model_endpoint,
                model=cfg.model_name,
                api_key_env=cfg.api_key_env,
                timeout=cfg.model_timeout,
                retries=cfg.model_retries,
                temperature=cfg.temperature,
            )
        )
    raise ConfigError(f"unknown model.backend {cfg.model_backend!r}")


def _checker_factory(cfg: CliConfig):
    if cfg.checker_fixture:
        fixture_path = cfg.resolve(cfg.checker_fixture)

        def factory() -> CheckerSession:
            return CheckerSession(MockTransport(fixture_path), banned_tactics=cfg.banned_tactics)

    elif cfg.checker_command:

        def factory() -> CheckerSession:
            return CheckerSession(
                SubprocessTransport(list(cfg.checker_command), timeout=cfg.checker_timeout),
                banned_tactics=cfg.banned_tactics,
            )

    else:
        raise ConfigError("config needs checker.fixture or checker.command")
    return factory


def _load_entries(path: str | Path) -> list[BenchmarkEntry]:
    return [BenchmarkEntry.from_json(obj) for obj in jsonl.read_jsonl(path)]


def _cmd_extract(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out) if args.out else cfg.resolve(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    repo = _load_repo(cfg)
    if not repo:
        print("no .lean files found under the configured repo roots", file=sys.stderr)
        return 1

    ids = assign_decl_ids(repo)
    checker_factory = _checker_factory(cfg) if args.with_states else None
    full, next_tactic = [], []
    for f in repo:
        full.extend(e.to_json() for e in extract_full_proof_examples(f, ids))
        session = checker_factory() if checker_factory else None
        try:
            examples = extract_next_tactic_examples(f, checker=session, decl_ids=ids)
        finally:
            if session is not None:
                session.close()
        next_tactic.extend(e.to_json() for e in examples)
    jsonl.write_jsonl(out_dir / "full_proof.jsonl", full)
    jsonl.write_jsonl(out_dir / "next_tactic.jsonl", next_tactic)

    selection = []
    for f in repo:
        for d in parse_declarations(f):
            if d.kind in (DeclKind.THEOREM, DeclKind.LEMMA):
                selection.append((f.path, ids[(f.path, d.span.start_line)]))
    entries = extract_benchmark_entries(repo, selection)
    commits_path = args.commits or cfg.commits_file
    commits = CommitMap.load(cfg.resolve(commits_path)) if commits_path else None
    annotate_entries(entries, repo, commits)
    jsonl.write_jsonl(out_dir / "benchmark.jsonl", [e.to_json() for e in entries])
    print(
        f"extracted {len(full)} full-proof examples, {len(next_tactic)} next-tactic "
        f"examples, {len(entries)} benchmark entries -> {out_dir}"
    )
    return 0


def _cmd_annotate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    entries = _load_entries(args.dataset)
    repo = _load_repo(cfg)
    commits_path = args.commits or cfg.commits_file
    commits = CommitMap.load(cfg.resolve(commits_path)) if commits_path else None
    annotate_entries(entries, repo, commits)
    jsonl.write_jsonl(args.out, [e.to_json() for e in entries])
    print(f"annotated {len(entries)} entries -> {args.out}")
    return 0


def _cmd_format(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    budget = _make_budget(cfg)
    out_dir = Path(args.out) if args.out else cfg.resolve(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = jsonl.read_jsonl(args.dataset)
    file_tuning, state_tactic = [], []
    for i, rec in enumerate(records):
        ft = format_file_tuning(
            rec["srcUpToTactic"], rec.get("state", ""), rec["nextTactic"],
            budget=budget, seed=seed + i,
        )
        st = format_state_tactic(rec.get("state", ""), rec["nextTactic"])
        file_tuning.append(ft.to_json())
        state_tactic.append(st.to_json())
    jsonl.write_jsonl(out_dir / "file_tuning.jsonl", file_tuning)
    jsonl.write_jsonl(out_dir / "state_tactic.jsonl", state_tactic)
    print(f"formatted {len(records)} examples -> {out_dir}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    transform = args.transform or cfg.transform
    mode = args.mode or cfg.mode
    seed = cfg.seed if args.seed is None else args.seed
    workers = cfg.workers if args.workers is None else args.workers
    dataset = _load_entries(args.dataset)
    if not dataset:
        print("no entries in dataset", file=sys.stderr)
        return 1
    results = bench.run_evaluation(
        dataset,
        _make_model(cfg),
        _checker_factory(cfg),
        params=cfg.search_params(),
        transform=transform,
        mode=mode,
        out_path=args.out,
        resume=args.resume,
        workers=workers,
        budget=_make_budget(cfg),
        fullproof_budget=_make_budget(cfg, cfg.fullproof_limit),
        seed=seed,
        verbose=args.verbose,
    )
    proved = sum(1 for r in results if r.get("status") == "proved")
    errored = sum(1 for r in results if r.get("status") == "error")
    print(f"evaluated {len(results)} entries: {proved} proved, {errored} errored")
    return 2 if errored else 0


def _cmd_report(args: argparse.Namespace) -> int:
    results = jsonl.read_jsonl(args.results)
    if not results:
        print("no results", file=sys.stderr)
        return 1
    entries = _load_entries(args.dataset)
    counter = COUNTERS[args.counter]
    report = bench.build_report(results, entries, counter=counter)
    text = report.to_text()
    if args.out:
        import json

        Path(args.out).write_text(
            json.dumps(report.to_json(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
    if args.text_out:
        Path(args.text_out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def _cmd_transform(args: argparse.Namespace) -> int:
    entries = _load_entries(args.dataset)
    out_records = []
    for entry in entries:
        obj = entry.to_json()
        obj["srcContext"] = bench.apply_context_transform(entry, args.transform)
        out_records.append(obj)
    jsonl.write_jsonl(args.out, out_records)
    print(f"transformed {len(out_records)} entries ({args.transform}) -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leanbench",
        description="Lean 4 theorem-proving data extraction and evaluation",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract examples and benchmark entries")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: config output.directory)")
    p.add_argument("--commits", help="tab-separated commit sidecar file")
    p.add_argument("--with-states", action="store_true",
                   help="fill next-tactic states by replaying proofs through the checker")
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("annotate", help="recompute metadata for existing entries")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--commits")
    p.set_defaults(fn=_cmd_annotate)

    p = sub.add_parser("format", help="build instruction-tuning datasets")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True, help="next-tactic JSONL")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_format)

    p = sub.add_parser("evaluate", help="run proof search over a benchmark")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="results JSONL path")
    p.add_argument("--transform", choices=bench.TRANSFORMS)
    p.add_argument("--mode", choices=("tactic", "fullproof"))
    p.add_argument("--resume", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    # SUPPRESS so this does not clobber a --verbose given before the subcommand
    p.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS,
                   help="record expansion traces")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("report", help="aggregate results into a report")
    p.add_argument("--results", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--text-out", dest="text_out", help="text table path")
    p.add_argument("--counter", choices=sorted(COUNTERS), default="whitespace")
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("transform", help="apply a context transform to a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--transform", required=True, choices=bench.TRANSFORMS)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_transform)

    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        print("interrupted; partial results were flushed", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: missing field {exc} in input data", file=sys.stderr)
        return 1
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return run_cli()


if __name__ == "__main__":
    sys.exit(main())
