"""Benchmark evaluation: context ablations, orchestration, and reports.

Context transforms ablate what the model sees (the checker always receives
the entry's true context). Evaluation streams per-entry results to a JSONL
file and is resumable; reports partition pass rates by dependency category,
proof length, and context length.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import jsonl
from .annotate import (
    DEFINITION_KINDS,
    THEOREM_KINDS,
    build_name_index,
    resolve_premises,
)
from .checker import CheckerSession
from .extract import BenchmarkEntry
from .instruct import TokenBudget, format_full_proof_prompt
from .model import Backend, GenerationRequest, generate_candidates
from .scanner import (
    DeclKind,
    ItemKind,
    SourceFile,
    parse_declarations,
    scan_file,
)
from .search import SearchParams, best_first_search, replay_proof

logger = logging.getLogger(__name__)

TRANSFORMS = ("all", "noContext", "importsAndDefs", "theoremsOnly", "noProof")

# Item kinds each filtering transform is allowed to leave behind.
_STRUCTURE_KINDS = frozenset(
    {
        ItemKind.IMPORT,
        ItemKind.OPEN,
        ItemKind.VARIABLE,
        ItemKind.SET_OPTION,
        ItemKind.NAMESPACE_BEGIN,
        ItemKind.NAMESPACE_END,
        ItemKind.SECTION_BEGIN,
        ItemKind.SECTION_END,
    }
)

_DEF_DECL_KINDS = frozenset(
    {DeclKind.DEF, DeclKind.ABBREV, DeclKind.STRUCTURE, DeclKind.INDUCTIVE,
     DeclKind.INSTANCE, DeclKind.OTHER}
)
_THEOREM_DECL_KINDS = frozenset({DeclKind.THEOREM, DeclKind.LEMMA, DeclKind.EXAMPLE})


class MismatchedIdsError(ValueError):
    """Results and entries do not align one-to-one by declId."""


def apply_context_transform(entry: BenchmarkEntry, transform: str) -> str:
    """The model-facing context under an ablation transform."""
    if transform == "all":
        return entry.src_context
    if transform == "noContext":
        return ""
    file = SourceFile.from_text(entry.file or "<context>", entry.src_context)
    if transform == "noProof":
        text = entry.src_context
        for decl in reversed(parse_declarations(file)):
            if decl.kind in _THEOREM_DECL_KINDS and decl.proof_offset is not None:
                text = text[: decl.proof_offset] + "sorry" + text[decl.span.end :]
        return text

    items = scan_file(file)
    decls = {d.span.start: d for d in parse_declarations(file)}
    kept: list[str] = []
    for item in items:
        if transform == "importsAndDefs":
            if item.kind in _STRUCTURE_KINDS:
                kept.append(item.text)
            elif item.kind == ItemKind.DECLARATION:
                decl = decls.get(item.span.start)
                if decl is not None and decl.kind in _DEF_DECL_KINDS:
                    kept.append(item.text)
        elif transform == "theoremsOnly":
            if item.kind in (ItemKind.IMPORT, ItemKind.OPEN):
                kept.append(item.text)
            elif item.kind == ItemKind.DECLARATION:
                decl = decls.get(item.span.start)
                if decl is not None and decl.kind in _THEOREM_DECL_KINDS:
                    kept.append(item.text)
        else:
            raise ValueError(f"unknown transform {transform!r}")
    return "\n\n".join(kept) + ("\n" if kept else "")


def _entry_text(entry: BenchmarkEntry) -> str:
    text = entry.src_context + entry.theorem_statement
    if entry.proof_metadata.has_proof and entry.proof_metadata.proof:
        text += " := " + entry.proof_metadata.proof
    return text


def _category_of_target(target, index) -> str:
    has_def = False
    has_thm = False
    for _, premise in resolve_premises(target, index):
        if not (premise.file == target.path and premise.start_offset < target.span.start):
            continue
        if premise.kind in DEFINITION_KINDS:
            has_def = True
        elif premise.kind in THEOREM_KINDS:
            has_thm = True
    if has_def and has_thm:
        return "both"
    if has_def:
        return "definitionsOnly"
    if has_thm:
        return "theoremsOnly"
    return "neither"


def dependency_category(entry: BenchmarkEntry) -> str:
    """Four-way in-file dependency split of an entry.

    Rescans the entry's own context + statement + proof, so it works on
    entries loaded from JSONL without extra fields.
    """
    file = SourceFile.from_text(entry.file or "<entry>", _entry_text(entry))
    decls = parse_declarations(file)
    target = None
    for d in decls:
        if d.span.start == len(entry.src_context):
            target = d
            break
    if target is None and decls:
        target = decls[-1]
    if target is None:
        return "neither"
    index = build_name_index([file], parsed={file.path: decls})
    return _category_of_target(target, index)


def dependency_categories(entries: list[BenchmarkEntry]) -> list[str]:
    """Dependency categories for many entries, scanning each file only once.

    Entries of one file carry nested prefixes of the same text, so the
    longest entry's text covers every target; entries whose context is not
    a prefix of it (mixed file versions) fall back to a per-entry scan.
    """
    longest: dict[str, BenchmarkEntry] = {}
    for entry in entries:
        best = longest.get(entry.file)
        if best is None or len(_entry_text(entry)) > len(_entry_text(best)):
            longest[entry.file] = entry

    scans: dict[str, tuple[SourceFile, dict[int, Any], Any]] = {}
    for path, entry in longest.items():
        file = SourceFile.from_text(path or "<entry>", _entry_text(entry))
        decls = parse_declarations(file)
        index = build_name_index([file], parsed={file.path: decls})
        scans[path] = (file, {d.span.start: d for d in decls}, index)

    out = []
    for entry in entries:
        file, by_start, index = scans[entry.file]
        target = by_start.get(len(entry.src_context))
        compatible = file.text.startswith(entry.src_context + entry.theorem_statement)
        if target is None or not compatible:
            out.append(dependency_category(entry))
        else:
            out.append(_category_of_target(target, index))
    return out


def proof_length_bucket(entry: BenchmarkEntry) -> str:
    if not entry.proof_metadata.has_proof:
        return "noProof"
    lines = entry.proof_metadata.proof_length_lines
    if lines <= 2:
        return "1-2"
    if lines <= 5:
        return "3-5"
    return ">5"


def context_length_bucket(entry: BenchmarkEntry, counter: Callable[[str], int]) -> str:
    tokens = counter(entry.src_context)
    if tokens < 4000:
        return "<4k"
    if tokens < 16000:
        return "4k-16k"
    return ">=16k"


def _rate(proved: int, total: int) -> str:
    if total == 0:
        return "n/a"
    return f"{100.0 * proved / total:.2f}%"


@dataclass
class CategoryCount:
    proved: int = 0
    total: int = 0

    def to_json(self) -> dict[str, Any]:
        return {"proved": self.proved, "total": self.total, "rate": _rate(self.proved, self.total)}


@dataclass
class EvaluationReport:
    overall: CategoryCount
    splits: dict[str, CategoryCount]
    dependency: dict[str, CategoryCount]
    proof_length: dict[str, CategoryCount]
    context_length: dict[str, CategoryCount]
    entries: list[dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "overall": self.overall.to_json(),
            "splits": {k: v.to_json() for k, v in self.splits.items()},
            "dependency": {k: v.to_json() for k, v in self.dependency.items()},
            "proofLength": {k: v.to_json() for k, v in self.proof_length.items()},
            "contextLength": {k: v.to_json() for k, v in self.context_length.items()},
            "entries": self.entries,
        }

    def to_text(self) -> str:
        rows: list[tuple[str, str, str, str]] = []

        def add(section: str, counts: dict[str, CategoryCount]) -> None:
            for name, c in counts.items():
                rows.append((f"{section}/{name}", str(c.proved), str(c.total), _rate(c.proved, c.total)))

        rows.append(("overall", str(self.overall.proved), str(self.overall.total),
                     _rate(self.overall.proved, self.overall.total)))
        add("split", self.splits)
        add("dependency", self.dependency)
        add("proofLength", self.proof_length)
        add("contextLength", self.context_length)
        widths = [max(len(r[i]) for r in rows + [("category", "proved", "total", "rate")])
                  for i in range(4)]
        header = ("category", "proved", "total", "rate")
        lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
        for r in rows:
            lines.append("  ".join(r[i].ljust(widths[i]) for i in range(4)))
        return "\n".join(lines) + "\n"


def build_report(
    results: list[dict[str, Any]],
    entries: list[BenchmarkEntry],
    counter: Callable[[str], int] | None = None,
) -> EvaluationReport:
    """Aggregate per-entry results into a partitioned pass-rate report."""
    from .instruct import whitespace_token_count

    counter = counter or whitespace_token_count
    by_id: dict[str, dict[str, Any]] = {}
    for r in results:
        if r["declId"] in by_id:
            raise MismatchedIdsError(f"duplicate result for {r['declId']!r}")
        by_id[r["declId"]] = r
    entry_ids = {e.decl_id for e in entries}
    if len(entry_ids) != len(entries):
        raise MismatchedIdsError("duplicate declIds in the entry set")
    if set(by_id) != entry_ids:
        missing = entry_ids - set(by_id)
        extra = set(by_id) - entry_ids
        raise MismatchedIdsError(
            f"results/entries mismatch (missing={sorted(missing)[:5]}, extra={sorted(extra)[:5]})"
        )

    overall = CategoryCount()
    splits: dict[str, CategoryCount] = {}
    dependency = {k: CategoryCount() for k in ("definitionsOnly", "theoremsOnly", "both", "neither")}
    proof_length = {k: CategoryCount() for k in ("1-2", "3-5", ">5", "noProof")}
    context_length = {k: CategoryCount() for k in ("<4k", "4k-16k", ">=16k")}
    per_entry = []
    categories = dependency_categories(entries)

    for entry, dep in zip(entries, categories):
        result = by_id[entry.decl_id]
        proved = result.get("status") == "proved"
        plb = proof_length_bucket(entry)
        clb = context_length_bucket(entry, counter)
        overall.total += 1
        overall.proved += proved
        split = splits.setdefault(entry.file, CategoryCount())
        split.total += 1
        split.proved += proved
        dependency[dep].total += 1
        dependency[dep].proved += proved
        proof_length[plb].total += 1
        proof_length[plb].proved += proved
        context_length[clb].total += 1
        context_length[clb].proved += proved
        per_entry.append(
            {
                "declId": entry.decl_id,
                "file": entry.file,
                "status": result.get("status"),
                "proved": proved,
                "dependencyCategory": dep,
                "proofLengthBucket": plb,
                "contextLengthBucket": clb,
            }
        )

    return EvaluationReport(
        overall=overall,
        splits=splits,
        dependency=dependency,
        proof_length=proof_length,
        context_length=context_length,
        entries=per_entry,
    )


def run_evaluation(
    dataset: list[BenchmarkEntry],
    model: Backend,
    checker_factory: Callable[[], CheckerSession],
    params: SearchParams | None = None,
    transform: str = "all",
    mode: str = "tactic",
    out_path: str | Path | None = None,
    resume: bool = False,
    workers: int = 1,
    budget: TokenBudget | None = None,
    fullproof_budget: TokenBudget | None = None,
    seed: int = 0,
    verbose: bool = False,
) -> list[dict[str, Any]]:
    """Evaluate every entry, streaming results to a JSONL file.

    With `resume`, entries whose declId is already present in the output
    file are skipped; with `verbose`, tactic-mode records carry the full
    expansion trace. Per-entry failures are recorded, never raised.
    """
    if transform not in TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}")
    if mode not in ("tactic", "fullproof"):
        raise ValueError(f"unknown mode {mode!r}")
    params = params or SearchParams()

    existing: dict[str, dict[str, Any]] = {}
    if resume and out_path is not None and Path(out_path).exists():
        for rec in jsonl.read_jsonl(out_path):
            existing[rec["declId"]] = rec

    out_file = None
    if out_path is not None:
        out_file = open(out_path, "a" if resume else "w", encoding="utf-8")
    write_lock = threading.Lock()

    def emit(rec: dict[str, Any]) -> None:
        if out_file is not None:
            with write_lock:
                out_file.write(jsonl.dumps_line(rec) + "\n")
                out_file.flush()

    def evaluate_one(entry: BenchmarkEntry) -> dict[str, Any]:
        if entry.decl_id in existing:
            return existing[entry.decl_id]
        session: CheckerSession | None = None
        try:
            session = checker_factory()
            prompt_context = apply_context_transform(entry, transform)
            if mode == "tactic":
                result = best_first_search(
                    entry,
                    model,
                    session,
                    params=params,
                    budget=budget,
                    seed=seed,
                    prompt_context=prompt_context,
                    keep_trace=verbose,
                )
                rec = {"declId": entry.decl_id, **result.to_json(), "transform": transform}
                if verbose:
                    rec["trace"] = result.trace
            else:
                prompt = format_full_proof_prompt(
                    entry.theorem_statement,
                    context=prompt_context or None,
                    context_budget=fullproof_budget,
                )
                candidates = generate_candidates(
                    model,
                    GenerationRequest(prompt=prompt, num_samples=1, stop_sequences=()),
                )
                proof = candidates[0].text if candidates else ""
                verdict = replay_proof(entry, proof, session) if proof else 0
                rec = {
                    "declId": entry.decl_id,
                    "status": "proved" if verdict == 1 else "failed",
                    "proof": proof if verdict == 1 else None,
                    "stats": {"tacticsChecked": 1 if proof else 0},
                    "transform": transform,
                }
        except Exception as exc:  # noqa: BLE001 - a single entry never aborts a run
            logger.warning("evaluation of %s failed: %s", entry.decl_id, exc)
            rec = {
                "declId": entry.decl_id,
                "status": "error",
                "proof": None,
                "stats": {},
                "transform": transform,
                "diagnostic": str(exc),
            }
        finally:
            if session is not None:
                session.close()
        emit(rec)
        return rec

    try:
        if workers <= 1:
            results = [evaluate_one(e) for e in dataset]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(evaluate_one, dataset))
    finally:
        if out_file is not None:
            out_file.close()
    return results
