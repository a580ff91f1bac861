"""Turn scanned repositories into training and benchmark records.

Three record shapes come out of here: full-proof examples (one per proved
theorem), next-tactic examples (one per tactic step), and benchmark entries
(theorem + preceding file context + metadata).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

from .scanner import (
    _CHAR_LIT_RE,
    _CLOSE_BRACKETS,
    _OPEN_BRACKETS,
    Declaration,
    DeclKind,
    ProofMode,
    SourceFile,
    _is_ident_char,
    _skip_block_comment,
    _skip_french_quotes,
    _skip_line_comment,
    _skip_string,
    parse_declarations,
)

logger = logging.getLogger(__name__)

THEOREM_LIKE = frozenset({DeclKind.THEOREM, DeclKind.LEMMA, DeclKind.EXAMPLE})


class UnknownDeclarationError(KeyError):
    """A benchmark selection names a declId that does not exist."""


@dataclass(frozen=True)
class FullProofExample:
    src_up_to_decl: str
    decl: str
    decl_id: str
    proof: str

    def to_json(self) -> dict[str, Any]:
        return {
            "srcUpToDecl": self.src_up_to_decl,
            "decl": self.decl,
            "declId": self.decl_id,
            "proof": self.proof,
        }


@dataclass(frozen=True)
class NextTacticExample:
    state: str
    next_tactic: str
    src_up_to_tactic: str
    decl: str
    decl_up_to_tactic: str
    decl_id: str
    state_from_checker: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "state": self.state,
            "nextTactic": self.next_tactic,
            "srcUpToTactic": self.src_up_to_tactic,
            "decl": self.decl,
            "declUpToTactic": self.decl_up_to_tactic,
            "declId": self.decl_id,
            "stateFromChecker": self.state_from_checker,
        }


@dataclass
class PositionMetadata:
    line_in_file: int
    token_position_in_file: int
    theorem_position_in_file: int

    def to_json(self) -> dict[str, Any]:
        return {
            "lineInFile": self.line_in_file,
            "tokenPositionInFile": self.token_position_in_file,
            "theoremPositionInFile": self.theorem_position_in_file,
        }


@dataclass
class DependencyMetadata:
    in_file_premises: bool
    repository_premises: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "inFilePremises": self.in_file_premises,
            "repositoryPremises": self.repository_premises,
        }


@dataclass
class ProofMetadata:
    has_proof: bool
    proof: str
    proof_type: str
    proof_length_lines: int
    proof_length_tokens: int

    def to_json(self) -> dict[str, Any]:
        return {
            "hasProof": self.has_proof,
            "proof": self.proof,
            "proofType": self.proof_type,
            "proofLengthLines": self.proof_length_lines,
            "proofLengthTokens": self.proof_length_tokens,
        }


@dataclass
class BenchmarkEntry:
    src_context: str
    theorem_statement: str
    theorem_name: str | None
    file_created: str
    theorem_created: str
    file: str
    position_metadata: PositionMetadata
    dependency_metadata: DependencyMetadata
    proof_metadata: ProofMetadata

    @property
    def decl_id(self) -> str:
        """Stable identifier derived from the serialized fields."""
        if self.theorem_name:
            return self.theorem_name
        return f"{self.file}:{self.position_metadata.line_in_file}"

    def to_json(self) -> dict[str, Any]:
        return {
            "srcContext": self.src_context,
            "theoremStatement": self.theorem_statement,
            "theoremName": self.theorem_name,
            "fileCreated": self.file_created,
            "theoremCreated": self.theorem_created,
            "file": self.file,
            "positionMetadata": self.position_metadata.to_json(),
            "dependencyMetadata": self.dependency_metadata.to_json(),
            "proofMetadata": self.proof_metadata.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "BenchmarkEntry":
        pos = obj.get("positionMetadata", {})
        dep = obj.get("dependencyMetadata", {})
        prf = obj.get("proofMetadata", {})
        return cls(
            src_context=obj["srcContext"],
            theorem_statement=obj["theoremStatement"],
            theorem_name=obj.get("theoremName"),
            file_created=obj.get("fileCreated", "(unknown)"),
            theorem_created=obj.get("theoremCreated", "(unknown)"),
            file=obj.get("file", ""),
            position_metadata=PositionMetadata(
                line_in_file=pos.get("lineInFile", 0),
                token_position_in_file=pos.get("tokenPositionInFile", 0),
                theorem_position_in_file=pos.get("theoremPositionInFile", 0),
            ),
            dependency_metadata=DependencyMetadata(
                in_file_premises=dep.get("inFilePremises", False),
                repository_premises=dep.get("repositoryPremises", False),
            ),
            proof_metadata=ProofMetadata(
                has_proof=prf.get("hasProof", False),
                proof=prf.get("proof", ""),
                proof_type=prf.get("proofType", "none"),
                proof_length_lines=prf.get("proofLengthLines", 0),
                proof_length_tokens=prf.get("proofLengthTokens", 0),
            ),
        )


@dataclass(frozen=True)
class TacticStep:
    """One tactic step inside a proof, as a span of the proof text."""

    text: str
    start: int  # offset within proof_text
    end: int


def split_tactic_steps(proof_text: str) -> list[TacticStep]:
    """Split a tactic proof ("by ...") into top-level steps.

    Boundaries are newlines at the proof's base indentation (the indentation
    of the first depth-0 content line below the `by` line) and bare `;`
    separators at bracket depth 0. `<;>` chains, case arms (`|`), and the
    deeper-indented continuation lines of a step stay attached to it.
    """
    if not proof_text.startswith("by"):
        return []
    n = len(proof_text)
    first_start: int | None = None
    boundaries: list[int] = []
    base_indent: int | None = None
    cur_start: int | None = None  # where the step being scanned began

    depth = 0
    prev = ""
    j = 2  # skip the leading "by"
    while j < n:
        ch = proof_text[j]
        if ch == "-" and proof_text.startswith("--", j):
            j = _skip_line_comment(proof_text, j)
            continue
        if ch == "/" and proof_text.startswith("/-", j):
            j = _skip_block_comment(proof_text, j, None)
            prev = "/"
            continue
        if ch == '"':
            j = _skip_string(proof_text, j, None)
            prev = '"'
            continue
        if ch == "«":
            j = _skip_french_quotes(proof_text, j, None)
            prev = "»"
            continue
        if ch == "'" and not _is_ident_char(prev):
            m = _CHAR_LIT_RE.match(proof_text, j)
            if m is not None:
                j = m.end()
                prev = "'"
                continue
        if ch in _OPEN_BRACKETS:
            depth += 1
        elif ch in _CLOSE_BRACKETS:
            depth = max(depth - 1, 0)
        elif ch == ";" and depth == 0:
            is_chain = j > 0 and proof_text[j - 1] == "<"
            if not is_chain and cur_start is not None:
                # a `;` only sequences whole steps when it sits on the step's
                # first line and the step is not a focus block or an arm
                # (the dot / `=>` scopes everything after it)
                segment = proof_text[cur_start:j]
                splits_here = (
                    "\n" not in segment
                    and proof_text[cur_start] not in "·."
                    and "=>" not in segment
                )
                if splits_here:
                    k = j + 1
                    while k < n and proof_text[k].isspace():
                        k += 1
                    if k < n:
                        boundaries.append(k)
                        cur_start = k
        elif ch == "\n" and depth == 0:
            k = j + 1
            while k < n and proof_text[k].isspace():
                k += 1
            if k < n:
                line_begin = proof_text.rfind("\n", 0, k) + 1
                indent = k - line_begin
                if base_indent is None:
                    base_indent = indent
                head = proof_text[k : k + 3]
                continuation = head.startswith("|") or head.startswith("<;>")
                if indent <= base_indent and not continuation:
                    boundaries.append(k)
                    cur_start = k
                j = k
                prev = ""
                continue
        if not ch.isspace():
            if first_start is None:
                first_start = j
                cur_start = j
            prev = ch
        j += 1

    if first_start is None:
        return []
    seen: set[int] = {first_start}
    ordered = [first_start]
    for b in boundaries:
        if b > first_start and b not in seen:
            seen.add(b)
            ordered.append(b)
    ordered.sort()

    steps: list[TacticStep] = []
    for idx, s in enumerate(ordered):
        e = ordered[idx + 1] if idx + 1 < len(ordered) else n
        while e > s and proof_text[e - 1].isspace():
            e -= 1
        # A boundary semicolon belongs to the separator, not the step.
        if e > s + 1 and proof_text[e - 1] == ";" and proof_text[e - 2] != "<":
            e -= 1
            while e > s and proof_text[e - 1].isspace():
                e -= 1
        steps.append(TacticStep(text=proof_text[s:e], start=s, end=e))
    return steps


def decl_ids_for(decls: list[Declaration]) -> dict[tuple[str, int], str]:
    """Map (path, startLine) -> unique declId over pre-parsed declarations.

    The id is the fully-qualified name when unique in the repository,
    otherwise the name disambiguated by file and line. Anonymous
    declarations (examples) use path:line.
    """
    counts: dict[str, int] = {}
    for d in decls:
        if d.full_name:
            counts[d.full_name] = counts.get(d.full_name, 0) + 1
    ids: dict[tuple[str, int], str] = {}
    for d in decls:
        key = (d.path, d.span.start_line)
        if d.full_name is None:
            ids[key] = f"{d.path}:{d.span.start_line}"
        elif counts[d.full_name] > 1:
            ids[key] = f"{d.full_name}@{d.path}:{d.span.start_line}"
        else:
            ids[key] = d.full_name
    return ids


def assign_decl_ids(files: list[SourceFile]) -> dict[tuple[str, int], str]:
    """Map (path, startLine) -> unique declId across a repository."""
    decls: list[Declaration] = []
    for f in files:
        decls.extend(parse_declarations(f))
    return decl_ids_for(decls)


def _decl_id(decl: Declaration, ids: dict[tuple[str, int], str] | None) -> str:
    if ids is not None:
        return ids[(decl.path, decl.span.start_line)]
    if decl.full_name is None:
        return f"{decl.path}:{decl.span.start_line}"
    return decl.full_name


def extract_full_proof_examples(
    file: SourceFile,
    decl_ids: dict[tuple[str, int], str] | None = None,
) -> list[FullProofExample]:
    """One example per theorem/lemma/example declaration with a body."""
    out = []
    for decl in parse_declarations(file):
        if decl.kind not in THEOREM_LIKE or decl.proof_mode == ProofMode.NONE:
            continue
        out.append(
            FullProofExample(
                src_up_to_decl=file.text[: decl.span.start],
                decl=decl.statement_text,
                decl_id=_decl_id(decl, decl_ids),
                proof=decl.proof_text,
            )
        )
    return out


def pretty_goals(goals: list[str]) -> str:
    return "\n\n".join(goals)


def extract_next_tactic_examples(
    file: SourceFile,
    checker: Any = None,
    decl_ids: dict[tuple[str, int], str] | None = None,
) -> list[NextTacticExample]:
    """One example per tactic step of every tactic-mode proof, in order.

    With a checker session, each step's state is recovered by replaying the
    preceding steps; without one, states are empty and flagged as such.
    """
    out: list[NextTacticExample] = []
    for decl in parse_declarations(file):
        if decl.kind not in THEOREM_LIKE or decl.proof_mode != ProofMode.TACTIC:
            continue
        steps = split_tactic_steps(decl.proof_text)
        if not steps:
            continue
        assert decl.proof_offset is not None
        states = [""] * len(steps)
        from_checker = False
        if checker is not None:
            try:
                ps = checker.start_proof(file.text[: decl.span.start], decl.statement_text)
                for k, step in enumerate(steps):
                    states[k] = pretty_goals(ps.goals)
                    ps = checker.apply_tactic(ps, step.text)
                from_checker = True
            except Exception as exc:  # noqa: BLE001 - replay is best-effort
                logger.warning(
                    "replay mismatch for %s (%s): %s",
                    decl.full_name or decl.path,
                    file.path,
                    exc,
                )
                states = [""] * len(steps)
                from_checker = False
        for k, step in enumerate(steps):
            tac_start = decl.proof_offset + step.start
            out.append(
                NextTacticExample(
                    state=states[k],
                    next_tactic=step.text,
                    src_up_to_tactic=file.text[:tac_start],
                    decl=decl.statement_text,
                    decl_up_to_tactic=file.text[decl.span.start : tac_start],
                    decl_id=_decl_id(decl, decl_ids),
                    state_from_checker=from_checker,
                )
            )
    return out


def extract_benchmark_entries(
    repo: list[SourceFile],
    selection: list[tuple[str, str]],
) -> list[BenchmarkEntry]:
    """Benchmark entries for selected (file, declId) pairs, in selection order.

    Position and proof metadata are filled here; dependency and VCS metadata
    are completed by the annotator (`annotate.annotate_entries`).
    """
    from . import annotate  # local import: annotate depends on this module

    ids = assign_decl_ids(repo)
    by_file: dict[str, SourceFile] = {f.path: f for f in repo}
    decls_by_file: dict[str, list[Declaration]] = {}
    decls_by_id: dict[tuple[str, str], Declaration] = {}
    for f in repo:
        decls_by_file[f.path] = parse_declarations(f)
        for d in decls_by_file[f.path]:
            decls_by_id[(f.path, ids[(d.path, d.span.start_line)])] = d

    entries = []
    for path, decl_id in selection:
        if (path, decl_id) not in decls_by_id:
            raise UnknownDeclarationError(f"no declaration {decl_id!r} in {path!r}")
        decl = decls_by_id[(path, decl_id)]
        f = by_file[path]
        entries.append(
            BenchmarkEntry(
                src_context=f.text[: decl.span.start],
                theorem_statement=decl.statement_text,
                theorem_name=decl.full_name,
                file_created="(unknown)",
                theorem_created="(unknown)",
                file=path,
                position_metadata=annotate.annotate_position(f, decl, decls_by_file[path]),
                dependency_metadata=DependencyMetadata(False, False),
                proof_metadata=annotate.annotate_proof(decl),
            )
        )
    return entries
