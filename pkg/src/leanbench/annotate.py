"""Metadata annotation for benchmark entries.

Computes position, dependency, and proof metadata plus version-control
provenance. Dependency flags are a syntactic proxy: identifiers from a
declaration's statement and proof are resolved against a repository-wide
name index, with open-namespace awareness limited to the same file.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .extract import (
    BenchmarkEntry,
    DependencyMetadata,
    PositionMetadata,
    ProofMetadata,
)
from .scanner import (
    Declaration,
    DeclKind,
    ProofMode,
    SourceFile,
    _skip_block_comment,
    _skip_line_comment,
    _skip_string,
    open_namespaces,
    parse_declarations,
    scan_file,
)

logger = logging.getLogger(__name__)

DEFAULT_EXTERNAL_PREFIXES = ("Mathlib", "Std", "Init", "Lean", "Aesop", "Qq")

# Declaration kinds counted by theoremPositionInFile.
_POSITION_KINDS = frozenset(
    {
        DeclKind.DEF,
        DeclKind.THEOREM,
        DeclKind.LEMMA,
        DeclKind.INSTANCE,
        DeclKind.ABBREV,
        DeclKind.STRUCTURE,
        DeclKind.INDUCTIVE,
    }
)

DEFINITION_KINDS = frozenset(
    {
        DeclKind.DEF,
        DeclKind.ABBREV,
        DeclKind.STRUCTURE,
        DeclKind.INDUCTIVE,
        DeclKind.INSTANCE,
        DeclKind.OTHER,
    }
)
THEOREM_KINDS = frozenset({DeclKind.THEOREM, DeclKind.LEMMA, DeclKind.EXAMPLE})

_LEAN_KEYWORDS = frozenset(
    {
        "by", "do", "fun", "match", "with", "let", "have", "show", "from",
        "calc", "then", "else", "if", "at", "in", "where", "deriving",
        "extends", "import", "open", "namespace", "section", "end",
        "variable", "variables", "theorem", "lemma", "def", "instance",
        "example", "abbrev", "structure", "inductive", "axiom", "class",
        "set_option", "attribute", "private", "protected", "noncomputable",
        "partial", "unsafe", "scoped", "local", "sorry", "admit", "this",
        "Type", "Prop", "Sort", "macro", "syntax", "notation", "mutual",
        "exact", "intro", "intros", "apply", "rfl", "trivial", "simp", "rw",
        "rintro", "obtain", "refine", "cases", "induction", "constructor",
        "use", "ring", "linarith", "nlinarith", "norm_num", "omega", "decide",
        "simpa", "rwa", "unfold", "ext", "left", "right", "all_goals",
        "first", "try", "skip",
    }
)

_IDENT_CHAIN_RE = re.compile(r"[^\W\d][\w'!?]*(?:\.[^\W\d][\w'!?]*)*")


def module_name(path: str) -> str:
    """Lean module name of a repo-relative file path."""
    p = path[:-5] if path.endswith(".lean") else path
    return p.replace("/", ".").replace("\\", ".")


@dataclass(frozen=True)
class IndexEntry:
    file: str
    decl_id: str
    start_offset: int
    start_line: int
    kind: DeclKind
    module: str
    full_name: str | None
    short_name: str | None


@dataclass
class NameIndex:
    by_full: dict[str, list[IndexEntry]] = field(default_factory=dict)
    by_short: dict[str, list[IndexEntry]] = field(default_factory=dict)
    opens_by_file: dict[str, list[str]] = field(default_factory=dict)
    external_prefixes: tuple[str, ...] = DEFAULT_EXTERNAL_PREFIXES

    def is_external(self, module: str) -> bool:
        head = module.split(".", 1)[0]
        return head in self.external_prefixes

    def resolve(
        self,
        identifier: str,
        file: str,
        offset: int,
        namespaces: tuple[str, ...] = (),
    ) -> IndexEntry | None:
        """Resolve an identifier used in `file` at `offset`.

        Ambiguity rule: nearest preceding declaration in the same file wins,
        otherwise a unique repository-wide match, otherwise unresolved.
        """
        names = [identifier]
        for i in range(len(namespaces), 0, -1):
            names.append(".".join((*namespaces[:i], identifier)))
        for ns in self.opens_by_file.get(file, ()):
            names.append(f"{ns}.{identifier}")

        seen: set[tuple[str, str, int]] = set()
        candidates: list[IndexEntry] = []
        for name in names:
            for entry in self.by_full.get(name, ()):
                key = (entry.file, entry.decl_id, entry.start_offset)
                if key not in seen:
                    seen.add(key)
                    candidates.append(entry)
        for entry in self.by_short.get(identifier, ()):
            key = (entry.file, entry.decl_id, entry.start_offset)
            if key not in seen:
                seen.add(key)
                candidates.append(entry)

        candidates = [
            c for c in candidates if not (c.file == file and c.start_offset == offset)
        ]
        same_file_prior = [
            c for c in candidates if c.file == file and c.start_offset < offset
        ]
        if same_file_prior:
            return max(same_file_prior, key=lambda c: c.start_offset)
        if len(candidates) == 1:
            return candidates[0]
        return None


def build_name_index(
    files: list[SourceFile],
    external_prefixes: tuple[str, ...] = DEFAULT_EXTERNAL_PREFIXES,
    parsed: dict[str, list[Declaration]] | None = None,
) -> NameIndex:
    """Index every named declaration of a repository.

    `parsed` lets callers that already hold the declarations of each file
    skip the rescan.
    """
    from .extract import decl_ids_for

    if parsed is None:
        parsed = {f.path: parse_declarations(f) for f in files}
    ids = decl_ids_for([d for f in files for d in parsed[f.path]])
    index = NameIndex(external_prefixes=external_prefixes)
    for f in files:
        index.opens_by_file[f.path] = open_namespaces(scan_file(f))
        for decl in parsed[f.path]:
            if decl.short_name is None:
                continue
            entry = IndexEntry(
                file=f.path,
                decl_id=ids[(f.path, decl.span.start_line)],
                start_offset=decl.span.start,
                start_line=decl.span.start_line,
                kind=decl.kind,
                module=module_name(f.path),
                full_name=decl.full_name,
                short_name=decl.short_name,
            )
            if decl.full_name:
                index.by_full.setdefault(decl.full_name, []).append(entry)
            index.by_short.setdefault(decl.short_name, []).append(entry)
    return index


def strip_comments_and_strings(text: str) -> str:
    """Replace comments and string literals with spaces, preserving offsets."""
    out = list(text)
    n = len(text)
    j = 0
    while j < n:
        ch = text[j]
        if ch == "-" and text.startswith("--", j):
            end = _skip_line_comment(text, j)
            for k in range(j, end):
                out[k] = " "
            j = end
        elif ch == "/" and text.startswith("/-", j):
            end = _skip_block_comment(text, j, None)
            for k in range(j, end):
                out[k] = " "
            j = end
        elif ch == '"':
            end = _skip_string(text, j, None)
            for k in range(j, end):
                out[k] = " "
            j = end
        else:
            j += 1
    return "".join(out)


def binder_names(decl: Declaration) -> set[str]:
    """Names bound by the declaration's own signature binders."""
    text = strip_comments_and_strings(decl.statement_text)
    names: set[str] = set()

    # Bracketed binder groups: names left of the group's first ':'.
    opens = {"(": ")", "{": "}", "[": "]", "⦃": "⦄"}
    depth = 0
    group_start = -1
    group_open = ""
    j = 0
    while j < len(text):
        ch = text[j]
        if depth == 0 and ch in opens:
            depth = 1
            group_start = j + 1
            group_open = ch
        elif depth > 0:
            if ch in opens:
                depth += 1
            elif ch in opens.values():
                depth -= 1
                if depth == 0 and ch == opens[group_open]:
                    group = text[group_start:j]
                    if ":" in group:
                        lhs = group.split(":", 1)[0]
                        for m in _IDENT_CHAIN_RE.finditer(lhs):
                            names.add(m.group())
        j += 1

    # Quantifier/lambda binders: names up to the next ',' or '=>'.
    for m in re.finditer(r"[∀∃λ]|\bfun\b", text):
        rest = text[m.end() :]
        stop = len(rest)
        for sep in (",", "=>"):
            k = rest.find(sep)
            if k != -1:
                stop = min(stop, k)
        for im in _IDENT_CHAIN_RE.finditer(rest[:stop]):
            names.add(im.group())

    if decl.short_name:
        names.add(decl.short_name)
    if decl.full_name:
        names.add(decl.full_name)
    return names


def collect_identifiers(decl: Declaration) -> list[str]:
    """Candidate premise identifiers from a declaration's statement and proof.

    Identifier tokens outside comments and strings, excluding Lean keywords
    and chains whose head is one of the declaration's own binders; dotted
    chains are kept whole.
    """
    text = strip_comments_and_strings(decl.statement_text + "\n" + decl.proof_text)
    excluded = binder_names(decl) | _LEAN_KEYWORDS
    seen: set[str] = set()
    out: list[str] = []
    for m in _IDENT_CHAIN_RE.finditer(text):
        ident = m.group()
        if ident in seen or ident in excluded:
            continue
        if ident.split(".", 1)[0] in excluded:
            continue
        seen.add(ident)
        out.append(ident)
    return out


def _chain_prefixes(ident: str) -> list[str]:
    """A dotted chain and its shortening prefixes: a.b.c, a.b, a."""
    parts = ident.split(".")
    return [".".join(parts[: i + 1]) for i in range(len(parts) - 1, -1, -1)]


def resolve_premises(
    decl: Declaration,
    index: NameIndex,
) -> list[tuple[str, IndexEntry]]:
    """All identifiers of a declaration that resolve to repo declarations.

    A dotted chain that does not resolve whole falls back to its prefixes
    (e.g. a projection `originPt.px` resolves via `originPt`).
    """
    resolved = []
    for ident in collect_identifiers(decl):
        for name in _chain_prefixes(ident):
            entry = index.resolve(name, decl.path, decl.span.start, decl.namespaces)
            if entry is not None:
                resolved.append((ident, entry))
                break
    return resolved


def annotate_dependencies(decl: Declaration, index: NameIndex) -> DependencyMetadata:
    """Flags for in-file and in-repository premise use."""
    in_file = False
    in_repo = False
    for _, entry in resolve_premises(decl, index):
        if entry.file == decl.path and entry.start_offset < decl.span.start:
            in_file = True
        elif entry.file != decl.path and not index.is_external(entry.module):
            in_repo = True
    return DependencyMetadata(in_file_premises=in_file, repository_premises=in_repo)


def annotate_position(
    file: SourceFile,
    decl: Declaration,
    declarations: list[Declaration] | None = None,
) -> PositionMetadata:
    """Line, token offset, and premise-count position of a declaration."""
    if declarations is None:
        declarations = parse_declarations(file)
    before = sum(
        1
        for d in declarations
        if d.span.start < decl.span.start and d.kind in _POSITION_KINDS
    )
    return PositionMetadata(
        line_in_file=decl.span.start_line,
        token_position_in_file=decl.span.start,
        theorem_position_in_file=before,
    )


def annotate_proof(decl: Declaration) -> ProofMetadata:
    """Proof presence, type, and length metrics."""
    has_proof = decl.proof_mode != ProofMode.NONE and decl.proof_text != "sorry"
    proof = decl.proof_text if has_proof else ""
    return ProofMetadata(
        has_proof=has_proof,
        proof=proof,
        proof_type=decl.proof_mode.value,
        proof_length_lines=len(proof.split("\n")) if proof else 0,
        proof_length_tokens=len(proof),
    )


_COMMIT_RE = re.compile(r"^[0-9a-f]{7,40}$")


class CommitMapError(ValueError):
    """A commit sidecar line is malformed."""


@dataclass
class CommitRecord:
    commit: str
    date: str


@dataclass
class CommitMap:
    """Commit provenance, file-level plus optional declId-level overrides."""

    file_level: dict[str, CommitRecord] = field(default_factory=dict)
    decl_level: dict[tuple[str, str], CommitRecord] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "CommitMap":
        """Parse the tab-separated sidecar: file, declId-or-*, commit, date."""
        cmap = cls()
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise CommitMapError(f"{path}:{lineno}: expected 4 tab-separated fields")
            file, decl_id, commit, date = parts
            if not _COMMIT_RE.match(commit):
                raise CommitMapError(
                    f"{path}:{lineno}: {commit!r} is not a 7-40 char hex commit id"
                )
            if decl_id == "*":
                cmap.file_level[file] = CommitRecord(commit, date)
            else:
                cmap.decl_level[(file, decl_id)] = CommitRecord(commit, date)
        return cmap


def attach_vcs_metadata(entry: BenchmarkEntry, commits: CommitMap) -> BenchmarkEntry:
    """Fill fileCreated/theoremCreated from the commit map.

    A missing file yields "(unknown)" placeholders and a warning rather
    than an error.
    """
    file_rec = commits.file_level.get(entry.file)
    if file_rec is None:
        logger.warning("no commit record for file %r; entry %s left unattributed",
                       entry.file, entry.decl_id)
        entry.file_created = "(unknown)"
        entry.theorem_created = "(unknown)"
        return entry
    entry.file_created = file_rec.commit
    decl_rec = commits.decl_level.get((entry.file, entry.decl_id))
    entry.theorem_created = decl_rec.commit if decl_rec is not None else file_rec.commit
    return entry


def annotate_entries(
    entries: list[BenchmarkEntry],
    repo: list[SourceFile],
    commits: CommitMap | None = None,
    external_prefixes: tuple[str, ...] = DEFAULT_EXTERNAL_PREFIXES,
) -> list[BenchmarkEntry]:
    """Complete dependency and VCS metadata for extracted entries."""
    index = build_name_index(repo, external_prefixes)
    decls: dict[tuple[str, int], Declaration] = {}
    for f in repo:
        for d in parse_declarations(f):
            decls[(f.path, d.span.start_line)] = d
    for entry in entries:
        decl = decls.get((entry.file, entry.position_metadata.line_in_file))
        if decl is not None:
            entry.dependency_metadata = annotate_dependencies(decl, index)
        else:
            logger.warning(
                "entry %s not found at %s:%d in the loaded repo; dependency flags left as-is",
                entry.decl_id, entry.file, entry.position_metadata.line_in_file,
            )
        if commits is not None:
            attach_vcs_metadata(entry, commits)
    return entries
