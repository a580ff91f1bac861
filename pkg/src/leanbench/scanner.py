"""Lexical segmentation of Lean 4 source files.

Splits a file into top-level items (imports, opens, comments, namespace
structure, declarations) with exact Unicode-scalar spans, without invoking
the Lean toolchain. The pass is purely lexical: nested block comments,
string/char literals, and french-quoted identifiers are opaque, so
declaration-like text inside them never opens or closes an item.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum


class ItemKind(str, Enum):
    IMPORT = "Import"
    OPEN = "Open"
    VARIABLE = "Variable"
    NAMESPACE_BEGIN = "NamespaceBegin"
    NAMESPACE_END = "NamespaceEnd"
    SECTION_BEGIN = "SectionBegin"
    SECTION_END = "SectionEnd"
    SET_OPTION = "SetOption"
    COMMENT = "Comment"
    DOC_COMMENT = "DocComment"
    MODULE_DOC = "ModuleDoc"
    DECLARATION = "Declaration"
    ATTRIBUTE = "Attribute"
    OTHER = "Other"


class DeclKind(str, Enum):
    THEOREM = "theorem"
    LEMMA = "lemma"
    DEF = "def"
    INSTANCE = "instance"
    EXAMPLE = "example"
    ABBREV = "abbrev"
    STRUCTURE = "structure"
    INDUCTIVE = "inductive"
    OTHER = "other"


class ProofMode(str, Enum):
    TACTIC = "tactic"
    TERM = "term"
    NONE = "none"


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int  # exclusive
    start_line: int  # 1-based


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str
    line_offsets: tuple[int, ...]

    @classmethod
    def from_text(cls, path: str, text: str) -> "SourceFile":
        offsets = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                offsets.append(i + 1)
        return cls(path=path, text=text, line_offsets=tuple(offsets))

    def line_of(self, offset: int) -> int:
        """1-based line number of a Unicode-scalar offset."""
        return bisect_right(self.line_offsets, offset)

    def span(self, start: int, end: int) -> SourceSpan:
        return SourceSpan(start=start, end=end, start_line=self.line_of(start))


@dataclass(frozen=True)
class SyntaxItem:
    kind: ItemKind
    span: SourceSpan
    text: str


@dataclass(frozen=True)
class ScanDiagnostic:
    kind: str  # "UnterminatedComment" | "UnterminatedString"
    offset: int

    def __str__(self) -> str:
        return f"{self.kind} at offset {self.offset}"


@dataclass
class ScanResult:
    items: list[SyntaxItem]
    diagnostics: list[ScanDiagnostic] = field(default_factory=list)


@dataclass(frozen=True)
class Declaration:
    kind: DeclKind
    short_name: str | None
    full_name: str | None
    modifiers: str
    statement_text: str
    proof_text: str
    proof_mode: ProofMode
    span: SourceSpan
    namespaces: tuple[str, ...] = ()
    path: str = ""
    proof_offset: int | None = None  # absolute offset where proof_text begins


_OPEN_BRACKETS = frozenset("({[⟨⦃")
_CLOSE_BRACKETS = frozenset(")}]⟩⦄")

_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NAME_PART_RE = re.compile(r"[^\W\d][\w']*")
_CHAR_LIT_RE = re.compile(r"'(?:\\(?:x[0-9A-Fa-f]{2}|u[0-9A-Fa-f]{4}|[^\n])|[^'\\\n])'")

_DECL_KIND_WORDS = {
    "theorem": DeclKind.THEOREM,
    "lemma": DeclKind.LEMMA,
    "def": DeclKind.DEF,
    "instance": DeclKind.INSTANCE,
    "example": DeclKind.EXAMPLE,
    "abbrev": DeclKind.ABBREV,
    "structure": DeclKind.STRUCTURE,
    "inductive": DeclKind.INDUCTIVE,
    # declaration-introducing keywords mapped to the catch-all kind
    "axiom": DeclKind.OTHER,
    "class": DeclKind.OTHER,
    "opaque": DeclKind.OTHER,
}

_MODIFIER_WORDS = frozenset(
    {"private", "protected", "noncomputable", "partial", "unsafe", "scoped", "local"}
)

_LINE_COMMANDS = {
    "import": ItemKind.IMPORT,
    "open": ItemKind.OPEN,
    "set_option": ItemKind.SET_OPTION,
    "namespace": ItemKind.NAMESPACE_BEGIN,
    "section": ItemKind.SECTION_BEGIN,
    "end": ItemKind.NAMESPACE_END,  # refined against the scope stack
}

_BALANCED_COMMANDS = {
    "variable": ItemKind.VARIABLE,
    "variables": ItemKind.VARIABLE,
    "attribute": ItemKind.ATTRIBUTE,
}

# Commands recognized only so that they terminate the preceding item.
_OTHER_COMMAND_WORDS = frozenset(
    {
        "universe",
        "export",
        "deriving",
        "macro",
        "macro_rules",
        "syntax",
        "notation",
        "infix",
        "infixl",
        "infixr",
        "prefix",
        "postfix",
        "elab",
        "elab_rules",
        "declare_syntax_cat",
        "run_cmd",
        "initialize",
        "builtin_initialize",
        "mutual",
    }
)

_ALL_COMMAND_WORDS = (
    set(_LINE_COMMANDS)
    | set(_BALANCED_COMMANDS)
    | set(_DECL_KIND_WORDS)
    | set(_MODIFIER_WORDS)
    | set(_OTHER_COMMAND_WORDS)
)


def _is_ident_char(ch: str) -> bool:
    return bool(ch) and (ch.isalnum() or ch in "_'")


def _skip_ws(text: str, i: int) -> int:
    n = len(text)
    while i < n and text[i].isspace():
        i += 1
    return i


def _skip_line_comment(text: str, i: int) -> int:
    end = text.find("\n", i)
    return len(text) if end == -1 else end


def _skip_block_comment(text: str, i: int, diags: list[ScanDiagnostic] | None) -> int:
    """Skip a (possibly nested) block comment starting with '/-' at i."""
    n = len(text)
    depth = 0
    j = i
    while j < n:
        if text.startswith("/-", j):
            depth += 1
            j += 2
        elif text.startswith("-/", j):
            depth -= 1
            j += 2
            if depth == 0:
                return j
        else:
            j += 1
    if diags is not None:
        diags.append(ScanDiagnostic("UnterminatedComment", i))
    return n


def _skip_string(text: str, i: int, diags: list[ScanDiagnostic] | None) -> int:
    n = len(text)
    j = i + 1
    while j < n:
        ch = text[j]
        if ch == "\\":
            j += 2
            continue
        if ch == '"':
            return j + 1
        j += 1
    if diags is not None:
        diags.append(ScanDiagnostic("UnterminatedString", i))
    return n


def _skip_french_quotes(text: str, i: int, diags: list[ScanDiagnostic] | None) -> int:
    end = text.find("»", i + 1)
    if end == -1:
        if diags is not None:
            diags.append(ScanDiagnostic("UnterminatedString", i))
        return len(text)
    return end + 1


def _command_word(text: str, i: int) -> str | None:
    """The top-level command token starting at i, if any."""
    if text.startswith("--", i) or text.startswith("/-", i):
        return "<comment>"
    if text.startswith("@[", i):
        return "@["
    if i < len(text) and text[i] == "#":
        return "#"
    m = _WORD_RE.match(text, i)
    if m is None:
        return None
    word = m.group()
    if word in _ALL_COMMAND_WORDS:
        # Keywords must not be glued to a longer identifier ("theorems").
        end = m.end()
        if end < len(text) and _is_ident_char(text[end]):
            return None
        return word
    return None


def _read_balanced(text: str, i: int, diags: list[ScanDiagnostic]) -> int:
    """End offset of a multi-line item starting at i.

    The item runs until a newline at bracket depth 0 whose next non-blank
    line starts in column 0 with a recognized command token, or to EOF.
    """
    n = len(text)
    depth = 0
    prev = ""
    j = i
    while j < n:
        ch = text[j]
        if ch == "-" and text.startswith("--", j):
            j = _skip_line_comment(text, j)
            continue
        if ch == "/" and text.startswith("/-", j):
            j = _skip_block_comment(text, j, diags)
            prev = "/"
            continue
        if ch == '"':
            j = _skip_string(text, j, diags)
            prev = '"'
            continue
        if ch == "«":
            j = _skip_french_quotes(text, j, diags)
            prev = "»"
            continue
        if ch == "'" and not _is_ident_char(prev):
            m = _CHAR_LIT_RE.match(text, j)
            if m is not None:
                j = m.end()
                prev = "'"
                continue
        if ch in _OPEN_BRACKETS:
            depth += 1
        elif ch in _CLOSE_BRACKETS:
            depth = max(depth - 1, 0)
        elif ch == "\n" and depth == 0:
            k = _skip_ws(text, j + 1)
            if k >= n:
                return n
            if text[k - 1] == "\n" and _command_word(text, k) is not None:
                return j
            j = k
            prev = ""
            continue
        if not ch.isspace():
            prev = ch
        j += 1
    return n


def _parse_name(text: str, i: int) -> tuple[str | None, int]:
    """Parse a (possibly dotted, possibly «quoted») declaration name at i."""
    parts: list[str] = []
    n = len(text)
    p = i
    while p < n:
        if text[p] == "«":
            q = text.find("»", p + 1)
            if q == -1:
                break
            parts.append(text[p : q + 1])
            p = q + 1
        else:
            m = _NAME_PART_RE.match(text, p)
            if m is None:
                break
            parts.append(m.group())
            p = m.end()
        # A dotted component follows unless it is a universe spec ".{u}".
        if p + 1 < n and text[p] == "." and text[p + 1] != "{":
            parts.append(".")
            p += 1
            continue
        break
    if not parts:
        return None, i
    return "".join(parts), p


def _skip_modifiers(text: str, i: int, diags: list[ScanDiagnostic] | None) -> int:
    """Position of the head keyword after a declaration-modifier prefix at i."""
    j = i
    while True:
        j = _skip_ws(text, j)
        if text.startswith("/--", j):
            j = _skip_block_comment(text, j, diags)
            continue
        if text.startswith("@[", j):
            j = _skip_attr_group(text, j, diags)
            continue
        m = _WORD_RE.match(text, j)
        if m is not None and m.group() in _MODIFIER_WORDS:
            j = m.end()
            continue
        return j


def _decl_follows(text: str, i: int) -> bool:
    """True when position i begins declaration modifiers or a declaration."""
    j = _skip_modifiers(text, i, None)
    m = _WORD_RE.match(text, j)
    return m is not None and m.group() in _DECL_KIND_WORDS


def _head_keyword_after_modifiers(text: str, i: int, diags: list[ScanDiagnostic]) -> str | None:
    """The command keyword reached after skipping a modifier prefix at i."""
    m = _WORD_RE.match(text, _skip_modifiers(text, i, diags))
    return m.group() if m is not None else None


def _skip_attr_group(text: str, i: int, diags: list[ScanDiagnostic] | None) -> int:
    """Skip an '@[...]' attribute group starting at i."""
    n = len(text)
    j = i + 1  # at '['
    depth = 0
    while j < n:
        ch = text[j]
        if text.startswith("--", j):
            j = _skip_line_comment(text, j)
            continue
        if text.startswith("/-", j):
            j = _skip_block_comment(text, j, diags)
            continue
        if ch == '"':
            j = _skip_string(text, j, diags)
            continue
        if ch in _OPEN_BRACKETS:
            depth += 1
        elif ch in _CLOSE_BRACKETS:
            depth -= 1
            if depth == 0:
                return j + 1
        j += 1
    return n


def scan_file_with_diagnostics(file: SourceFile) -> ScanResult:
    """Scan a file into top-level items, collecting lexical diagnostics."""
    text = file.text
    n = len(text)
    items: list[SyntaxItem] = []
    diags: list[ScanDiagnostic] = []
    # Open namespace/section scopes, for classifying `end`.
    scopes: list[tuple[str, str | None]] = []

    def emit(kind: ItemKind, start: int, end: int) -> None:
        while end > start and text[end - 1].isspace():
            end -= 1
        items.append(SyntaxItem(kind=kind, span=file.span(start, end), text=text[start:end]))

    i = _skip_ws(text, 0)
    while i < n:
        start = i
        if text.startswith("--", i):
            emit(ItemKind.COMMENT, start, _skip_line_comment(text, i))
        elif text.startswith("/-!", i):
            emit(ItemKind.MODULE_DOC, start, _skip_block_comment(text, i, diags))
        elif text.startswith("/--", i):
            end_c = _skip_block_comment(text, i, diags)
            if _decl_follows(text, end_c):
                body = _skip_modifiers(text, i, diags)
                emit(ItemKind.DECLARATION, start, _read_balanced(text, body, diags))
            else:
                emit(ItemKind.DOC_COMMENT, start, end_c)
        elif text.startswith("/-", i):
            emit(ItemKind.COMMENT, start, _skip_block_comment(text, i, diags))
        elif text.startswith("@[", i):
            body = _skip_modifiers(text, i, diags)
            emit(ItemKind.DECLARATION, start, _read_balanced(text, body, diags))
        elif text[i] == "#":
            emit(ItemKind.OTHER, start, _read_balanced(text, i, diags))
        else:
            word = None
            m = _WORD_RE.match(text, i)
            if m is not None and not (m.end() < n and _is_ident_char(text[m.end()])):
                word = m.group()
            if word in _LINE_COMMANDS:
                end = _skip_line_comment(text, i)
                kind = _LINE_COMMANDS[word]
                if word == "namespace":
                    name, _ = _parse_name(text, _skip_ws(text, m.end()))
                    scopes.append(("namespace", name))
                elif word == "section":
                    name, _ = _parse_name(text, _skip_ws(text, m.end()))
                    scopes.append(("section", name))
                elif word == "end":
                    if scopes:
                        scope_kind, _ = scopes.pop()
                        kind = (
                            ItemKind.NAMESPACE_END
                            if scope_kind == "namespace"
                            else ItemKind.SECTION_END
                        )
                    else:
                        kind = ItemKind.OTHER
                emit(kind, start, end)
            elif word in _BALANCED_COMMANDS:
                emit(_BALANCED_COMMANDS[word], start, _read_balanced(text, i, diags))
            elif word in _DECL_KIND_WORDS:
                emit(ItemKind.DECLARATION, start, _read_balanced(text, i, diags))
            elif word in _MODIFIER_WORDS:
                head = _head_keyword_after_modifiers(text, i, diags)
                if head == "section":
                    end = _skip_line_comment(text, i)
                    scopes.append(("section", None))
                    emit(ItemKind.SECTION_BEGIN, start, end)
                elif head in _DECL_KIND_WORDS:
                    body = _skip_modifiers(text, i, diags)
                    emit(ItemKind.DECLARATION, start, _read_balanced(text, body, diags))
                else:
                    emit(ItemKind.OTHER, start, _read_balanced(text, i, diags))
            else:
                emit(ItemKind.OTHER, start, _read_balanced(text, i, diags))
        i = _skip_ws(text, items[-1].span.end)
    return ScanResult(items=items, diagnostics=diags)


def scan_file(file: SourceFile) -> list[SyntaxItem]:
    """All top-level items of a file, in source order."""
    return scan_file_with_diagnostics(file).items


def _find_separator(raw: str) -> tuple[str | None, int]:
    """First top-level ':=' or 'where' in a declaration's raw text."""
    n = len(raw)
    depth = 0
    prev = ""
    j = 0
    while j < n:
        ch = raw[j]
        if ch == "-" and raw.startswith("--", j):
            j = _skip_line_comment(raw, j)
            continue
        if ch == "/" and raw.startswith("/-", j):
            j = _skip_block_comment(raw, j, None)
            prev = "/"
            continue
        if ch == '"':
            j = _skip_string(raw, j, None)
            prev = '"'
            continue
        if ch == "«":
            j = _skip_french_quotes(raw, j, None)
            prev = "»"
            continue
        if ch == "'" and not _is_ident_char(prev):
            m = _CHAR_LIT_RE.match(raw, j)
            if m is not None:
                j = m.end()
                prev = "'"
                continue
        if ch in _OPEN_BRACKETS:
            depth += 1
        elif ch in _CLOSE_BRACKETS:
            depth = max(depth - 1, 0)
        elif depth == 0:
            if raw.startswith(":=", j):
                return ":=", j
            if (
                raw.startswith("where", j)
                and (j == 0 or not _is_ident_char(raw[j - 1]))
                and not (j + 5 < n and _is_ident_char(raw[j + 5]))
            ):
                return "where", j
        if not ch.isspace():
            prev = ch
        j += 1
    return None, -1


def segment_declaration(
    item: SyntaxItem,
    namespace_stack: tuple[str, ...] = (),
    path: str = "",
) -> Declaration:
    """Split a Declaration item into statement and proof parts."""
    raw = item.text
    base = item.span.start
    diags: list[ScanDiagnostic] = []

    # Modifier prefix: doc comments, attribute groups, visibility keywords.
    j = 0
    while True:
        j2 = _skip_ws(raw, j)
        if raw.startswith("/--", j2):
            j = _skip_block_comment(raw, j2, diags)
            continue
        if raw.startswith("@[", j2):
            j = _skip_attr_group(raw, j2, diags)
            continue
        m = _WORD_RE.match(raw, j2)
        if m is not None and m.group() in _MODIFIER_WORDS:
            j = m.end()
            continue
        break
    mod_end = j2
    modifiers = raw[:mod_end].rstrip()

    kind = DeclKind.OTHER
    short_name: str | None = None
    m = _WORD_RE.match(raw, mod_end)
    if m is not None:
        kind = _DECL_KIND_WORDS.get(m.group(), DeclKind.OTHER)
        p = _skip_ws(raw, m.end())
        if kind == DeclKind.INSTANCE and p < len(raw) and raw[p] == "(":
            inner = _skip_ws(raw, p + 1)
            if raw.startswith("priority", inner):
                p = _skip_ws(raw, _skip_attr_group(raw, p - 1, None))
        if kind != DeclKind.EXAMPLE:
            short_name, _ = _parse_name(raw, p)

    sep, sep_pos = _find_separator(raw)
    if sep == ":=":
        statement_text = raw[:sep_pos].rstrip()
        k = sep_pos + 2
        while k < len(raw) and raw[k].isspace():
            k += 1
        proof_text = raw[k:]
        proof_offset: int | None = base + k
        if not proof_text:
            proof_mode = ProofMode.NONE
            proof_offset = None
        elif proof_text.startswith("by") and not (
            len(proof_text) > 2 and _is_ident_char(proof_text[2])
        ):
            proof_mode = ProofMode.TACTIC
        else:
            proof_mode = ProofMode.TERM
    elif sep == "where":
        statement_text = raw[:sep_pos].rstrip()
        proof_text = raw[sep_pos:]
        proof_offset = base + sep_pos
        proof_mode = ProofMode.TERM
    else:
        statement_text = raw
        proof_text = ""
        proof_offset = None
        proof_mode = ProofMode.NONE

    full_name = None
    if short_name is not None:
        full_name = ".".join((*namespace_stack, short_name))

    return Declaration(
        kind=kind,
        short_name=short_name,
        full_name=full_name,
        modifiers=modifiers,
        statement_text=statement_text,
        proof_text=proof_text,
        proof_mode=proof_mode,
        span=item.span,
        namespaces=namespace_stack,
        path=path,
        proof_offset=proof_offset,
    )


def parse_declarations(file: SourceFile) -> list[Declaration]:
    """All declarations of a file with namespace-qualified names."""
    decls: list[Declaration] = []
    stack: list[tuple[str, str | None]] = []
    for item in scan_file(file):
        if item.kind == ItemKind.NAMESPACE_BEGIN:
            name, _ = _parse_name(item.text, _skip_ws(item.text, len("namespace")))
            stack.append(("namespace", name))
        elif item.kind == ItemKind.SECTION_BEGIN:
            stack.append(("section", None))
        elif item.kind in (ItemKind.NAMESPACE_END, ItemKind.SECTION_END):
            if stack:
                stack.pop()
        elif item.kind == ItemKind.DECLARATION:
            namespaces = tuple(name for scope, name in stack if scope == "namespace" and name)
            decls.append(segment_declaration(item, namespaces, path=file.path))
    return decls


def import_names(items: list[SyntaxItem]) -> list[str]:
    """Module names of all Import items."""
    names = []
    for item in items:
        if item.kind == ItemKind.IMPORT:
            rest = item.text[len("import") :].strip()
            if rest:
                names.append(rest.split()[0])
    return names


def open_namespaces(items: list[SyntaxItem]) -> list[str]:
    """Namespace names opened by Open items (flattened, `in`/`scoped` aware)."""
    names: list[str] = []
    for item in items:
        if item.kind != ItemKind.OPEN:
            continue
        rest = item.text[len("open") :].strip()
        for word in rest.split():
            if word in ("scoped", "in"):
                continue
            if _NAME_PART_RE.match(word):
                names.append(word)
    return names
