from __future__ import annotations

import re

import pytest

from leanbench.annotate import (
    CommitMap,
    CommitMapError,
    annotate_dependencies,
    annotate_position,
    annotate_proof,
    attach_vcs_metadata,
    build_name_index,
    module_name,
    strip_comments_and_strings,
)
from leanbench.extract import extract_benchmark_entries
from leanbench.scanner import SourceFile, parse_declarations


class TestAnnotatePosition:
    def test_square_lemma(self, square_file):
        decl = parse_declarations(square_file)[1]
        pos = annotate_position(square_file, decl)
        assert pos.line_in_file == 10
        assert pos.token_position_in_file == 152
        assert pos.theorem_position_in_file == 1

    def test_declaration_at_file_start(self):
        f = SourceFile.from_text("T.lean", "theorem first : True := trivial")
        (decl,) = parse_declarations(f)
        pos = annotate_position(f, decl)
        assert (pos.line_in_file, pos.token_position_in_file, pos.theorem_position_in_file) == (1, 0, 0)

    def test_rect_symm_re_position(self, rect_file):
        decls = {d.short_name: d for d in parse_declarations(rect_file)}
        pos = annotate_position(rect_file, decls["symm_re"])
        assert pos.theorem_position_in_file == 2  # Rectangle def + symm

    def test_monotonicity(self, rect_file, repo3):
        for f in (rect_file, *repo3):
            decls = parse_declarations(f)
            positions = [annotate_position(f, d, decls).theorem_position_in_file for d in decls]
            assert positions == sorted(positions)


class TestAnnotateProof:
    def test_tactic_proof(self, square_file):
        decl = parse_declarations(square_file)[1]
        meta = annotate_proof(decl)
        assert meta.has_proof is True
        assert meta.proof_type == "tactic"
        assert meta.proof_length_lines == 2
        assert meta.proof_length_tokens == 20

    def test_bodiless_axiom(self):
        f = SourceFile.from_text("T.lean", "axiom pick : True")
        meta = annotate_proof(parse_declarations(f)[0])
        assert meta.has_proof is False
        assert meta.proof == ""
        assert meta.proof_type == "none"
        assert meta.proof_length_lines == 0
        assert meta.proof_length_tokens == 0

    def test_term_proof_rfl(self):
        f = SourceFile.from_text("T.lean", "theorem t : 1 = 1 := rfl")
        meta = annotate_proof(parse_declarations(f)[0])
        assert (meta.has_proof, meta.proof_type) == (True, "term")
        assert meta.proof_length_lines == 1
        assert meta.proof_length_tokens == 3

    def test_sorry_body_has_no_proof(self):
        f = SourceFile.from_text("T.lean", "theorem t : True := sorry")
        meta = annotate_proof(parse_declarations(f)[0])
        assert meta.has_proof is False
        assert meta.proof == ""
        assert meta.proof_length_lines == 0
        assert meta.proof_length_tokens == 0

    def test_tokens_zero_iff_no_proof(self, square_file, rect_file, repo3):
        for f in (square_file, rect_file, *repo3):
            for decl in parse_declarations(f):
                meta = annotate_proof(decl)
                assert (meta.proof_length_tokens == 0) == (not meta.has_proof or meta.proof == "")


class TestAnnotateDependencies:
    def test_square_lemma_flags(self, square_file):
        index = build_name_index([square_file])
        decl = parse_declarations(square_file)[1]
        dep = annotate_dependencies(decl, index)
        assert dep.in_file_premises is True
        assert dep.repository_premises is False

    def test_external_only(self):
        f = SourceFile.from_text("T.lean", "theorem t : 1 = 1 := rfl")
        dep = annotate_dependencies(parse_declarations(f)[0], build_name_index([f]))
        assert (dep.in_file_premises, dep.repository_premises) == (False, False)

    def test_cross_file_premise(self):
        a = SourceFile.from_text("A.lean", "def widget : Nat := 3")
        b = SourceFile.from_text("B.lean", "lemma uses : widget = widget := rfl")
        index = build_name_index([a, b])
        dep = annotate_dependencies(parse_declarations(b)[0], index)
        assert (dep.in_file_premises, dep.repository_premises) == (False, True)

    def test_external_prefix_not_repository(self):
        a = SourceFile.from_text("Mathlib/Basic.lean", "def extWidget : Nat := 3")
        b = SourceFile.from_text("B.lean", "lemma uses : extWidget = extWidget := rfl")
        index = build_name_index([a, b])
        dep = annotate_dependencies(parse_declarations(b)[0], index)
        assert (dep.in_file_premises, dep.repository_premises) == (False, False)

    def test_binder_shadowing_is_excluded(self):
        text = "def s : Nat := 1\n\nlemma shadow (s : Nat) : s = s := rfl"
        f = SourceFile.from_text("T.lean", text)
        decls = parse_declarations(f)
        dep = annotate_dependencies(decls[1], build_name_index([f]))
        assert dep.in_file_premises is False

    def test_forward_reference_is_not_a_premise(self):
        text = "lemma early : later = later := rfl\n\ndef later : Nat := 1"
        f = SourceFile.from_text("T.lean", text)
        dep = annotate_dependencies(parse_declarations(f)[0], build_name_index([f]))
        assert (dep.in_file_premises, dep.repository_premises) == (False, False)


# ---------------------------------------------------------------------------
# Brute-force oracle for the 3-file fixture repository.
#
# Tokens are dotted identifier chains and all their prefixes, taken from the
# comment/string-stripped declaration text. Chains whose head is a fixture
# binder are dropped. A premise is any *other* repo declaration whose short
# or full name appears among the tokens.
# ---------------------------------------------------------------------------

_ORACLE_TOKEN_RE = re.compile(r"[^\W\d][\w'!?]*(?:\.[^\W\d][\w'!?]*)*")
# every binder name appearing in the fixture repo, hand-collected
_FIXTURE_BINDERS = {"p", "d", "sh", "n", "s", "x"}


def oracle_tokens(decl) -> set[str]:
    text = strip_comments_and_strings(decl.statement_text + "\n" + decl.proof_text)
    tokens: set[str] = set()
    for m in _ORACLE_TOKEN_RE.finditer(text):
        parts = m.group().split(".")
        if parts[0] in _FIXTURE_BINDERS:
            continue
        for i in range(1, len(parts) + 1):
            tokens.add(".".join(parts[:i]))
    return tokens


def oracle_flags(decl, all_decls) -> tuple[bool, bool]:
    tokens = oracle_tokens(decl)
    in_file = False
    in_repo = False
    for other in all_decls:
        if other is decl or other.short_name is None:
            continue
        if not (other.short_name in tokens or (other.full_name or "") in tokens):
            continue
        if other.path == decl.path:
            if other.span.start < decl.span.start:
                in_file = True
        elif module_name(other.path).split(".")[0] not in (
            "Mathlib", "Std", "Init", "Lean", "Aesop", "Qq"
        ):
            in_repo = True
    return in_file, in_repo


# Frozen hand-derived expectations: (file, name-or-line, inFile, repo).
EXPECTED_FLAGS = [
    ("Geometry/Shapes.lean", "Pt", False, False),
    ("Geometry/Shapes.lean", "originPt", True, False),
    ("Geometry/Shapes.lean", "shiftX", True, False),
    ("Geometry/Shapes.lean", "originPt_px", True, False),
    ("Geometry/Shapes.lean", "shiftX_zero", True, False),
    ("Geometry/Shapes.lean", "Square", True, False),
    ("Geometry/Shapes.lean", "Shade", False, False),
    ("Geometry/Shapes.lean", "invert", True, False),
    ("Geometry/Shapes.lean", "invert_invert", True, False),
    ("Geometry/Shapes.lean", None, True, False),  # unnamed instance
    ("Geometry/Shapes.lean", "regionOf", True, False),
    ("Geometry/Area.lean", "unitSquare", False, True),
    ("Geometry/Area.lean", "areaOf", False, True),
    ("Geometry/Area.lean", "areaOf_unit", True, False),
    ("Geometry/Area.lean", "shift_area", True, True),
    ("Geometry/Area.lean", "twoPoints", False, True),
    ("Geometry/Area.lean", "unitSquare_px", True, True),
    ("Geometry/Area.lean", "Pair", False, True),
    ("Util.lean", "halves", False, False),
    ("Util.lean", "halves_zero", True, False),
    ("Util.lean", "one_eq_one", False, False),
    ("Util.lean", "two_eq_two", False, False),
    ("Util.lean", "double", False, False),
    ("Util.lean", "double_halves", True, False),
    ("Util.lean", None, True, False),  # example : halves 2 = 1
]


class TestDependencyOracle:
    def test_fixture_repo_has_25_declarations(self, repo3):
        decls = [d for f in repo3 for d in parse_declarations(f)]
        assert len(decls) == 25

    def test_annotator_matches_oracle_and_frozen_expectations(self, repo3):
        index = build_name_index(repo3)
        all_decls = [d for f in repo3 for d in parse_declarations(f)]
        assert len(all_decls) == len(EXPECTED_FLAGS)
        for decl, (path, name, exp_in_file, exp_repo) in zip(all_decls, EXPECTED_FLAGS):
            assert decl.path == path
            assert decl.short_name == name
            dep = annotate_dependencies(decl, index)
            got = (dep.in_file_premises, dep.repository_premises)
            assert got == (exp_in_file, exp_repo), f"{path}:{name} annotate {got}"
            assert got == oracle_flags(decl, all_decls), f"{path}:{name} oracle disagrees"


class TestCommitMap:
    def test_load_and_attach(self, tmp_path, square_file):
        sidecar = tmp_path / "commits.tsv"
        sidecar.write_text(
            "Square.lean\t*\tabc1234\t2024-04-01\n"
            "Square.lean\ts_eq_pow_two\tdef5678\t2024-04-02\n",
            encoding="utf-8",
        )
        cmap = CommitMap.load(sidecar)
        (entry,) = extract_benchmark_entries([square_file], [("Square.lean", "s_eq_pow_two")])
        attach_vcs_metadata(entry, cmap)
        assert entry.file_created == "abc1234"
        assert entry.theorem_created == "def5678"

    def test_file_level_fallback(self, tmp_path, square_file):
        sidecar = tmp_path / "commits.tsv"
        sidecar.write_text("Square.lean\t*\tabc1234\t2024-04-01\n", encoding="utf-8")
        (entry,) = extract_benchmark_entries([square_file], [("Square.lean", "s_eq_pow_two")])
        attach_vcs_metadata(entry, CommitMap.load(sidecar))
        assert entry.file_created == "abc1234"
        assert entry.theorem_created == "abc1234"

    def test_missing_file_warns_per_entry(self, square_file, rect_file, caplog):
        entries = extract_benchmark_entries(
            [square_file, rect_file],
            [("Square.lean", "s_eq_pow_two"), ("Rect.lean", "Rectangle.symm")],
        )
        with caplog.at_level("WARNING", logger="leanbench.annotate"):
            for e in entries:
                attach_vcs_metadata(e, CommitMap())
        warnings = [r for r in caplog.records if "no commit record" in r.message]
        assert len(warnings) == len(entries)
        assert all(e.file_created == "(unknown)" for e in entries)

    def test_bad_commit_id_rejected(self, tmp_path):
        sidecar = tmp_path / "commits.tsv"
        sidecar.write_text("F.lean\t*\tNOTHEX\t2024-01-01\n", encoding="utf-8")
        with pytest.raises(CommitMapError):
            CommitMap.load(sidecar)

    def test_bad_field_count_rejected(self, tmp_path):
        sidecar = tmp_path / "commits.tsv"
        sidecar.write_text("F.lean\tabc1234\n", encoding="utf-8")
        with pytest.raises(CommitMapError):
            CommitMap.load(sidecar)
