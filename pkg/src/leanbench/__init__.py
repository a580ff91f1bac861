"""Lean 4 theorem-proving data extraction and evaluation toolkit."""

from .annotate import (
    CommitMap,
    NameIndex,
    annotate_dependencies,
    annotate_entries,
    annotate_position,
    annotate_proof,
    attach_vcs_metadata,
    build_name_index,
)
from .bench import (
    EvaluationReport,
    apply_context_transform,
    build_report,
    run_evaluation,
)
from .checker import (
    CheckerSession,
    CheckResult,
    MockTransport,
    ProofState,
    SubprocessTransport,
    open_session,
)
from .extract import (
    BenchmarkEntry,
    FullProofExample,
    NextTacticExample,
    extract_benchmark_entries,
    extract_full_proof_examples,
    extract_next_tactic_examples,
    split_tactic_steps,
)
from .instruct import (
    InstructExample,
    TokenBudget,
    format_file_tuning,
    format_full_proof_prompt,
    format_state_tactic,
    truncate_context,
)
from .model import (
    Candidate,
    GenerationRequest,
    HttpCompletionBackend,
    MockScriptBackend,
    generate_candidates,
    load_mock_script,
)
from .scanner import (
    Declaration,
    SourceFile,
    SyntaxItem,
    parse_declarations,
    scan_file,
    segment_declaration,
)
from .search import SearchParams, SearchResult, best_first_search, replay_proof

__version__ = "0.1.0"
