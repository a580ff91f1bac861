"""Best-first tactic search over proof states.

Partial proofs are prioritized by the mean of their tactics' log
probabilities (root priority 0, ties broken FIFO). States are deduplicated
by normalized goal list, and every proof found is re-verified against the
checker before being reported.
"""

from __future__ import annotations

import heapq
import logging
import re
import time
from dataclasses import dataclass, field

from .checker import (
    BannedTactic,
    CheckerError,
    CheckerSession,
    ContextBroken,
    ProofState,
    TacticFailed,
    normalize_goal,
)
from .extract import BenchmarkEntry
from .instruct import TokenBudget, file_tuning_input
from .model import Backend, GenerationRequest, generate_candidates

logger = logging.getLogger(__name__)


@dataclass
class SearchParams:
    samples_per_expansion: int = 32  # S
    max_expansions: int = 100  # T
    max_depth: int = 50
    theorem_timeout: float = 600.0  # seconds of wall clock per theorem


@dataclass
class SearchStats:
    expansions: int = 0
    tactics_checked: int = 0
    nodes_enqueued: int = 0
    duplicates_skipped: int = 0
    wall_time: float = 0.0

    def to_json(self) -> dict:
        # wall_time is intentionally left out: result files must be
        # byte-identical across reruns with the same seed.
        return {
            "expansions": self.expansions,
            "tacticsChecked": self.tactics_checked,
            "nodesEnqueued": self.nodes_enqueued,
            "duplicatesSkipped": self.duplicates_skipped,
        }


@dataclass
class SearchNode:
    proof_state_id: int
    goals: tuple[str, ...]  # normalized goal texts
    tactic_path: tuple[tuple[str, float], ...]
    sum_logprob: float
    insertion_index: int

    def __post_init__(self) -> None:
        expected = sum(lp for _, lp in self.tactic_path)
        if abs(self.sum_logprob - expected) > 1e-9:
            raise ValueError("sum_logprob does not match the tactic path")
        if self.tactic_path and self.priority > 0:
            raise ValueError("non-root priority must be <= 0")

    @property
    def priority(self) -> float:
        if not self.tactic_path:
            return 0.0
        return self.sum_logprob / len(self.tactic_path)


@dataclass
class SearchResult:
    status: str  # proved | exhausted | budgetExceeded | timeout | contextBroken
    proof: str | None
    stats: SearchStats
    diagnostic: str | None = None
    trace: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "proof": self.proof,
            "stats": self.stats.to_json(),
        }


def _prompt_for(
    context: str,
    statement: str,
    node: SearchNode,
    budget: TokenBudget | None,
    seed: int,
) -> str:
    tactics = "".join(f"{t}\n" for t, _ in node.tactic_path)
    src_up_to_tactic = f"{context}{statement} := by\n{tactics}"
    state = "\n\n".join(node.goals)
    return file_tuning_input(src_up_to_tactic, state, budget=budget, seed=seed)[0]


def best_first_search(
    entry: BenchmarkEntry,
    model: Backend,
    session: CheckerSession,
    params: SearchParams | None = None,
    budget: TokenBudget | None = None,
    seed: int = 0,
    prompt_context: str | None = None,
    keep_trace: bool = False,
) -> SearchResult:
    """Search for a tactic proof of a benchmark entry.

    The checker always sees the entry's true context; `prompt_context`
    overrides only what the model is shown.
    """
    params = params or SearchParams()
    stats = SearchStats()
    start_time = time.monotonic()
    context = entry.src_context
    statement = entry.theorem_statement
    shown_context = context if prompt_context is None else prompt_context

    def finish(status: str, proof: str | None = None, diagnostic: str | None = None,
               trace: list[dict] | None = None) -> SearchResult:
        stats.wall_time = time.monotonic() - start_time
        return SearchResult(status=status, proof=proof, stats=stats,
                            diagnostic=diagnostic, trace=trace or [])

    try:
        root_state = session.start_proof(context, statement)
    except ContextBroken as exc:
        return finish("contextBroken", diagnostic=str(exc))
    except CheckerError as exc:
        return finish("timeout", diagnostic=f"checker failure: {exc}")

    root = SearchNode(
        proof_state_id=root_state.id,
        goals=tuple(normalize_goal(g) for g in root_state.goals),
        tactic_path=(),
        sum_logprob=0.0,
        insertion_index=0,
    )
    visited: set[tuple[str, ...]] = {root.goals}
    heap: list[tuple[float, int, SearchNode]] = [(-root.priority, 0, root)]
    next_index = 1
    trace: list[dict] = []

    while heap:
        if time.monotonic() - start_time > params.theorem_timeout:
            return finish("timeout", trace=trace)
        if stats.expansions >= params.max_expansions:
            return finish("budgetExceeded", trace=trace)
        _, _, node = heapq.heappop(heap)
        stats.expansions += 1

        prompt = _prompt_for(shown_context, statement, node, budget, seed)
        request = GenerationRequest(
            prompt=prompt, num_samples=params.samples_per_expansion
        )
        candidates = generate_candidates(model, request)
        if keep_trace:
            trace.append(
                {
                    "expansion": stats.expansions,
                    "priority": node.priority,
                    "goals": list(node.goals),
                    "candidates": [[c.text, c.logprob] for c in candidates],
                }
            )

        for cand in candidates:
            stats.tactics_checked += 1
            try:
                new_state = session.apply_tactic(
                    ProofState(id=node.proof_state_id, goals=list(node.goals)),
                    cand.text,
                )
            except (TacticFailed, BannedTactic):
                continue
            except CheckerError as exc:
                return finish("timeout", diagnostic=f"checker failure: {exc}", trace=trace)

            path = node.tactic_path + ((cand.text, cand.logprob),)
            if not new_state.goals:
                proof = "\n".join(t for t, _ in path)
                if replay_proof(entry, proof, session) == 1:
                    return finish("proved", proof=proof, trace=trace)
                logger.warning(
                    "proof of %s failed re-verification; continuing search",
                    entry.decl_id,
                )
                continue
            child_goals = tuple(normalize_goal(g) for g in new_state.goals)
            if child_goals in visited:
                stats.duplicates_skipped += 1
                continue
            if len(path) >= params.max_depth:
                continue
            visited.add(child_goals)
            child = SearchNode(
                proof_state_id=new_state.id,
                goals=child_goals,
                tactic_path=path,
                sum_logprob=node.sum_logprob + cand.logprob,
                insertion_index=next_index,
            )
            heapq.heappush(heap, (-child.priority, next_index, child))
            next_index += 1
            stats.nodes_enqueued += 1

    return finish("exhausted", trace=trace)


_BY_PREFIX_RE = re.compile(r"by(?![\w'])")


def replay_proof(entry: BenchmarkEntry, proof: str, session: CheckerSession) -> int:
    """Verdict of a proof for a benchmark entry.

    A bare tactic script (no leading `by`) is wrapped as a tactic proof;
    anything else is submitted verbatim as the declaration body.
    """
    body = proof.strip()
    if not body:
        return 0
    if not _BY_PREFIX_RE.match(body):
        body = "by\n" + body
    return session.check_full_proof(entry.src_context, entry.theorem_statement, body)
