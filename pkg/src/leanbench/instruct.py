"""Instruction-tuning prompt formatting with context truncation.

Produces byte-exact file-tuning and state-tactic input/output pairs and the
two full-proof generation prompts. Long contexts are cut down to a token
budget either by keeping the tail or by removing the middle, at line
boundaries, with the strategy picked deterministically from a seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable


class TruncationMode(str, Enum):
    NONE = "none"
    MIDDLE = "middle"
    TAIL = "tail"


class ExampleKind(str, Enum):
    FILE_TUNING = "fileTuning"
    STATE_TACTIC = "stateTactic"


def whitespace_token_count(text: str) -> int:
    """Default counter: maximal runs of non-whitespace count as one token."""
    return len(text.split())


def scalar_token_count(text: str) -> int:
    return len(text)


COUNTERS: dict[str, Callable[[str], int]] = {
    "whitespace": whitespace_token_count,
    "scalar": scalar_token_count,
}


@dataclass
class TokenBudget:
    limit: int = 1024
    counter: Callable[[str], int] = whitespace_token_count


@dataclass(frozen=True)
class InstructExample:
    input: str
    output: str
    kind: ExampleKind
    truncation_mode: TruncationMode

    def to_json(self) -> dict:
        return {
            "input": self.input,
            "output": self.output,
            "kind": self.kind.value,
            "truncationMode": self.truncation_mode.value,
        }


# Input/output templates. The segments around the slots must never change:
# golden tests compare formatted prompts byte-for-byte.

_FILE_TUNING_PRE = (
    "/- You are proving a theorem in Lean 4.\n"
    "You are given the following information:\n"
    "- The file contents up to the current tactic, inside [CTX]...[/CTX]\n"
    "- The current proof state, inside [STATE]...[/STATE]\n"
    "\n"
    "Your task is to generate the next tactic in the proof.\n"
    "Put the next tactic inside [TAC]...[/TAC]\n"
    "-/\n"
    "[CTX]\n"
)
_FILE_TUNING_MID = "\n[/CTX]\n[STATE]\n"
_FILE_TUNING_POST = "\n[/STATE]\n[TAC]\n"

FILE_TUNING_TEMPLATE = (
    _FILE_TUNING_PRE + "{srcUpToTactic}" + _FILE_TUNING_MID + "{state}" + _FILE_TUNING_POST
)

_STATE_TACTIC_PRE = (
    "/- You are proving a theorem in Lean 4.\n"
    "You are given the following information:\n"
    "- The current proof state, inside [STATE]...[/STATE]\n"
    "\n"
    "Your task is to generate the next tactic in the proof.\n"
    "Put the next tactic inside [TAC]...[/TAC]\n"
    "-/\n"
    "[STATE]\n"
)
_STATE_TACTIC_POST = "\n[/STATE]\n[TAC]\n"

STATE_TACTIC_TEMPLATE = _STATE_TACTIC_PRE + "{state}" + _STATE_TACTIC_POST

OUTPUT_SUFFIX = "\n[/TAC]"

_FULL_PROOF_PLAIN_PRE = (
    "Your task is to generate complete proofs for problems stated in Lean4. "
    "You may use any tactics available in Mathlib, but no additional context, "
    "definitions, or theorems from the problem’s file will be provided. "
    "Focus on crafting proofs using general knowledge and techniques applicable in Lean4.\n"
    "Here are some examples:\n"
    "\n"
    "lemma deriv_scale {f : CS (n + 1) E} : (f.scale R).deriv = R⁻¹ • f.deriv.scale R := by\n"
    "  ext v ; by_cases hR : R = 0 <;> simp [hR, scale]\n"
    "  · simp [deriv, smul] ; exact deriv_const _ _\n"
    "  · exact ((f.hasDerivAt (R⁻¹ • v)).scomp v (by simpa using "
    "(hasDerivAt_id v).const_smul R⁻¹)).deriv\n"
    "\n"
    "theorem mul_dvd_mul_left (a : α) (h : b | c) : a * b | a * c := by\n"
    "  obtain ⟨d, rfl⟩ := h\n"
    "  use d\n"
    "  rw [mul_assoc]\n"
    "\n"
    "/- Now here is your exercise. There is no need to restate the problem. "
    "If needed, think through the proof using comments. -/\n"
    "\n"
)

_FULL_PROOF_CONTEXT_PRE = (
    "Your task is to generate complete proofs for problems stated in Lean4. "
    "For each problem, you will be provided with the context from the file in "
    "which the theorem is stated. This context includes useful external "
    "libraries, along with important definitions and theorems that are "
    "relevant to the proof. You are encouraged to use any tactics, "
    "definitions, lemmas, or theorems defined within this context to "
    "construct your proof. Please pay careful attention to indentation and "
    "formatting to ensure that the proof adheres to Lean4 syntax standards.\n"
    "Here are some examples:\n"
    "\n"
    "#Context:\n"
    "import Mathlib.Analysis.Calculus.Deriv.Support\n"
    "import Mathlib.Analysis.Distribution.SchwartzSpace\n"
    "import Mathlib.Order.Filter.ZeroAndBoundedAtFilter\n"
    "\n"
    "open Real Complex MeasureTheory Filter Topology BoundedContinuousFunction "
    "SchwartzMap  BigOperators\n"
    "\n"
    "variable {E : Type*} [NormedAddCommGroup E] [NormedSpace ℝ E] {n : ℕ}\n"
    "\n"
    "@[ext] structure CS (n : ℕ) (E : Type*) [NormedAddCommGroup E] "
    "[NormedSpace ℝ E] where\n"
    "  toFun : ℝ → E\n"
    "  h1 : ContDiff ℝ n toFun\n"
    "  h2 : HasCompactSupport toFun\n"
    "\n"
    "\n"
    "noncomputable def scale (g : CS n E) (R : ℝ) : CS n E := by\n"
    "  by_cases h : R = 0\n"
    "  · exact ⟨0, contDiff_const, by simp [HasCompactSupport, tsupport]⟩\n"
    "  · refine ⟨fun x => funscale g R x, ?_, ?_⟩\n"
    "    · exact g.h1.comp (contDiff_const.smul contDiff_id)\n"
    "    · exact g.h2.comp_smul (inv_ne_zero h)\n"
    "\n"
    "/- Truncated -/\n"
    "\n"
    "/- Now here is your exercise. There is no need to restate the problem. "
    "If needed, think through the proof using comments. -/\n"
    "#Context:\n"
)
_FULL_PROOF_CONTEXT_MID = "\n\n#Problem:\n"

FULL_PROOF_PLAIN_TEMPLATE = _FULL_PROOF_PLAIN_PRE + "{statement}"
FULL_PROOF_CONTEXT_TEMPLATE = (
    _FULL_PROOF_CONTEXT_PRE + "{context}" + _FULL_PROOF_CONTEXT_MID + "{statement}"
)


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def _max_suffix_within(text: str, budget: TokenBudget) -> str:
    """Longest suffix starting at a line boundary whose count fits the limit."""
    starts = _line_starts(text) + [len(text)]
    lo, hi = 0, len(starts) - 1
    # counter(text[s:]) is non-increasing in s; binary-search the first fit.
    while lo < hi:
        mid = (lo + hi) // 2
        if budget.counter(text[starts[mid] :]) <= budget.limit:
            hi = mid
        else:
            lo = mid + 1
    return text[starts[lo] :]


def _max_prefix_within(text: str, limit: int, counter: Callable[[str], int]) -> str:
    """Longest prefix of whole lines whose count fits the limit."""
    starts = _line_starts(text) + [len(text)]
    lo, hi = 0, len(starts) - 1
    # counter(text[:s]) is non-decreasing in s; binary-search the last fit.
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if counter(text[: starts[mid]]) <= limit:
            lo = mid
        else:
            hi = mid - 1
    return text[: starts[lo]]


def truncate_context(
    context: str,
    budget: TokenBudget | None = None,
    mode: str = "auto",
    seed: int = 0,
) -> tuple[str, TruncationMode]:
    """Fit a context into a token budget.

    Under the limit the text is unchanged. Otherwise "tail" keeps the maximal
    suffix at a line boundary, "middle" keeps a head and a tail of roughly
    half the budget each with the middle removed, and "auto" picks one of the
    two uniformly at random from the seed.
    """
    budget = budget or TokenBudget()
    if budget.counter(context) <= budget.limit:
        return context, TruncationMode.NONE
    if mode == "auto":
        mode = "middle" if random.Random(seed).random() < 0.5 else "tail"
    if mode == "tail":
        return _max_suffix_within(context, budget), TruncationMode.TAIL
    if mode != "middle":
        raise ValueError(f"unknown truncation mode {mode!r}")

    half = budget.limit // 2
    head = _max_prefix_within(context, half, budget.counter)
    tail_region = context[len(head) :]
    tail = _max_suffix_within(tail_region, TokenBudget(budget.limit - budget.counter(head), budget.counter))
    # Monotone counters may still overflow at the seam; shrink until safe.
    while tail and budget.counter(head + tail) > budget.limit:
        cut = tail.find("\n")
        tail = tail[cut + 1 :] if cut != -1 else ""
    while not tail and head and budget.counter(head) > budget.limit:
        head = head[: head.rfind("\n", 0, len(head) - 1) + 1]
    return head + tail, TruncationMode.MIDDLE


def file_tuning_input(
    context: str,
    state: str,
    budget: TokenBudget | None = None,
    seed: int = 0,
    mode: str = "auto",
) -> tuple[str, TruncationMode]:
    """The file-tuning input text alone (used as the search prompt)."""
    truncated, tmode = truncate_context(context, budget, mode=mode, seed=seed)
    return _FILE_TUNING_PRE + truncated + _FILE_TUNING_MID + state + _FILE_TUNING_POST, tmode


def format_file_tuning(
    context: str,
    state: str,
    next_tactic: str,
    budget: TokenBudget | None = None,
    seed: int = 0,
    mode: str = "auto",
) -> InstructExample:
    """A file-tuning (context, state) -> next-tactic example."""
    if not next_tactic:
        raise ValueError("next_tactic must be nonempty")
    text, tmode = file_tuning_input(context, state, budget=budget, seed=seed, mode=mode)
    return InstructExample(
        input=text,
        output=next_tactic + OUTPUT_SUFFIX,
        kind=ExampleKind.FILE_TUNING,
        truncation_mode=tmode,
    )


def format_state_tactic(state: str, next_tactic: str) -> InstructExample:
    """A state-only -> next-tactic example."""
    if not next_tactic:
        raise ValueError("next_tactic must be nonempty")
    return InstructExample(
        input=_STATE_TACTIC_PRE + state + _STATE_TACTIC_POST,
        output=next_tactic + OUTPUT_SUFFIX,
        kind=ExampleKind.STATE_TACTIC,
        truncation_mode=TruncationMode.NONE,
    )


def format_full_proof_prompt(
    statement: str,
    context: str | None = None,
    context_budget: TokenBudget | None = None,
) -> str:
    """A complete-proof generation prompt, with or without in-file context.

    Context is truncated tail-first to the budget (default limit 8000).
    """
    if not statement:
        raise ValueError("statement must be nonempty")
    if context is None:
        return _FULL_PROOF_PLAIN_PRE + statement + "\n"
    budget = context_budget or TokenBudget(limit=8000)
    truncated, _ = truncate_context(context, budget, mode="tail")
    return (
        _FULL_PROOF_CONTEXT_PRE + truncated + _FULL_PROOF_CONTEXT_MID + statement + "\n"
    )
