"""Proof-checker protocol client and fixture-driven mock.

Speaks a line-delimited JSON protocol over a child process's standard
streams: requests are {"cmd": src, "env": id?} or {"tactic": text,
"proofState": id}, replies carry env/proofState ids, goals, messages, and
sorries. A deterministic in-process mock implements the same wire surface
from a JSON fixture (initial goals per theorem plus a tactic transition
table), so the whole evaluation stack runs without a Lean toolchain.
"""

from __future__ import annotations

import json
import logging
import queue
import re
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .extract import split_tactic_steps
from .scanner import ProofMode, SourceFile, parse_declarations

logger = logging.getLogger(__name__)

DEFAULT_COMMAND_TIMEOUT = 300.0
DEFAULT_BANNED_TACTICS = ("sorry", "admit")


class CheckerError(Exception):
    """Base class for checker-side failures."""


class TransportClosed(CheckerError):
    pass


class CheckerTimeout(CheckerError):
    pass


class MalformedResponse(CheckerError):
    def __init__(self, raw: str):
        super().__init__(f"unparseable checker reply: {raw!r}")
        self.raw = raw


class TacticFailed(CheckerError):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class BannedTactic(CheckerError):
    pass


class ContextBroken(CheckerError):
    pass


class MockFixtureError(ValueError):
    pass


@dataclass
class Message:
    severity: str
    position: dict | None
    text: str


@dataclass
class SorryGoal:
    proof_state_id: int
    goal: str


@dataclass
class CheckResult:
    status: str  # "success" | "incomplete" | "error"
    messages: list[Message]
    sorries: list[SorryGoal]
    env: int | None = None


@dataclass
class ProofState:
    id: int
    goals: list[str]


def normalize_goal(text: str) -> str:
    """Collapse horizontal whitespace runs, strip line ends, drop blanks."""
    lines = []
    for line in text.split("\n"):
        collapsed = re.sub(r"[ \t]+", " ", line).strip()
        if collapsed:
            lines.append(collapsed)
    return "\n".join(lines)


def normalize_text(text: str) -> str:
    """Collapse all whitespace runs to single spaces."""
    return re.sub(r"\s+", " ", text).strip()


def state_key(goals: list[str] | tuple[str, ...]) -> str:
    """Canonical key of a goal list: normalized goals joined by blank lines."""
    return "\n\n".join(normalize_goal(g) for g in goals)


_BANNED_RE_CACHE: dict[tuple[str, ...], re.Pattern] = {}


def contains_banned(text: str, banned: tuple[str, ...] = DEFAULT_BANNED_TACTICS) -> bool:
    pattern = _BANNED_RE_CACHE.get(banned)
    if pattern is None:
        pattern = re.compile(r"(?<![\w'])(?:" + "|".join(map(re.escape, banned)) + r")(?![\w'])")
        _BANNED_RE_CACHE[banned] = pattern
    return pattern.search(text) is not None


class SubprocessTransport:
    """Child-process transport: one-line JSON requests, blank-line framing."""

    def __init__(self, command: list[str], timeout: float = DEFAULT_COMMAND_TIMEOUT):
        self.timeout = timeout
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._replies: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        buf: list[str] = []
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            if not line.strip():
                if buf:
                    self._replies.put("".join(buf))
                    buf = []
                continue
            buf.append(line)
            joined = "".join(buf)
            try:
                json.loads(joined)
            except ValueError:
                continue
            self._replies.put(joined)
            buf = []
        if buf:
            self._replies.put("".join(buf))
        self._replies.put(None)

    def request(self, payload: dict) -> str:
        if self._proc.poll() is not None or self._proc.stdin is None:
            raise TransportClosed("checker process has exited")
        try:
            self._proc.stdin.write(json.dumps(payload, ensure_ascii=False) + "\n\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportClosed(str(exc)) from exc
        try:
            reply = self._replies.get(timeout=self.timeout)
        except queue.Empty:
            raise CheckerTimeout(f"no checker reply within {self.timeout}s") from None
        if reply is None:
            raise TransportClosed("checker closed its output stream")
        return reply

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
            except OSError:
                pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class MockTransport:
    """Deterministic in-process checker driven by a JSON fixture.

    Fixture schema:
      theorems:   {statement (whitespace-insensitive) -> [initial goal, ...]}
      tactics:    [{goals: [...], tactic: str, nextGoals: [...]} |
                   {goals: [...], tactic: str, error: str}]
      termProofs: {statement -> [accepted term-proof text, ...]}
      brokenMarkers: [substring, ...]  # submitted source containing one errors
    """

    def __init__(self, fixture: dict | str | Path):
        if not isinstance(fixture, dict):
            fixture = json.loads(Path(fixture).read_text(encoding="utf-8"))
        self.theorems: dict[str, list[str]] = {
            normalize_text(stmt): list(goals)
            for stmt, goals in fixture.get("theorems", {}).items()
        }
        self.transitions: dict[tuple[str, str], dict] = {}
        for row in fixture.get("tactics", []):
            key = (state_key(row["goals"]), normalize_text(row["tactic"]))
            if "nextGoals" not in row and "error" not in row:
                raise MockFixtureError(f"transition needs nextGoals or error: {row!r}")
            self.transitions[key] = row
        self.term_proofs: dict[str, list[str]] = {
            normalize_text(stmt): [normalize_text(p) for p in proofs]
            for stmt, proofs in fixture.get("termProofs", {}).items()
        }
        self.broken_markers: list[str] = list(fixture.get("brokenMarkers", []))
        self._env = 0
        self._next_state = 0
        self._states: dict[int, list[str]] = {}

    def _new_state(self, goals: list[str]) -> int:
        sid = self._next_state
        self._next_state += 1
        self._states[sid] = list(goals)
        return sid

    def request(self, payload: dict) -> str:
        if "cmd" in payload:
            reply = self._run_command(payload["cmd"])
        elif "tactic" in payload:
            reply = self._run_tactic(payload["proofState"], payload["tactic"])
        else:
            reply = {"messages": [{"severity": "error", "data": "unknown request"}]}
        return json.dumps(reply, ensure_ascii=False)

    def _run_command(self, src: str) -> dict:
        messages: list[dict] = []
        sorries: list[dict] = []
        for marker in self.broken_markers:
            if marker in src:
                messages.append(
                    {"severity": "error", "data": f"mock checker: broken context ({marker})"}
                )
        file = SourceFile.from_text("<cmd>", src)
        for decl in parse_declarations(file):
            stmt_key = normalize_text(decl.statement_text)
            known = stmt_key in self.theorems
            if not known:
                if decl.kind.value in ("theorem", "lemma", "example"):
                    messages.append(
                        {
                            "severity": "error",
                            "data": f"mock checker: unknown theorem {decl.short_name or stmt_key!r}",
                        }
                    )
                continue
            goals = list(self.theorems[stmt_key])
            if decl.proof_mode == ProofMode.NONE:
                messages.append(
                    {"severity": "error", "data": "mock checker: theorem has no proof"}
                )
            elif decl.proof_mode == ProofMode.TACTIC:
                self._replay_tactics(decl.proof_text, goals, messages, sorries)
            else:
                norm_proof = normalize_text(decl.proof_text)
                if norm_proof in ("sorry", "admit"):
                    for g in goals:
                        sorries.append({"proofState": self._new_state([g]), "goal": g})
                elif norm_proof not in self.term_proofs.get(stmt_key, []):
                    messages.append(
                        {
                            "severity": "error",
                            "data": f"mock checker: term proof not recognized: {norm_proof!r}",
                        }
                    )
        self._env += 1
        return {"env": self._env, "messages": messages, "sorries": sorries}

    def _replay_tactics(
        self,
        proof_text: str,
        goals: list[str],
        messages: list[dict],
        sorries: list[dict],
    ) -> None:
        for step in split_tactic_steps(proof_text):
            tactic = normalize_text(step.text)
            if tactic in ("sorry", "admit"):
                for g in goals:
                    sorries.append({"proofState": self._new_state([g]), "goal": g})
                goals = []
                continue
            if not goals:
                messages.append(
                    {"severity": "error", "data": "mock checker: no goals to prove"}
                )
                return
            row = self.transitions.get((state_key(goals), tactic))
            if row is None:
                messages.append(
                    {
                        "severity": "error",
                        "data": f"mock checker: tactic {tactic!r} not applicable",
                    }
                )
                return
            if "error" in row:
                messages.append({"severity": "error", "data": row["error"]})
                return
            goals = list(row["nextGoals"])
        if goals:
            messages.append(
                {
                    "severity": "error",
                    "data": "unsolved goals\n" + "\n\n".join(goals),
                }
            )

    def _run_tactic(self, state_id: int, tactic: str) -> dict:
        goals = self._states.get(state_id)
        if goals is None:
            return {
                "messages": [
                    {"severity": "error", "data": f"unknown proof state {state_id}"}
                ]
            }
        row = self.transitions.get((state_key(goals), normalize_text(tactic)))
        if row is None:
            return {
                "messages": [
                    {
                        "severity": "error",
                        "data": f"mock checker: tactic {normalize_text(tactic)!r} not applicable",
                    }
                ]
            }
        if "error" in row:
            return {"messages": [{"severity": "error", "data": row["error"]}]}
        next_goals = list(row["nextGoals"])
        return {"proofState": self._new_state(next_goals), "goals": next_goals}

    def close(self) -> None:
        pass


class CheckerSession:
    """One sequential conversation with a checker (one outstanding request)."""

    def __init__(
        self,
        transport: Any,
        banned_tactics: tuple[str, ...] = DEFAULT_BANNED_TACTICS,
    ):
        self.transport = transport
        self.banned_tactics = banned_tactics
        self.env: int | None = None
        self._lock = threading.Lock()

    def _roundtrip(self, payload: dict) -> dict:
        with self._lock:
            raw = self.transport.request(payload)
        try:
            reply = json.loads(raw)
        except ValueError:
            raise MalformedResponse(raw) from None
        if not isinstance(reply, dict):
            raise MalformedResponse(raw)
        return reply

    def run_command(self, src: str, env: int | None = None) -> CheckResult:
        """Submit a whole source snippet; returns messages, sorries, status."""
        payload: dict[str, Any] = {"cmd": src}
        if env is not None:
            payload["env"] = env
        reply = self._roundtrip(payload)
        messages = [
            Message(
                severity=m.get("severity", "error"),
                position=m.get("pos"),
                text=m.get("data", ""),
            )
            for m in reply.get("messages", [])
        ]
        sorries = [
            SorryGoal(proof_state_id=s["proofState"], goal=s.get("goal", ""))
            for s in reply.get("sorries", [])
        ]
        new_env = reply.get("env")
        if new_env is not None:
            self.env = new_env
        if any(m.severity == "error" for m in messages):
            status = "error"
        elif sorries:
            status = "incomplete"
        else:
            status = "success"
        return CheckResult(status=status, messages=messages, sorries=sorries, env=new_env)

    def start_proof(self, context: str, statement: str) -> ProofState:
        """Open a tactic proof for `statement` under `context`.

        Submits the context with the statement closed by `sorry` and returns
        the proof state of the resulting hole.
        """
        result = self.run_command(context + statement + " := by sorry")
        if result.status == "error":
            errors = "; ".join(m.text for m in result.messages if m.severity == "error")
            raise ContextBroken(errors or "checker reported errors")
        if not result.sorries:
            raise ContextBroken("no proof state returned for the statement")
        hole = result.sorries[-1]
        return ProofState(id=hole.proof_state_id, goals=[hole.goal])

    def apply_tactic(self, state: ProofState, tactic: str) -> ProofState:
        """Run one tactic against an open proof state."""
        if contains_banned(tactic, self.banned_tactics):
            raise BannedTactic(f"tactic contains a banned identifier: {tactic!r}")
        reply = self._roundtrip({"tactic": tactic, "proofState": state.id})
        if "proofState" not in reply:
            msgs = reply.get("messages", [])
            text = "; ".join(m.get("data", "") for m in msgs) or "tactic failed"
            raise TacticFailed(text)
        return ProofState(id=reply["proofState"], goals=list(reply.get("goals", [])))

    def check_full_proof(self, context: str, statement: str, proof: str) -> int:
        """The binary verdict: 1 iff the full proof checks and has no holes."""
        if contains_banned(proof, self.banned_tactics):
            return 0
        try:
            result = self.run_command(context + statement + " := " + proof)
        except CheckerError as exc:
            logger.warning("checker failure during verification: %s", exc)
            return 0
        return 1 if result.status == "success" else 0

    def close(self) -> None:
        close = getattr(self.transport, "close", None)
        if close is not None:
            close()


def open_session(
    command: list[str] | None = None,
    fixture: dict | str | Path | None = None,
    timeout: float = DEFAULT_COMMAND_TIMEOUT,
    banned_tactics: tuple[str, ...] = DEFAULT_BANNED_TACTICS,
) -> CheckerSession:
    """Open a session over a child process or the fixture-driven mock."""
    if (command is None) == (fixture is None):
        raise ValueError("exactly one of command/fixture must be given")
    if command is not None:
        transport: Any = SubprocessTransport(command, timeout=timeout)
    else:
        transport = MockTransport(fixture)
    return CheckerSession(transport, banned_tactics=banned_tactics)
