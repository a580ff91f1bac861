from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import pytest

from leanbench.checker import (
    BannedTactic,
    CheckerSession,
    ContextBroken,
    MalformedResponse,
    MockTransport,
    ProofState,
    SubprocessTransport,
    TacticFailed,
    TransportClosed,
    normalize_goal,
    state_key,
)

SQ_CTX_AND_STMT = (
    Path(__file__).parent.joinpath("fixtures/square/Square.lean").read_text(encoding="utf-8")
)
SQ_CTX = SQ_CTX_AND_STMT[:152]
SQ_STMT = "lemma s_eq_pow_two {x : ℝ} : s x = x ^ 2"
SQ_GOAL = "x : ℝ\n⊢ s x = x ^ 2"
SQ_PROOF = "by\n  rw [s, pow_two]"


def session_for(fixture: dict) -> CheckerSession:
    return CheckerSession(MockTransport(fixture))


class TestNormalization:
    def test_goal_normalization(self):
        assert normalize_goal("x  :  ℝ \n⊢ s x = x ^ 2  ") == "x : ℝ\n⊢ s x = x ^ 2"
        assert normalize_goal("a\n\n\nb") == "a\nb"

    def test_state_key_order_sensitive(self):
        assert state_key(["a", "b"]) != state_key(["b", "a"])


class TestRunCommand:
    def test_full_valid_proof_succeeds(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        result = session.run_command(SQ_CTX + SQ_STMT + " := " + SQ_PROOF)
        assert result.status == "success"
        assert result.sorries == []
        assert result.env == 1

    def test_sorry_yields_incomplete(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        result = session.run_command(SQ_CTX + SQ_STMT + " := by sorry")
        assert result.status == "incomplete"
        assert len(result.sorries) == 1
        assert normalize_goal(result.sorries[0].goal) == normalize_goal(SQ_GOAL)

    def test_malformed_reply_surfaces_raw_line(self, square_checker_fixture):
        class GarbageTransport:
            def request(self, payload):
                return "not json"

        session = CheckerSession(GarbageTransport())
        with pytest.raises(MalformedResponse) as err:
            session.run_command("anything")
        assert "not json" in str(err.value)

    def test_env_advances(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        r1 = session.run_command(SQ_CTX + SQ_STMT + " := " + SQ_PROOF)
        r2 = session.run_command(SQ_CTX + SQ_STMT + " := " + SQ_PROOF)
        assert r2.env == r1.env + 1

    def test_unknown_theorem_errors(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        result = session.run_command("lemma mystery : 2 = 2 := rfl")
        assert result.status == "error"


class TestStartProofApplyTactic:
    def test_start_proof_returns_goal(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        state = session.start_proof(SQ_CTX, SQ_STMT)
        assert normalize_goal(state.goals[0]) == normalize_goal(SQ_GOAL)

    def test_broken_context(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        with pytest.raises(ContextBroken):
            session.start_proof("import BadImport\n\n", SQ_STMT)

    def test_apply_tactic_closes_goal(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        state = session.start_proof(SQ_CTX, SQ_STMT)
        after = session.apply_tactic(state, "rw [s, pow_two]")
        assert after.goals == []

    def test_exact_trivial(self, square_checker_fixture):
        fixture = dict(square_checker_fixture)
        fixture["theorems"] = {**fixture["theorems"], "theorem t : True": ["⊢ True"]}
        session = session_for(fixture)
        state = session.start_proof("", "theorem t : True")
        after = session.apply_tactic(state, "exact trivial")
        assert after.goals == []

    def test_banned_tactic_rejected_before_sending(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        state = session.start_proof(SQ_CTX, SQ_STMT)
        for bad in ("sorry", "admit", "simp; sorry"):
            with pytest.raises(BannedTactic):
                session.apply_tactic(state, bad)

    def test_failed_tactic_raises_with_message(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        state = session.start_proof(SQ_CTX, SQ_STMT)
        with pytest.raises(TacticFailed) as err:
            session.apply_tactic(state, "simp")
        assert "simp" in str(err.value)


class TestCheckFullProof:
    def test_own_proof_verdict_1(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        assert session.check_full_proof(SQ_CTX, SQ_STMT, SQ_PROOF) == 1

    def test_sorry_verdict_0(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        assert session.check_full_proof(SQ_CTX, SQ_STMT, "by sorry") == 0

    def test_type_error_verdict_0(self, square_checker_fixture):
        session = session_for(square_checker_fixture)
        assert session.check_full_proof(SQ_CTX, SQ_STMT, "by\n  simp") == 0

    def test_transport_error_yields_0_not_crash(self):
        class DeadTransport:
            def request(self, payload):
                raise TransportClosed("gone")

        session = CheckerSession(DeadTransport())
        assert session.check_full_proof(SQ_CTX, SQ_STMT, SQ_PROOF) == 0

    def test_verdict_matches_stepwise_replay(self, square_checker_fixture):
        # tactic-mode soundness: full-proof verdict 1 iff replaying the steps
        # from start_proof empties the goals
        session = session_for(square_checker_fixture)
        state = session.start_proof(SQ_CTX, SQ_STMT)
        after = session.apply_tactic(state, "rw [s, pow_two]")
        assert after.goals == []
        assert session.check_full_proof(SQ_CTX, SQ_STMT, SQ_PROOF) == 1


class TestMockDeterminism:
    def test_identical_call_sequences_identical_transcripts(self, square_checker_fixture):
        def transcript():
            transport = MockTransport(square_checker_fixture)
            out = []
            out.append(transport.request({"cmd": SQ_CTX + SQ_STMT + " := by sorry"}))
            reply = json.loads(out[-1])
            sid = reply["sorries"][0]["proofState"]
            out.append(transport.request({"tactic": "rw [s, pow_two]", "proofState": sid}))
            out.append(transport.request({"cmd": SQ_CTX + SQ_STMT + " := " + SQ_PROOF}))
            return out

        assert transcript() == transcript()


class TestWireFuzz:
    def test_interleaved_commands_never_cross_wire(self, square_checker_fixture):
        rng = random.Random(1234)
        session = session_for(square_checker_fixture)
        open_states: list[ProofState] = []
        expected_env = 0
        seen_state_ids: set[int] = set()
        for _ in range(100):
            op = rng.choice(("cmd", "start", "tactic"))
            if op == "cmd":
                result = session.run_command(SQ_CTX + SQ_STMT + " := " + SQ_PROOF)
                expected_env += 1
                assert result.env == expected_env
                assert result.status == "success"
            elif op == "start":
                state = session.start_proof(SQ_CTX, SQ_STMT)
                expected_env += 1
                assert state.id not in seen_state_ids  # fresh id every time
                seen_state_ids.add(state.id)
                assert normalize_goal(state.goals[0]) == normalize_goal(SQ_GOAL)
                open_states.append(state)
            elif open_states:
                state = rng.choice(open_states)
                after = session.apply_tactic(state, "rw [s, pow_two]")
                assert after.goals == []
                assert after.id not in seen_state_ids
                seen_state_ids.add(after.id)

    def test_malformed_injection_fuzz(self, square_checker_fixture):
        class FlakyTransport:
            def __init__(self, inner, rng):
                self.inner = inner
                self.rng = rng
                self.injected = 0

            def request(self, payload):
                if self.rng.random() < 0.3:
                    self.injected += 1
                    return self.rng.choice(["not json", "{truncated", "[]nope"])
                return self.inner.request(payload)

        rng = random.Random(99)
        flaky = FlakyTransport(MockTransport(square_checker_fixture), rng)
        session = CheckerSession(flaky)
        malformed_seen = 0
        for _ in range(100):
            try:
                session.run_command(SQ_CTX + SQ_STMT + " := " + SQ_PROOF)
            except MalformedResponse:
                malformed_seen += 1
        assert malformed_seen == flaky.injected
        assert malformed_seen > 0


class TestSubprocessTransport:
    STUB = [sys.executable, str(Path(__file__).parent / "repl_stub.py")]

    def test_round_trip_over_pipes(self):
        transport = SubprocessTransport(self.STUB, timeout=10)
        session = CheckerSession(transport)
        try:
            result = session.run_command("theorem t : True := by sorry")
            assert result.status == "incomplete"
            assert result.sorries[0].goal == "⊢ True"
        finally:
            session.close()

    def test_malformed_child_reply(self):
        transport = SubprocessTransport(self.STUB + ["--garbage"], timeout=10)
        session = CheckerSession(transport)
        try:
            with pytest.raises(MalformedResponse):
                session.run_command("anything")
        finally:
            session.close()

    def test_closed_transport(self):
        transport = SubprocessTransport(self.STUB, timeout=10)
        session = CheckerSession(transport)
        session.close()
        with pytest.raises(TransportClosed):
            session.run_command("anything")
