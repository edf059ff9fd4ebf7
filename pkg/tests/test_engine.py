from __future__ import annotations

import pytest

from council.agents import TurnViolation
from council.engine import (
    DEBATE_PHRASE,
    PRE_PROMPT_HEADER,
    PREFERENCE_HEADER,
    InvalidInputError,
    RetriesExhaustedError,
    SessionBusyError,
    TurnKind,
    UserTurnInput,
    assemble_request,
    build_pre_prompt,
    process_turn,
    trigger_debate,
)
from council.index import pin
from council.providers import ProviderError, ScriptedProvider
from council.store import serialize
from conftest import (
    CLEAN_FIRST_TURN,
    THREE_PERSONA_EXAMPLE,
    make_first_turn,
    make_intro,
    run_message,
    scripted_session,
)


class TestBuildPrePrompt:
    def test_empty_session_fixed_scaffold(self):
        session, _ = scripted_session([])
        pre = build_pre_prompt(session, toggle=False)
        assert pre.rendered == (
            f"{PRE_PROMPT_HEADER}\n"
            "Criteria so far: (none)\n"
            "Options so far: (none)\n"
            "Agents so far: (none)\n"
        )
        assert pre.pinned_criteria is None

    def _session_with_pin(self):
        session, provider = scripted_session([CLEAN_FIRST_TURN])
        run_message(session, provider, "help me pick a racket")
        pin(session.preferences, session.index, session.registry, "criterion", "comfort")
        return session

    def test_toggle_on_lists_pinned_items(self):
        session = self._session_with_pin()
        pre = build_pre_prompt(session, toggle=True)
        assert PREFERENCE_HEADER in pre.rendered
        assert "Pinned criteria: comfort" in pre.rendered
        assert pre.pinned_criteria == ["comfort"]

    def test_toggle_off_differs_only_by_preference_section(self):
        session = self._session_with_pin()
        on = build_pre_prompt(session, toggle=True).rendered
        off = build_pre_prompt(session, toggle=False).rendered
        assert PREFERENCE_HEADER not in off
        assert on.startswith(off)
        diff = on[len(off) :]
        assert diff.startswith(PREFERENCE_HEADER)
        assert "comfort" in diff

    def test_all_lists_reflect_index_and_registry(self):
        session = self._session_with_pin()
        pre = build_pre_prompt(session, toggle=False)
        assert "spin" in pre.all_criteria
        assert "Wilson Blade" in pre.all_options
        assert pre.all_agents == ["Marlow", "Gina", "Kenji"]
        for item in pre.all_criteria + pre.all_options + pre.all_agents:
            assert item in pre.rendered

    def test_hidden_items_still_listed(self):
        from council.index import set_hidden

        session = self._session_with_pin()
        set_hidden(session.index, "stability", True)
        pre = build_pre_prompt(session, toggle=False)
        assert "stability" in pre.all_criteria
        assert "stability" in pre.rendered


class TestAssembleRequest:
    def test_first_message_is_single_system_identity(self):
        session, _ = scripted_session([])
        request = assemble_request(session, UserTurnInput(text="hello"))
        assert request.messages[0].role == "system"
        identity_count = sum("group messaging chat room" in m.content for m in request.messages)
        assert identity_count == 1

    def test_tag_header_precedes_text(self):
        session, provider = scripted_session([CLEAN_FIRST_TURN])
        run_message(session, provider, "start")
        gina = session.registry.by_name("Gina")
        kenji = session.registry.by_name("Kenji")
        request = assemble_request(
            session,
            UserTurnInput(text="what grip?", tagged_agent_ids={gina.agent_id, kenji.agent_id}),
        )
        body = request.messages[-1].content.split(f"{PRE_PROMPT_HEADER}")[1]
        after_scaffold = body.split("\n\n", 1)[-1] if "\n\n" in body else body
        assert "@{Gina} @{Kenji} what grip?" in request.messages[-1].content
        assert after_scaffold is not None

    def test_only_tagged_names_in_header(self):
        session, provider = scripted_session([CLEAN_FIRST_TURN])
        run_message(session, provider, "start")
        gina = session.registry.by_name("Gina")
        request = assemble_request(
            session, UserTurnInput(text="hi", tagged_agent_ids={gina.agent_id})
        )
        user_content = request.messages[-1].content
        body = user_content[user_content.index("\n@{") :]
        assert "@{Gina}" in body
        assert "@{Marlow}" not in body
        assert "@{Kenji}" not in body

    def test_exactly_one_pre_prompt_per_request(self):
        session, provider = scripted_session(
            [CLEAN_FIRST_TURN, "@{Gina}(opinion): more %{control} talk.%%%\n\n@{Kenji}(opinion): and %{value}.%%%"]
        )
        run_message(session, provider, "first")
        run_message(session, provider, "second")
        request = assemble_request(session, UserTurnInput(text="third"))
        combined = "\n".join(m.content for m in request.messages)
        assert combined.count(PRE_PROMPT_HEADER) == 1

    def test_message_count_recount(self):
        turns = [make_first_turn(3)] + [
            "@{Asha}(opinion): point %{factor 1a}.%%%\n\n@{Blair}(opinion): counter %{factor 2a}.%%%"
            for _ in range(9)
        ]
        session, provider = scripted_session(turns)
        for i in range(10):
            run_message(session, provider, f"message {i}")
        request = assemble_request(session, UserTurnInput(text="now"))
        visible = len(session.visible_messages())
        assert len(request.messages) == 1 + visible + 1

    def test_unknown_tag_rejected(self):
        session, _ = scripted_session([])
        with pytest.raises(InvalidInputError):
            assemble_request(session, UserTurnInput(text="x", tagged_agent_ids={"zz"}))


class TestProcessTurn:
    def test_clean_first_turn_registers_agents(self):
        session, provider = scripted_session([CLEAN_FIRST_TURN])
        result = run_message(session, provider, "help")
        assert [a.name for a in result.new_agents] == ["Marlow", "Gina", "Kenji"]
        assert result.retries_used == 0
        assert session.turn_count == 1
        assert {a.chosen_option for a in session.registry} == {
            "babolat pure aero",
            "wilson blade",
            "head speed mp",
        }
        assert {"spin", "comfort", "power", "control"} <= set(session.index.entries)

    def test_three_persona_example_rejected_for_missing_option_then_fails(self):
        # Kenneth never names an option, so the engine demands a retry each
        # time and gives up with the session untouched.
        session, provider = scripted_session([THREE_PERSONA_EXAMPLE] * 3)
        before = serialize(session)
        with pytest.raises(RetriesExhaustedError) as err:
            run_message(session, provider, "rackets?")
        assert serialize(session) == before
        assert len(err.value.raw_completions) == 3

    def test_garbage_then_valid_retries_once(self):
        session, provider = scripted_session(["complete nonsense", CLEAN_FIRST_TURN])
        result = run_message(session, provider, "help")
        assert result.retries_used == 1
        assert len(result.raw_completions) == 2
        assert session.turn_count == 1

    def test_corrective_note_sent_on_retry(self):
        session, provider = scripted_session(["garbage", CLEAN_FIRST_TURN])
        run_message(session, provider, "help")
        retry_request = provider.requests_seen[1]
        assert retry_request.messages[-1].role == "system"
        assert "rejected" in retry_request.messages[-1].content

    def test_corrective_note_not_committed(self):
        session, provider = scripted_session(
            ["garbage", CLEAN_FIRST_TURN, "@{Gina}(opinion): yes %{control}.%%%\n\n@{Kenji}(opinion): no %{value}.%%%"]
        )
        run_message(session, provider, "help")
        run_message(session, provider, "again")
        followup_request = provider.requests_seen[2]
        assert not any("Format correction" in m.content for m in followup_request.messages)

    def test_garbage_three_times_fails_unchanged(self):
        session, provider = scripted_session(["junk one", "junk two", "junk three"])
        before = serialize(session)
        with pytest.raises(RetriesExhaustedError):
            run_message(session, provider, "help")
        assert serialize(session) == before
        assert session.turn_count == 0
        assert len(session.messages) == 0

    @pytest.mark.parametrize("count", [2, 7])
    def test_first_turn_count_out_of_bounds_retries(self, count):
        session, provider = scripted_session([make_first_turn(count)] * 3)
        before = serialize(session)
        with pytest.raises(RetriesExhaustedError):
            run_message(session, provider, "go")
        assert serialize(session) == before
        assert len(provider.requests_seen) == 3

    def test_later_turn_four_new_rejected(self):
        later = "\n\n".join(
            make_intro(f"Newbie{i}", [f"q{i}a", f"q{i}b", f"q{i}c"], f"qp{i}") for i in range(4)
        )
        session, provider = scripted_session([CLEAN_FIRST_TURN] + [later] * 3)
        run_message(session, provider, "start")
        with pytest.raises(RetriesExhaustedError):
            run_message(session, provider, "more?")
        assert session.turn_count == 1

    def test_provider_transport_failure_leaves_state(self):
        class FailingProvider:
            def complete(self, request):
                raise ProviderError("boom")

        session, _ = scripted_session([])
        before = serialize(session)
        with pytest.raises(ProviderError):
            process_turn(session, UserTurnInput(text="x"), FailingProvider())
        assert serialize(session) == before

    def test_busy_session_rejects_reentry(self):
        session, provider = scripted_session([CLEAN_FIRST_TURN])
        session.busy = True
        with pytest.raises(SessionBusyError):
            run_message(session, provider, "hello")
        session.busy = False

    def test_replaying_inputs_is_byte_identical(self):
        def build():
            session, provider = scripted_session(
                [CLEAN_FIRST_TURN, "@{Gina}(opinion): depends on %{control}.%%%\n\n@{Marlow}(opinion): or %{spin}.%%%"],
                session_id="same",
            )
            run_message(session, provider, "first")
            pin(session.preferences, session.index, session.registry, "criterion", "spin")
            run_message(session, provider, "second", toggle=True)
            return serialize(session)

        assert build() == build()

    def test_grounding_context_lands_before_next_user_message(self):
        from council.grounding import FixtureFetcher, FixtureSearch, Grounder

        grounder = Grounder(
            FixtureSearch({"babolat pure aero": ["https://x.example/a"]}),
            FixtureFetcher({"https://x.example/a": "<html><body><p>Aero facts.</p></body></html>"}),
        )
        session, provider = scripted_session(
            [CLEAN_FIRST_TURN, "@{Gina}(opinion): still %{control}.%%%\n\n@{Kenji}(opinion): yep %{value}.%%%"]
        )
        run_message(session, provider, "start", grounder=grounder)
        request = assemble_request(session, UserTurnInput(text="next"))
        roles = [m.role for m in request.messages]
        context_positions = [
            i for i, m in enumerate(request.messages) if "Aero facts." in m.content
        ]
        assert context_positions, "grounding context missing from request"
        assert roles[context_positions[0]] == "system"
        assert context_positions[0] > 1
        assert context_positions[0] < len(request.messages) - 1

    def test_zero_criteria_intro_rejected(self):
        bad = (
            make_intro("Okay1", ["a1", "a2", "a3"], "op1")
            + "\n\n"
            + make_intro("Okay2", ["b1", "b2", "b3"], "op2")
            + "\n\n@{Empty}(opinion): I simply endorse the &{Plain Thing}.%%%"
        )
        session, provider = scripted_session([bad] * 3)
        with pytest.raises(RetriesExhaustedError):
            run_message(session, provider, "go")


class TestDebate:
    def _ready_session(self, extra_completions):
        session, provider = scripted_session([CLEAN_FIRST_TURN] + extra_completions)
        run_message(session, provider, "start")
        return session, provider

    def test_debate_includes_phrase_and_both_speakers(self):
        debate_turn = (
            "@{Marlow}(opinion): @{Gina} %{spin} beats %{control}.%%%\n\n"
            "@{Gina}(opinion): @{Marlow} you wish; %{control} wins points.%%%"
        )
        session, provider = self._ready_session([debate_turn])
        marlow = session.registry.by_name("Marlow")
        gina = session.registry.by_name("Gina")
        result = trigger_debate(session, {marlow.agent_id, gina.agent_id}, provider)
        speakers = {u.speaker_name for u in result.utterances}
        assert speakers == {"Marlow", "Gina"}
        sent = provider.requests_seen[-1].messages[-1].content
        assert DEBATE_PHRASE in sent
        assert "@{Marlow} @{Gina}" in sent

    def test_debate_with_one_agent_rejected(self):
        session, provider = self._ready_session([])
        marlow = session.registry.by_name("Marlow")
        with pytest.raises(InvalidInputError):
            trigger_debate(session, {marlow.agent_id}, provider)

    def test_debate_newcomer_tolerated_with_warning(self):
        debate_turn = (
            "@{Marlow}(opinion): %{spin} forever.%%%\n\n"
            "@{Gina}(opinion): %{control} forever.%%%\n\n"
            + make_intro("Crash", ["c1", "c2", "c3"], "cp1")
        )
        session, provider = self._ready_session([debate_turn])
        marlow = session.registry.by_name("Marlow")
        gina = session.registry.by_name("Gina")
        result = trigger_debate(session, {marlow.agent_id, gina.agent_id}, provider)
        assert [a.name for a in result.new_agents] == ["Crash"]
        assert TurnViolation.TOO_MANY_NEW in result.constraint_report.violations
        assert any("debate" in w for w in result.warnings)
        assert session.registry.by_name("Crash") is not None

    def test_debate_kind_requires_two_tags_via_input(self):
        session, provider = self._ready_session([])
        gina = session.registry.by_name("Gina")
        with pytest.raises(InvalidInputError):
            process_turn(
                session,
                UserTurnInput(text="", tagged_agent_ids={gina.agent_id}, turn_kind=TurnKind.DEBATE),
                provider,
            )
