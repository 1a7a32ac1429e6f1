import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from planexp.metrics import word_count
from planexp.narrative import retrieve_pair
from planexp.refine import (
    BackendError,
    ChatMessage,
    DeterministicBackend,
    HttpChatBackend,
    RefineError,
    SHORTEN_REQUEST,
    UnparseableNarrativeError,
    deterministic_refine,
    follow_up,
    make_backend,
    refine,
    refine_many,
    system_prompt,
)

from conftest import WORKED_NARRATIVE


class TestSystemPrompt:
    def test_contains_the_three_clauses(self):
        text = system_prompt()
        assert "(a) is shorter than the original" in text
        assert "(b) uses an easier language than the original" in text
        assert "(c) keeps the semantic meaning of the original" in text

    def test_byte_stable(self):
        assert system_prompt() == system_prompt()

    def test_word_count_snapshot(self):
        assert word_count(system_prompt()) == 40


class TestDeterministicRefine:
    def test_initial_collapses_predicate_chain(self, worked_kb):
        narrative = retrieve_pair(worked_kb, "X", "Y", 3)
        text = deterministic_refine(narrative, "initial")
        assert "cheaper, faster, shorter, and better" in text

    def test_initial_golden_snapshot(self, worked_kb):
        narrative = retrieve_pair(worked_kb, "X", "Y", 3)
        assert deterministic_refine(narrative, "initial") == (
            "Plan X is cheaper, faster, shorter, and better than Plan Y. "
            "Plan X takes 28.20 time units, has 12 tasks, and costs 0. "
            "Plan Y takes 40.35 time units, has 18 tasks, and costs 3. "
            "Plan X is a typical plan; Plan Y is an atypical plan."
        )

    def test_shorten_golden_snapshot(self, worked_kb):
        narrative = retrieve_pair(worked_kb, "X", "Y", 3)
        assert deterministic_refine(narrative, "shorten") == (
            "Plan X (typical) is cheaper, faster, shorter, and better than Plan Y (atypical). "
            "It runs in 28.20 units, has 12 tasks, and costs 0, "
            "versus Plan Y's 40.35 units, 18 tasks, and cost 3."
        )

    def test_level1_never_expands(self, worked_kb):
        narrative = retrieve_pair(worked_kb, "X", "Y", 1)
        out = deterministic_refine(narrative, "initial")
        assert word_count(out) <= word_count(narrative.text)

    def test_shorten_beats_initial_across_corpus(self, seed42_run):
        for row in seed42_run.narratives():
            initial = deterministic_refine(row.text, "initial")
            shorter = deterministic_refine(row.text, "shorten")
            assert word_count(shorter) < word_count(initial), row.pair_id

    def test_unparseable_text_rejected(self):
        with pytest.raises(UnparseableNarrativeError):
            deterministic_refine("This is not a narrative at all", "initial")

    def test_unknown_mode_rejected(self):
        with pytest.raises(RefineError):
            deterministic_refine(WORKED_NARRATIVE, "verbose")

    def test_accepts_raw_text(self):
        assert "typical plan" in deterministic_refine(WORKED_NARRATIVE, "initial")


class TestSessions:
    def test_refine_produces_revision_zero(self, worked_kb):
        narrative = retrieve_pair(worked_kb, "X", "Y", 3)
        explanation, session = refine(narrative, DeterministicBackend())
        assert explanation.revision == 0
        assert explanation.narrative_ref == narrative.ref
        assert [m.role for m in session.messages] == ["system", "user", "assistant"]
        assert session.messages[0].content == system_prompt()
        assert word_count(explanation.text) < word_count(narrative.text)

    def test_follow_up_shortens(self, worked_kb):
        narrative = retrieve_pair(worked_kb, "X", "Y", 3)
        explanation, session = refine(narrative, DeterministicBackend())
        revised = follow_up(session, SHORTEN_REQUEST, DeterministicBackend())
        assert revised.revision == 1
        assert word_count(revised.text) < word_count(explanation.text)

    def test_two_follow_ups_bookkeeping(self, worked_kb):
        narrative = retrieve_pair(worked_kb, "X", "Y", 2)
        backend = DeterministicBackend()
        _, session = refine(narrative, backend)
        follow_up(session, SHORTEN_REQUEST, backend)
        revised = follow_up(session, "Even shorter please", backend)
        assert revised.revision == 2
        assert len(session.messages) == 7
        assert [m.role for m in session.messages[1:]] == ["user", "assistant"] * 3

    def test_history_is_append_only(self, worked_kb):
        narrative = retrieve_pair(worked_kb, "X", "Y", 2)
        backend = DeterministicBackend()
        _, session = refine(narrative, backend)
        before = [m.content for m in session.messages]
        follow_up(session, SHORTEN_REQUEST, backend)
        assert [m.content for m in session.messages[: len(before)]] == before

    def test_follow_up_needs_revision_zero(self, worked_kb):
        narrative = retrieve_pair(worked_kb, "X", "Y", 2)
        from planexp.refine import RefinementSession

        bare = RefinementSession("s", narrative.ref, 2, [ChatMessage("system", system_prompt())])
        with pytest.raises(RefineError):
            follow_up(bare, SHORTEN_REQUEST, DeterministicBackend())

    def test_empty_narrative_rejected(self):
        class Empty:
            text = "   "
            ref = "x"
            level = 1

        with pytest.raises(RefineError):
            refine(Empty(), DeterministicBackend())

    def test_refine_many_preserves_order(self, worked_kb):
        narratives = [retrieve_pair(worked_kb, "X", "Y", level) for level in (1, 2, 3)]
        results = refine_many(narratives, DeterministicBackend(), max_workers=3)
        assert [e.level for e, _ in results] == [1, 2, 3]
        assert [e.narrative_ref for e, _ in results] == [n.ref for n in narratives]


class _ChatHandler(BaseHTTPRequestHandler):
    fail_first = 0
    reply = "short reply"
    calls = 0

    def do_POST(self):
        type(self).calls += 1
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        assert body["messages"][0]["role"] == "system"
        if type(self).calls <= type(self).fail_first:
            self.send_response(502)
            self.end_headers()
            return
        payload = json.dumps({"message": {"content": type(self).reply}}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    server = HTTPServer(("127.0.0.1", 0), _ChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _ChatHandler.calls = 0
    _ChatHandler.fail_first = 0
    _ChatHandler.reply = "short reply"
    yield f"http://127.0.0.1:{server.server_address[1]}/api/chat"
    server.shutdown()


class TestHttpBackend:
    def _messages(self):
        return [ChatMessage("system", system_prompt()), ChatMessage("user", WORKED_NARRATIVE)]

    def test_round_trip(self, chat_server):
        backend = HttpChatBackend(chat_server, model="test-model")
        assert backend.complete(self._messages()) == "short reply"

    def test_retries_transient_failures(self, chat_server):
        _ChatHandler.fail_first = 2
        backend = HttpChatBackend(chat_server, model="test-model")
        assert backend.complete(self._messages()) == "short reply"
        assert _ChatHandler.calls == 3

    def test_gives_up_after_bounded_retries(self, chat_server):
        _ChatHandler.fail_first = 99
        backend = HttpChatBackend(chat_server, model="test-model", max_retries=3)
        with pytest.raises(BackendError):
            backend.complete(self._messages())
        assert _ChatHandler.calls == 3

    def test_empty_reply_is_an_error(self, chat_server):
        _ChatHandler.reply = "   "
        backend = HttpChatBackend(chat_server, model="test-model")
        with pytest.raises(BackendError):
            backend.complete(self._messages())

    def test_unreachable_endpoint(self):
        backend = HttpChatBackend("http://127.0.0.1:1/api/chat", model="m", max_retries=2, timeout=0.2)
        with pytest.raises(BackendError):
            backend.complete(self._messages())

    def test_backends_are_interchangeable(self, chat_server, worked_kb):
        _ChatHandler.reply = "Plan X beats Plan Y."
        narrative = retrieve_pair(worked_kb, "X", "Y", 1)
        remote, _ = refine(narrative, HttpChatBackend(chat_server, model="m"))
        local, _ = refine(narrative, DeterministicBackend())
        assert remote.revision == local.revision == 0


class TestMakeBackend:
    def test_deterministic(self):
        assert isinstance(make_backend("deterministic"), DeterministicBackend)

    def test_remote_requires_url_and_model(self):
        with pytest.raises(RefineError):
            make_backend("remote")

    def test_unknown_name(self):
        with pytest.raises(RefineError):
            make_backend("quantum")
