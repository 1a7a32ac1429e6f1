"""Explanation refinement through a chat-model backend.

A narrative goes out as the user prompt of a fresh chat session whose system
prompt asks for a shorter, simpler, meaning-preserving rewrite.  Follow-up
requests extend the same session and bump the revision counter.  Two
backends ship: an HTTP client speaking a chat-completions wire format
(messages in, one assistant message out) and a deterministic rule-based
refiner so the whole pipeline runs and tests without any model.
"""

from __future__ import annotations

import json
import logging
import re
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import requests

log = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "You are an agent that based on a given ontology-based narrative, shall provide a new "
    "narrative that: (a) is shorter than the original, (b) uses an easier language than the "
    "original, and (c) keeps the semantic meaning of the original."
)

SHORTEN_REQUEST = "Make the explanation shorter"

_ROLES = ("system", "user", "assistant")


class RefineError(ValueError):
    pass


class BackendError(RuntimeError):
    """The chat backend failed, timed out or returned an empty reply."""


class UnparseableNarrativeError(RefineError):
    """The deterministic refiner could not parse a narrative sentence."""


def system_prompt() -> str:
    return SYSTEM_PROMPT


@dataclass
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise RefineError(f"bad role {self.role!r}")
        if not self.content:
            raise RefineError("message content must be non-empty")


@dataclass
class Explanation:
    text: str
    narrative_ref: str
    level: int
    revision: int

    def __post_init__(self) -> None:
        if not self.text:
            raise RefineError("explanation text must be non-empty")


@dataclass
class RefinementSession:
    session_id: str
    narrative_ref: str
    level: int
    messages: list[ChatMessage] = field(default_factory=list)

    @property
    def revision(self) -> int:
        # system + user + assistant = revision 0; each follow-up adds two.
        return (len(self.messages) - 3) // 2

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "narrative_ref": self.narrative_ref,
            "level": self.level,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RefinementSession":
        return cls(
            session_id=obj["session_id"],
            narrative_ref=obj["narrative_ref"],
            level=int(obj["level"]),
            messages=[ChatMessage(m["role"], m["content"]) for m in obj["messages"]],
        )


# -- backends ----------------------------------------------------------------


class DeterministicBackend:
    """Offline stand-in: applies the rule-based refiner to the session's narrative."""

    name = "deterministic"

    def complete(self, messages: list[ChatMessage]) -> str:
        if len(messages) < 2 or messages[1].role != "user":
            raise BackendError("session has no narrative user prompt")
        mode = "initial" if len(messages) == 2 else "shorten"
        return deterministic_refine(messages[1].content, mode)


class HttpChatBackend:
    """Chat client for an HTTP endpoint: POST {model, messages} -> {message:{content}}.

    ``base_url`` is the full chat endpoint URL.  Sampling is pinned to
    temperature 0 so evaluation runs are as reproducible as the model allows.
    Transport errors and 5xx responses are retried with exponential backoff.
    """

    name = "remote"

    def __init__(
        self,
        base_url: str,
        model: str,
        token: str | None = None,
        timeout: float = 120.0,
        max_retries: int = 3,
        verbose: bool = False,
    ) -> None:
        self.base_url = base_url
        self.model = model
        self.token = token
        self.timeout = timeout
        self.max_retries = max_retries
        self.verbose = verbose

    def complete(self, messages: list[ChatMessage]) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "stream": False,
            "options": {"temperature": 0},
        }
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        if self.verbose:
            log.info("POST %s headers=%s body=%s", self.base_url,
                     {k: ("<redacted>" if k == "Authorization" else v) for k, v in headers.items()},
                     json.dumps(payload)[:2000])
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            if attempt:
                time.sleep(0.5 * 2 ** (attempt - 1))
            try:
                resp = requests.post(self.base_url, json=payload, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = BackendError(f"backend returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendError(f"backend returned {resp.status_code}: {resp.text[:500]}")
            try:
                content = resp.json()["message"]["content"]
            except (ValueError, KeyError, TypeError) as exc:
                raise BackendError(f"malformed backend response: {exc}") from exc
            if self.verbose:
                log.info("backend reply: %s", content[:2000])
            if not str(content).strip():
                raise BackendError("backend returned an empty message")
            return str(content)
        raise BackendError(f"backend unreachable after {self.max_retries} attempts: {last_error}")


def make_backend(
    name: str,
    base_url: str | None = None,
    model: str | None = None,
    token: str | None = None,
    verbose: bool = False,
):
    if name == "deterministic":
        return DeterministicBackend()
    if name == "remote":
        if not base_url or not model:
            raise RefineError("remote backend needs base_url and model")
        return HttpChatBackend(base_url, model, token=token, verbose=verbose)
    raise RefineError(f"unknown backend {name!r}")


# -- session flow -------------------------------------------------------------


def refine(narrative, backend) -> tuple[Explanation, RefinementSession]:
    """Revision-0 explanation of a narrative plus the session for follow-ups."""
    if not narrative.text or not narrative.text.strip():
        raise RefineError("cannot refine an empty narrative")
    session = RefinementSession(
        session_id=uuid.uuid4().hex,
        narrative_ref=narrative.ref,
        level=int(narrative.level),
        messages=[ChatMessage("system", SYSTEM_PROMPT), ChatMessage("user", narrative.text)],
    )
    reply = backend.complete(session.messages)
    if not reply.strip():
        raise BackendError("backend returned an empty explanation")
    session.messages.append(ChatMessage("assistant", reply))
    return Explanation(reply, session.narrative_ref, session.level, 0), session


def follow_up(session: RefinementSession, request: str, backend) -> Explanation:
    """Append a user request to the session and return the next revision."""
    if not request or not request.strip():
        raise RefineError("follow-up request must be non-empty")
    if len(session.messages) < 3 or session.messages[-1].role != "assistant":
        raise RefineError("session has no revision-0 explanation yet")
    session.messages.append(ChatMessage("user", request))
    reply = backend.complete(session.messages)
    if not reply.strip():
        raise BackendError("backend returned an empty explanation")
    session.messages.append(ChatMessage("assistant", reply))
    return Explanation(reply, session.narrative_ref, session.level, session.revision)


def refine_many(narratives, backend, max_workers: int = 4) -> list[tuple[Explanation, RefinementSession]]:
    """Refine a batch; results in input order, backend calls bounded by max_workers."""
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda n: refine(n, backend), narratives))


# -- deterministic rule-based refiner -----------------------------------------

_QUOTED = re.compile(r"`([^`']*)'")
_KIND_WORDS = ("makespan", "number of tasks", "cost")

_ADJ_PRIORITY = {
    "cheaper": 0,
    "more expensive": 0,
    "faster": 1,
    "slower": 1,
    "shorter": 2,
    "longer": 2,
    "better": 3,
    "worse": 3,
}

_CONCEPT_PHRASES = {
    "TypicalPlan": ("a typical plan", "typical"),
    "AtypicalPlan": ("an atypical plan", "atypical"),
}


@dataclass
class _Parsed:
    comparisons: list[tuple[str, list[str], str]]
    classifications: list[tuple[str, str]]
    values: dict[str, list[tuple[str, str]]]
    fallback: tuple[str, str] | None


def _split_contrast(sentence: str, where: str) -> list[str]:
    halves = sentence.split("; while ")
    if len(halves) != 2:
        raise UnparseableNarrativeError(f"{where}: expected one '; while' contrast: {sentence!r}")
    return halves


def _kind_of_quality(label: str) -> tuple[str, str]:
    for kind in _KIND_WORDS:
        suffix = " " + kind
        if label.endswith(suffix):
            return label[: -len(suffix)], kind
    raise UnparseableNarrativeError(f"quality label {label!r} has no known property suffix")


def parse_narrative_text(text: str) -> _Parsed:
    """Parse a rendered narrative back into its contrastive structure."""
    parsed = _Parsed(comparisons=[], classifications=[], values={}, fallback=None)
    stripped = text.strip()
    if not stripped:
        raise UnparseableNarrativeError("empty narrative text")
    for sentence in re.split(r"(?<=\.)\s+", stripped):
        sentence = sentence.strip()
        if not sentence.endswith("."):
            raise UnparseableNarrativeError(f"sentence without final period: {sentence!r}")
        body = sentence[:-1]
        quoted = _QUOTED.findall(body)
        if " have no contrastive relations" in body:
            if len(quoted) != 2:
                raise UnparseableNarrativeError(f"bad fallback sentence: {sentence!r}")
            parsed.fallback = (quoted[0], quoted[1])
        elif " has value " in body:
            for half in _split_contrast(body, "value sentence"):
                m = re.fullmatch(r"`([^`']*)' has value `([^`']*)'", half)
                if not m:
                    raise UnparseableNarrativeError(f"bad value clause: {half!r}")
                plan, kind = _kind_of_quality(m.group(1))
                parsed.values.setdefault(plan, []).append((kind, m.group(2)))
        elif " is classified by " in body:
            for half in _split_contrast(body, "classification sentence"):
                m = re.fullmatch(r"`([^`']*)' is classified by `([^`']*)'", half)
                if not m:
                    raise UnparseableNarrativeError(f"bad classification clause: {half!r}")
                parsed.classifications.append((m.group(1), m.group(2)))
        elif any(f" has {kind} `" in body for kind in _KIND_WORDS):
            for half in _split_contrast(body, "attribution sentence"):
                if not re.fullmatch(r"`([^`']*)' has (?:makespan|number of tasks|cost) `([^`']*)'", half):
                    raise UnparseableNarrativeError(f"bad attribution clause: {half!r}")
        elif " plan than " in body:
            if len(quoted) != 2:
                raise UnparseableNarrativeError(f"bad comparison sentence: {sentence!r}")
            subject, obj = quoted
            middle = body[body.index("'") + 1 : body.rindex("`")].strip()
            adjectives = []
            for phrase in middle.split(" and "):
                m = re.fullmatch(r"is (.+) plan than", phrase)
                if not m:
                    raise UnparseableNarrativeError(f"bad comparison phrase: {phrase!r}")
                adjectives.append(m.group(1))
            parsed.comparisons.append((subject, adjectives, obj))
        else:
            raise UnparseableNarrativeError(f"unrecognized narrative sentence: {sentence!r}")
    return parsed


def _ordered_plans(parsed: _Parsed) -> list[str]:
    seen: list[str] = []

    def add(label: str) -> None:
        if label not in seen:
            seen.append(label)

    for plan, _ in parsed.classifications:
        add(plan)
    for plan in parsed.values:
        add(plan)
    for subject, _, obj in parsed.comparisons:
        add(subject)
        add(obj)
    if parsed.fallback:
        add(parsed.fallback[0])
        add(parsed.fallback[1])
    return seen


def _sort_adjectives(adjectives: list[str]) -> list[str]:
    return sorted(adjectives, key=lambda a: (_ADJ_PRIORITY.get(a, 9), adjectives.index(a)))


def _join(parts: list[str]) -> str:
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return f"{parts[0]} and {parts[1]}"
    return ", ".join(parts[:-1]) + f", and {parts[-1]}"


_INITIAL_VALUE_CLAUSE = {
    "makespan": "takes {} time units",
    "number of tasks": "has {} tasks",
    "cost": "costs {}",
}
_SHORT_FIRST_CLAUSE = {
    "makespan": "runs in {} units",
    "number of tasks": "has {} tasks",
    "cost": "costs {}",
}
_SHORT_SECOND_CLAUSE = {
    "makespan": "{} units",
    "number of tasks": "{} tasks",
    "cost": "cost {}",
}


def _value_clauses(pairs: list[tuple[str, str]], table: dict[str, str]) -> list[str]:
    return [table[kind].format(value) for kind, value in pairs]


def _render_initial(parsed: _Parsed) -> str:
    sentences = []
    for subject, adjectives, obj in parsed.comparisons:
        sentences.append(f"{subject} is {_join(_sort_adjectives(adjectives))} than {obj}.")
    if parsed.fallback:
        a, b = parsed.fallback
        sentences.append(f"{a} and {b} have no contrastive relations.")
    for plan in _ordered_plans(parsed):
        if plan in parsed.values:
            sentences.append(f"{plan} {_join(_value_clauses(parsed.values[plan], _INITIAL_VALUE_CLAUSE))}.")
    if parsed.classifications:
        clauses = []
        for plan, concept in parsed.classifications:
            phrase = _CONCEPT_PHRASES.get(concept)
            clauses.append(f"{plan} is {phrase[0]}" if phrase else f"{plan} is classified by {concept}")
        sentences.append("; ".join(clauses) + ".")
    return " ".join(sentences)


def _render_shorten(parsed: _Parsed) -> str:
    typicality = {}
    for plan, concept in parsed.classifications:
        phrase = _CONCEPT_PHRASES.get(concept)
        typicality[plan] = phrase[1] if phrase else None
    use_tags = bool(parsed.comparisons) and bool(parsed.classifications)
    tagged: set[str] = set()

    def name(plan: str) -> str:
        if use_tags and typicality.get(plan) and plan not in tagged:
            tagged.add(plan)
            return f"{plan} ({typicality[plan]})"
        return plan

    sentences = []
    pure_l1 = not parsed.classifications and not parsed.values
    if parsed.comparisons:
        if pure_l1:
            rendered = []
            saved = 0
            for subject, adjectives, obj in parsed.comparisons:
                adjs = _sort_adjectives(adjectives)
                if len(adjs) >= 2:
                    rendered.append((subject, ", ".join(adjs), obj))
                    saved += 1
                else:
                    rendered.append((subject, adjs[0], obj))
            for i, (subject, phrase, obj) in enumerate(rendered):
                # With no list to prune, drop the contrast object of the last
                # clause so the shortened text always loses at least one word.
                if saved == 0 and i == len(rendered) - 1:
                    sentences.append(f"{subject} is {phrase}.")
                else:
                    sentences.append(f"{subject} is {phrase} than {obj}.")
        else:
            for subject, adjectives, obj in parsed.comparisons:
                sentences.append(f"{name(subject)} is {_join(_sort_adjectives(adjectives))} than {name(obj)}.")
    elif parsed.fallback:
        a, b = parsed.fallback
        sentences.append(f"{a} and {b} do not differ.")
    if parsed.values:
        plans = [p for p in _ordered_plans(parsed) if p in parsed.values]
        first, rest = plans[0], plans[1:]
        head = "It" if parsed.comparisons and parsed.comparisons[0][0] == first else first
        clause = f"{head} {_join(_value_clauses(parsed.values[first], _SHORT_FIRST_CLAUSE))}"
        for other in rest:
            clause += f", versus {other}'s {_join(_value_clauses(parsed.values[other], _SHORT_SECOND_CLAUSE))}"
        sentences.append(clause + ".")
    if parsed.classifications and not use_tags:
        clauses = []
        for plan, concept in parsed.classifications:
            short = typicality.get(plan)
            clauses.append(f"{plan} is {short}" if short else f"{plan} is classified by {concept}")
        sentences.append("; ".join(clauses) + ".")
    return " ".join(sentences)


def deterministic_refine(narrative, mode: str = "initial") -> str:
    """Rule-based compression of a rendered narrative; no model involved.

    ``initial`` collapses predicate chains into adjective lists, inlines the
    quality values into one sentence per plan and rewrites classifications;
    ``shorten`` additionally merges the value sentences into one comparative
    clause and folds typicality into parentheticals.
    """
    if mode not in ("initial", "shorten"):
        raise RefineError(f"unknown refine mode {mode!r}")
    text = narrative if isinstance(narrative, str) else narrative.text
    parsed = parse_narrative_text(text)
    return _render_initial(parsed) if mode == "initial" else _render_shorten(parsed)
