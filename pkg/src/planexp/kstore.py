"""Time-indexed triple store used as the episodic memory of the pipeline.

Assertions are ``(subject, predicate, object)`` triples annotated with the
time interval in which they hold.  The store is deliberately small: pattern
queries with interval overlap, entity neighborhoods, and a line-oriented
flat-file export.  No OWL reasoning, no SPARQL, no blank nodes.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass

NAMESPACES = ("dul", "ocra", "rdf", "app")


class StoreError(ValueError):
    """Malformed term, literal or export line."""


@dataclass(frozen=True)
class Term:
    """A namespaced entity or predicate, rendered as ``namespace:local``."""

    namespace: str
    local: str

    def __post_init__(self) -> None:
        if self.namespace not in NAMESPACES:
            raise StoreError(f"unknown namespace {self.namespace!r} (expected one of {NAMESPACES})")
        if not self.local or any(c.isspace() for c in self.local):
            raise StoreError(f"bad local name {self.local!r}: must be non-empty without whitespace")

    def render(self) -> str:
        return f"{self.namespace}:{self.local}"

    @property
    def label(self) -> str:
        """Human-readable entity label: underscores in the local name read as spaces."""
        return self.local.replace("_", " ")


@dataclass(frozen=True)
class Literal:
    """A numeric or text value. Numeric literals must be finite."""

    value: int | float | str

    def __post_init__(self) -> None:
        if isinstance(self.value, bool):
            raise StoreError("boolean literals are not supported")
        if isinstance(self.value, float) and not math.isfinite(self.value):
            raise StoreError(f"non-finite numeric literal: {self.value!r}")

    def render(self) -> str:
        """Lexical form used in exports: full precision, text JSON-quoted."""
        if isinstance(self.value, str):
            return json.dumps(self.value, ensure_ascii=False)
        return repr(self.value)

    def display(self) -> str:
        """Narrative form: integers bare, floats with two decimals."""
        if isinstance(self.value, str):
            return self.value
        if isinstance(self.value, int):
            return str(self.value)
        return f"{self.value:.2f}"


@dataclass(frozen=True)
class TimeInterval:
    """Validity interval in seconds; a missing bound means unbounded."""

    start: float | None = None
    end: float | None = None

    def __post_init__(self) -> None:
        if self.start is not None and self.end is not None and self.start > self.end:
            raise StoreError(f"interval start {self.start} after end {self.end}")

    def overlaps(self, other: "TimeInterval") -> bool:
        # Inclusive at both endpoints; unbounded ends overlap everything.
        lo_ok = self.start is None or other.end is None or self.start <= other.end
        hi_ok = self.end is None or other.start is None or other.start <= self.end
        return lo_ok and hi_ok

    def intersect(self, other: "TimeInterval") -> "TimeInterval":
        starts = [s for s in (self.start, other.start) if s is not None]
        ends = [e for e in (self.end, other.end) if e is not None]
        return TimeInterval(max(starts) if starts else None, min(ends) if ends else None)


#: The unbounded interval, written ``(_, Inf)`` in exports.
ALWAYS = TimeInterval(None, None)


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term | Literal
    holds: TimeInterval = ALWAYS

    def sort_key(self) -> tuple:
        o = self.object
        okey = (0, o.render()) if isinstance(o, Term) else (1, o.render())
        ikey = (
            -math.inf if self.holds.start is None else self.holds.start,
            math.inf if self.holds.end is None else self.holds.end,
        )
        return (self.subject.render(), self.predicate.render(), okey, ikey)


def _interval_tokens(iv: TimeInterval) -> tuple[str, str]:
    return (
        "-" if iv.start is None else repr(iv.start),
        "-" if iv.end is None else repr(iv.end),
    )


def _parse_term(token: str) -> Term:
    ns, sep, local = token.partition(":")
    if not sep:
        raise StoreError(f"expected namespace:local, got {token!r}")
    return Term(ns, local)


def _parse_object(token: str) -> Term | Literal:
    if token.startswith('"'):
        return Literal(json.loads(token))
    try:
        return Literal(int(token))
    except ValueError:
        pass
    try:
        return Literal(float(token))
    except ValueError:
        return _parse_term(token)


def _parse_bound(token: str) -> float | None:
    return None if token == "-" else float(token)


class KnowledgeBase:
    """Indexed set of triples with idempotent assertion.

    Concurrency contract: many concurrent readers or one writer.  Mutation is
    serialized by an internal lock; query results are fresh lists, safe to
    hand to worker threads.
    """

    def __init__(self) -> None:
        self._triples: set[Triple] = set()
        self._by_subject: dict[Term, set[Triple]] = {}
        self._by_predicate: dict[Term, set[Triple]] = {}
        self._by_object: dict[Term | Literal, set[Triple]] = {}
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, t: Triple) -> bool:
        return t in self._triples

    def assert_triple(self, t: Triple) -> None:
        """Add a triple; re-asserting an identical triple is a no-op."""
        with self._write_lock:
            if t in self._triples:
                return
            self._triples.add(t)
            self._by_subject.setdefault(t.subject, set()).add(t)
            self._by_predicate.setdefault(t.predicate, set()).add(t)
            self._by_object.setdefault(t.object, set()).add(t)

    def query(
        self,
        subject: Term | None = None,
        predicate: Term | None = None,
        object: Term | Literal | None = None,
        within: TimeInterval = ALWAYS,
    ) -> list[Triple]:
        """Triples matching every bound position whose interval overlaps ``within``.

        Result order is deterministic (lexicographic on rendered terms).
        """
        candidates = self._candidates(subject, predicate, object)
        out = [
            t
            for t in candidates
            if (subject is None or t.subject == subject)
            and (predicate is None or t.predicate == predicate)
            and (object is None or t.object == object)
            and t.holds.overlaps(within)
        ]
        out.sort(key=Triple.sort_key)
        return out

    def _candidates(self, subject, predicate, object) -> set[Triple]:
        pools = []
        if subject is not None:
            pools.append(self._by_subject.get(subject, set()))
        if predicate is not None:
            pools.append(self._by_predicate.get(predicate, set()))
        if object is not None:
            pools.append(self._by_object.get(object, set()))
        if not pools:
            return self._triples
        return min(pools, key=len)

    def neighborhood(self, entity: Term, within: TimeInterval = ALWAYS) -> list[Triple]:
        """All triples with ``entity`` in subject or object position."""
        found = self._by_subject.get(entity, set()) | self._by_object.get(entity, set())
        out = [t for t in found if t.holds.overlaps(within)]
        out.sort(key=Triple.sort_key)
        return out

    # -- flat-file export/import ------------------------------------------

    def export_lines(self) -> list[str]:
        lines = []
        for t in sorted(self._triples, key=Triple.sort_key):
            start, end = _interval_tokens(t.holds)
            lines.append(f"{t.subject.render()} {t.predicate.render()} {t.object.render()} {start} {end}")
        return lines

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.export_lines():
                fh.write(line + "\n")

    @classmethod
    def parse_line(cls, line: str) -> Triple:
        try:
            s_tok, p_tok, rest = line.split(maxsplit=2)
            o_tok, start_tok, end_tok = rest.rsplit(maxsplit=2)
        except ValueError as exc:
            raise StoreError(f"bad store line {line!r}: expected 5 fields") from exc
        return Triple(
            _parse_term(s_tok),
            _parse_term(p_tok),
            _parse_object(o_tok),
            TimeInterval(_parse_bound(start_tok), _parse_bound(end_tok)),
        )

    @classmethod
    def load(cls, path) -> "KnowledgeBase":
        kb = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    kb.assert_triple(cls.parse_line(line))
        return kb
