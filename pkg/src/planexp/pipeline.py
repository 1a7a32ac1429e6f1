"""Stage orchestration over a run directory of flat-file artifacts.

Each pipeline stage reads the previous stage's files and writes its own, so
every step is resumable and inspectable:

    corpus.json        ingested experiences
    properties.json    extracted plan properties
    store.nt           knowledge-base export (classify, then infer, update it)
    intervals.json     per-property HDI intervals
    labels.json        per-plan typicality after inference
    narratives.jsonl   one narrative per (pair, level)
    explanations.jsonl refined explanations, append-only across revisions
    sessions.json      chat sessions backing the explanations
    report.json/.txt   evaluation summary

All stage outputs are byte-deterministic for fixed inputs and the
deterministic backend.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import metrics, refine
from .experiences import (
    GenConfig,
    extract_properties,
    generate_synthetic,
    ground_properties,
    load_experiences,
    records_from_json,
    records_to_json,
)
from .inference import run_all
from .kstore import KnowledgeBase
from .narrative import Specificity, narrate_all
from .stats import PairMetrics, build_summary
from .typicality import classify_corpus
from .vocab import IS_CLASSIFIED_BY, TYPICAL_PLAN, plan_term

STAGES = ("ingested", "classified", "inferred", "narrated", "refined", "evaluated")


class PipelineError(RuntimeError):
    pass


class StageOrderError(PipelineError):
    """A stage was requested before its predecessor completed."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def _write_atomic(path: Path, text: str) -> None:
    # Polling readers (the service job status) must never see a half-written
    # file, so write to a sibling temp file and rename over the target.
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class NarrativeRow:
    """One narratives.jsonl line; duck-types the narrative for refinement."""

    pair_id: str
    a: str
    b: str
    level: int
    text: str
    tuple_count: int

    @property
    def ref(self) -> str:
        return f"{self.a}--{self.b}#L{self.level}"


class RunDir:
    """One pipeline run rooted at a directory."""

    def __init__(self, path) -> None:
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)

    # -- state ---------------------------------------------------------------

    @property
    def state_file(self) -> Path:
        return self.path / "state.json"

    def state(self) -> dict:
        if not self.state_file.exists():
            return {"stage": None, "params": {}}
        return json.loads(self.state_file.read_text("utf-8"))

    def _write_state(self, stage: str, **params) -> dict:
        st = self.state()
        st["stage"] = stage
        st.setdefault("params", {}).update(params)
        _write_atomic(self.state_file, json.dumps(st, indent=2, sort_keys=True) + "\n")
        return st

    @property
    def stage(self) -> str | None:
        return self.state()["stage"]

    def stage_index(self) -> int:
        st = self.stage
        return STAGES.index(st) if st in STAGES else -1

    def _require(self, needed: str) -> None:
        if self.stage_index() < STAGES.index(needed):
            raise StageOrderError(
                f"stage {needed!r} is not complete yet (run is at {self.stage!r})"
            )

    def check_next(self, stage: str) -> None:
        if stage not in STAGES:
            raise PipelineError(f"unknown stage {stage!r}")
        expected = STAGES[self.stage_index() + 1] if self.stage_index() + 1 < len(STAGES) else None
        if stage != expected:
            raise StageOrderError(
                f"cannot advance to {stage!r} from {self.stage!r}; next stage is {expected!r}"
            )

    # -- ingestion -----------------------------------------------------------

    def ingest_records(self, records) -> None:
        (self.path / "corpus.json").write_text(
            json.dumps(records_to_json(records), indent=2, sort_keys=True) + "\n", "utf-8"
        )
        self._write_state("ingested", n_plans=len(records))

    def ingest_file(self, corpus_path) -> int:
        records = load_experiences(corpus_path)
        self.ingest_records(records)
        return len(records)

    def generate(self, seed: int, n: int, cfg: GenConfig = GenConfig()) -> int:
        records = generate_synthetic(seed, n, cfg)
        self.ingest_records(records)
        self._write_state("ingested", seed=seed)
        return len(records)

    def records(self):
        self._require("ingested")
        return records_from_json(json.loads((self.path / "corpus.json").read_text("utf-8")))

    # -- classification --------------------------------------------------------

    def classify(self, alpha: float) -> dict:
        self.check_next("classified")
        records = self.records()
        props = [extract_properties(r) for r in records]
        kb = KnowledgeBase()
        for p in props:
            ground_properties(kb, p)
        intervals = classify_corpus(kb, props, alpha)
        kb.dump(self.path / "store.nt")
        (self.path / "properties.json").write_text(
            _dumps(
                [
                    {
                        "plan_id": p.plan_id,
                        "num_tasks": p.num_tasks,
                        "makespan": p.makespan,
                        "cost": p.cost,
                    }
                    for p in props
                ]
            )
            + "\n",
            "utf-8",
        )
        intervals_json = {
            kind.value: {"lo": iv.lo, "hi": iv.hi, "k": iv.k, "alpha": iv.alpha}
            for kind, iv in intervals.items()
        }
        (self.path / "intervals.json").write_text(_dumps(intervals_json) + "\n", "utf-8")
        self._write_state("classified", alpha=alpha)
        return intervals_json

    def properties(self) -> list[dict]:
        self._require("classified")
        return json.loads((self.path / "properties.json").read_text("utf-8"))

    def kb(self) -> KnowledgeBase:
        self._require("classified")
        return KnowledgeBase.load(self.path / "store.nt")

    def plan_ids(self) -> list[str]:
        return sorted(p["plan_id"] for p in self.properties())

    # -- inference -------------------------------------------------------------

    def infer(self) -> dict:
        self.check_next("inferred")
        kb = self.kb()
        summary = run_all(kb, self.plan_ids())
        kb.dump(self.path / "store.nt")
        labels = {}
        for plan_id in self.plan_ids():
            found = kb.query(subject=plan_term(plan_id), predicate=IS_CLASSIFIED_BY)
            labels[plan_id] = "Typical" if found and found[0].object == TYPICAL_PLAN else "Atypical"
        (self.path / "labels.json").write_text(_dumps(labels) + "\n", "utf-8")
        out = {
            "pairs_compared": summary.pairs_compared,
            "typical": summary.typical,
            "atypical": summary.atypical,
        }
        (self.path / "summary.json").write_text(_dumps(out) + "\n", "utf-8")
        self._write_state("inferred")
        return out

    def labels(self) -> dict:
        self._require("inferred")
        return json.loads((self.path / "labels.json").read_text("utf-8"))

    # -- narration ---------------------------------------------------------------

    def narrate(self, levels=(1, 2, 3)) -> int:
        self.check_next("narrated")
        kb = self.kb()
        rows = []
        for level in levels:
            for n in narrate_all(kb, Specificity(level)):
                rows.append(
                    {
                        "pair_id": f"{n.a}--{n.b}",
                        "a": n.a,
                        "b": n.b,
                        "level": int(n.level),
                        "text": n.text,
                        "tuple_count": len(n.tuples),
                    }
                )
        with open(self.path / "narratives.jsonl", "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(_dumps(row) + "\n")
        # Plain-text companion: one narrative per paragraph.
        with open(self.path / "narratives.txt", "w", encoding="utf-8") as fh:
            fh.write("\n\n".join(row["text"] for row in rows) + "\n")
        self._write_state("narrated", levels=list(levels))
        return len(rows)

    def narratives(self) -> list[NarrativeRow]:
        self._require("narrated")
        rows = []
        with open(self.path / "narratives.jsonl", encoding="utf-8") as fh:
            for line in fh:
                obj = json.loads(line)
                rows.append(
                    NarrativeRow(
                        pair_id=obj["pair_id"],
                        a=obj["a"],
                        b=obj["b"],
                        level=obj["level"],
                        text=obj["text"],
                        tuple_count=obj["tuple_count"],
                    )
                )
        return rows

    # -- refinement ----------------------------------------------------------------

    def refine_all(self, backend, backend_name: str = "deterministic", max_workers: int = 4) -> int:
        """Refine every narrative; progress is checkpointed per narrative id.

        A backend outage mid-corpus leaves a partial checkpoint behind, and a
        later call resumes from it instead of re-refining finished narratives.
        The final artifacts are rewritten in narrative order, so a resumed run
        is byte-identical to an uninterrupted one.
        """
        self.check_next("refined")
        rows = self.narratives()
        checkpoint = self.path / "refine.partial.jsonl"
        done: dict[tuple[str, int], dict] = {}
        if checkpoint.exists():
            with open(checkpoint, encoding="utf-8") as fh:
                for line in fh:
                    entry = json.loads(line)
                    key = (entry["explanation"]["pair_id"], entry["explanation"]["level"])
                    done[key] = entry
        todo = [r for r in rows if (r.pair_id, r.level) not in done]
        lock = threading.Lock()

        def work(row: NarrativeRow) -> None:
            explanation, session = refine.refine(row, backend)
            entry = {
                "explanation": {
                    "pair_id": row.pair_id,
                    "level": row.level,
                    "revision": 0,
                    "text": explanation.text,
                    "narrative_ref": explanation.narrative_ref,
                    "n_words": metrics.word_count(explanation.text),
                },
                "session": session.to_json(),
            }
            with lock:
                done[(row.pair_id, row.level)] = entry
                with open(checkpoint, "a", encoding="utf-8") as fh:
                    fh.write(_dumps(entry) + "\n")

        if todo:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                list(pool.map(work, todo))

        sessions = {}
        with open(self.path / "explanations.jsonl", "w", encoding="utf-8") as fh:
            for row in rows:
                entry = done[(row.pair_id, row.level)]
                fh.write(_dumps(entry["explanation"]) + "\n")
                sessions[f"{row.pair_id}#L{row.level}"] = entry["session"]
        _write_atomic(self.path / "sessions.json", _dumps(sessions) + "\n")
        checkpoint.unlink(missing_ok=True)
        self._write_state("refined", backend=backend_name)
        return len(rows)

    def explanations(self) -> list[dict]:
        self._require("refined")
        with open(self.path / "explanations.jsonl", encoding="utf-8") as fh:
            return [json.loads(line) for line in fh]

    def sessions(self) -> dict:
        self._require("refined")
        return json.loads((self.path / "sessions.json").read_text("utf-8"))

    def session(self, pair_id: str, level: int) -> refine.RefinementSession:
        key = f"{pair_id}#L{level}"
        sessions = self.sessions()
        if key not in sessions:
            raise PipelineError(f"no refinement session for pair {pair_id!r} level {level}")
        return refine.RefinementSession.from_json(sessions[key])

    def follow_up(self, pair_id: str, level: int, request: str, backend) -> refine.Explanation:
        session = self.session(pair_id, level)
        explanation = refine.follow_up(session, request, backend)
        sessions = self.sessions()
        sessions[f"{pair_id}#L{level}"] = session.to_json()
        _write_atomic(self.path / "sessions.json", _dumps(sessions) + "\n")
        with open(self.path / "explanations.jsonl", "a", encoding="utf-8") as fh:
            fh.write(
                _dumps(
                    {
                        "pair_id": pair_id,
                        "level": level,
                        "revision": explanation.revision,
                        "text": explanation.text,
                        "narrative_ref": explanation.narrative_ref,
                        "n_words": metrics.word_count(explanation.text),
                    }
                )
                + "\n"
            )
        return explanation

    # -- evaluation -------------------------------------------------------------------

    def evaluate(self, mu0: float, stopwords_path=None) -> dict:
        self.check_next("evaluated")
        stopwords = metrics.load_stopwords(stopwords_path) if stopwords_path else None
        narratives = {(r.pair_id, r.level): r for r in self.narratives()}
        revision0 = {
            (e["pair_id"], e["level"]): e for e in self.explanations() if e["revision"] == 0
        }
        per_level: dict[int, list[PairMetrics]] = {1: [], 2: [], 3: []}
        for (pair_id, level), row in sorted(narratives.items()):
            expl = revision0.get((pair_id, level))
            if expl is None:
                raise PipelineError(f"pair {pair_id!r} level {level} has no explanation")
            baseline = metrics.MetricsReport(
                n_words=metrics.word_count(row.text), fres=metrics.fres(row.text)
            )
            refined = metrics.report(row.text, expl["text"], stopwords)
            per_level[level].append(PairMetrics(pair_id, baseline, refined))
        table = build_summary(per_level, mu0)
        report = {"mu0": mu0, **table.to_json()}
        (self.path / "report.json").write_text(_dumps(report) + "\n", "utf-8")
        (self.path / "report.txt").write_text(table.render_text(), "utf-8")
        self._write_state("evaluated", mu0=mu0)
        return report

    def report(self) -> dict:
        self._require("evaluated")
        return json.loads((self.path / "report.json").read_text("utf-8"))

    # -- read-model for pairs ------------------------------------------------------

    def pair_ids(self) -> list[str]:
        seen: list[str] = []
        for row in self.narratives():
            if row.pair_id not in seen:
                seen.append(row.pair_id)
        return seen

    def pairs_overview(self) -> list[dict]:
        self._require("narrated")
        labels = self.labels()
        stage_i = self.stage_index()
        explained: set[tuple[str, int]] = set()
        if stage_i >= STAGES.index("refined"):
            explained = {(e["pair_id"], e["level"]) for e in self.explanations()}
        out = []
        for row in self.narratives():
            if row.level != 1:
                continue
            out.append(
                {
                    "pair_id": row.pair_id,
                    "a": row.a,
                    "b": row.b,
                    "a_label": labels.get(row.a),
                    "b_label": labels.get(row.b),
                    "explained": (row.pair_id, 3) in explained or (row.pair_id, 1) in explained,
                }
            )
        return out

    def pair_detail(self, pair_id: str, level: int) -> dict:
        self._require("narrated")
        stage_i = self.stage_index()
        narrative = next(
            (r for r in self.narratives() if r.pair_id == pair_id and r.level == level), None
        )
        if narrative is None:
            raise KeyError(f"unknown pair {pair_id!r} at level {level}")
        detail: dict = {
            "pair_id": pair_id,
            "a": narrative.a,
            "b": narrative.b,
            "level": level,
            "narrative": narrative.text,
            "narrative_n_words": metrics.word_count(narrative.text),
            "explanation": None,
            "revision": None,
            "metrics": None,
            "session": None,
        }
        labels = self.labels()
        detail["a_label"] = labels.get(narrative.a)
        detail["b_label"] = labels.get(narrative.b)
        if stage_i >= STAGES.index("refined"):
            revisions = [
                e for e in self.explanations() if e["pair_id"] == pair_id and e["level"] == level
            ]
            if revisions:
                latest = max(revisions, key=lambda e: e["revision"])
                detail["explanation"] = latest["text"]
                detail["revision"] = latest["revision"]
                detail["revisions"] = revisions
                detail["metrics"] = metrics.report(narrative.text, latest["text"]).to_json()
                detail["session"] = self.session(pair_id, level).to_json()
        return detail
