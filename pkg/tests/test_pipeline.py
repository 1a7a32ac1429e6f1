import re

import pytest

from planexp.pipeline import RunDir, StageOrderError
from planexp.refine import SHORTEN_REQUEST, BackendError, DeterministicBackend

from conftest import run_full_pipeline


class CountingBackend:
    """Deterministic backend that counts calls and can fail after a budget."""

    def __init__(self, fail_after=None):
        self.calls = 0
        self.fail_after = fail_after
        self._inner = DeterministicBackend()

    def complete(self, messages):
        self.calls += 1
        if self.fail_after is not None and self.calls > self.fail_after:
            raise BackendError("synthetic outage")
        return self._inner.complete(messages)


class TestStageOrder:
    def test_stages_advance_in_order(self, tmp_path):
        run = RunDir(tmp_path)
        assert run.stage is None
        run.generate(1, 4)
        assert run.stage == "ingested"
        run.classify(0.68)
        assert run.stage == "classified"
        run.infer()
        run.narrate()
        run.refine_all(DeterministicBackend())
        run.evaluate(0.5)
        assert run.stage == "evaluated"

    def test_out_of_order_stage_rejected(self, tmp_path):
        run = RunDir(tmp_path)
        run.generate(1, 4)
        with pytest.raises(StageOrderError):
            run.infer()
        with pytest.raises(StageOrderError):
            run.narrate()

    def test_completed_stage_cannot_rerun(self, tmp_path):
        run = RunDir(tmp_path)
        run.generate(1, 4)
        run.classify(0.68)
        with pytest.raises(StageOrderError):
            run.classify(0.68)


class TestArtifacts:
    def test_expected_files_written(self, tmp_path):
        run = run_full_pipeline(tmp_path, n=5)
        for name in (
            "corpus.json",
            "narratives.txt",
            "properties.json",
            "intervals.json",
            "store.nt",
            "labels.json",
            "narratives.jsonl",
            "explanations.jsonl",
            "sessions.json",
            "report.json",
            "report.txt",
        ):
            assert (run.path / name).exists(), name

    def test_plain_text_export_one_paragraph_per_narrative(self, tmp_path):
        run = run_full_pipeline(tmp_path, n=5)
        text = (run.path / "narratives.txt").read_text("utf-8")
        paragraphs = [p for p in text.split("\n\n") if p.strip()]
        assert len(paragraphs) == len(run.narratives())
        assert paragraphs[0] == run.narratives()[0].text

    def test_narrative_rows_cover_three_levels(self, tmp_path):
        run = run_full_pipeline(tmp_path, n=5)
        rows = run.narratives()
        assert len(rows) == 3 * 10
        assert {r.level for r in rows} == {1, 2, 3}

    def test_report_shape(self, tmp_path):
        run = run_full_pipeline(tmp_path, n=5)
        report = run.report()
        assert report["mu0"] == 0.5
        assert len(report["cells"]) == 18
        assert len(report["tests"]) == 9
        assert report["n_pairs"] == {"1": 10, "2": 10, "3": 10}


class TestDeterminism:
    def test_two_runs_are_byte_identical(self, tmp_path):
        run_a = run_full_pipeline(tmp_path / "a", n=6)
        run_b = run_full_pipeline(tmp_path / "b", n=6)
        for name in ("corpus.json", "store.nt", "narratives.jsonl", "explanations.jsonl", "report.json"):
            assert (run_a.path / name).read_bytes() == (run_b.path / name).read_bytes(), name


class TestResumableRefinement:
    def _narrated_run(self, tmp_path):
        run = RunDir(tmp_path)
        run.generate(3, 5)
        run.classify(0.68)
        run.infer()
        run.narrate()
        return run

    def test_resumes_from_checkpoint_without_redoing_work(self, tmp_path):
        run = self._narrated_run(tmp_path)
        flaky = CountingBackend(fail_after=7)
        with pytest.raises(BackendError):
            run.refine_all(flaky, max_workers=1)
        assert run.stage == "narrated"
        assert (run.path / "refine.partial.jsonl").exists()

        total = len(run.narratives())
        second = CountingBackend()
        run.refine_all(second, max_workers=1)
        assert run.stage == "refined"
        assert second.calls == total - 7
        assert not (run.path / "refine.partial.jsonl").exists()

    def test_resumed_run_matches_uninterrupted_run(self, tmp_path):
        interrupted = self._narrated_run(tmp_path / "a")
        with pytest.raises(BackendError):
            interrupted.refine_all(CountingBackend(fail_after=5), max_workers=1)
        interrupted.refine_all(DeterministicBackend(), max_workers=1)

        clean = self._narrated_run(tmp_path / "b")
        clean.refine_all(DeterministicBackend(), max_workers=1)
        def strip_ids(text):
            # session ids are fresh per refinement; compare everything else
            return re.sub(r'"session_id": "[0-9a-f]+"', '"session_id": "-"', text)

        for name in ("explanations.jsonl", "sessions.json"):
            a = (interrupted.path / name).read_text("utf-8")
            b = (clean.path / name).read_text("utf-8")
            assert strip_ids(a) == strip_ids(b), name


class TestFollowUps:
    def test_follow_up_appends_revision(self, tmp_path):
        run = run_full_pipeline(tmp_path, n=4)
        pair_id = run.pair_ids()[0]
        explanation = run.follow_up(pair_id, 3, SHORTEN_REQUEST, DeterministicBackend())
        assert explanation.revision == 1
        rows = [e for e in run.explanations() if e["pair_id"] == pair_id and e["level"] == 3]
        assert [e["revision"] for e in rows] == [0, 1]
        session = run.session(pair_id, 3)
        assert len(session.messages) == 5

    def test_other_pairs_untouched(self, tmp_path):
        run = run_full_pipeline(tmp_path, n=4)
        first, second = run.pair_ids()[:2]
        before = run.session(second, 3).to_json()
        run.follow_up(first, 3, SHORTEN_REQUEST, DeterministicBackend())
        assert run.session(second, 3).to_json() == before

    def test_unknown_pair_rejected(self, tmp_path):
        run = run_full_pipeline(tmp_path, n=4)
        with pytest.raises(Exception):
            run.follow_up("nope--nada", 3, SHORTEN_REQUEST, DeterministicBackend())


class TestPairViews:
    def test_overview_counts_pairs(self, tmp_path):
        run = run_full_pipeline(tmp_path, n=5)
        overview = run.pairs_overview()
        assert len(overview) == 10
        assert all(entry["a_label"] in ("Typical", "Atypical") for entry in overview)

    def test_detail_contains_all_fields(self, tmp_path):
        run = run_full_pipeline(tmp_path, n=4)
        pair_id = run.pair_ids()[0]
        detail = run.pair_detail(pair_id, 3)
        assert detail["narrative"]
        assert detail["explanation"]
        assert detail["metrics"]["n_words"] >= 1
        assert detail["session"]["messages"][0]["role"] == "system"

    def test_detail_before_refinement_has_nulls(self, tmp_path):
        run = RunDir(tmp_path)
        run.generate(1, 4)
        run.classify(0.68)
        run.infer()
        run.narrate()
        detail = run.pair_detail(run.pair_ids()[0], 2)
        assert detail["narrative"]
        assert detail["explanation"] is None
        assert detail["metrics"] is None
        assert detail["session"] is None

    def test_intervals_match_observed_properties(self, tmp_path):
        run = RunDir(tmp_path)
        run.generate(42, 18)
        intervals = run.classify(0.68)
        props = run.properties()
        for kind in ("cost", "makespan", "num_tasks"):
            values = [p[kind if kind != "num_tasks" else "num_tasks"] for p in props]
            iv = intervals[kind]
            assert iv["k"] == 13
            assert sum(1 for v in values if iv["lo"] <= v <= iv["hi"]) >= 13
