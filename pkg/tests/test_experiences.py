import json
import random

import pytest

from planexp.experiences import (
    Action,
    Actor,
    CorpusError,
    ExperienceRecord,
    GenConfig,
    GroundingConflictError,
    PlanProperties,
    TaskEvent,
    extract_properties,
    generate_synthetic,
    ground_properties,
    load_experiences,
    save_experiences,
)
from planexp.kstore import KnowledgeBase, Literal
from planexp.vocab import HAS_VALUE, IS_QUALITY_OF, PropertyKind, plan_term, quality_term


def robot_inspections(n, each=2.35, doubt_at=()):
    events = []
    t = 0.0
    for i in range(n):
        events.append(
            TaskEvent(Actor.ROBOT, Action.INSPECT, f"case{i:02d}", t, t + each, i in doubt_at)
        )
        t += each
    return events, t


class TestExtractProperties:
    def test_no_doubts_twelve_inspections(self):
        events, _ = robot_inspections(12)
        props = extract_properties(ExperienceRecord("X", tuple(events)))
        assert (props.num_tasks, round(props.makespan, 2), props.cost) == (12, 28.20, 0)

    def test_doubts_add_re_inspections(self):
        # Oracle: counts and max-min over the explicit event list.
        events, t = robot_inspections(12, doubt_at=(2, 5, 9))
        for i, item in enumerate(("case02", "case05", "case09")):
            events.append(TaskEvent(Actor.HUMAN, Action.RE_INSPECT, item, t, t + 4.05))
            t += 4.05
        rec = ExperienceRecord("Y", tuple(events))
        expected_tasks = len(events)
        expected_makespan = max(e.end for e in events) - min(e.start for e in events)
        expected_cost = sum(1 for e in events if e.doubted)
        props = extract_properties(rec)
        assert props.num_tasks == expected_tasks == 15
        assert props.makespan == pytest.approx(expected_makespan)
        assert round(props.makespan, 2) == 40.35
        assert props.cost == expected_cost == 3

    def test_single_event(self):
        rec = ExperienceRecord("Z", (TaskEvent(Actor.ROBOT, Action.INSPECT, "c", 0.0, 5.0),))
        props = extract_properties(rec)
        assert (props.num_tasks, props.makespan, props.cost) == (1, 5.0, 0)

    def test_depends_only_on_event_multiset(self):
        rng = random.Random(7)
        for rec in generate_synthetic(11, 10):
            props = extract_properties(rec)
            events = list(rec.events)
            rng.shuffle(events)
            assert props.num_tasks == len(events)
            assert props.makespan == pytest.approx(
                max(e.end for e in events) - min(e.start for e in events)
            )
            assert props.cost == sum(1 for e in events if e.doubted)


class TestInvariants:
    def test_event_start_after_end_rejected(self):
        with pytest.raises(CorpusError):
            TaskEvent(Actor.ROBOT, Action.INSPECT, "c", 5.0, 1.0)

    def test_doubted_human_event_rejected(self):
        with pytest.raises(CorpusError):
            TaskEvent(Actor.HUMAN, Action.INSPECT, "c", 0.0, 1.0, doubted=True)

    def test_empty_events_rejected(self):
        with pytest.raises(CorpusError):
            ExperienceRecord("P", ())

    def test_unsorted_events_rejected(self):
        events = (
            TaskEvent(Actor.ROBOT, Action.INSPECT, "a", 5.0, 6.0),
            TaskEvent(Actor.ROBOT, Action.INSPECT, "b", 0.0, 1.0),
        )
        with pytest.raises(CorpusError):
            ExperienceRecord("P", events)

    def test_cost_bounded_by_num_tasks(self):
        with pytest.raises(CorpusError):
            PlanProperties("P", num_tasks=2, makespan=1.0, cost=3)


class TestCorpusFile:
    def test_load_18_plans(self, tmp_path):
        path = tmp_path / "corpus.json"
        save_experiences(path, generate_synthetic(42, 18))
        assert len(load_experiences(path)) == 18

    def test_empty_file_gives_empty_list(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        assert load_experiences(path) == []

    def test_duplicate_plan_id_names_the_id(self, tmp_path):
        records = generate_synthetic(1, 1)
        path = tmp_path / "dup.json"
        from planexp.experiences import records_to_json

        doubled = records_to_json(records) * 2
        path.write_text(json.dumps(doubled))
        with pytest.raises(CorpusError, match="E01"):
            load_experiences(path)

    def test_missing_field_is_diagnosed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps([{"plan_id": "P", "events": [{"actor": "robot"}]}]))
        with pytest.raises(CorpusError, match="missing field"):
            load_experiences(path)

    def test_round_trip_reproduces_records(self, tmp_path):
        records = generate_synthetic(5, 7)
        path = tmp_path / "corpus.json"
        save_experiences(path, records)
        assert load_experiences(path) == records


class TestGenerator:
    def test_deterministic_for_fixed_seed(self):
        assert generate_synthetic(42, 18) == generate_synthetic(42, 18)

    def test_zero_doubt_probability_means_zero_cost(self):
        cfg = GenConfig(doubt_prob=0.0)
        for rec in generate_synthetic(3, 6, cfg):
            assert extract_properties(rec).cost == 0

    def test_full_doubt_probability_doubles_tray(self):
        cfg = GenConfig(tray_size=10, doubt_prob=1.0)
        for rec in generate_synthetic(3, 6, cfg):
            props = extract_properties(rec)
            assert props.cost == 10
            assert props.num_tasks == 20

    def test_cost_equals_re_inspection_count(self):
        for rec in generate_synthetic(9, 12):
            re_inspections = sum(1 for e in rec.events if e.action is Action.RE_INSPECT)
            assert extract_properties(rec).cost == re_inspections

    def test_doubted_events_have_matching_re_inspection(self):
        for rec in generate_synthetic(4, 8):
            doubted = [e.item for e in rec.events if e.doubted]
            re_inspected = [e.item for e in rec.events if e.action is Action.RE_INSPECT]
            assert doubted == re_inspected

    def test_invalid_config_rejected(self):
        with pytest.raises(CorpusError):
            GenConfig(doubt_prob=1.5)
        with pytest.raises(CorpusError):
            GenConfig(duration_min=3.0, duration_max=1.0)


class TestGrounding:
    def test_value_literal_present(self):
        kb = KnowledgeBase()
        ground_properties(kb, PlanProperties("X", 12, 28.20, 0))
        values = kb.query(subject=quality_term("X", PropertyKind.MAKESPAN), predicate=HAS_VALUE)
        assert [v.object for v in values] == [Literal(28.2)]
        assert values[0].object.display() == "28.20"

    def test_three_quality_entities_per_plan(self):
        kb = KnowledgeBase()
        props = [extract_properties(r) for r in generate_synthetic(2, 5)]
        for p in props:
            ground_properties(kb, p)
        from planexp.vocab import DUL_QUALITY, RDF_TYPE

        assert len(kb.query(predicate=RDF_TYPE, object=DUL_QUALITY)) == 3 * len(props)

    def test_three_quality_links_per_plan(self):
        kb = KnowledgeBase()
        ground_properties(kb, PlanProperties("X", 12, 28.20, 0))
        assert len(kb.query(predicate=IS_QUALITY_OF, object=plan_term("X"))) == 3

    def test_regrounding_same_values_is_noop(self):
        kb = KnowledgeBase()
        p = PlanProperties("X", 12, 28.20, 0)
        ground_properties(kb, p)
        before = len(kb)
        ground_properties(kb, p)
        assert len(kb) == before

    def test_regrounding_different_values_fails(self):
        kb = KnowledgeBase()
        ground_properties(kb, PlanProperties("X", 12, 28.20, 0))
        with pytest.raises(GroundingConflictError):
            ground_properties(kb, PlanProperties("X", 12, 29.00, 0))
