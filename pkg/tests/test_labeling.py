import itertools
from collections import Counter

import pytest

from seasonal_ads.corpus import LabeledExample
from seasonal_ads.errors import (
    NoGoldPositivesError,
    TemplateError,
    UnknownLabelError,
    UnknownTaskError,
)
from seasonal_ads.labeling import (
    DEFAULT_TASK_TEMPLATE,
    AggregatedLabel,
    AnnotatorResponse,
    aggregate_majority,
    export_tasks,
    load_responses,
    load_tasks,
    save_responses,
    save_tasks,
    score_against_gold,
)

from conftest import make_ad, TS


def response(task_id, annotator, label):
    return AnnotatorResponse(task_id, annotator, label, TS)


class TestExportTasks:
    def test_no_ads(self, calendar7):
        assert export_tasks([], calendar7, DEFAULT_TASK_TEMPLATE) == []

    def test_counts_and_candidates(self, calendar7):
        ads = [make_ad("a1", "T1", "B1"), make_ad("a2", "T2", "B2")]
        tasks = export_tasks(ads, calendar7, DEFAULT_TASK_TEMPLATE)
        assert len(tasks) == 2
        for task, ad in zip(tasks, ads):
            assert set(task.candidate_labels) == set(calendar7.event_ids)
            assert "none" in task.candidate_labels
            assert ad.title in task.question_text
            assert task.task_id == f"task-{ad.id}"

    def test_template_missing_placeholder(self, calendar7):
        with pytest.raises(TemplateError, match="body"):
            export_tasks([make_ad("a")], calendar7, "Title: {title}\n{events}")

    def test_export_import_round_trip(self, tmp_path, calendar7):
        tasks = export_tasks([make_ad("a1", "T", "B")], calendar7, DEFAULT_TASK_TEMPLATE)
        path = tmp_path / "tasks.jsonl"
        save_tasks(tasks, path)
        assert load_tasks(path) == tasks

    def test_response_round_trip(self, tmp_path, calendar7):
        tasks = export_tasks([make_ad("a1")], calendar7, DEFAULT_TASK_TEMPLATE)
        responses = [response(tasks[0].task_id, "ann1", "easter")]
        path = tmp_path / "responses.jsonl"
        save_responses(responses, path)
        assert load_responses(path) == responses


def brute_force_majority(labels_by_ad):
    """Independent oracle: count every label, compare top counts."""
    out = {}
    for ad_id, labels in labels_by_ad.items():
        counts = Counter(labels)
        top = max(counts.values())
        winners = sorted(l for l, c in counts.items() if c == top)
        out[ad_id] = (winners[0], top, len(labels), "accepted") if len(winners) == 1 else (
            None, top, len(labels), "tied")
    return out


class TestAggregateMajority:
    def tasks_for(self, calendar7, *ad_ids):
        return export_tasks([make_ad(a) for a in ad_ids], calendar7, DEFAULT_TASK_TEMPLATE)

    def test_plurality_wins(self, calendar7):
        tasks = self.tasks_for(calendar7, "a1")
        responses = [
            response("task-a1", "r1", "valentines_day"),
            response("task-a1", "r2", "valentines_day"),
            response("task-a1", "r3", "none"),
        ]
        [label] = aggregate_majority(responses, tasks)
        assert label.event_id == "valentines_day"
        assert label.vote_fraction == pytest.approx(2 / 3)
        assert label.status == "accepted"
        assert label.n_responses == 3

    def test_exact_tie(self, calendar7):
        tasks = self.tasks_for(calendar7, "a1")
        responses = [response("task-a1", "r1", "easter"), response("task-a1", "r2", "none")]
        [label] = aggregate_majority(responses, tasks)
        assert label.status == "tied"
        assert label.event_id is None

    def test_single_voter(self, calendar7):
        tasks = self.tasks_for(calendar7, "a1")
        [label] = aggregate_majority([response("task-a1", "r1", "easter")], tasks)
        assert label.event_id == "easter"
        assert label.vote_fraction == 1.0

    def test_unknown_task(self, calendar7):
        tasks = self.tasks_for(calendar7, "a1")
        with pytest.raises(UnknownTaskError):
            aggregate_majority([response("task-zz", "r1", "easter")], tasks)

    def test_label_outside_candidates(self, calendar7):
        tasks = self.tasks_for(calendar7, "a1")
        with pytest.raises(UnknownLabelError):
            aggregate_majority([response("task-a1", "r1", "not-an-event")], tasks)

    def test_output_sorted_by_ad_id(self, calendar7):
        tasks = self.tasks_for(calendar7, "b", "a")
        responses = [response("task-b", "r1", "easter"), response("task-a", "r1", "none")]
        labels = aggregate_majority(responses, tasks)
        assert [l.ad_id for l in labels] == ["a", "b"]

    def test_matches_brute_force_on_all_small_vote_patterns(self, calendar7):
        # exhaustive: up to 3 annotators x 3 labels
        tasks = self.tasks_for(calendar7, "a1")
        labels3 = ("easter", "valentines_day", "none")
        for n in (1, 2, 3):
            for combo in itertools.product(labels3, repeat=n):
                responses = [response("task-a1", f"r{i}", l) for i, l in enumerate(combo)]
                [got] = aggregate_majority(responses, tasks)
                want_label, want_top, want_n, want_status = brute_force_majority(
                    {"a1": list(combo)}
                )["a1"]
                assert got.event_id == want_label
                assert got.status == want_status
                assert got.n_responses == want_n
                assert got.vote_fraction == pytest.approx(want_top / want_n)


def aggregated(ad_id, event_id, status="accepted"):
    return AggregatedLabel(ad_id, event_id, 1.0, 1, status)


def gold_labels(positive_ids, negative_ids, event="valentines_day"):
    out = [LabeledExample(a, event, "keyword", 1.0, TS) for a in positive_ids]
    out += [LabeledExample(a, "none", "keyword", 1.0, TS) for a in negative_ids]
    return out


class TestScoreAgainstGold:
    def test_identity(self):
        gold = gold_labels(["a", "b"], ["c", "d"])
        labels = [aggregated(a, "valentines_day") for a in ("a", "b")]
        labels += [aggregated(a, "none") for a in ("c", "d")]
        assert score_against_gold(labels, gold, "valentines_day") == (1.0, 1.0, 1.0)

    def test_paper_consistent_counts(self):
        # TP=534, FN=66, FP=356 -> P=0.600, R=0.890, F1~=0.7168,
        # consistent with reported precision 60% / recall 89% / F1 72%
        positives = [f"p{i}" for i in range(600)]
        negatives = [f"n{i}" for i in range(1400)]
        gold = gold_labels(positives, negatives)
        labels = [aggregated(a, "valentines_day") for a in positives[:534]]
        labels += [aggregated(a, "valentines_day") for a in negatives[:356]]
        precision, recall, f1 = score_against_gold(labels, gold, "valentines_day")
        assert precision == pytest.approx(0.600, abs=1e-9)
        assert recall == pytest.approx(0.890, abs=1e-9)
        assert f1 == pytest.approx(0.7168, abs=5e-4)

    def test_tied_counts_as_negative(self):
        gold = gold_labels(["a"], ["b"])
        labels = [aggregated("a", None, status="tied"), aggregated("b", "none")]
        precision, recall, f1 = score_against_gold(labels, gold, "valentines_day")
        assert (precision, recall, f1) == (0.0, 0.0, 0.0)

    def test_no_gold_positives(self):
        gold = gold_labels([], ["a", "b"])
        with pytest.raises(NoGoldPositivesError):
            score_against_gold([aggregated("a", "none")], gold, "valentines_day")

    def test_f1_between_precision_and_recall(self):
        gold = gold_labels([f"p{i}" for i in range(10)], [f"n{i}" for i in range(10)])
        labels = [aggregated(f"p{i}", "valentines_day") for i in range(7)]
        labels += [aggregated(f"n{i}", "valentines_day") for i in range(2)]
        precision, recall, f1 = score_against_gold(labels, gold, "valentines_day")
        assert min(precision, recall) <= f1 <= max(precision, recall)
