# =============================================================================
# Stakhanov Classify Unit Tests
# =============================================================================
import pytest
from hypothesis import given, settings
from hypothesis.strategies import lists, integers, floats, sampled_from

from stakhanov.config import load_config
from stakhanov.ingest import CorpusPaths, load_corpus, derive_first_pub_year
from stakhanov.panel import build_panel
from stakhanov.productivity import compute_productivity
from stakhanov.classify import (
    cutoff_index,
    rank_cohort,
    classify,
    classify_panel,
    class_label,
    class_counts,
    index_assignments,
    assignment_fieldnames,
)

from test.utils import (
    CORPUS_DIR,
    CONFIG_PATH,
    make_unit,
    brute_force_members,
    brute_force_ranks,
)

THRESHOLDS = (1, 3, 5, 10)


def fixture_assignments(measures=("p1", "p3")):
    config = load_config(CONFIG_PATH)
    corpus = load_corpus(CorpusPaths.from_directory(CORPUS_DIR), config)
    panel = build_panel(corpus, config, derive_first_pub_year(corpus))
    units = compute_productivity(panel.units, corpus, config)

    return units, classify_panel(units, measures, config.thresholds)


class TestCutoff(object):
    def test_cutoff_index(self):
        assert cutoff_index(10, 100) == 10
        assert cutoff_index(10, 99) == 9
        assert cutoff_index(1, 50) == 1
        assert cutoff_index(1, 250) == 2
        assert cutoff_index(3, 1000) == 30
        assert cutoff_index(2.5, 200) == 5
        assert cutoff_index(10, 1) == 1

    def test_rank_cohort(self):
        ranks, classes = rank_cohort([3.0, 5.0, 5.0, 1.0], [10, 50])

        assert ranks == [3, 1, 1, 4]

        # Top 50% of 4 is 2 units, both tied at 5
        assert classes[1] == frozenset([10, 50])
        assert classes[2] == frozenset([10, 50])
        assert classes[0] == frozenset()

        assert rank_cohort([], [10]) == ([], [])

    def test_ties_at_the_cutoff_are_included(self):
        values = [10.0] + [5.0] * 9 + [1.0] * 10
        _, classes = rank_cohort(values, [5, 10])

        # Top 5% is the single best unit, top 10% cuts at 5.0: every unit
        # sharing that value joins the class
        assert sum(1 for c in classes if 5 in c) == 1
        assert sum(1 for c in classes if 10 in c) == 10

    def test_all_equal(self):
        ranks, classes = rank_cohort([2.0] * 7, [1, 10])

        assert ranks == [1] * 7
        assert all(c == frozenset([1, 10]) for c in classes)

    @settings(max_examples=200)
    @given(
        lists(
            floats(min_value=0, max_value=100, allow_nan=False, allow_infinity=False),
            min_size=1,
            max_size=120,
        ),
        sampled_from([1, 2.5, 3, 5, 10, 25]),
    )
    def test_against_brute_force(self, values, threshold):
        ranks, classes = rank_cohort(values, [threshold])

        assert ranks == brute_force_ranks(values)
        assert set(i for i, c in enumerate(classes) if threshold in c) == (
            brute_force_members(values, threshold)
        )

    @given(
        lists(integers(min_value=0, max_value=20), min_size=1, max_size=200),
    )
    def test_nested_classes(self, values):
        _, classes = rank_cohort([float(v) for v in values], THRESHOLDS)

        for member_of in classes:
            for narrow, wide in zip(THRESHOLDS, THRESHOLDS[1:]):
                if narrow in member_of:
                    assert wide in member_of

        # Classes are never empty and at least as large as their nominal size
        for t in THRESHOLDS:
            size = sum(1 for c in classes if t in c)
            assert size >= cutoff_index(t, len(values))


class TestClassify(object):
    def test_fixture_classes(self):
        _, assignments = fixture_assignments()
        p1 = index_assignments(assignments, measure="p1")

        top = sorted(key for key, a in p1.items() if a.is_top10)

        assert top == [("A1", 0), ("A2", 1), ("A4", 1)]

        for key in top:
            assert p1[key].is_top1
            assert p1[key].rank == 1

        assert p1[("A2", 0)].rank == 2
        assert p1[("F1", 0)].rank == 3
        assert p1[("F1", 0)].cohort_size == 3
        assert p1[("A2", 1)].cohort_size == 1
        assert p1[("A3", 1)].discipline == "PHYS"

        p3 = index_assignments(assignments, measure="p3")

        assert p3[("A1", 0)].rank == 1
        assert p3[("A2", 0)].rank == 1
        assert p3[("A1", 0)].is_top1
        assert p3[("A2", 0)].is_top1
        assert not p3[("F1", 0)].is_top10

        assert sorted(k for k, a in p3.items() if a.is_top1) == [
            ("A1", 0),
            ("A2", 0),
            ("A2", 1),
            ("A3", 1),
            ("A4", 1),
        ]

    def test_order_and_threads(self):
        units, assignments = fixture_assignments()

        keys = [(a.measure, a.period_index, a.author_id) for a in assignments]

        assert keys == sorted(keys)

        assert classify_panel(units, ("p1", "p3"), THRESHOLDS, threads=4) == assignments

    def test_class_label(self):
        units = [make_unit("A%i" % i, p1=float(i)) for i in range(40)]
        assignments = classify(units, "p1", THRESHOLDS)
        labels = {a.author_id: class_label(a, THRESHOLDS) for a in assignments}

        assert labels["A39"] == "top1"
        assert labels["A38"] == "top5"
        assert labels["A37"] == "top10"
        assert labels["A36"] == "top10"
        assert labels["A35"] == "rest"

    def test_csv_row(self):
        unit = make_unit("A1", p1=2.0)
        (assignment,) = classify([unit], "p1", [1, 10])

        assert assignment_fieldnames([1, 10]) == [
            "author_id",
            "period",
            "discipline",
            "measure",
            "rank",
            "cohort_size",
            "top10",
            "top1",
        ]

        assert assignment.as_row([1, 10]) == ["A1", 0, "CHEM", "p1", 1, 1, True, True]

    def test_class_counts(self):
        units = [
            make_unit("M%i" % i, gender="M", p1=float(i)) for i in range(10)
        ] + [make_unit("F%i" % i, gender="F", p1=float(i) + 0.5) for i in range(10)]

        assignments = classify(units, "p1", [10])
        rows = class_counts(units, assignments, [10], by=["gender"])

        assert [(r.group, r.count, r.group_size) for r in rows] == [
            (("F",), 1, 10),
            (("M",), 1, 10),
        ]

        assert rows[0].percent == pytest.approx(10)
