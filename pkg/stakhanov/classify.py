# =============================================================================
# Stakhanov Classify
# =============================================================================
#
# Ranking of units within each (discipline, period) cohort and assignment of
# the nested top performers classes. Classes are tie-inclusive: every unit
# whose measure reaches the value found at the cutoff rank belongs to the
# class.
#
from typing import Sequence, List, Tuple, Dict, FrozenSet, Iterable, Optional

import math
import numpy as np
from fractions import Fraction
from dataclasses import dataclass
from ebbe import grouped

from stakhanov.panel import AuthorPeriodUnit
from stakhanov.utils import parallel_map, format_threshold


@dataclass(frozen=True)
class TopClassAssignment:
    author_id: str
    period_index: int
    discipline: str
    measure: str
    rank: int
    cohort_size: int
    classes: FrozenSet[float]

    @property
    def key(self) -> Tuple[str, int]:
        return (self.author_id, self.period_index)

    def is_top(self, threshold: float) -> bool:
        return threshold in self.classes

    # Convenience accessors for the default thresholds
    @property
    def is_top1(self) -> bool:
        return self.is_top(1)

    @property
    def is_top3(self) -> bool:
        return self.is_top(3)

    @property
    def is_top5(self) -> bool:
        return self.is_top(5)

    @property
    def is_top10(self) -> bool:
        return self.is_top(10)

    def as_row(self, thresholds: Sequence[float]) -> List:
        row = [
            self.author_id,
            self.period_index,
            self.discipline,
            self.measure,
            self.rank,
            self.cohort_size,
        ]

        row.extend(self.is_top(t) for t in sorted(thresholds, reverse=True))

        return row


def assignment_fieldnames(thresholds: Sequence[float]) -> List[str]:
    return [
        "author_id",
        "period",
        "discipline",
        "measure",
        "rank",
        "cohort_size",
    ] + [format_threshold(t) for t in sorted(thresholds, reverse=True)]


def cutoff_index(threshold: float, n: int) -> int:
    """
    Number of units nominally in the top `threshold` percent of a cohort of
    size `n`: max(1, floor(threshold * n / 100)).
    """
    # NOTE: going through the decimal representation keeps 2.5% & co exact
    k = math.floor(Fraction(str(threshold)) * n / 100)

    return max(1, k)


def rank_cohort(
    values: Sequence[float], thresholds: Sequence[float]
) -> Tuple[List[int], List[FrozenSet[float]]]:
    """
    Returns, for each value, its competition rank (1 = highest, ties share
    the best rank) and the set of thresholds whose class it belongs to.
    """
    n = len(values)

    if n == 0:
        return [], []

    array = np.asarray(values, dtype=float)
    ascending = np.sort(array)
    descending = ascending[::-1]

    # Rank = 1 + number of strictly greater values
    greater = n - np.searchsorted(ascending, array, side="right")
    ranks = (greater + 1).tolist()

    cutoffs = [(t, descending[cutoff_index(t, n) - 1]) for t in thresholds]

    classes = [
        frozenset(t for t, v in cutoffs if value >= v) for value in array.tolist()
    ]

    return ranks, classes


def classify(
    units: Sequence[AuthorPeriodUnit], measure: str, thresholds: Sequence[float]
) -> List[TopClassAssignment]:
    """
    Classifies a single cohort, i.e. units of one discipline in one period.
    """
    if not units:
        return []

    ranks, classes = rank_cohort([u.value(measure) for u in units], thresholds)
    n = len(units)

    return [
        TopClassAssignment(
            author_id=unit.author_id,
            period_index=unit.period_index,
            discipline=unit.discipline,
            measure=measure,
            rank=rank,
            cohort_size=n,
            classes=member_of,
        )
        for unit, rank, member_of in zip(units, ranks, classes)
    ]


def cohorts(
    units: Iterable[AuthorPeriodUnit],
) -> Dict[Tuple[str, int], List[AuthorPeriodUnit]]:
    return dict(
        sorted(grouped(units, key=lambda u: (u.discipline, u.period_index)).items())
    )


def classify_panel(
    units: Sequence[AuthorPeriodUnit],
    measures: Sequence[str],
    thresholds: Sequence[float],
    threads: int = 1,
) -> List[TopClassAssignment]:
    """
    Classifies every (discipline, period) cohort for every measure and
    returns assignments sorted by (measure, period, author).
    """
    tasks = [
        (measure, cohort)
        for measure in measures
        for cohort in cohorts(units).values()
    ]

    assignments = []

    for batch in parallel_map(
        lambda task: classify(task[1], task[0], thresholds), tasks, threads
    ):
        assignments.extend(batch)

    assignments.sort(key=lambda a: (a.measure, a.period_index, a.author_id))

    return assignments


def class_label(assignment: TopClassAssignment, thresholds: Sequence[float]) -> str:
    """
    Narrowest class the unit belongs to, or "rest".
    """
    for t in sorted(thresholds):
        if assignment.is_top(t):
            return format_threshold(t)

    return "rest"


def index_assignments(
    assignments: Iterable[TopClassAssignment], measure: Optional[str] = None
) -> Dict[Tuple[str, int], TopClassAssignment]:
    return {
        a.key: a for a in assignments if measure is None or a.measure == measure
    }


@dataclass(frozen=True)
class CountRow:
    group: Tuple
    threshold: float
    measure: str
    count: int
    group_size: int

    @property
    def percent(self) -> float:
        return 100 * self.count / self.group_size


def class_counts(
    units: Sequence[AuthorPeriodUnit],
    assignments: Sequence[TopClassAssignment],
    thresholds: Sequence[float],
    by: Sequence[str] = (),
) -> List[CountRow]:
    """
    Counts class members by any combination of unit dimensions (period,
    discipline, gender, affiliation, age_group). Percentages are taken over
    the units of the group that were ranked on the same measure.
    """
    lookup = {u.key: u for u in units}
    rows = []

    for measure, measure_assignments in sorted(
        grouped(assignments, key=lambda a: a.measure).items()
    ):
        groups = grouped(
            measure_assignments,
            key=lambda a: tuple(lookup[a.key].dimension(d) for d in by),
        )

        for group, members in sorted(groups.items()):
            for t in thresholds:
                rows.append(
                    CountRow(
                        group=group,
                        threshold=t,
                        measure=measure,
                        count=sum(1 for a in members if a.is_top(t)),
                        group_size=len(members),
                    )
                )

    return rows
