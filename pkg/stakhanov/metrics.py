# =============================================================================
# Stakhanov Metrics
# =============================================================================
#
# Aggregations over classified units: concentration shares, the Relative
# Presence Index, distribution tables, cross-measure correlations and the
# longitudinal persistence of class membership.
#
from typing import Sequence, List, Tuple, Dict, Optional, Iterable

import math
import logging
import numpy as np
from fractions import Fraction
from itertools import combinations
from dataclasses import dataclass
from ebbe import grouped, format_int

from stakhanov.types import MEASURES, GroupKey
from stakhanov.panel import AuthorPeriodUnit
from stakhanov.classify import TopClassAssignment, index_assignments, class_label
from stakhanov.utils import format_threshold

logger = logging.getLogger(__name__)

GENDERED = ("M", "F")


def group_units(
    units: Iterable[AuthorPeriodUnit], by: Sequence[str]
) -> List[Tuple[Tuple, List[AuthorPeriodUnit]]]:
    # NOTE: units of unknown gender cannot be split by gender
    if "gender" in by:
        units = (u for u in units if u.gender in GENDERED)

    groups = grouped(units, key=lambda u: tuple(u.dimension(d) for d in by))

    return sorted(groups.items())


# Concentration shares
@dataclass(frozen=True)
class ShareRow:
    group: GroupKey
    class_label: str
    measure: str
    basis: str
    share_percent: float
    numerator: float
    denominator: float


def basis_value(unit: AuthorPeriodUnit, measure: str, basis: str) -> float:
    if basis == "measure":
        return unit.value(measure)

    if basis == "full":
        return unit.value("p3")

    raise ValueError("unknown share basis %s" % basis)


def concentration_share(
    units: Sequence[AuthorPeriodUnit],
    assignments: Sequence[TopClassAssignment],
    threshold: float,
    measure: str,
    basis: str = "measure",
    by: Sequence[str] = (),
) -> List[ShareRow]:
    """
    Share of the output of a group held by the members of the given class,
    along with the complementary share of the rest of the group.
    """
    members = index_assignments(assignments, measure=measure)
    label = format_threshold(threshold)
    rows = []

    for group, group_units_ in group_units(units, by):
        is_member = [
            members[u.key].is_top(threshold) if u.key in members else False
            for u in group_units_
        ]

        if basis == "coverage":
            all_pubs = set()
            covered = set()

            for unit, member in zip(group_units_, is_member):
                all_pubs.update(unit.pub_ids)

                if member:
                    covered.update(unit.pub_ids)

            numerator = float(len(covered))
            denominator = float(len(all_pubs))
            rest = denominator - numerator
        else:
            values = [basis_value(u, measure, basis) for u in group_units_]
            numerator = math.fsum(v for v, m in zip(values, is_member) if m)
            rest = math.fsum(v for v, m in zip(values, is_member) if not m)
            denominator = math.fsum(values)

        if denominator <= 0:
            logger.warning(
                "omitting share row for group %s: zero denominator", group
            )
            continue

        rows.append(
            ShareRow(
                group=group,
                class_label=label,
                measure=measure,
                basis=basis,
                share_percent=100 * numerator / denominator,
                numerator=numerator,
                denominator=denominator,
            )
        )
        rows.append(
            ShareRow(
                group=group,
                class_label="rest",
                measure=measure,
                basis=basis,
                share_percent=100 * rest / denominator,
                numerator=rest,
                denominator=denominator,
            )
        )

    return rows


def share_grid(
    units: Sequence[AuthorPeriodUnit],
    assignments: Sequence[TopClassAssignment],
    thresholds: Sequence[float],
    measures: Sequence[str],
    basis: str = "measure",
    by: Sequence[str] = ("period",),
) -> List[ShareRow]:
    """
    Concentration shares of every class for every measure, the class rows
    only (rest rows are implied).
    """
    rows = []

    for measure in measures:
        for t in thresholds:
            rows.extend(
                r
                for r in concentration_share(
                    units, assignments, t, measure, basis=basis, by=by
                )
                if r.class_label != "rest"
            )

    return rows


@dataclass(frozen=True)
class RuleRow:
    period_index: int
    measure: str
    top10_share: float
    top1_share: float
    top10_reference: float = 50.0
    top1_reference: float = 10.0


def concentration_rules(
    units: Sequence[AuthorPeriodUnit],
    assignments: Sequence[TopClassAssignment],
    measures: Sequence[str],
    basis: str = "measure",
) -> List[RuleRow]:
    """
    Checks the 10/50 and 1/10 regularities: per period and measure, the
    shares of the top 10% and top 1% next to their 50% and 10% references.
    """
    rows = []

    for measure in measures:
        top10 = {
            r.group: r.share_percent
            for r in concentration_share(
                units, assignments, 10, measure, basis=basis, by=("period",)
            )
            if r.class_label != "rest"
        }
        top1 = {
            r.group: r.share_percent
            for r in concentration_share(
                units, assignments, 1, measure, basis=basis, by=("period",)
            )
            if r.class_label != "rest"
        }

        for group in sorted(top10):
            rows.append(
                RuleRow(
                    period_index=group[0],
                    measure=measure,
                    top10_share=top10[group],
                    top1_share=top1[group],
                )
            )

    return rows


# Relative Presence Index
@dataclass(frozen=True)
class RpiValue:
    group: GroupKey
    class_label: str
    measure: str
    tp_men: int
    all_men: int
    tp_women: int
    all_women: int
    rpi_men: Optional[float]
    rpi_women: Optional[float]

    @property
    def defined(self) -> bool:
        return self.rpi_men is not None


def rpi_from_counts(
    tp_men: int, all_men: int, tp_women: int, all_women: int
) -> Tuple[Optional[float], Optional[float]]:
    """
    RPI = (tp_men / all_men) / (tp_women / all_women), and its reciprocal
    for women. Both are undefined as soon as one count is zero.
    """
    if not (tp_men and all_men and tp_women and all_women):
        return None, None

    ratio = Fraction(tp_men * all_women, all_men * tp_women)

    return float(ratio), float(1 / ratio)


def rpi(
    units: Sequence[AuthorPeriodUnit],
    assignments: Sequence[TopClassAssignment],
    threshold: float,
    measure: str,
    by: Sequence[str] = (),
) -> List[RpiValue]:
    members = index_assignments(assignments, measure=measure)
    by = [d for d in by if d != "gender"]
    rows = []
    undefined = 0

    gendered = [u for u in units if u.gender in GENDERED]

    for group, group_units_ in group_units(gendered, by):
        counts = {"M": [0, 0], "F": [0, 0]}

        for unit in group_units_:
            c = counts[unit.gender]
            c[1] += 1

            a = members.get(unit.key)

            if a is not None and a.is_top(threshold):
                c[0] += 1

        tp_men, all_men = counts["M"]
        tp_women, all_women = counts["F"]
        rpi_men, rpi_women = rpi_from_counts(tp_men, all_men, tp_women, all_women)

        if rpi_men is None:
            undefined += 1

        rows.append(
            RpiValue(
                group=group,
                class_label=format_threshold(threshold),
                measure=measure,
                tp_men=tp_men,
                all_men=all_men,
                tp_women=tp_women,
                all_women=all_women,
                rpi_men=rpi_men,
                rpi_women=rpi_women,
            )
        )

    if undefined:
        logger.warning(
            "%s RPI cells are undefined (no representative of a gender)",
            format_int(undefined),
        )

    return rows


# Distribution tables
@dataclass(frozen=True)
class DistributionRow:
    group: Tuple
    column: Tuple
    count: int
    percent: float


def distribution_table(
    units: Sequence[AuthorPeriodUnit],
    dimensions: Sequence[str],
    column: Sequence[str] = (),
    assignments: Optional[Sequence[TopClassAssignment]] = None,
    thresholds: Sequence[float] = (),
    members_of: Optional[float] = None,
) -> List[DistributionRow]:
    """
    Frequencies of units over the given dimensions with percentages taken
    within each value of the `column` dimensions (i.e. column percentages).

    The "class" dimension (narrowest class of a unit) and the `members_of`
    filter (only tabulate members of a class) require the assignments of a
    single measure.
    """
    lookup = None

    if assignments is not None:
        lookup = index_assignments(assignments)

        if len(set(a.measure for a in assignments)) > 1:
            raise TypeError("distribution tables expect assignments of one measure")

    def value_of(unit, dim):
        if dim == "class":
            if lookup is None:
                raise TypeError('the "class" dimension requires assignments')

            a = lookup.get(unit.key)
            return class_label(a, thresholds) if a is not None else "rest"

        return unit.dimension(dim)

    selected = list(units)

    if members_of is not None:
        if lookup is None:
            raise TypeError("filtering class members requires assignments")

        selected = [
            u for u in selected if u.key in lookup and lookup[u.key].is_top(members_of)
        ]

    if "gender" in dimensions or "gender" in column:
        selected = [u for u in selected if u.gender in GENDERED]

    cells = grouped(
        selected,
        key=lambda u: (
            tuple(value_of(u, d) for d in column),
            tuple(value_of(u, d) for d in dimensions),
        ),
    )

    totals = {}

    for (col, _), members in cells.items():
        totals[col] = totals.get(col, 0) + len(members)

    rows = [
        DistributionRow(
            group=group,
            column=col,
            count=len(members),
            percent=100 * len(members) / totals[col],
        )
        for (col, group), members in cells.items()
    ]

    rows.sort(key=lambda r: (r.column, r.group))

    return rows


# Correlations
@dataclass(frozen=True)
class CorrelationRow:
    group: Tuple
    measure_a: str
    measure_b: str
    pearson_r: Optional[float]
    n: int


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """
    Two-pass Pearson correlation, None when a column has no variance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    if x.shape != y.shape:
        raise TypeError("columns should have the same length")

    dx = x - x.mean()
    dy = y - y.mean()

    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))

    if sxx == 0 or syy == 0:
        return None

    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)

    return min(1.0, max(-1.0, r))


def measure_correlations(
    units: Sequence[AuthorPeriodUnit],
    by: Sequence[str] = (),
    measures: Sequence[str] = MEASURES,
    min_cell: int = 3,
) -> List[CorrelationRow]:
    rows = []
    skipped = 0

    for group, cell in group_units(units, by):
        if len(cell) < min_cell:
            skipped += 1
            continue

        columns = {m: [u.value(m) for u in cell] for m in measures}

        for a, b in combinations(measures, 2):
            r = pearson(columns[a], columns[b])

            if r is None:
                logger.warning(
                    "zero variance in cell %s, correlation %s/%s is undefined",
                    group,
                    a,
                    b,
                )

            rows.append(
                CorrelationRow(
                    group=group, measure_a=a, measure_b=b, pearson_r=r, n=len(cell)
                )
            )

    if skipped:
        logger.info(
            "skipped %s correlation cells with fewer than %i units",
            format_int(skipped),
            min_cell,
        )

    return rows


# Persistence
@dataclass(frozen=True)
class PersistenceRow:
    from_period: int
    to_period: int
    class_label: str
    measure: str
    members: int
    continuing: int
    stayed: int

    @property
    def rate(self) -> Optional[float]:
        if not self.continuing:
            return None

        return 100 * self.stayed / self.continuing


def persistence(
    units: Sequence[AuthorPeriodUnit],
    assignments: Sequence[TopClassAssignment],
    threshold: float,
    measure: str,
) -> List[PersistenceRow]:
    """
    For each pair of consecutive periods, counts the class members of the
    first period, those still publishing in the second one and those who
    remain in the class.
    """
    lookup = index_assignments(assignments, measure=measure)
    periods = sorted(set(u.period_index for u in units))
    present = set(u.key for u in units)
    rows = []

    for p, q in zip(periods, periods[1:]):
        if q != p + 1:
            continue

        members = sorted(
            a.author_id
            for key, a in lookup.items()
            if key[1] == p and a.is_top(threshold)
        )

        continuing = [m for m in members if (m, q) in present]
        stayed = [
            m
            for m in continuing
            if (m, q) in lookup and lookup[(m, q)].is_top(threshold)
        ]

        rows.append(
            PersistenceRow(
                from_period=p,
                to_period=q,
                class_label=format_threshold(threshold),
                measure=measure,
                members=len(members),
                continuing=len(continuing),
                stayed=len(stayed),
            )
        )

    return rows
