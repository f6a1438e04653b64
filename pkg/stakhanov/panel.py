# =============================================================================
# Stakhanov Panel
# =============================================================================
#
# Partition of the study window into periods and construction of the
# author-period units, the atoms of every later analysis.
#
from typing import TYPE_CHECKING, Optional, List, Tuple, Dict, Iterable, Mapping

import logging
from collections import Counter
from dataclasses import dataclass, field
from casanova import tabular_field
from ebbe import grouped, format_int

from stakhanov.types import AGE_GROUPS, Gender
from stakhanov.output import OutputRecord
from stakhanov.utils import rng_stream, parallel_map
from stakhanov.exceptions import (
    ConfigError,
    OutOfWindowError,
    InvariantViolationError,
)

if TYPE_CHECKING:
    from stakhanov.config import RunConfig
    from stakhanov.ingest import Corpus, PublicationRecord
    from stakhanov.productivity import ProductivityVector, CovariateSet

logger = logging.getLogger(__name__)

DROP_NO_DISCIPLINE = "no-discipline"
DROP_NO_FIRST_PUB_YEAR = "no-first-pub-year"
DROP_UNKNOWN_GENDER = "unknown-gender"


@dataclass(frozen=True)
class Period:
    index: int
    start_year: int
    end_year: int

    def __contains__(self, year: int) -> bool:
        return self.start_year <= year <= self.end_year

    @property
    def label(self) -> str:
        return "%i-%i" % (self.start_year, self.end_year)


def build_periods(start_year: int, end_year: int, length: int) -> List[Period]:
    periods = []
    start = start_year

    while start <= end_year:
        end = min(start + length - 1, end_year)
        periods.append(Period(index=len(periods), start_year=start, end_year=end))
        start = end + 1

    return periods


def validate_periods(periods: List[Period], start_year: int, end_year: int) -> None:
    if not periods:
        raise ConfigError("at least one period is required")

    expected = start_year

    for i, period in enumerate(periods):
        if period.index != i:
            raise ConfigError("periods should be indexed contiguously from 0")

        if period.start_year != expected:
            raise ConfigError(
                "periods should be contiguous and disjoint, period %i starts in %i instead of %i"
                % (i, period.start_year, expected)
            )

        if period.end_year < period.start_year:
            raise ConfigError("period %i ends before it starts" % i)

        expected = period.end_year + 1

    if expected != end_year + 1:
        raise ConfigError("periods do not cover the study window")


def assign_period(year: int, periods: List[Period]) -> int:
    for period in periods:
        if year in period:
            return period.index

    raise OutOfWindowError(year)


def age_group(age: int) -> str:
    if age < 0:
        raise ValueError("academic age cannot be negative")

    if age >= 30:
        return AGE_GROUPS[3]

    return AGE_GROUPS[age // 10]


def academic_age(period: Period, first_pub_year: int) -> int:
    if first_pub_year > period.end_year:
        raise InvariantViolationError(
            "first publication in %i is after the end of period %s"
            % (first_pub_year, period.label)
        )

    return period.end_year - first_pub_year


@dataclass(frozen=True)
class DisciplineAssignment:
    author_id: str
    period_index: int
    discipline: str
    tie_broken: bool
    seed_used: int


def dominant_discipline(
    cited_asjc: Iterable[int],
    config: "RunConfig",
    author_id: str,
    period_index: int,
) -> Optional[DisciplineAssignment]:
    """
    Returns the modal whitelisted discipline of the pooled cited references,
    or None when no reference maps to the whitelist. Ties are broken by a
    uniform draw from a stream keyed by (seed, author, period).
    """
    counts = Counter()

    for code in cited_asjc:
        label = config.discipline_of(code)

        if label is not None:
            counts[label] += 1

    if not counts:
        return None

    top = max(counts.values())
    tied = sorted(label for label, c in counts.items() if c == top)

    if len(tied) == 1:
        return DisciplineAssignment(
            author_id=author_id,
            period_index=period_index,
            discipline=tied[0],
            tie_broken=False,
            seed_used=config.seed,
        )

    rng = rng_stream(config.seed, "discipline", author_id, period_index)

    return DisciplineAssignment(
        author_id=author_id,
        period_index=period_index,
        discipline=tied[int(rng.integers(len(tied)))],
        tie_broken=True,
        seed_used=config.seed,
    )


def dominant_affiliation(
    author_id: str, publications: Iterable["PublicationRecord"], corpus: "Corpus"
) -> Tuple[bool, bool]:
    """
    Returns the modal research intensity flag of the author's bylines and
    whether a tie had to be resolved. Ties resolve to research-intensive.
    """
    intensive = 0
    rest = 0

    for publication in publications:
        byline = publication.byline_of(author_id)

        if byline is not None and any(
            corpus.is_research_intensive(a) for a in byline.affiliation_ids
        ):
            intensive += 1
        else:
            rest += 1

    return intensive >= rest, intensive == rest


@dataclass(frozen=True)
class AuthorPeriodUnit:
    author_id: str
    period_index: int
    discipline: str
    academic_age: int
    age_group: str
    gender: Gender
    research_intensive: bool
    pub_ids: Tuple[str, ...]
    tie_broken: bool = False
    approximate_age: bool = False
    measures: Optional["ProductivityVector"] = None
    covariates: Optional["CovariateSet"] = None

    @property
    def key(self) -> Tuple[str, int]:
        return (self.author_id, self.period_index)

    def value(self, measure: str) -> float:
        if self.measures is None:
            raise TypeError("measures were not computed for this unit")

        return getattr(self.measures, measure)

    def dimension(self, name: str):
        if name == "period":
            return self.period_index

        if name == "affiliation":
            return "research-intensive" if self.research_intensive else "rest"

        return getattr(self, name)


@dataclass
class DroppedUnit(OutputRecord):
    author_id: str
    period: int
    reason: str


@dataclass
class PanelResult:
    units: List[AuthorPeriodUnit] = field(default_factory=list)
    dropped: List[DroppedUnit] = field(default_factory=list)
    affiliation_ties: int = 0

    def dropped_counts(self) -> Dict[str, int]:
        return dict(sorted(Counter(d.reason for d in self.dropped).items()))


def group_publications_by_author(
    corpus: "Corpus", periods: List[Period]
) -> Dict[str, Dict[int, List["PublicationRecord"]]]:
    by_author = {}

    for publication in corpus.publications:
        period_index = assign_period(publication.year, periods)

        # NOTE: an author listed twice on a byline only gets the publication once
        for author_id in sorted(set(b.author_id for b in publication.authors)):
            by_author.setdefault(author_id, {}).setdefault(period_index, []).append(
                publication
            )

    return dict(sorted(by_author.items()))


def build_author_units(
    author_id: str,
    publications_by_period: Mapping[int, List["PublicationRecord"]],
    corpus: "Corpus",
    profiles,
    periods: List[Period],
    config: "RunConfig",
):
    profile = profiles[author_id]
    units = []
    dropped = []
    ties = 0

    for period_index, publications in sorted(publications_by_period.items()):
        if profile.gender == "U" and config.unknown_gender == "exclude":
            dropped.append(DroppedUnit(author_id, period_index, DROP_UNKNOWN_GENDER))
            continue

        if profile.first_pub_year is None:
            dropped.append(
                DroppedUnit(author_id, period_index, DROP_NO_FIRST_PUB_YEAR)
            )
            continue

        assignment = dominant_discipline(
            (code for p in publications for code in p.cited_asjc),
            config,
            author_id,
            period_index,
        )

        if assignment is None:
            dropped.append(DroppedUnit(author_id, period_index, DROP_NO_DISCIPLINE))
            continue

        intensive, tie = dominant_affiliation(author_id, publications, corpus)
        ties += int(tie)

        age = academic_age(periods[period_index], profile.first_pub_year)

        units.append(
            AuthorPeriodUnit(
                author_id=author_id,
                period_index=period_index,
                discipline=assignment.discipline,
                academic_age=age,
                age_group=age_group(age),
                gender=profile.gender,
                research_intensive=intensive,
                pub_ids=tuple(p.pub_id for p in publications),
                tie_broken=assignment.tie_broken,
                approximate_age=profile.approximate,
            )
        )

    return units, dropped, ties


def build_panel(
    corpus: "Corpus", config: "RunConfig", profiles=None, threads: int = 1
) -> PanelResult:
    """
    Builds one unit per (author, period) in which the author published.
    `profiles` should be the output of `derive_first_pub_year`, defaulting
    to the corpus ones.
    """
    if profiles is None:
        profiles = corpus.profiles

    periods = config.get_periods()
    by_author = group_publications_by_author(corpus, periods)

    def work(item):
        author_id, publications_by_period = item
        return build_author_units(
            author_id, publications_by_period, corpus, profiles, periods, config
        )

    result = PanelResult()

    for units, dropped, ties in parallel_map(work, by_author.items(), threads):
        result.units.extend(units)
        result.dropped.extend(dropped)
        result.affiliation_ties += ties

    result.units.sort(key=lambda u: (u.period_index, u.author_id))
    result.dropped.sort(key=lambda d: (d.period, d.author_id))

    for reason, count in result.dropped_counts().items():
        logger.warning("dropped %s units (%s)", format_int(count), reason)

    if result.affiliation_ties:
        logger.info(
            "%s affiliation ties resolved as research-intensive",
            format_int(result.affiliation_ties),
        )

    logger.info("built %s author-period units", format_int(len(result.units)))

    return result


def units_by_period(
    units: Iterable[AuthorPeriodUnit],
) -> Dict[int, List[AuthorPeriodUnit]]:
    return dict(sorted(grouped(units, key=lambda u: u.period_index).items()))


@dataclass
class PanelRow(OutputRecord):
    author_id: str
    period: int
    start_year: int
    end_year: int
    discipline: str
    tie_broken: bool
    academic_age: int
    approximate_age: bool
    age_group: str
    gender: str
    research_intensive: bool
    n_pubs: int
    pub_ids: List[str] = tabular_field(plural_separator="|")
    p1: Optional[float] = None
    p2: Optional[float] = None
    p3: Optional[int] = None
    p4: Optional[float] = None
    team: Optional[float] = None
    collab: Optional[float] = None
    intl: Optional[float] = None
    medperc: Optional[float] = None

    @classmethod
    def from_unit(cls, unit: AuthorPeriodUnit, period: Period) -> "PanelRow":
        row = cls(
            author_id=unit.author_id,
            period=unit.period_index,
            start_year=period.start_year,
            end_year=period.end_year,
            discipline=unit.discipline,
            tie_broken=unit.tie_broken,
            academic_age=unit.academic_age,
            approximate_age=unit.approximate_age,
            age_group=unit.age_group,
            gender=unit.gender,
            research_intensive=unit.research_intensive,
            n_pubs=len(unit.pub_ids),
            pub_ids=list(unit.pub_ids),
        )

        if unit.measures is not None:
            row.p1 = unit.measures.p1
            row.p2 = unit.measures.p2
            row.p3 = unit.measures.p3
            row.p4 = unit.measures.p4

        if unit.covariates is not None:
            row.team = unit.covariates.avg_team_size
            row.collab = unit.covariates.collaboration_rate
            row.intl = unit.covariates.intl_collaboration_rate
            row.medperc = unit.covariates.median_journal_percentile

        return row
