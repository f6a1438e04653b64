# =============================================================================
# Stakhanov Productivity
# =============================================================================
#
# The four productivity measurements of a unit and the covariates of the
# membership model:
#
#   p1: prestige-normalized, full counting
#   p2: prestige-normalized, fractional counting
#   p3: non-normalized, full counting
#   p4: non-normalized, fractional counting
#
from typing import TYPE_CHECKING, Optional, List, Sequence

import math
import statistics
from dataclasses import dataclass, replace

from stakhanov import defaults
from stakhanov.utils import parallel_map

if TYPE_CHECKING:
    from stakhanov.config import RunConfig
    from stakhanov.ingest import Corpus, PublicationRecord
    from stakhanov.panel import AuthorPeriodUnit


@dataclass(frozen=True)
class ProductivityVector:
    p1: float
    p2: float
    p3: int
    p4: float

    def __getitem__(self, measure: str):
        return getattr(self, measure)


@dataclass(frozen=True)
class CovariateSet:
    avg_team_size: float
    collaboration_rate: float
    intl_collaboration_rate: float
    median_journal_percentile: float


def prestige_weight(percentile: Optional[int]) -> float:
    """
    Weight of a publication given the CiteScore percentile of its venue.
    Unranked venues (None) get the floor weight.
    """
    if percentile is None:
        return defaults.FLOOR_PERCENTILE / 100

    if not 0 <= percentile <= defaults.MAX_PERCENTILE:
        raise ValueError(
            "percentile should lie in [0, %i], got %s"
            % (defaults.MAX_PERCENTILE, percentile)
        )

    return max(percentile, defaults.FLOOR_PERCENTILE) / 100


def compute_measures(
    publications: Sequence["PublicationRecord"], corpus: "Corpus"
) -> ProductivityVector:
    if not publications:
        raise ValueError("cannot compute measures of a unit without publications")

    weights = [prestige_weight(corpus.percentile(p.journal_id)) for p in publications]
    n_authors = [p.n_authors for p in publications]

    # NOTE: fsum keeps sums exact up to a final rounding, independently of
    # the order of the publications.
    return ProductivityVector(
        p1=math.fsum(weights),
        p2=math.fsum(w / n for w, n in zip(weights, n_authors)),
        p3=len(publications),
        p4=math.fsum(1 / n for n in n_authors),
    )


def compute_covariates(
    publications: Sequence["PublicationRecord"], home_country: str, corpus: "Corpus"
) -> CovariateSet:
    if not publications:
        raise ValueError("cannot compute covariates of a unit without publications")

    n = len(publications)
    home_country = home_country.upper()

    collaborative = sum(1 for p in publications if p.n_authors >= 2)

    # NOTE: empty countries are unknown and never count as foreign
    international = sum(
        1
        for p in publications
        if any(b.country and b.country != home_country for b in p.authors)
    )

    percentiles = []

    for p in publications:
        percentile = corpus.percentile(p.journal_id)
        percentiles.append(
            defaults.FLOOR_PERCENTILE if percentile is None else percentile
        )

    return CovariateSet(
        avg_team_size=math.fsum(p.n_authors for p in publications) / n,
        collaboration_rate=100 * collaborative / n,
        intl_collaboration_rate=100 * international / n,
        median_journal_percentile=float(statistics.median(percentiles)),
    )


def annotate_unit(
    unit: "AuthorPeriodUnit", corpus: "Corpus", config: "RunConfig", index
) -> "AuthorPeriodUnit":
    publications = [index[pub_id] for pub_id in unit.pub_ids]

    return replace(
        unit,
        measures=compute_measures(publications, corpus),
        covariates=compute_covariates(publications, config.home_country, corpus),
    )


def compute_productivity(
    units: Sequence["AuthorPeriodUnit"],
    corpus: "Corpus",
    config: "RunConfig",
    threads: int = 1,
) -> List["AuthorPeriodUnit"]:
    """
    Returns the given units with their measures and covariates filled.
    """
    index = {p.pub_id: p for p in corpus.publications}

    return parallel_map(
        lambda unit: annotate_unit(unit, corpus, config, index), units, threads
    )
