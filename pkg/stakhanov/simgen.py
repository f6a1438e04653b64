# =============================================================================
# Stakhanov Synthetic Cohort Generator
# =============================================================================
#
# Deterministic closed-world generator emitting the four input tables along
# with a ground truth record, so that every stage of the pipeline can be
# checked against known values. Also provides a unit-level logit DGP with
# known coefficients for effect recovery checks.
#
from typing import Optional, Dict, List, Tuple, Any, Mapping

import math
import json
import logging
import casanova
import numpy as np
from os import makedirs
from os.path import join
from dataclasses import dataclass, field, fields, asdict
from scipy.special import expit
from ebbe import format_int
from casanova import ndjson
from casanova.utils import ensure_open

from stakhanov import defaults
from stakhanov.panel import Period, build_periods
from stakhanov.ingest import AuthorRow, JournalRank, InstitutionFlag
from stakhanov.felogit import RegressionFrame
from stakhanov.utils import rng_stream, parallel_map
from stakhanov.exceptions import InfeasibleSimulationError

logger = logging.getLogger(__name__)

PUBLICATION_DISTRIBUTIONS = ("lotka", "lognormal", "fixed")
FOREIGN_COUNTRIES = ("CZ", "DE", "FR", "GB", "IT", "US")

# A subject area outside the default whitelist (arts & humanities)
OFFLIST_AREA = 12


@dataclass(frozen=True)
class SimConfig:
    seed: int = defaults.SEED
    n_authors: int = 2000
    start_year: int = defaults.START_YEAR
    end_year: int = defaults.END_YEAR
    period_length: int = defaults.PERIOD_LENGTH
    career_span: int = 35
    male_ratio: float = 0.6
    unknown_gender_probability: float = 0.02
    declared_first_year_probability: float = 0.9
    activity_probability: float = 0.7

    # Number of publications led by an author in an active period
    publication_distribution: str = "lotka"
    lotka_alpha: float = 2.0
    lotka_max: int = 100
    lognormal_mu: float = 0.5
    lognormal_sigma: float = 1.0
    fixed_count: int = 1

    # Injected effects on latent productivity (multiplicative on counts)
    gender_effect: float = 0.2
    age_slope: float = 0.01

    team_size_mean: float = 3.0
    foreign_author_share: float = 0.1
    home_country: str = defaults.HOME_COUNTRY

    n_journals: int = 200
    unranked_probability: float = 0.05
    conference_probability: float = 0.2
    other_document_probability: float = 0.05

    disciplines: Dict[str, float] = field(
        default_factory=lambda: {area: 1.0 for area in defaults.DISCIPLINES}
    )
    references_per_publication: float = 10.0
    own_discipline_probability: float = 0.7
    offlist_probability: float = 0.05

    n_institutions: int = 50
    research_intensive_probability: float = 0.3

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        probabilities = [
            "male_ratio",
            "unknown_gender_probability",
            "declared_first_year_probability",
            "activity_probability",
            "foreign_author_share",
            "unranked_probability",
            "conference_probability",
            "other_document_probability",
            "own_discipline_probability",
            "offlist_probability",
            "research_intensive_probability",
        ]

        for name in probabilities:
            value = getattr(self, name)

            if not 0 <= value <= 1:
                raise InfeasibleSimulationError(
                    "%s should lie in [0, 1], got %s" % (name, value)
                )

        if self.conference_probability + self.other_document_probability > 1:
            raise InfeasibleSimulationError(
                "conference_probability + other_document_probability cannot exceed 1"
            )

        if self.n_authors < 1:
            raise InfeasibleSimulationError("n_authors should be a positive integer")

        if self.activity_probability == 0:
            raise InfeasibleSimulationError(
                "activity_probability = 0 would generate zero publications"
            )

        if self.other_document_probability == 1:
            raise InfeasibleSimulationError(
                "other_document_probability = 1 would generate zero usable publications"
            )

        if self.publication_distribution not in PUBLICATION_DISTRIBUTIONS:
            raise InfeasibleSimulationError(
                "unknown publication_distribution %s" % self.publication_distribution
            )

        if self.lotka_alpha <= 1:
            raise InfeasibleSimulationError("lotka_alpha should be greater than 1")

        if self.lotka_max < 1 or self.fixed_count < 1:
            raise InfeasibleSimulationError("publication counts should be positive")

        if self.lognormal_sigma <= 0:
            raise InfeasibleSimulationError("lognormal_sigma should be positive")

        if self.team_size_mean < 1:
            raise InfeasibleSimulationError("team_size_mean should be at least 1")

        if self.n_journals < 1 or self.n_institutions < 1:
            raise InfeasibleSimulationError(
                "at least one journal and one institution are required"
            )

        if self.references_per_publication < 0:
            raise InfeasibleSimulationError(
                "references_per_publication cannot be negative"
            )

        if not self.disciplines or any(w < 0 for w in self.disciplines.values()):
            raise InfeasibleSimulationError(
                "discipline weights should be non-negative and not all missing"
            )

        if sum(self.disciplines.values()) <= 0:
            raise InfeasibleSimulationError("discipline weights cannot all be zero")

        for area in self.disciplines:
            if not area.isdigit() or len(area) != 2:
                raise InfeasibleSimulationError(
                    "simulated disciplines should be 2-digit ASJC areas, got %s" % area
                )

        if self.start_year > self.end_year or self.period_length < 1:
            raise InfeasibleSimulationError("invalid study window")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], **kwargs) -> "SimConfig":
        names = set(f.name for f in fields(cls))

        for k in data:
            if k not in names:
                raise InfeasibleSimulationError("unknown simulation parameter: %s" % k)

        params = dict(data)
        params.update(kwargs)

        if "disciplines" in params:
            params["disciplines"] = {
                str(k): float(v) for k, v in params["disciplines"].items()
            }

        return cls(**params)

    def get_periods(self) -> List[Period]:
        return build_periods(self.start_year, self.end_year, self.period_length)


@dataclass(frozen=True)
class SimulatedAuthor:
    index: int
    author_id: str
    gender: str
    entry_year: int
    declared: bool
    country: str
    institution_id: str
    area: str
    active_periods: Tuple[int, ...]
    lead_counts: Tuple[int, ...]


def author_id_of(index: int) -> str:
    return "A%06i" % index


def lotka_probabilities(alpha: float, n_max: int) -> np.ndarray:
    """
    Truncated power law over 1..n_max with P(n) proportional to n^-alpha.
    """
    n = np.arange(1, n_max + 1, dtype=float)
    weights = n ** -alpha

    return weights / weights.sum()


def draw_count(rng: np.random.Generator, config: SimConfig, lotka: np.ndarray) -> int:
    if config.publication_distribution == "fixed":
        return config.fixed_count

    if config.publication_distribution == "lotka":
        return int(rng.choice(len(lotka), p=lotka)) + 1

    draw = rng.normal(config.lognormal_mu, config.lognormal_sigma)

    return max(1, int(round(math.exp(draw))))


def latent_multiplier(config: SimConfig, gender: str, age: int) -> float:
    return math.exp(
        config.gender_effect * (gender == "M") + config.age_slope * age
    )


def draw_author(
    index: int,
    config: SimConfig,
    periods: List[Period],
    areas: List[str],
    area_weights: np.ndarray,
    lotka: np.ndarray,
) -> SimulatedAuthor:
    rng = rng_stream(config.seed, "author", index)

    if rng.random() < config.unknown_gender_probability:
        gender = "U"
    else:
        gender = "M" if rng.random() < config.male_ratio else "F"

    entry_year = int(
        rng.integers(config.start_year - config.career_span, config.end_year + 1)
    )
    declared = bool(rng.random() < config.declared_first_year_probability)

    if rng.random() < config.foreign_author_share:
        country = FOREIGN_COUNTRIES[int(rng.integers(len(FOREIGN_COUNTRIES)))]
        institution_id = "X%03i" % int(rng.integers(config.n_institutions))
    else:
        country = config.home_country
        institution_id = "I%03i" % int(rng.integers(config.n_institutions))

    area = areas[int(rng.choice(len(areas), p=area_weights))]

    active = []
    counts = []

    for period in periods:
        if period.end_year < entry_year:
            continue

        if rng.random() >= config.activity_probability:
            continue

        age = period.end_year - entry_year
        n = draw_count(rng, config, lotka)

        if config.publication_distribution != "fixed":
            n = max(1, int(round(n * latent_multiplier(config, gender, age))))

        active.append(period.index)
        counts.append(n)

    return SimulatedAuthor(
        index=index,
        author_id=author_id_of(index),
        gender=gender,
        entry_year=entry_year,
        declared=declared,
        country=country,
        institution_id=institution_id,
        area=area,
        active_periods=tuple(active),
        lead_counts=tuple(counts),
    )


def draw_references(
    rng: np.random.Generator, config: SimConfig, own_area: str, areas: List[str]
) -> List[int]:
    # At least one reference so that every publication can vote
    n = 1 + int(rng.poisson(config.references_per_publication))
    codes = []

    for _ in range(n):
        draw = rng.random()

        if draw < config.offlist_probability:
            area = OFFLIST_AREA
        elif draw < config.offlist_probability + config.own_discipline_probability:
            area = int(own_area)
        else:
            area = int(areas[int(rng.integers(len(areas)))])

        codes.append(area * 100 + 1 + int(rng.integers(99)))

    return sorted(codes)


def draw_publications(
    author: SimulatedAuthor,
    config: SimConfig,
    periods: List[Period],
    pools: Mapping[int, List[SimulatedAuthor]],
    areas: List[str],
) -> List[Dict]:
    rng = rng_stream(config.seed, "publications", author.index)
    publications = []
    k = 0

    for period_index, count in zip(author.active_periods, author.lead_counts):
        period = periods[period_index]
        pool = pools[period_index]
        first_year = max(period.start_year, author.entry_year)

        for _ in range(count):
            k += 1
            team_size = 1 + int(rng.poisson(config.team_size_mean - 1))
            team = [author]

            if team_size > 1 and len(pool) > 1:
                candidates = [a for a in pool if a.index != author.index]
                picked = rng.choice(
                    len(candidates),
                    size=min(team_size - 1, len(candidates)),
                    replace=False,
                )
                team.extend(candidates[int(i)] for i in sorted(picked))

            # Coauthors may only publish after their own entry year
            first = max([first_year] + [a.entry_year for a in team])
            year = int(rng.integers(first, period.end_year + 1))

            draw = rng.random()

            if draw < config.other_document_probability:
                doc_type = "other"
            elif draw < (
                config.other_document_probability + config.conference_probability
            ):
                doc_type = "conference_paper"
            else:
                doc_type = "article"

            publications.append(
                {
                    "pub_id": "%s-%04i" % (author.author_id, k),
                    "year": year,
                    "doc_type": doc_type,
                    "journal_id": "J%04i" % int(rng.integers(config.n_journals)),
                    "authors": [
                        {
                            "author_id": a.author_id,
                            "affiliation_ids": [a.institution_id],
                            "country": a.country,
                        }
                        for a in team
                    ],
                    "cited_asjc": draw_references(rng, config, author.area, areas),
                }
            )

    return publications


def draw_venues(config: SimConfig) -> Tuple[List[JournalRank], List[InstitutionFlag]]:
    rng = rng_stream(config.seed, "venues")

    journals = []

    for i in range(config.n_journals):
        percentile = int(rng.integers(0, defaults.MAX_PERCENTILE + 1))

        if rng.random() >= config.unranked_probability:
            journals.append(JournalRank("J%04i" % i, percentile))

    institutions = []

    for prefix in ("I", "X"):
        for i in range(config.n_institutions):
            institutions.append(
                InstitutionFlag(
                    "%s%03i" % (prefix, i),
                    bool(rng.random() < config.research_intensive_probability),
                )
            )

    return journals, institutions


def coauthor_pools(authors: List[SimulatedAuthor]) -> Dict[int, List[SimulatedAuthor]]:
    pools = {}

    for author in authors:
        for period_index in author.active_periods:
            pools.setdefault(period_index, []).append(author)

    return pools


def ground_truth(
    config: SimConfig,
    periods: List[Period],
    authors: List[SimulatedAuthor],
    publications: List[Dict],
) -> Dict:
    units = {}
    per_period = {p.index: set() for p in periods}

    for publication in publications:
        if publication["doc_type"] == "other":
            continue

        period_index = next(p.index for p in periods if publication["year"] in p)
        per_period[period_index].add(publication["pub_id"])
        team_size = len(publication["authors"])

        for byline in publication["authors"]:
            unit = units.setdefault(
                (byline["author_id"], period_index),
                {"publications": 0, "team_sizes": 0},
            )
            unit["publications"] += 1
            unit["team_sizes"] += team_size

    by_id = {a.author_id: a for a in authors}
    period_authors = {p.index: 0 for p in periods}

    for author_id, period_index in units:
        period_authors[period_index] += 1

    return {
        "config": asdict(config),
        "effects": {
            "gender_effect": config.gender_effect,
            "age_slope": config.age_slope,
        },
        "periods": [
            {
                "index": p.index,
                "start_year": p.start_year,
                "end_year": p.end_year,
                "authors": period_authors[p.index],
                "publications": len(per_period[p.index]),
            }
            for p in periods
        ],
        "units": [
            {
                "author_id": author_id,
                "period": period_index,
                "gender": by_id[author_id].gender,
                "area": by_id[author_id].area,
                "publications": unit["publications"],
                "avg_team_size": unit["team_sizes"] / unit["publications"],
            }
            for (author_id, period_index), unit in sorted(units.items())
        ],
    }


@dataclass
class GenerationResult:
    directory: str
    authors: int
    publications: int
    truth: Dict


def write_table(path: str, record_class, records) -> None:
    with ensure_open(path, mode="w", newline="") as f:
        writer = casanova.Writer(
            f, fieldnames=record_class.fieldnames(), lineterminator="\n"
        )
        writer.writerows(records)


def generate(config: SimConfig, output_dir: str, threads: int = 1) -> GenerationResult:
    """
    Writes publications.jsonl, authors.csv, journals.csv, institutions.csv
    and ground_truth.json into `output_dir`. Every draw comes from streams
    keyed by the seed and the author index so output does not depend on the
    number of threads.
    """
    periods = config.get_periods()
    areas = sorted(config.disciplines)
    area_weights = np.array([config.disciplines[a] for a in areas], dtype=float)
    area_weights /= area_weights.sum()
    lotka = lotka_probabilities(config.lotka_alpha, config.lotka_max)

    authors = parallel_map(
        lambda i: draw_author(i, config, periods, areas, area_weights, lotka),
        range(config.n_authors),
        threads,
    )

    pools = coauthor_pools(authors)

    batches = parallel_map(
        lambda author: draw_publications(author, config, periods, pools, areas),
        authors,
        threads,
    )

    publications = sorted(
        (p for batch in batches for p in batch), key=lambda p: p["pub_id"]
    )

    if not any(p["doc_type"] != "other" for p in publications):
        raise InfeasibleSimulationError("configuration generated zero publications")

    journals, institutions = draw_venues(config)
    truth = ground_truth(config, periods, authors, publications)

    makedirs(output_dir, exist_ok=True)

    publications_path = join(output_dir, defaults.PUBLICATIONS_FILENAME)

    with ensure_open(publications_path, mode="w", newline="") as f:
        writer = ndjson.writer(f)

        for publication in publications:
            writer.writerow(publication)

    write_table(
        join(output_dir, defaults.AUTHORS_FILENAME),
        AuthorRow,
        (
            AuthorRow(a.author_id, a.gender, a.entry_year if a.declared else None)
            for a in authors
        ),
    )
    write_table(join(output_dir, defaults.JOURNALS_FILENAME), JournalRank, journals)
    write_table(
        join(output_dir, defaults.INSTITUTIONS_FILENAME), InstitutionFlag, institutions
    )

    truth_path = join(output_dir, defaults.GROUND_TRUTH_FILENAME)

    with ensure_open(truth_path, mode="w", newline="") as f:
        json.dump(truth, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")

    logger.info(
        "generated %s publications for %s authors",
        format_int(len(publications)),
        format_int(len(authors)),
    )

    return GenerationResult(
        directory=output_dir,
        authors=len(authors),
        publications=len(publications),
        truth=truth,
    )


# Unit-level regression DGP
DEFAULT_COEFFICIENTS = {
    "academic_age": 0.02,
    "avg_team_size": 0.05,
    "intl_collaboration_rate": -0.005,
    "collaboration_rate": 0.01,
    "gender_male": math.log(2),
    "research_intensity_rest": -0.3,
    "median_journal_percentile": 0.01,
}


@dataclass(frozen=True)
class RegressionDGP:
    seed: int = defaults.SEED
    n_units: int = 50000
    coefficients: Dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_COEFFICIENTS)
    )
    prevalence: float = 0.2
    n_periods: int = 5
    disciplines: Tuple[str, ...] = tuple(sorted(set(defaults.DISCIPLINES.values())))
    period_spread: float = 0.3
    discipline_spread: float = 0.3
    male_ratio: float = 0.6

    def __post_init__(self):
        if not 0 < self.prevalence < 1:
            raise InfeasibleSimulationError("prevalence should lie in (0, 1)")

        if self.n_units < 1 or self.n_periods < 1 or not self.disciplines:
            raise InfeasibleSimulationError("empty regression design")

        for name in self.coefficients:
            if name not in defaults.COVARIATES:
                raise InfeasibleSimulationError("unknown covariate %s" % name)


def draw_covariates(
    rng: np.random.Generator, dgp: RegressionDGP
) -> Dict[str, np.ndarray]:
    n = dgp.n_units

    collaboration = rng.uniform(0, 100, n)

    return {
        "academic_age": rng.integers(0, 45, n).astype(float),
        "avg_team_size": 1 + rng.gamma(2.0, 1.5, n),
        "intl_collaboration_rate": collaboration * rng.uniform(0, 1, n),
        "collaboration_rate": collaboration,
        "gender_male": (rng.random(n) < dgp.male_ratio).astype(float),
        "research_intensity_rest": (rng.random(n) < 0.5).astype(float),
        "median_journal_percentile": rng.uniform(10, 99, n),
    }


def calibrate_offset(eta: np.ndarray, prevalence: float) -> float:
    """
    Constant to add to the linear predictor so that the mean probability
    equals the target prevalence, by bisection.
    """
    low, high = -50.0, 50.0

    for _ in range(200):
        middle = (low + high) / 2

        if expit(eta + middle).mean() < prevalence:
            low = middle
        else:
            high = middle

    return (low + high) / 2


def generate_regression_frame(dgp: RegressionDGP) -> Tuple[RegressionFrame, Dict]:
    """
    Draws a regression frame whose response follows a logit model with the
    DGP's coefficients, period shifts and zero-sum discipline shifts.
    """
    rng = rng_stream(dgp.seed, "regression")
    n = dgp.n_units

    covariates = draw_covariates(rng, dgp)

    periods = rng.integers(0, dgp.n_periods, n)
    codes = rng.integers(0, len(dgp.disciplines), n)
    disciplines = np.array(dgp.disciplines, dtype=object)[codes]

    period_shifts = rng.normal(0, dgp.period_spread, dgp.n_periods)
    discipline_shifts = rng.normal(0, dgp.discipline_spread, len(dgp.disciplines))
    discipline_shifts -= discipline_shifts.mean()

    eta = np.zeros(n)

    for name in defaults.COVARIATES:
        eta += dgp.coefficients.get(name, 0.0) * covariates[name]

    eta += period_shifts[periods]
    eta += discipline_shifts[codes]

    offset = calibrate_offset(eta, dgp.prevalence)
    period_shifts += offset
    eta += offset

    y = (rng.random(n) < expit(eta)).astype(float)

    frame = RegressionFrame(
        y=y, covariates=covariates, periods=periods, disciplines=disciplines
    )

    truth = {
        "coefficients": {
            name: dgp.coefficients.get(name, 0.0) for name in defaults.COVARIATES
        },
        "period_shifts": period_shifts.tolist(),
        "discipline_shifts": dict(zip(dgp.disciplines, discipline_shifts.tolist())),
    }

    return frame, truth
