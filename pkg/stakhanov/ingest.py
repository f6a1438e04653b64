# =============================================================================
# Stakhanov Ingest
# =============================================================================
#
# Loading, validation and filtering of the input tables into an immutable
# in-memory corpus:
#
#   - publications.jsonl: one indexed document per line
#   - authors.csv: author_id,gender,first_pub_year
#   - journals.csv: journal_id,citescore_percentile
#   - institutions.csv: affiliation_id,research_intensive
#
from typing import Optional, Tuple, Dict, List, Mapping, Iterator, Type

import json
import logging
import casanova
from os.path import join, isfile
from types import MappingProxyType
from dataclasses import dataclass, field, replace
from casanova import TabularRecord, tabular_field
from ebbe import format_int
from casanova.utils import ensure_open

from stakhanov import defaults
from stakhanov.types import (
    DOC_TYPES,
    KEPT_DOC_TYPES,
    GENDERS,
    DocType,
    Gender,
    JSONDict,
)
from stakhanov.utils import parallel_map
from stakhanov.exceptions import (
    SchemaError,
    DuplicateRecordError,
    InvariantViolationError,
    MissingInputError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuthorByline:
    author_id: str
    affiliation_ids: Tuple[str, ...] = ()
    country: str = ""


@dataclass(frozen=True)
class PublicationRecord:
    pub_id: str
    year: int
    doc_type: DocType
    journal_id: str
    authors: Tuple[AuthorByline, ...]
    cited_asjc: Tuple[int, ...] = ()

    @property
    def n_authors(self) -> int:
        return len(self.authors)

    def byline_of(self, author_id: str) -> Optional[AuthorByline]:
        for byline in self.authors:
            if byline.author_id == author_id:
                return byline

        return None


@dataclass(frozen=True)
class AuthorProfile:
    author_id: str
    gender: Gender = "U"
    first_pub_year: Optional[int] = None
    approximate: bool = False
    synthesized: bool = False


# NOTE: the following records describe the exact shape of the CSV inputs
# and are parsed through casanova.
@dataclass
class AuthorRow(TabularRecord):
    author_id: str
    gender: str
    first_pub_year: Optional[int]


@dataclass
class JournalRank(TabularRecord):
    journal_id: str
    citescore_percentile: int


@dataclass
class InstitutionFlag(TabularRecord):
    affiliation_id: str
    research_intensive: bool = tabular_field(true_value="1", false_value="0")


@dataclass
class CorpusPaths:
    publications: str
    authors: str
    journals: str
    institutions: str

    @classmethod
    def from_directory(cls, directory: str) -> "CorpusPaths":
        return cls(
            publications=join(directory, defaults.PUBLICATIONS_FILENAME),
            authors=join(directory, defaults.AUTHORS_FILENAME),
            journals=join(directory, defaults.JOURNALS_FILENAME),
            institutions=join(directory, defaults.INSTITUTIONS_FILENAME),
        )

    def check(self) -> None:
        for path in (self.publications, self.authors, self.journals, self.institutions):
            if not isfile(path):
                raise MissingInputError(path)


@dataclass
class IngestReport:
    publications_read: int = 0
    excluded_doc_type: int = 0
    excluded_out_of_window: int = 0
    unranked_venues: Tuple[str, ...] = ()
    floor_defaulted_publications: int = 0
    synthesized_profiles: int = 0
    authors: int = 0
    journals: int = 0
    institutions: int = 0

    def as_dict(self) -> JSONDict:
        return {
            "publications_read": self.publications_read,
            "excluded_doc_type": self.excluded_doc_type,
            "excluded_out_of_window": self.excluded_out_of_window,
            "unranked_venues": list(self.unranked_venues),
            "floor_defaulted_publications": self.floor_defaulted_publications,
            "synthesized_profiles": self.synthesized_profiles,
            "authors": self.authors,
            "journals": self.journals,
            "institutions": self.institutions,
        }


@dataclass(frozen=True)
class Corpus:
    publications: Tuple[PublicationRecord, ...] = ()
    profiles: Mapping[str, AuthorProfile] = field(
        default_factory=lambda: MappingProxyType({})
    )
    journals: Mapping[str, int] = field(default_factory=lambda: MappingProxyType({}))
    institutions: Mapping[str, bool] = field(
        default_factory=lambda: MappingProxyType({})
    )
    report: IngestReport = field(default_factory=IngestReport, compare=False)

    def __len__(self) -> int:
        return len(self.publications)

    def percentile(self, journal_id: str) -> Optional[int]:
        """Returns the venue percentile or None if the venue is unranked."""
        return self.journals.get(journal_id)

    def is_research_intensive(self, affiliation_id: str) -> bool:
        return self.institutions.get(affiliation_id, False)


# Parsing helpers
def parse_byline(data, path: str, line: int) -> AuthorByline:
    if not isinstance(data, dict):
        raise SchemaError("byline entries should be objects", path=path, line=line)

    author_id = data.get("author_id")

    if not isinstance(author_id, str) or not author_id:
        raise SchemaError(
            "byline author_id should be a non-empty string", path=path, line=line
        )

    affiliation_ids = data.get("affiliation_ids", [])

    if not isinstance(affiliation_ids, list) or not all(
        isinstance(a, str) for a in affiliation_ids
    ):
        raise SchemaError(
            "affiliation_ids should be a list of strings", path=path, line=line
        )

    country = data.get("country", "")

    if country is None:
        country = ""

    if not isinstance(country, str):
        raise SchemaError("country should be a string", path=path, line=line)

    return AuthorByline(
        author_id=author_id,
        affiliation_ids=tuple(affiliation_ids),
        country=country.upper(),
    )


def parse_publication(data, path: str, line: int) -> PublicationRecord:
    if not isinstance(data, dict):
        raise SchemaError("expecting a json object", path=path, line=line)

    pub_id = data.get("pub_id")

    if not isinstance(pub_id, str) or not pub_id:
        raise SchemaError("pub_id should be a non-empty string", path=path, line=line)

    year = data.get("year")

    if not isinstance(year, int) or isinstance(year, bool):
        raise SchemaError("year should be an integer", path=path, line=line)

    doc_type = data.get("doc_type")

    if doc_type not in DOC_TYPES:
        raise SchemaError(
            "doc_type should be one of %s" % ", ".join(DOC_TYPES), path=path, line=line
        )

    journal_id = data.get("journal_id", "")

    if journal_id is None:
        journal_id = ""

    if not isinstance(journal_id, str):
        raise SchemaError("journal_id should be a string", path=path, line=line)

    authors = data.get("authors")

    if not isinstance(authors, list) or not authors:
        raise SchemaError("authors should be a non-empty list", path=path, line=line)

    cited_asjc = data.get("cited_asjc", [])

    if not isinstance(cited_asjc, list) or not all(
        isinstance(c, int) and not isinstance(c, bool) for c in cited_asjc
    ):
        raise SchemaError(
            "cited_asjc should be a list of integers", path=path, line=line
        )

    return PublicationRecord(
        pub_id=pub_id,
        year=year,
        doc_type=doc_type,
        journal_id=journal_id,
        authors=tuple(parse_byline(b, path, line) for b in authors),
        cited_asjc=tuple(sorted(cited_asjc)),
    )


def read_publications(path: str) -> List[Tuple[int, PublicationRecord]]:
    publications = []

    with ensure_open(path) as f:
        for i, line in enumerate(f):
            line = line.strip()

            if not line:
                continue

            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError("invalid json: %s" % e.msg, path=path, line=i + 1)

            publications.append((i + 1, parse_publication(data, path, i + 1)))

    return publications


def read_table(
    path: str, record_class: Type[TabularRecord]
) -> Iterator[Tuple[int, TabularRecord]]:
    """
    Reads a CSV file whose columns must include the fields of the given
    tabular record, yielding (line number, record) tuples.
    """
    fieldnames = record_class.fieldnames()

    with casanova.reader(path) as reader:
        if reader.headers is None:
            raise SchemaError("missing header row", path=path, line=1)

        positions = []

        for name in fieldnames:
            pos = reader.headers.get(name)

            if pos is None:
                raise SchemaError("missing column %s" % name, path=path, line=1)

            positions.append(pos)

        for i, row in reader.enumerate():
            line = i + 2

            if len(row) != reader.row_len:
                raise SchemaError(
                    "expected %i cells but got %i" % (reader.row_len, len(row)),
                    path=path,
                    line=line,
                )

            cells = [row[pos].strip() for pos in positions]

            try:
                record = record_class.parse(cells)
            except (ValueError, TypeError) as e:
                raise SchemaError(str(e), path=path, line=line)

            yield line, record


def read_profiles(path: str) -> Dict[str, AuthorProfile]:
    profiles = {}

    for line, row in read_table(path, AuthorRow):
        if not row.author_id:
            raise SchemaError("author_id cannot be empty", path=path, line=line)

        if row.author_id in profiles:
            raise DuplicateRecordError(row.author_id, path=path, line=line)

        gender = row.gender.upper() or "U"

        if gender not in GENDERS:
            raise SchemaError(
                "gender should be one of %s" % ", ".join(GENDERS), path=path, line=line
            )

        profiles[row.author_id] = AuthorProfile(
            author_id=row.author_id, gender=gender, first_pub_year=row.first_pub_year
        )

    return profiles


def read_journals(path: str) -> Dict[str, int]:
    journals = {}

    for line, row in read_table(path, JournalRank):
        if row.journal_id in journals:
            raise DuplicateRecordError(row.journal_id, path=path, line=line)

        if not 0 <= row.citescore_percentile <= defaults.MAX_PERCENTILE:
            raise SchemaError(
                "citescore_percentile should lie in [0, %i]" % defaults.MAX_PERCENTILE,
                path=path,
                line=line,
            )

        journals[row.journal_id] = row.citescore_percentile

    return journals


def read_institutions(path: str) -> Dict[str, bool]:
    institutions = {}

    for line, row in read_table(path, InstitutionFlag):
        if row.affiliation_id in institutions:
            raise DuplicateRecordError(row.affiliation_id, path=path, line=line)

        institutions[row.affiliation_id] = row.research_intensive

    return institutions


def validate_institution_flags(path: str) -> None:
    # NOTE: casanova parses booleans leniently, the schema only allows 0/1
    with casanova.reader(path) as reader:
        pos = reader.headers.get("research_intensive")

        if pos is None:
            return

        for i, row in reader.enumerate():
            if row[pos].strip() not in ("0", "1"):
                raise SchemaError(
                    "research_intensive should be 0 or 1", path=path, line=i + 2
                )


def load_corpus(paths: CorpusPaths, config, threads: int = 1) -> Corpus:
    paths.check()

    def load_institutions():
        validate_institution_flags(paths.institutions)
        return read_institutions(paths.institutions)

    tasks = [
        lambda: read_publications(paths.publications),
        lambda: read_profiles(paths.authors),
        lambda: read_journals(paths.journals),
        load_institutions,
    ]

    raw_publications, profiles, journals, institutions = parallel_map(
        lambda task: task(), tasks, threads=threads
    )

    report = IngestReport(
        publications_read=len(raw_publications),
        authors=len(profiles),
        journals=len(journals),
        institutions=len(institutions),
    )

    seen = set()
    kept = []

    for line, publication in raw_publications:
        if publication.pub_id in seen:
            raise DuplicateRecordError(
                publication.pub_id, path=paths.publications, line=line
            )

        seen.add(publication.pub_id)

        if publication.doc_type not in KEPT_DOC_TYPES:
            report.excluded_doc_type += 1
            continue

        if not config.start_year <= publication.year <= config.end_year:
            report.excluded_out_of_window += 1
            continue

        kept.append(publication)

    kept.sort(key=lambda p: p.pub_id)

    if report.excluded_doc_type:
        logger.info(
            "excluded %s publications of other document types",
            format_int(report.excluded_doc_type),
        )

    if report.excluded_out_of_window:
        logger.info(
            "excluded %s publications outside of the %i-%i window",
            format_int(report.excluded_out_of_window),
            config.start_year,
            config.end_year,
        )

    # Referential integrity
    unranked = set()

    for publication in kept:
        if publication.journal_id not in journals:
            unranked.add(publication.journal_id)
            report.floor_defaulted_publications += 1

        for byline in publication.authors:
            if byline.author_id not in profiles:
                profiles[byline.author_id] = AuthorProfile(
                    author_id=byline.author_id, gender="U", synthesized=True
                )
                report.synthesized_profiles += 1

    report.unranked_venues = tuple(sorted(unranked))

    if unranked:
        logger.warning(
            "%s unranked venues, %s publications get the floor prestige weight",
            format_int(len(unranked)),
            format_int(report.floor_defaulted_publications),
        )

    if report.synthesized_profiles:
        logger.warning(
            "%s byline authors have no profile and were given an unknown gender",
            format_int(report.synthesized_profiles),
        )

    return Corpus(
        publications=tuple(kept),
        profiles=MappingProxyType(dict(sorted(profiles.items()))),
        journals=MappingProxyType(dict(sorted(journals.items()))),
        institutions=MappingProxyType(dict(sorted(institutions.items()))),
        report=report,
    )


def derive_first_pub_year(corpus: Corpus) -> Dict[str, AuthorProfile]:
    """
    Fills missing first publication years with the earliest corpus year of
    the author, marking them as approximate. Declared years always win but
    must not be later than the earliest observed publication.
    """
    earliest = {}

    for publication in corpus.publications:
        for byline in publication.authors:
            current = earliest.get(byline.author_id)

            if current is None or publication.year < current:
                earliest[byline.author_id] = publication.year

    profiles = {}

    for author_id, profile in corpus.profiles.items():
        observed = earliest.get(author_id)

        if profile.first_pub_year is not None:
            if observed is not None and profile.first_pub_year > observed:
                raise InvariantViolationError(
                    "author %s declares a first publication in %i but already published in %i"
                    % (author_id, profile.first_pub_year, observed),
                    author_id=author_id,
                )

            profiles[author_id] = profile

        elif observed is not None:
            profiles[author_id] = replace(
                profile, first_pub_year=observed, approximate=True
            )

        else:
            # NOTE: no publication and no declared year, the author cannot
            # appear in the panel anyway.
            profiles[author_id] = profile

    return profiles
