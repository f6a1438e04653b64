# =============================================================================
# Stakhanov Run Configuration
# =============================================================================
#
# A single TOML file describing a run. Keys mirror the fields of RunConfig
# one to one, the `[disciplines]` table maps ASJC codes to labels and the
# `[simulation]` table holds the synthetic cohort generator parameters.
#
from typing import Optional, Dict, Tuple, List, Any, Mapping

from dataclasses import dataclass, field, fields, asdict, replace
from casanova.utils import ensure_open

from stakhanov import defaults
from stakhanov.types import (
    toml_parser,
    MEASURES,
    SHARE_BASES,
    ShareBasis,
    UnknownGenderPolicy,
    DisciplineCoding,
    JSONDict,
)
from stakhanov.utils import canonical_json, sha256_hexdigest
from stakhanov.exceptions import ConfigError, MissingInputError
from stakhanov.panel import Period, build_periods, validate_periods

# NOTE: those keys do not influence results and are therefore kept out of
# the config hash and of the recorded overrides.
NON_SEMANTIC_KEYS = ("input_dir", "output_dir", "threads")


@dataclass(frozen=True)
class RunConfig:
    start_year: int = defaults.START_YEAR
    end_year: int = defaults.END_YEAR
    period_length: int = defaults.PERIOD_LENGTH
    periods: Optional[Tuple[Tuple[int, int], ...]] = None
    disciplines: Dict[str, str] = field(
        default_factory=lambda: dict(defaults.DISCIPLINES)
    )
    thresholds: Tuple[float, ...] = defaults.THRESHOLDS
    measures: Tuple[str, ...] = MEASURES
    share_basis: ShareBasis = "measure"
    home_country: str = defaults.HOME_COUNTRY
    unknown_gender: UnknownGenderPolicy = "keep"
    seed: int = defaults.SEED
    score_tolerance: float = defaults.SCORE_TOLERANCE
    loglik_tolerance: float = defaults.LOGLIK_TOLERANCE
    max_iterations: int = defaults.MAX_ITERATIONS
    separation_bound: float = defaults.SEPARATION_BOUND
    covariates: Tuple[str, ...] = defaults.COVARIATES
    discipline_coding: DisciplineCoding = "sum"
    min_correlation_cell: int = defaults.MIN_CORRELATION_CELL
    input_dir: str = "."
    output_dir: str = "."
    threads: int = 1
    simulation: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.start_year > self.end_year:
            raise ConfigError("start_year cannot be greater than end_year")

        if self.period_length < 1:
            raise ConfigError("period_length should be a positive integer")

        validate_periods(self.get_periods(), self.start_year, self.end_year)

        if not self.thresholds:
            raise ConfigError("thresholds cannot be empty")

        for t in self.thresholds:
            if not 0 < t < 100:
                raise ConfigError("thresholds should lie in (0, 100), got %s" % t)

        for a, b in zip(self.thresholds, self.thresholds[1:]):
            if a >= b:
                raise ConfigError("thresholds should be strictly increasing")

        if not self.measures:
            raise ConfigError("measures cannot be empty")

        for m in self.measures:
            if m not in MEASURES:
                raise ConfigError(
                    "unknown measure %s, expecting one of %s"
                    % (m, ", ".join(MEASURES))
                )

        if self.share_basis not in SHARE_BASES:
            raise ConfigError(
                "unknown share_basis %s, expecting one of %s"
                % (self.share_basis, ", ".join(SHARE_BASES))
            )

        if self.unknown_gender not in ("exclude", "keep"):
            raise ConfigError('unknown_gender should be "exclude" or "keep"')

        if self.discipline_coding not in ("sum", "reference"):
            raise ConfigError('discipline_coding should be "sum" or "reference"')

        if not self.disciplines:
            raise ConfigError("the discipline whitelist cannot be empty")

        for code in self.disciplines:
            if not code.isdigit() or len(code) not in (2, 4):
                raise ConfigError(
                    "discipline keys should be 2-digit ASJC areas or 4-digit ASJC codes, got %s"
                    % code
                )

        if len(set(self.covariates)) != len(self.covariates):
            raise ConfigError("covariates cannot be duplicated")

        for name in self.covariates:
            if name not in defaults.COVARIATES:
                raise ConfigError("unknown covariate %s" % name)

        if self.max_iterations < 1:
            raise ConfigError("max_iterations should be a positive integer")

        if self.threads < 1:
            raise ConfigError("threads should be a positive integer")

        if self.min_correlation_cell < 2:
            raise ConfigError("min_correlation_cell should be at least 2")

    def get_periods(self) -> List[Period]:
        if self.periods is not None:
            return [
                Period(index=i, start_year=s, end_year=e)
                for i, (s, e) in enumerate(self.periods)
            ]

        return build_periods(self.start_year, self.end_year, self.period_length)

    def discipline_of(self, code: int) -> Optional[str]:
        label = self.disciplines.get("%04i" % code)

        if label is not None:
            return label

        return self.disciplines.get("%02i" % (code // 100))

    def as_dict(self) -> JSONDict:
        d = asdict(self)
        d["periods"] = [[p.start_year, p.end_year] for p in self.get_periods()]
        d["thresholds"] = list(self.thresholds)
        d["measures"] = list(self.measures)
        d["covariates"] = list(self.covariates)

        return d

    def semantic_dict(self) -> JSONDict:
        d = self.as_dict()

        for k in NON_SEMANTIC_KEYS:
            del d[k]

        return d

    def hash(self) -> str:
        return sha256_hexdigest(canonical_json(self.semantic_dict()))

    def evolve(self, **changes) -> "RunConfig":
        return replace(self, **changes)


FIELD_NAMES = [f.name for f in fields(RunConfig)]


def coerce_config_mapping(data: Mapping[str, Any]) -> Dict[str, Any]:
    kwargs = {}

    for k, v in data.items():
        if k not in FIELD_NAMES:
            raise ConfigError("unknown configuration key: %s" % k)

        if k == "periods" and v is not None:
            try:
                v = tuple((int(s), int(e)) for s, e in v)
            except (TypeError, ValueError):
                raise ConfigError("periods should be a list of [start, end] pairs")

        elif k == "disciplines":
            v = {str(code): str(label) for code, label in v.items()}

        elif k == "thresholds":
            v = tuple(float(t) if not float(t).is_integer() else int(t) for t in v)

        elif k == "measures":
            v = tuple(str(m).lower() for m in v)

        elif k == "covariates":
            v = tuple(str(c) for c in v)

        kwargs[k] = v

    return kwargs


def load_config(
    path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    data = {}

    if path is not None:
        try:
            with ensure_open(path, mode="rb") as f:
                data = toml_parser.load(f)
        except FileNotFoundError:
            raise MissingInputError(path)
        except toml_parser.TOMLDecodeError as e:
            raise ConfigError("%s: %s" % (path, e))

    kwargs = coerce_config_mapping(data)

    if overrides:
        kwargs.update(coerce_config_mapping(overrides))

    return RunConfig(**kwargs)


def recorded_overrides(overrides: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    if not overrides:
        return {}

    return {
        k: v for k, v in sorted(overrides.items()) if k not in NON_SEMANTIC_KEYS
    }
