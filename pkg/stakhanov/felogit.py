# =============================================================================
# Stakhanov Fixed Effects Logit
# =============================================================================
#
# Binary response GLM with logit link, explicit period and discipline
# dummies, maximum likelihood by damped Newton steps and Wald inference.
# Also hosts the diagnostics run alongside the models: inverse correlation
# matrix diagonal and overlap of confidence intervals across measures.
#
from typing import (
    Sequence,
    List,
    Tuple,
    Dict,
    Optional,
    Mapping,
)

import math
import logging
import numpy as np
from dataclasses import dataclass, field
from scipy.special import expit
from scipy.stats import norm
from ebbe import format_int, and_join

from stakhanov import defaults
from stakhanov.types import Measure, DisciplineCoding
from stakhanov.panel import AuthorPeriodUnit
from stakhanov.classify import TopClassAssignment, index_assignments
from stakhanov.utils import parallel_map, format_threshold
from stakhanov.exceptions import (
    ConfigError,
    NumericError,
    ConvergenceError,
    SeparationError,
    RankDeficiencyError,
    SingularMatrixError,
)

logger = logging.getLogger(__name__)

INTERCEPT = "(intercept)"
FIXED_EFFECTS = ("period", "discipline")

# Under separation the score vanishes while Newton steps stay of order one,
# so convergence also requires the step itself to be negligible
STEP_TOLERANCE = 1e-6


@dataclass(frozen=True)
class GlmSpec:
    threshold: float
    measure: Measure
    covariates: Tuple[str, ...] = defaults.COVARIATES
    fixed_effects: Tuple[str, ...] = FIXED_EFFECTS
    discipline_coding: DisciplineCoding = "sum"
    score_tolerance: float = defaults.SCORE_TOLERANCE
    loglik_tolerance: float = defaults.LOGLIK_TOLERANCE
    max_iterations: int = defaults.MAX_ITERATIONS
    separation_bound: float = defaults.SEPARATION_BOUND

    def __post_init__(self):
        if len(set(self.covariates)) != len(self.covariates):
            raise ConfigError("covariates cannot be duplicated")

        for name in self.covariates:
            if name not in defaults.COVARIATES:
                raise ConfigError(
                    "unknown covariate %s, expecting one of %s"
                    % (name, and_join(defaults.COVARIATES))
                )

        for name in self.fixed_effects:
            if name not in FIXED_EFFECTS:
                raise ConfigError("unknown fixed effect %s" % name)

        if self.discipline_coding not in ("sum", "reference"):
            raise ConfigError('discipline_coding should be "sum" or "reference"')

    @classmethod
    def from_config(cls, config, threshold: float, measure: str, **kwargs) -> "GlmSpec":
        kwargs.setdefault("covariates", tuple(config.covariates))

        return cls(
            threshold=threshold,
            measure=measure,
            discipline_coding=config.discipline_coding,
            score_tolerance=config.score_tolerance,
            loglik_tolerance=config.loglik_tolerance,
            max_iterations=config.max_iterations,
            separation_bound=config.separation_bound,
            **kwargs
        )

    @property
    def label(self) -> str:
        return "%s/%s" % (format_threshold(self.threshold), self.measure)


@dataclass
class RegressionFrame:
    y: np.ndarray
    covariates: Dict[str, np.ndarray]
    periods: np.ndarray
    disciplines: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, mask: np.ndarray) -> "RegressionFrame":
        return RegressionFrame(
            y=self.y[mask],
            covariates={k: v[mask] for k, v in self.covariates.items()},
            periods=self.periods[mask],
            disciplines=self.disciplines[mask],
        )


def covariate_value(unit: AuthorPeriodUnit, name: str) -> float:
    if name == "academic_age":
        return float(unit.academic_age)

    if name == "gender_male":
        return 1.0 if unit.gender == "M" else 0.0

    if name == "research_intensity_rest":
        return 0.0 if unit.research_intensive else 1.0

    if unit.covariates is None:
        raise TypeError("covariates were not computed for unit %s" % (unit.key,))

    return float(getattr(unit.covariates, name))


def build_frame(
    units: Sequence[AuthorPeriodUnit],
    assignments: Sequence[TopClassAssignment],
    spec: GlmSpec,
) -> RegressionFrame:
    """
    Gathers the response (membership in the model's class for the model's
    measure) and the covariates of every unit of known gender that was
    ranked on the measure.
    """
    lookup = index_assignments(assignments, measure=spec.measure)

    rows = [u for u in units if u.gender in ("M", "F") and u.key in lookup]

    return RegressionFrame(
        y=np.array([lookup[u.key].is_top(spec.threshold) for u in rows], dtype=float),
        covariates={
            name: np.array([covariate_value(u, name) for u in rows], dtype=float)
            for name in spec.covariates
        },
        periods=np.array([u.period_index for u in rows], dtype=int),
        disciplines=np.array([u.discipline for u in rows], dtype=object),
    )


@dataclass
class DesignMatrix:
    X: np.ndarray
    columns: List[str]
    period_levels: List
    discipline_levels: List


def build_design(frame: RegressionFrame, spec: GlmSpec) -> DesignMatrix:
    columns = list(spec.covariates)
    blocks = [frame.covariates[name] for name in spec.covariates]

    period_levels = []
    discipline_levels = []

    if "period" in spec.fixed_effects:
        period_levels = sorted(set(frame.periods.tolist()))

        for level in period_levels:
            columns.append("period[%s]" % level)
            blocks.append((frame.periods == level).astype(float))
    else:
        columns.append(INTERCEPT)
        blocks.append(np.ones(len(frame)))

    if "discipline" in spec.fixed_effects:
        discipline_levels = sorted(set(frame.disciplines.tolist()))

        if spec.discipline_coding == "sum":
            last = frame.disciplines == discipline_levels[-1]

            for level in discipline_levels[:-1]:
                columns.append("discipline[%s]" % level)
                blocks.append(
                    (frame.disciplines == level).astype(float) - last.astype(float)
                )
        else:
            for level in discipline_levels[1:]:
                columns.append("discipline[%s]" % level)
                blocks.append((frame.disciplines == level).astype(float))

    X = np.column_stack(blocks) if blocks else np.empty((len(frame), 0))

    return DesignMatrix(
        X=X,
        columns=columns,
        period_levels=period_levels,
        discipline_levels=discipline_levels,
    )


def collinear_columns(X: np.ndarray, columns: Sequence[str]) -> List[str]:
    """
    Names the columns involved in a linear dependency: each column that
    does not raise the rank of the preceding ones, together with the
    columns it is a combination of.
    """
    involved = set()
    kept = []

    for j in range(X.shape[1]):
        candidate = kept + [j]

        if np.linalg.matrix_rank(X[:, candidate]) == len(candidate):
            kept = candidate
            continue

        involved.add(j)

        if kept:
            coef = np.linalg.lstsq(X[:, kept], X[:, j], rcond=None)[0]
            involved.update(k for k, c in zip(kept, coef) if abs(c) > 1e-8)

    return [columns[j] for j in sorted(involved)]


def check_rank(design: DesignMatrix) -> None:
    X = design.X

    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficiencyError(collinear_columns(X, design.columns))


def log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta

    return math.fsum(y * eta - np.logaddexp(0, eta))


def null_log_likelihood(y: np.ndarray) -> float:
    """
    Log-likelihood of the intercept-only model, in closed form.
    """
    n = len(y)
    n1 = float(np.sum(y))
    n0 = n - n1
    ybar = n1 / n

    return n1 * math.log(ybar) + n0 * math.log(1 - ybar)


@dataclass(frozen=True)
class IterationStep:
    iteration: int
    loglik: float
    gradient_max: float
    step_halvings: int


@dataclass
class NewtonResult:
    beta: np.ndarray
    covariance: np.ndarray
    loglik: float
    iterations: int
    gradient_max: float
    trace: List[IterationStep]


def check_bound(beta: np.ndarray, columns: Sequence[str], bound: float) -> None:
    j = int(np.argmax(np.abs(beta)))

    if abs(beta[j]) > bound:
        raise SeparationError(columns[j])


def newton(
    X: np.ndarray, y: np.ndarray, columns: Sequence[str], spec: GlmSpec
) -> NewtonResult:
    """
    Maximizes the Bernoulli log-likelihood with logit link starting from
    beta = 0. Steps are halved until the log-likelihood does not decrease.
    """
    beta = np.zeros(X.shape[1])
    loglik = log_likelihood(X, y, beta)
    trace = []
    polishing = None

    for iteration in range(1, spec.max_iterations + 1):
        mu = expit(X @ beta)
        gradient = X.T @ (y - mu)
        gradient_max = float(np.max(np.abs(gradient))) if len(gradient) else 0.0
        hessian = X.T @ (X * (mu * (1 - mu))[:, None])

        try:
            step = np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError:
            raise SeparationError(columns[int(np.argmax(np.abs(beta)))])

        step_max = float(np.max(np.abs(step))) if len(step) else 0.0
        converged = (
            gradient_max < spec.score_tolerance and step_max < STEP_TOLERANCE
        )

        if converged or polishing == 0:
            return NewtonResult(
                beta=beta,
                covariance=np.linalg.inv(hessian),
                loglik=loglik,
                iterations=iteration - 1,
                gradient_max=gradient_max,
                trace=trace,
            )

        halvings = 0
        candidate = beta + step
        candidate_loglik = log_likelihood(X, y, candidate)

        while candidate_loglik < loglik and halvings < 30:
            halvings += 1
            step /= 2
            candidate = beta + step
            candidate_loglik = log_likelihood(X, y, candidate)

        check_bound(candidate, columns, spec.separation_bound)

        change = abs(candidate_loglik - loglik) / max(abs(loglik), 1e-300)

        beta = candidate
        loglik = candidate_loglik

        trace.append(
            IterationStep(
                iteration=iteration,
                loglik=loglik,
                gradient_max=gradient_max,
                step_halvings=halvings,
            )
        )

        # NOTE: once the log-likelihood stalls, one more full Newton step is
        # taken before stopping
        if polishing is not None:
            polishing -= 1
        elif change < spec.loglik_tolerance:
            polishing = 1

    raise ConvergenceError(
        "no convergence after %i iterations (max |score| = %g)"
        % (spec.max_iterations, trace[-1].gradient_max if trace else float("nan")),
        trace=trace,
    )


@dataclass(frozen=True)
class GlmCoefficient:
    name: str
    beta: float
    se: float
    z: float
    exp_b: float
    ci_low: float
    ci_high: float
    p_value: float

    @classmethod
    def from_estimate(cls, name: str, beta: float, se: float) -> "GlmCoefficient":
        z = beta / se

        return cls(
            name=name,
            beta=beta,
            se=se,
            z=z,
            exp_b=math.exp(beta),
            ci_low=math.exp(beta - defaults.WALD_Z * se),
            ci_high=math.exp(beta + defaults.WALD_Z * se),
            p_value=float(2 * norm.sf(abs(z))),
        )


@dataclass(frozen=True)
class FixedEffectEstimate:
    kind: str
    level: str
    shift: float
    se: Optional[float]


@dataclass
class GlmFit:
    spec: GlmSpec
    coefficients: List[GlmCoefficient]
    fixed_effects: List[FixedEffectEstimate]
    columns: List[str]
    beta: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)
    loglik_full: float = 0.0
    loglik_null: float = 0.0
    n_obs: int = 0
    n_events: int = 0
    converged: bool = True
    iterations: int = 0
    gradient_max: float = 0.0
    trace: List[IterationStep] = field(default_factory=list, repr=False)

    @property
    def mcfadden_r2(self) -> float:
        return mcfadden(self)

    def coefficient(self, name: str) -> GlmCoefficient:
        for c in self.coefficients:
            if c.name == name:
                return c

        raise KeyError(name)

    def stats(self) -> Dict:
        return {
            "class": format_threshold(self.spec.threshold),
            "measure": self.spec.measure,
            "loglik_full": self.loglik_full,
            "loglik_null": self.loglik_null,
            "mcfadden": self.mcfadden_r2,
            "n": self.n_obs,
            "events": self.n_events,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_max": self.gradient_max,
        }


def mcfadden(fit: GlmFit) -> float:
    r2 = 1 - fit.loglik_full / fit.loglik_null

    # Rounding noise when the full model is the null model
    if abs(r2) < 1e-12:
        return 0.0

    return r2


def fixed_effect_estimates(
    design: DesignMatrix, beta: np.ndarray, covariance: np.ndarray, spec: GlmSpec
) -> List[FixedEffectEstimate]:
    index = {name: j for j, name in enumerate(design.columns)}
    estimates = []

    def contrast(vector):
        shift = float(vector @ beta)
        se = math.sqrt(max(float(vector @ covariance @ vector), 0.0))
        return shift, se

    p = len(design.columns)

    for level in design.period_levels:
        j = index["period[%s]" % level]
        estimates.append(
            FixedEffectEstimate(
                kind="period",
                level=str(level),
                shift=float(beta[j]),
                se=math.sqrt(covariance[j, j]),
            )
        )

    levels = design.discipline_levels

    if not levels:
        return estimates

    if spec.discipline_coding == "sum":
        dummies = [index["discipline[%s]" % level] for level in levels[:-1]]

        for level, j in zip(levels[:-1], dummies):
            estimates.append(
                FixedEffectEstimate(
                    kind="discipline",
                    level=level,
                    shift=float(beta[j]),
                    se=math.sqrt(covariance[j, j]),
                )
            )

        # The omitted level is minus the sum of the others
        vector = np.zeros(p)
        vector[dummies] = -1
        shift, se = contrast(vector)
        estimates.append(
            FixedEffectEstimate(kind="discipline", level=levels[-1], shift=shift, se=se)
        )
    else:
        estimates.append(
            FixedEffectEstimate(kind="discipline", level=levels[0], shift=0.0, se=None)
        )

        for level in levels[1:]:
            j = index["discipline[%s]" % level]
            estimates.append(
                FixedEffectEstimate(
                    kind="discipline",
                    level=level,
                    shift=float(beta[j]),
                    se=math.sqrt(covariance[j, j]),
                )
            )

    return estimates


def fit_frame(frame: RegressionFrame, spec: GlmSpec) -> GlmFit:
    n = len(frame)
    n_events = int(frame.y.sum())

    if n_events == 0 or n_events == n:
        raise SeparationError(
            "response (%s members among %s units)"
            % (format_int(n_events), format_int(n))
        )

    design = build_design(frame, spec)
    check_rank(design)

    result = newton(design.X, frame.y, design.columns, spec)

    se = np.sqrt(np.diag(result.covariance))
    coefficients = []

    for j, name in enumerate(design.columns):
        if name in spec.covariates or name == INTERCEPT:
            coefficients.append(
                GlmCoefficient.from_estimate(name, float(result.beta[j]), float(se[j]))
            )

    fit = GlmFit(
        spec=spec,
        coefficients=coefficients,
        fixed_effects=fixed_effect_estimates(
            design, result.beta, result.covariance, spec
        ),
        columns=design.columns,
        beta=result.beta,
        covariance=result.covariance,
        loglik_full=result.loglik,
        loglik_null=null_log_likelihood(frame.y),
        n_obs=n,
        n_events=n_events,
        converged=True,
        iterations=result.iterations,
        gradient_max=result.gradient_max,
        trace=result.trace,
    )

    logger.debug(
        "fitted %s on %s units in %i iterations",
        spec.label,
        format_int(n),
        result.iterations,
    )

    return fit


def fit(
    units: Sequence[AuthorPeriodUnit],
    assignments: Sequence[TopClassAssignment],
    spec: GlmSpec,
) -> GlmFit:
    return fit_frame(build_frame(units, assignments, spec), spec)


@dataclass
class GridResult:
    spec: GlmSpec
    fit: Optional[GlmFit] = None
    error: Optional[NumericError] = None

    @property
    def ok(self) -> bool:
        return self.fit is not None


def fit_grid(
    units: Sequence[AuthorPeriodUnit],
    assignments: Sequence[TopClassAssignment],
    config,
    thresholds: Optional[Sequence[float]] = None,
    measures: Optional[Sequence[str]] = None,
    threads: int = 1,
    strict: bool = True,
) -> List[GridResult]:
    """
    Fits one model per (class, measure), ordered by class then measure.
    When `strict` is False, numeric failures are kept in the results
    instead of being raised.
    """
    specs = [
        GlmSpec.from_config(config, t, m)
        for t in (thresholds or config.thresholds)
        for m in (measures or config.measures)
    ]

    def work(spec):
        try:
            return GridResult(spec, fit=fit(units, assignments, spec))
        except NumericError as e:
            if strict:
                raise

            logger.error("could not fit %s: %s", spec.label, e)
            return GridResult(spec, error=e)

    return parallel_map(work, specs, threads)


# Diagnostics
def collinearity_diagnostic(columns: Mapping[str, Sequence[float]]) -> Dict[str, float]:
    """
    Main diagonal of the inverted Pearson correlation matrix of the given
    covariates. Values of 1 mean no multivariate correlation.
    """
    names = list(columns)

    if len(names) < 2:
        raise ValueError("at least two covariates are required")

    matrix = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])

    constant = [n for n, sd in zip(names, matrix.std(axis=0)) if sd == 0]

    if constant:
        raise SingularMatrixError(constant)

    correlation = np.corrcoef(matrix, rowvar=False)

    if np.linalg.matrix_rank(correlation) < len(names):
        raise SingularMatrixError(collinear_columns(correlation, names))

    inverse = np.linalg.inv(correlation)

    return {n: float(v) for n, v in zip(names, np.diag(inverse))}


@dataclass(frozen=True)
class CollinearityRow:
    period: int
    sample: str
    covariate: str
    value: float


def collinearity_by_period(
    frame: RegressionFrame, class_label: str = "class"
) -> List[CollinearityRow]:
    """
    Inverse correlation diagonal per period, computed for the class
    members, the rest of the units and both together. Singular cells are
    skipped with a warning.
    """
    rows = []

    for period in sorted(set(frame.periods.tolist())):
        in_period = frame.periods == period
        samples = [
            ("all", in_period),
            (class_label, in_period & (frame.y == 1)),
            ("rest", in_period & (frame.y == 0)),
        ]

        for sample, mask in samples:
            if mask.sum() < 3:
                continue

            try:
                diagonal = collinearity_diagnostic(
                    {k: v[mask] for k, v in frame.covariates.items()}
                )
            except SingularMatrixError as e:
                logger.warning(
                    "skipping collinearity of period %s (%s): %s", period, sample, e
                )
                continue

            rows.extend(
                CollinearityRow(period=period, sample=sample, covariate=k, value=v)
                for k, v in diagonal.items()
            )

    return rows


@dataclass(frozen=True)
class OverlapRow:
    covariate: str
    fit: str
    overlaps: Tuple[str, ...]


def intervals_overlap(a: Tuple[float, float], b: Tuple[float, float]) -> bool:
    # Closed intervals, touching endpoints do overlap
    return a[0] <= b[1] and b[0] <= a[1]


def ci_overlap_report(fits: Mapping[str, GlmFit]) -> List[OverlapRow]:
    """
    For each covariate shared by the given fits (keyed by a label, e.g. the
    measure) lists which other fits have an intersecting 95% interval.
    """
    if len(fits) < 2:
        raise ValueError("at least two fits are required")

    labels = list(fits)
    shared = [
        c.name
        for c in fits[labels[0]].coefficients
        if all(
            any(o.name == c.name for o in fits[label].coefficients)
            for label in labels[1:]
        )
    ]

    rows = []

    for name in shared:
        intervals = {}

        for label in labels:
            c = fits[label].coefficient(name)
            intervals[label] = (c.ci_low, c.ci_high)

        for label in labels:
            rows.append(
                OverlapRow(
                    covariate=name,
                    fit=label,
                    overlaps=tuple(
                        other
                        for other in labels
                        if other != label
                        and intervals_overlap(intervals[label], intervals[other])
                    ),
                )
            )

    return rows

