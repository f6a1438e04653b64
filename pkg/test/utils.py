import csv
import math
import numpy as np
from os.path import join, dirname
from scipy.optimize import minimize

from stakhanov.panel import AuthorPeriodUnit, age_group
from stakhanov.productivity import ProductivityVector, CovariateSet

RESOURCES = join(dirname(__file__), "resources")
CORPUS_DIR = join(RESOURCES, "corpus")
CONFIG_PATH = join(RESOURCES, "config.toml")
SEPARABLE_DIR = join(RESOURCES, "separable")
SEPARABLE_CONFIG_PATH = join(SEPARABLE_DIR, "config.toml")


def collect_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(line for line in f if not line.startswith("#")))


def collect_csv_dicts(path):
    rows = collect_csv(path)
    headers = rows[0]

    return [dict(zip(headers, row)) for row in rows[1:]]


def make_unit(
    author_id,
    period=0,
    discipline="CHEM",
    gender="M",
    p1=1.0,
    p2=None,
    p3=1,
    p4=None,
    age=10,
    research_intensive=False,
    pub_ids=None,
    team=1.0,
    collab=0.0,
    intl=0.0,
    medperc=50.0,
):
    return AuthorPeriodUnit(
        author_id=author_id,
        period_index=period,
        discipline=discipline,
        academic_age=age,
        age_group=age_group(age),
        gender=gender,
        research_intensive=research_intensive,
        pub_ids=tuple(pub_ids or ["%s-%i" % (author_id, period)]),
        measures=ProductivityVector(
            p1=p1,
            p2=p1 if p2 is None else p2,
            p3=p3,
            p4=float(p3) if p4 is None else p4,
        ),
        covariates=CovariateSet(
            avg_team_size=team,
            collaboration_rate=collab,
            intl_collaboration_rate=intl,
            median_journal_percentile=medperc,
        ),
    )


def brute_force_members(values, threshold):
    """
    Indices of the values belonging to the top `threshold` percent class,
    the slow way: sort, find the value at the cutoff rank, keep every value
    reaching it.
    """
    n = len(values)
    k = max(1, math.floor(threshold * n / 100 + 1e-9))
    cutoff = sorted(values, reverse=True)[k - 1]

    return set(i for i, v in enumerate(values) if v >= cutoff)


def brute_force_ranks(values):
    return [1 + sum(1 for w in values if w > v) for v in values]


def reference_logit(X, y):
    """
    Maximum likelihood logit estimates through a generic quasi-Newton
    optimizer, used as an independent check of the solver.
    """

    def objective(beta):
        eta = X @ beta
        return -float(np.sum(y * eta - np.logaddexp(0, eta)))

    def gradient(beta):
        mu = 1 / (1 + np.exp(-(X @ beta)))
        return -(X.T @ (y - mu))

    result = minimize(
        objective,
        np.zeros(X.shape[1]),
        jac=gradient,
        method="BFGS",
        options={"gtol": 1e-10, "maxiter": 10000},
    )

    return result.x


def naive_newton_logit(frame, covariates, tolerance=1e-12, max_iterations=100):
    """
    Plain Newton-Raphson on a dense design holding every period dummy and
    every discipline dummy but the first one, with no intercept.
    """
    columns = [np.asarray(frame.covariates[name], dtype=float) for name in covariates]

    for level in sorted(set(frame.periods.tolist())):
        columns.append((frame.periods == level).astype(float))

    for level in sorted(set(frame.disciplines.tolist()))[1:]:
        columns.append((frame.disciplines == level).astype(float))

    X = np.column_stack(columns)
    y = np.asarray(frame.y, dtype=float)
    beta = np.zeros(X.shape[1])

    for _ in range(max_iterations):
        mu = 1 / (1 + np.exp(-(X @ beta)))
        gradient = X.T @ (y - mu)
        hessian = (X * (mu * (1 - mu))[:, None]).T @ X
        step = np.linalg.solve(hessian, gradient)
        beta = beta + step

        if np.max(np.abs(step)) < tolerance:
            break

    return beta[: len(covariates)]


def lotka_share_band(
    cohort_sizes, alpha, n_max, threshold=10, replications=400, seed=0
):
    """
    Monte Carlo range of the pooled top class share of independent cohorts
    whose counts follow a truncated power law, the classes being found by
    brute force.
    """
    rng = np.random.default_rng(seed)
    weights = np.arange(1, n_max + 1, dtype=float) ** -alpha
    weights /= weights.sum()

    shares = []

    for _ in range(replications):
        numerator = 0
        denominator = 0

        for size in cohort_sizes:
            values = (rng.choice(n_max, size=size, p=weights) + 1).tolist()
            members = brute_force_members(values, threshold)

            numerator += sum(values[i] for i in members)
            denominator += sum(values)

        shares.append(100 * numerator / denominator)

    return float(np.percentile(shares, 0.5)), float(np.percentile(shares, 99.5))
