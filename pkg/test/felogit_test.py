# =============================================================================
# Stakhanov Fixed Effects Logit Unit Tests
# =============================================================================
import math
import pytest
import numpy as np
from scipy.special import expit, logit

from stakhanov.config import RunConfig
from stakhanov.classify import classify_panel
from stakhanov.felogit import (
    INTERCEPT,
    GlmSpec,
    GlmFit,
    GlmCoefficient,
    RegressionFrame,
    build_frame,
    build_design,
    fit_frame,
    fit_grid,
    log_likelihood,
    null_log_likelihood,
    collinearity_diagnostic,
    collinearity_by_period,
    intervals_overlap,
    ci_overlap_report,
)
from stakhanov.simgen import (
    DEFAULT_COEFFICIENTS,
    RegressionDGP,
    generate_regression_frame,
)
from stakhanov.exceptions import (
    ConfigError,
    SeparationError,
    ConvergenceError,
    RankDeficiencyError,
    SingularMatrixError,
)

from test.utils import make_unit, reference_logit, naive_newton_logit

approx = pytest.approx

TWO_COVARIATES = ("academic_age", "avg_team_size")


def random_frame(
    seed=0, n=600, beta=(0.8, -0.5), n_periods=2, disciplines=("A", "B", "C")
):
    rng = np.random.default_rng(seed)

    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    periods = rng.integers(0, n_periods, n)
    codes = rng.integers(0, len(disciplines), n)

    eta = beta[0] * x1 + beta[1] * x2 + 0.3 * periods - 0.4 * (codes == 0) - 1

    return RegressionFrame(
        y=(rng.random(n) < expit(eta)).astype(float),
        covariates={"academic_age": x1, "avg_team_size": x2},
        periods=periods,
        disciplines=np.array(disciplines, dtype=object)[codes],
    )


def spec(**kwargs):
    kwargs.setdefault("covariates", TWO_COVARIATES)
    return GlmSpec(threshold=10, measure="p1", **kwargs)


class TestSpec(object):
    def test_validation(self):
        with pytest.raises(ConfigError):
            spec(covariates=("academic_age", "academic_age"))

        with pytest.raises(ConfigError, match="unknown covariate"):
            spec(covariates=("h_index",))

        with pytest.raises(ConfigError):
            spec(fixed_effects=("country",))

        with pytest.raises(ConfigError):
            spec(discipline_coding="helmert")

        assert spec().label == "top10/p1"

    def test_from_config(self):
        config = RunConfig(covariates=TWO_COVARIATES, discipline_coding="reference")
        s = GlmSpec.from_config(config, 5, "p2")

        assert s.covariates == TWO_COVARIATES
        assert s.discipline_coding == "reference"
        assert s.threshold == 5


class TestDesign(object):
    def test_sum_coding(self):
        frame = random_frame(n=50)
        design = build_design(frame, spec())

        assert design.columns == [
            "academic_age",
            "avg_team_size",
            "period[0]",
            "period[1]",
            "discipline[A]",
            "discipline[B]",
        ]

        last = frame.disciplines == "C"

        assert np.all(design.X[last, 4] == -1)
        assert np.all(design.X[last, 5] == -1)
        assert np.all(design.X[:, 2] + design.X[:, 3] == 1)

    def test_reference_coding(self):
        frame = random_frame(n=50)
        design = build_design(frame, spec(discipline_coding="reference"))

        assert design.columns[-2:] == ["discipline[B]", "discipline[C]"]

    def test_intercept_without_period_effects(self):
        frame = random_frame(n=50)
        design = build_design(frame, spec(fixed_effects=("discipline",)))

        assert INTERCEPT in design.columns
        assert design.period_levels == []

    def test_build_frame(self):
        units = [
            make_unit("A%i" % i, p1=float(i), gender="MF"[i % 2], age=i)
            for i in range(20)
        ]
        units.append(make_unit("U", p1=100.0, gender="U"))
        assignments = classify_panel(units, ["p1"], [10])

        frame = build_frame(units, assignments, spec())

        # The unit of unknown gender is left out but still ranked
        assert len(frame) == 20
        assert frame.y.sum() == 1
        assert frame.covariates["academic_age"][3] == 3


class TestFit(object):
    def test_matches_reference_optimizer(self):
        frame = random_frame(seed=1)
        s = spec()
        result = fit_frame(frame, s)

        design = build_design(frame, s)
        reference = reference_logit(design.X, frame.y)

        assert result.beta == approx(reference, abs=1e-4)
        assert result.loglik_full == approx(
            log_likelihood(design.X, frame.y, reference), abs=1e-6
        )
        assert result.converged
        assert result.iterations > 0
        assert result.gradient_max < 1e-8

    def test_matches_naive_newton(self):
        for seed in range(20):
            frame = random_frame(seed=100 + seed, n=400 + 50 * seed)
            result = fit_frame(frame, spec())

            expected = naive_newton_logit(frame, TWO_COVARIATES)

            for name, beta in zip(TWO_COVARIATES, expected):
                assert result.coefficient(name).beta == approx(beta, abs=1e-6)

            assert result.gradient_max < 1e-8

    def test_extreme_fitted_probabilities(self):
        rng = np.random.default_rng(11)
        n = 5000
        age = rng.uniform(0, 60, n)

        frame = RegressionFrame(
            y=(rng.random(n) < expit(0.6 * (age - 30))).astype(float),
            covariates={"academic_age": age},
            periods=np.zeros(n, dtype=int),
            disciplines=np.array(["A"] * n, dtype=object),
        )
        s = spec(covariates=("academic_age",), fixed_effects=("period",))

        # Extreme rows get fitted probabilities far below 1e-7 while the
        # estimates stay finite
        result = fit_frame(frame, s)
        reference = reference_logit(build_design(frame, s).X, frame.y)

        assert result.beta == approx(reference, rel=1e-3)
        assert result.coefficient("academic_age").beta == approx(0.6, abs=0.1)
        assert result.gradient_max < 1e-8

    def test_codings_agree(self):
        frame = random_frame(seed=2)

        by_sum = fit_frame(frame, spec())
        by_reference = fit_frame(frame, spec(discipline_coding="reference"))

        assert by_sum.loglik_full == approx(by_reference.loglik_full)

        for name in TWO_COVARIATES:
            assert by_sum.coefficient(name).beta == approx(
                by_reference.coefficient(name).beta, abs=1e-8
            )

        shifts = [e.shift for e in by_sum.fixed_effects if e.kind == "discipline"]

        assert len(shifts) == 3
        assert math.fsum(shifts) == approx(0, abs=1e-10)
        assert all(e.se is not None for e in by_sum.fixed_effects)

        reference = [e for e in by_reference.fixed_effects if e.kind == "discipline"]

        assert reference[0].level == "A"
        assert reference[0].shift == 0
        assert reference[0].se is None

    def test_null_model(self):
        frame = random_frame(seed=3)
        result = fit_frame(frame, spec(covariates=(), fixed_effects=()))

        ybar = frame.y.mean()

        assert result.columns == [INTERCEPT]
        assert result.coefficient(INTERCEPT).beta == approx(logit(ybar))
        assert result.loglik_full == approx(null_log_likelihood(frame.y))
        assert result.mcfadden_r2 == 0

    def test_stats(self):
        result = fit_frame(random_frame(seed=4), spec())
        stats = result.stats()

        assert stats["class"] == "top10"
        assert stats["measure"] == "p1"
        assert stats["n"] == 600
        assert stats["events"] == int(result.n_events)
        assert 0 < stats["mcfadden"] < 1
        assert stats["loglik_full"] > stats["loglik_null"]

    def test_coefficient_from_estimate(self):
        c = GlmCoefficient.from_estimate("gender_male", math.log(2), 0.1)

        assert c.exp_b == approx(2)
        assert c.z == approx(math.log(2) / 0.1)
        assert c.ci_low == approx(2 * math.exp(-0.196))
        assert c.ci_high == approx(2 * math.exp(0.196))
        assert c.p_value < 1e-10

        c = GlmCoefficient.from_estimate("academic_age", 0.0, 1.0)

        assert c.p_value == approx(1)

    def test_recovers_injected_effects(self):
        dgp = RegressionDGP(seed=5, n_units=20000, n_periods=3)
        frame, truth = generate_regression_frame(dgp)

        result = fit_frame(frame, GlmSpec(threshold=10, measure="p1"))

        for name, beta in truth["coefficients"].items():
            c = result.coefficient(name)
            assert abs(c.beta - beta) < 4 * c.se, name

        male = result.coefficient("gender_male")

        assert male.ci_low < male.exp_b < male.ci_high

        periods = [e for e in result.fixed_effects if e.kind == "period"]

        for estimate, shift in zip(periods, truth["period_shifts"]):
            assert abs(estimate.shift - shift) < 4 * estimate.se

    @pytest.mark.slow
    def test_gender_odds_ratio_across_seeds(self):
        within = 0

        for seed in range(40):
            frame, _ = generate_regression_frame(RegressionDGP(seed=seed))
            result = fit_frame(frame, GlmSpec(threshold=10, measure="p1"))

            assert result.gradient_max < 1e-8

            if 1.8 <= result.coefficient("gender_male").exp_b <= 2.2:
                within += 1

        assert within >= 38

    def test_null_gender_effect(self):
        coefficients = dict(DEFAULT_COEFFICIENTS, gender_male=0.0)
        frame, _ = generate_regression_frame(
            RegressionDGP(seed=3, coefficients=coefficients)
        )

        result = fit_frame(frame, GlmSpec(threshold=10, measure="p1"))

        assert result.gradient_max < 1e-8
        assert 0.9 <= result.coefficient("gender_male").exp_b <= 1.1


class TestFailures(object):
    def test_constant_response(self):
        frame = random_frame()
        frame.y[:] = 0

        with pytest.raises(SeparationError, match="response"):
            fit_frame(frame, spec())

    def test_separation(self):
        n = 200
        x = np.where(np.arange(n) % 2 == 0, -1.0, 1.0)
        frame = RegressionFrame(
            y=(x > 0).astype(float),
            covariates={"academic_age": x},
            periods=np.zeros(n, dtype=int),
            disciplines=np.array(["A"] * n, dtype=object),
        )

        with pytest.raises(SeparationError) as info:
            fit_frame(frame, spec(covariates=("academic_age",)))

        assert info.value.column in ("academic_age", "period[0]")

    def test_rank_deficiency(self):
        frame = random_frame(seed=6)
        frame.covariates["avg_team_size"] = 2 * frame.covariates["academic_age"]

        with pytest.raises(RankDeficiencyError) as info:
            fit_frame(frame, spec())

        assert {"academic_age", "avg_team_size"} <= set(info.value.columns)

    def test_convergence(self):
        with pytest.raises(ConvergenceError) as info:
            fit_frame(random_frame(seed=7), spec(max_iterations=1))

        assert len(info.value.trace) == 1

    def test_grid(self):
        rng = np.random.default_rng(8)
        units = [
            make_unit(
                "A%03i" % i,
                gender="MF"[i % 2],
                p1=float(rng.random()),
                p3=1,
                age=int(rng.integers(0, 40)),
                team=float(rng.uniform(1, 5)),
            )
            for i in range(300)
        ]

        config = RunConfig(
            thresholds=(10,), measures=("p1", "p3"), covariates=TWO_COVARIATES
        )
        assignments = classify_panel(units, config.measures, config.thresholds)

        results = fit_grid(units, assignments, config, strict=False)

        assert [r.spec.measure for r in results] == ["p1", "p3"]
        assert results[0].ok
        assert not results[1].ok

        # Every unit ties on p3, hence is a member
        assert isinstance(results[1].error, SeparationError)

        with pytest.raises(SeparationError):
            fit_grid(units, assignments, config)

        threaded = fit_grid(units, assignments, config, threads=2, strict=False)

        assert np.array_equal(threaded[0].fit.beta, results[0].fit.beta)


class TestDiagnostics(object):
    def test_collinearity_diagnostic(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=5000)
        b = rng.normal(size=5000)
        c = a + 0.5 * rng.normal(size=5000)

        independent = collinearity_diagnostic({"a": a, "b": b})

        assert independent["a"] == approx(1, abs=0.01)
        assert independent["b"] == approx(1, abs=0.01)

        correlated = collinearity_diagnostic({"a": a, "b": b, "c": c})

        # corr(a, c)^2 = 0.8 and the diagonal is 1 / (1 - 0.8)
        assert correlated["a"] == approx(5, rel=0.1)
        assert correlated["b"] == approx(1, abs=0.01)

        with pytest.raises(ValueError):
            collinearity_diagnostic({"a": a})

        with pytest.raises(SingularMatrixError, match="b"):
            collinearity_diagnostic({"a": a, "b": np.ones(5000)})

        with pytest.raises(SingularMatrixError):
            collinearity_diagnostic({"a": a, "b": b, "c": a + b})

    def test_collinearity_by_period(self):
        frame = random_frame(seed=10)
        rows = collinearity_by_period(frame, class_label="top10")

        assert set((r.period, r.sample) for r in rows) == {
            (0, "all"),
            (0, "top10"),
            (0, "rest"),
            (1, "all"),
            (1, "top10"),
            (1, "rest"),
        }

        assert all(r.value >= 1 - 1e-9 for r in rows)

    def test_intervals_overlap(self):
        assert intervals_overlap((0, 1), (0.5, 2))
        assert intervals_overlap((0, 1), (1, 2))
        assert not intervals_overlap((0, 1), (1.5, 2))
        assert intervals_overlap((0, 10), (2, 3))

    def test_ci_overlap_report(self):
        def fake_fit(measure, beta):
            return GlmFit(
                spec=spec(),
                coefficients=[GlmCoefficient.from_estimate("academic_age", beta, 0.01)],
                fixed_effects=[],
                columns=["academic_age"],
                beta=np.array([beta]),
                covariance=np.eye(1),
            )

        fits = {
            "p1": fake_fit("p1", 0.10),
            "p2": fake_fit("p2", 0.11),
            "p3": fake_fit("p3", 0.50),
        }

        rows = {r.fit: r.overlaps for r in ci_overlap_report(fits)}

        assert rows == {"p1": ("p2",), "p2": ("p1",), "p3": ()}

        with pytest.raises(ValueError):
            ci_overlap_report({"p1": fits["p1"]})
