# =============================================================================
# Stakhanov Synthetic Cohort Generator Unit Tests
# =============================================================================
import json
import math
import pytest
import numpy as np
from os.path import join
from statistics import mean
from scipy.stats import skew

from stakhanov.config import RunConfig
from stakhanov.types import MEASURES
from stakhanov.ingest import CorpusPaths, load_corpus, derive_first_pub_year
from stakhanov.panel import build_panel
from stakhanov.productivity import compute_productivity
from stakhanov.classify import classify_panel, cohorts
from stakhanov.metrics import concentration_share, measure_correlations
from stakhanov.simgen import (
    SimConfig,
    RegressionDGP,
    lotka_probabilities,
    draw_author,
    generate,
    generate_regression_frame,
    calibrate_offset,
)
from stakhanov.exceptions import InfeasibleSimulationError

from test.utils import lotka_share_band

FILES = [
    "publications.jsonl",
    "authors.csv",
    "journals.csv",
    "institutions.csv",
    "ground_truth.json",
]

SMALL = dict(n_authors=150, start_year=2000, end_year=2011, period_length=6)


def read(path):
    with open(path, "rb") as f:
        return f.read()


def pipeline_units(directory, config):
    corpus = load_corpus(CorpusPaths.from_directory(directory), config)
    panel = build_panel(corpus, config, derive_first_pub_year(corpus))

    return corpus, compute_productivity(panel.units, corpus, config)


class TestSimConfig(object):
    def test_validation(self):
        with pytest.raises(InfeasibleSimulationError, match="male_ratio"):
            SimConfig(male_ratio=1.5)

        with pytest.raises(InfeasibleSimulationError, match="zero publications"):
            SimConfig(activity_probability=0)

        with pytest.raises(InfeasibleSimulationError):
            SimConfig(other_document_probability=1)

        with pytest.raises(InfeasibleSimulationError):
            SimConfig(conference_probability=0.6, other_document_probability=0.6)

        with pytest.raises(InfeasibleSimulationError):
            SimConfig(publication_distribution="zipf")

        with pytest.raises(InfeasibleSimulationError):
            SimConfig(lotka_alpha=1)

        with pytest.raises(InfeasibleSimulationError):
            SimConfig(disciplines={"16": 0.0})

        with pytest.raises(InfeasibleSimulationError):
            SimConfig(disciplines={"1601": 1.0})

    def test_from_mapping(self):
        config = SimConfig.from_mapping(
            {"male_ratio": 0.5, "disciplines": {16: 2}}, seed=4
        )

        assert config.seed == 4
        assert config.male_ratio == 0.5
        assert config.disciplines == {"16": 2.0}

        with pytest.raises(InfeasibleSimulationError, match="unknown"):
            SimConfig.from_mapping({"n_papers": 3})

    def test_lotka(self):
        p = lotka_probabilities(2.0, 50)

        assert len(p) == 50
        assert p.sum() == pytest.approx(1)
        assert np.all(np.diff(p) < 0)
        assert p[0] / p[1] == pytest.approx(4)


class TestGenerate(object):
    def test_files_and_determinism(self, tmpdir):
        config = SimConfig(seed=3, **SMALL)

        first = str(tmpdir.join("first"))
        second = str(tmpdir.join("second"))
        threaded = str(tmpdir.join("threaded"))

        result = generate(config, first)
        generate(config, second)
        generate(config, threaded, threads=4)

        assert result.authors == 150
        assert result.publications > 0

        for name in FILES:
            assert read(join(first, name)) == read(join(second, name))
            assert read(join(first, name)) == read(join(threaded, name))

        other = str(tmpdir.join("other"))
        generate(SimConfig(seed=4, **SMALL), other)

        assert read(join(first, "publications.jsonl")) != read(
            join(other, "publications.jsonl")
        )

    def test_draw_author_is_keyed(self):
        config = SimConfig(seed=9, **SMALL)
        periods = config.get_periods()
        areas = sorted(config.disciplines)
        weights = np.ones(len(areas)) / len(areas)
        lotka = lotka_probabilities(config.lotka_alpha, config.lotka_max)

        a = draw_author(12, config, periods, areas, weights, lotka)
        b = draw_author(12, config, periods, areas, weights, lotka)

        assert a == b
        assert a.author_id == "A000012"
        assert all(periods[i].end_year >= a.entry_year for i in a.active_periods)

    def test_ground_truth_matches_the_pipeline(self, tmpdir):
        directory = str(tmpdir)
        sim_config = SimConfig(seed=5, **SMALL)
        result = generate(sim_config, directory)

        with open(join(directory, "ground_truth.json")) as f:
            truth = json.load(f)

        assert truth == json.loads(json.dumps(result.truth))
        assert truth["effects"]["gender_effect"] == sim_config.gender_effect

        config = RunConfig(start_year=2000, end_year=2011, period_length=6)
        corpus, units = pipeline_units(directory, config)

        expected = {(u["author_id"], u["period"]): u for u in truth["units"]}
        checked = 0

        for unit in units:
            row = expected[unit.key]

            assert unit.value("p3") == row["publications"]
            assert unit.covariates.avg_team_size == pytest.approx(row["avg_team_size"])
            assert unit.gender == row["gender"]
            checked += 1

        assert checked > 0

        for period in truth["periods"]:
            kept = [
                p
                for p in corpus.publications
                if period["start_year"] <= p.year <= period["end_year"]
            ]

            assert len(kept) == period["publications"]

    def test_fractional_counts_add_up(self, tmpdir):
        directory = str(tmpdir)
        generate(
            SimConfig(
                seed=1,
                n_authors=1000,
                start_year=2000,
                end_year=2011,
                period_length=6,
                offlist_probability=0.0,
            ),
            directory,
        )

        # Default configuration: authors of unknown gender stay in the panel
        config = RunConfig(start_year=2000, end_year=2011, period_length=6)
        corpus, units = pipeline_units(directory, config)

        assert any(u.gender == "U" for u in units)

        for period in config.get_periods():
            published = sum(
                1
                for p in corpus.publications
                if period.start_year <= p.year <= period.end_year
            )
            total = math.fsum(
                u.value("p4") for u in units if u.period_index == period.index
            )

            assert total == pytest.approx(published, abs=1e-9)

    def test_injected_gender_effect(self, tmpdir):
        directory = str(tmpdir)
        generate(
            SimConfig(
                seed=6,
                n_authors=400,
                start_year=2000,
                end_year=2011,
                period_length=6,
                publication_distribution="lognormal",
                gender_effect=1.0,
                age_slope=0.0,
                team_size_mean=1.0,
                unknown_gender_probability=0.0,
            ),
            directory,
        )

        _, units = pipeline_units(
            directory, RunConfig(start_year=2000, end_year=2011, period_length=6)
        )

        men = mean(u.value("p3") for u in units if u.gender == "M")
        women = mean(u.value("p3") for u in units if u.gender == "F")

        assert men > 1.5 * women

    def test_fixed_counts(self, tmpdir):
        directory = str(tmpdir)
        generate(
            SimConfig(
                seed=7,
                publication_distribution="fixed",
                fixed_count=2,
                team_size_mean=1.0,
                other_document_probability=0.0,
                **SMALL
            ),
            directory,
        )

        with open(join(directory, "publications.jsonl")) as f:
            publications = [json.loads(line) for line in f]

        counts = {}

        for p in publications:
            author_id = p["authors"][0]["author_id"]
            counts[author_id] = counts.get(author_id, 0) + 1

        # Two publications per active period
        assert all(c % 2 == 0 for c in counts.values())

    def test_lotka_share_lies_in_simulated_band(self, tmpdir):
        directory = str(tmpdir)
        sim = SimConfig(
            seed=2,
            n_authors=3000,
            start_year=2000,
            end_year=2011,
            period_length=6,
            gender_effect=0.0,
            age_slope=0.0,
            team_size_mean=1.0,
            other_document_probability=0.0,
            offlist_probability=0.0,
        )
        generate(sim, directory)

        config = RunConfig(start_year=2000, end_year=2011, period_length=6)
        _, units = pipeline_units(directory, config)
        assignments = classify_panel(units, ["p3"], [10])
        rows = concentration_share(units, assignments, 10, "p3", by=["period"])

        assert len(rows) == 2

        for row in rows:
            (period,) = row.group
            sizes = [len(c) for (_, p), c in cohorts(units).items() if p == period]
            low, high = lotka_share_band(
                sizes, sim.lotka_alpha, sim.lotka_max, seed=period
            )

            # Discipline assignment from references loosens the band slightly
            assert low - 3 <= row.share_percent <= high + 3

    @pytest.mark.parametrize("distribution", ["lotka", "lognormal"])
    def test_productivity_is_right_skewed(self, tmpdir, distribution):
        directory = str(tmpdir)
        generate(
            SimConfig(seed=4, publication_distribution=distribution, **SMALL),
            directory,
        )

        _, units = pipeline_units(
            directory, RunConfig(start_year=2000, end_year=2011, period_length=6)
        )

        per_author = {}

        for unit in units:
            per_author[unit.author_id] = (
                per_author.get(unit.author_id, 0) + unit.value("p3")
            )

        assert skew(list(per_author.values())) > 0

    def test_measure_correlation_structure(self, tmpdir):
        directory = str(tmpdir)
        generate(SimConfig(seed=8, **dict(SMALL, n_authors=1500)), directory)

        _, units = pipeline_units(
            directory, RunConfig(start_year=2000, end_year=2011, period_length=6)
        )

        columns = {m: np.array([u.value(m) for u in units]) for m in MEASURES}
        expected = {
            (a, b): float(np.corrcoef(columns[a], columns[b])[0, 1])
            for a in MEASURES
            for b in MEASURES
            if a < b
        }

        r = {
            (row.measure_a, row.measure_b): row.pearson_r
            for row in measure_correlations(units)
        }

        assert r == pytest.approx(expected, abs=1e-12)
        assert r["p1", "p3"] > r["p1", "p4"]
        assert r["p2", "p4"] > r["p1", "p4"]


class TestRegressionDGP(object):
    def test_validation(self):
        with pytest.raises(InfeasibleSimulationError):
            RegressionDGP(prevalence=1.0)

        with pytest.raises(InfeasibleSimulationError):
            RegressionDGP(coefficients={"h_index": 1.0})

    def test_calibrate_offset(self):
        eta = np.linspace(-3, 3, 1001)
        offset = calibrate_offset(eta, 0.2)

        assert np.mean(1 / (1 + np.exp(-(eta + offset)))) == pytest.approx(0.2)

    def test_frame(self):
        dgp = RegressionDGP(seed=2, n_units=20000, prevalence=0.1, n_periods=4)
        frame, truth = generate_regression_frame(dgp)

        assert len(frame) == 20000
        assert frame.y.mean() == pytest.approx(0.1, abs=0.01)
        assert set(frame.periods.tolist()) == {0, 1, 2, 3}
        assert sum(truth["discipline_shifts"].values()) == pytest.approx(0, abs=1e-10)
        assert len(truth["period_shifts"]) == 4

        again, _ = generate_regression_frame(dgp)

        assert np.array_equal(frame.y, again.y)
