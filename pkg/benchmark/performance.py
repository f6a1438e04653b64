from ebbe import Timer
import click
from tempfile import TemporaryDirectory

from stakhanov.config import RunConfig
from stakhanov.simgen import (
    SimConfig,
    RegressionDGP,
    generate,
    generate_regression_frame,
)
from stakhanov.ingest import CorpusPaths, load_corpus, derive_first_pub_year
from stakhanov.panel import build_panel
from stakhanov.productivity import compute_productivity
from stakhanov.classify import classify_panel
from stakhanov.felogit import GlmSpec, fit_frame


@click.command()
@click.option("--authors", default=5000, type=int)
@click.option("--threads", default=1, type=int)
@click.option("--regression-units", default=50000, type=int)
@click.option("--seed", default=0, type=int)
def bench(authors, threads, regression_units, seed):
    config = RunConfig(seed=seed, threads=threads)

    with TemporaryDirectory() as directory:
        with Timer("simgen: generate"):
            generate(
                SimConfig(seed=seed, n_authors=authors), directory, threads=threads
            )

        with Timer("ingest: load_corpus"):
            corpus = load_corpus(CorpusPaths.from_directory(directory), config, threads)
            profiles = derive_first_pub_year(corpus)

        with Timer("panel: build_panel"):
            panel = build_panel(corpus, config, profiles=profiles, threads=threads)

        with Timer("productivity: compute_productivity"):
            units = compute_productivity(panel.units, corpus, config, threads=threads)

        with Timer("classify: classify_panel"):
            classify_panel(units, config.measures, config.thresholds, threads=threads)

    frame, _ = generate_regression_frame(
        RegressionDGP(seed=seed, n_units=regression_units)
    )

    with Timer("felogit: fit_frame"):
        fit_frame(frame, GlmSpec(threshold=10, measure="p1"))


if __name__ == "__main__":
    bench()
