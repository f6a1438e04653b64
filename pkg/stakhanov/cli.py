# =============================================================================
# Stakhanov CLI Actions
# =============================================================================
#
# Functions run by the command line subcommands. Each action reads the
# effective configuration, runs the required pipeline stages and writes
# its tidy outputs in the output directory.
#
from typing import List, Dict, Sequence, Tuple, Any

import logging
from functools import cached_property
from ebbe import format_int

from stakhanov import __version__
from stakhanov.config import RunConfig, load_config, recorded_overrides
from stakhanov.output import RunMetadata, OutputDirectory
from stakhanov.ingest import CorpusPaths, load_corpus, derive_first_pub_year
from stakhanov.panel import PanelRow, DroppedUnit, build_panel
from stakhanov.productivity import compute_productivity
from stakhanov.classify import (
    classify_panel,
    assignment_fieldnames,
    class_counts,
)
from stakhanov.metrics import (
    concentration_share,
    share_grid,
    concentration_rules,
    rpi,
    distribution_table,
    measure_correlations,
    persistence,
)
from stakhanov.felogit import (
    GlmSpec,
    build_frame,
    fit,
    fit_grid,
    GridResult,
    collinearity_diagnostic,
    collinearity_by_period,
    ci_overlap_report,
)
from stakhanov.simgen import SimConfig, generate
from stakhanov.utils import format_threshold
from stakhanov.exceptions import ConfigError, SingularMatrixError

logger = logging.getLogger(__name__)

# Flags overriding configuration keys
OVERRIDE_FLAGS = (
    "input_dir",
    "output_dir",
    "seed",
    "threads",
    "share_basis",
    "thresholds",
    "measures",
)


def collect_overrides(cli_args) -> Dict[str, Any]:
    overrides = {}

    for name in OVERRIDE_FLAGS:
        value = getattr(cli_args, name, None)

        if value is not None:
            overrides[name] = value

    return overrides


class Pipeline(object):
    """
    Lazily runs the stages of the pipeline so each subcommand only pays
    for what it needs.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.threads = config.threads
        self.__assignments = {}

    @cached_property
    def corpus(self):
        paths = CorpusPaths.from_directory(self.config.input_dir)
        return load_corpus(paths, self.config, threads=self.threads)

    @cached_property
    def profiles(self):
        return derive_first_pub_year(self.corpus)

    @cached_property
    def panel(self):
        return build_panel(
            self.corpus, self.config, profiles=self.profiles, threads=self.threads
        )

    @cached_property
    def units(self):
        return compute_productivity(
            self.panel.units, self.corpus, self.config, threads=self.threads
        )

    def assignments(self, extra_thresholds: Sequence[float] = ()):
        thresholds = tuple(sorted(set(self.config.thresholds) | set(extra_thresholds)))

        if thresholds not in self.__assignments:
            self.__assignments[thresholds] = classify_panel(
                self.units, self.config.measures, thresholds, threads=self.threads
            )

        return self.__assignments[thresholds]


class Context(object):
    def __init__(self, cli_args, with_share_basis: bool = False):
        overrides = collect_overrides(cli_args)

        self.config = load_config(cli_args.config, overrides)
        self.pipeline = Pipeline(self.config)

        self.metadata = RunMetadata(
            version=__version__,
            config_hash=self.config.hash(),
            seed=self.config.seed,
            share_basis=self.config.share_basis if with_share_basis else None,
            overrides=recorded_overrides(overrides),
        )

        self.output = OutputDirectory(self.config.output_dir, self.metadata)


def selected_thresholds(cli_args, config: RunConfig) -> Tuple[float, ...]:
    threshold = getattr(cli_args, "threshold", None)
    return (threshold,) if threshold is not None else tuple(config.thresholds)


def selected_measures(cli_args, config: RunConfig) -> Tuple[str, ...]:
    measure = getattr(cli_args, "measure", None)

    if measure is None:
        return tuple(config.measures)

    if measure not in config.measures:
        raise ConfigError("measure %s is not enabled in the configuration" % measure)

    return (measure,)


# Writers
def write_validation(context: Context) -> None:
    pipeline = context.pipeline

    approximate = sum(1 for p in pipeline.profiles.values() if p.approximate)

    context.output.write_json(
        "validation.json",
        {
            "ingest": pipeline.corpus.report.as_dict(),
            "approximate_first_pub_years": approximate,
            "publications": len(pipeline.corpus),
        },
    )


def write_panel(context: Context, name: str, with_measures: bool) -> None:
    pipeline = context.pipeline
    periods = context.config.get_periods()
    units = pipeline.units if with_measures else pipeline.panel.units

    context.output.write_records(
        name, PanelRow, (PanelRow.from_unit(u, periods[u.period_index]) for u in units)
    )


def write_dropped(context: Context) -> None:
    context.output.write_records(
        "dropped_units.csv", DroppedUnit, context.pipeline.panel.dropped
    )


def write_assignments(context: Context, by: Sequence[str]) -> None:
    thresholds = context.config.thresholds
    pipeline = context.pipeline
    assignments = pipeline.assignments()

    context.output.write_csv(
        "assignments.csv",
        assignment_fieldnames(thresholds),
        (a.as_row(thresholds) for a in assignments),
    )

    rows = class_counts(pipeline.units, assignments, thresholds, by=by)

    context.output.write_csv(
        "class_counts.csv",
        list(by) + ["class", "measure", "count", "group_size", "percent"],
        (
            list(r.group)
            + [
                format_threshold(r.threshold),
                r.measure,
                r.count,
                r.group_size,
                r.percent,
            ]
            for r in rows
        ),
    )


def write_shares(context: Context, cli_args, name: str = "shares.csv") -> None:
    config = context.config
    pipeline = context.pipeline
    by = cli_args.by
    thresholds = selected_thresholds(cli_args, config)
    measures = selected_measures(cli_args, config)
    assignments = pipeline.assignments(thresholds)

    if getattr(cli_args, "threshold", None) is not None:
        rows = []

        for measure in measures:
            rows.extend(
                concentration_share(
                    pipeline.units,
                    assignments,
                    cli_args.threshold,
                    measure,
                    basis=config.share_basis,
                    by=by,
                )
            )
    else:
        rows = share_grid(
            pipeline.units,
            assignments,
            thresholds,
            measures,
            basis=config.share_basis,
            by=by,
        )

    context.output.write_csv(
        name,
        list(by)
        + ["class", "measure", "basis", "share_percent", "numerator", "denominator"],
        (
            list(r.group)
            + [
                r.class_label,
                r.measure,
                r.basis,
                r.share_percent,
                r.numerator,
                r.denominator,
            ]
            for r in rows
        ),
    )


def write_rpi(context: Context, cli_args) -> None:
    config = context.config
    pipeline = context.pipeline
    by = [d for d in cli_args.by if d != "gender"]
    thresholds = selected_thresholds(cli_args, config)
    assignments = pipeline.assignments(thresholds)

    rows = []

    for measure in selected_measures(cli_args, config):
        for t in thresholds:
            rows.extend(rpi(pipeline.units, assignments, t, measure, by=by))

    context.output.write_csv(
        "rpi.csv",
        by
        + [
            "class",
            "measure",
            "tp_men",
            "all_men",
            "tp_women",
            "all_women",
            "rpi_men",
            "rpi_women",
        ],
        (
            list(r.group)
            + [
                r.class_label,
                r.measure,
                r.tp_men,
                r.all_men,
                r.tp_women,
                r.all_women,
                r.rpi_men,
                r.rpi_women,
            ]
            for r in rows
        ),
    )


def write_tables(context: Context, cli_args) -> None:
    config = context.config
    pipeline = context.pipeline
    dimensions = cli_args.by
    column = cli_args.column or []

    for d in column:
        if d in dimensions:
            raise ConfigError("dimension %s cannot be both a row and a column" % d)

    needs_classes = (
        "class" in dimensions
        or "class" in column
        or getattr(cli_args, "members_of", None) is not None
    )

    assignments = None
    thresholds = config.thresholds

    if needs_classes:
        measure = selected_measures(cli_args, config)[0]

        if cli_args.members_of is not None:
            thresholds = tuple(sorted(set(thresholds) | {cli_args.members_of}))

        assignments = [
            a for a in pipeline.assignments(thresholds) if a.measure == measure
        ]

    rows = distribution_table(
        pipeline.units,
        dimensions,
        column=column,
        assignments=assignments,
        thresholds=thresholds,
        members_of=getattr(cli_args, "members_of", None),
    )

    context.output.write_csv(
        "distribution.csv",
        list(column) + list(dimensions) + ["count", "percent"],
        (
            list(r.column) + list(r.group) + [r.count, r.percent]
            for r in rows
        ),
    )


def write_correlations(context: Context, cli_args) -> None:
    config = context.config

    rows = measure_correlations(
        context.pipeline.units,
        by=cli_args.by,
        measures=config.measures,
        min_cell=config.min_correlation_cell,
    )

    context.output.write_csv(
        "correlations.csv",
        list(cli_args.by) + ["measure_a", "measure_b", "pearson_r", "n"],
        (
            list(r.group) + [r.measure_a, r.measure_b, r.pearson_r, r.n]
            for r in rows
        ),
    )


def write_persistence(context: Context, cli_args) -> None:
    config = context.config
    pipeline = context.pipeline
    thresholds = selected_thresholds(cli_args, config)
    assignments = pipeline.assignments(thresholds)

    rows = []

    for measure in selected_measures(cli_args, config):
        for t in thresholds:
            rows.extend(persistence(pipeline.units, assignments, t, measure))

    context.output.write_csv(
        "persistence.csv",
        [
            "from_period",
            "to_period",
            "class",
            "measure",
            "members",
            "continuing",
            "stayed",
            "rate",
        ],
        (
            [
                r.from_period,
                r.to_period,
                r.class_label,
                r.measure,
                r.members,
                r.continuing,
                r.stayed,
                r.rate,
            ]
            for r in rows
        ),
    )


def write_rules(context: Context):
    config = context.config
    pipeline = context.pipeline

    rows = concentration_rules(
        pipeline.units,
        pipeline.assignments((1, 10)),
        config.measures,
        basis=config.share_basis,
    )

    context.output.write_csv(
        "rules.csv",
        [
            "period",
            "measure",
            "top10_share",
            "top10_reference",
            "top1_share",
            "top1_reference",
        ],
        (
            [
                r.period_index,
                r.measure,
                r.top10_share,
                r.top10_reference,
                r.top1_share,
                r.top1_reference,
            ]
            for r in rows
        ),
    )

    return rows


def write_fits(context: Context, results: List[GridResult]) -> None:
    units = context.pipeline.units
    fits = [r.fit for r in results if r.ok]

    context.output.write_csv(
        "coefficients.csv",
        [
            "class",
            "measure",
            "name",
            "beta",
            "se",
            "z",
            "exp_b",
            "ci_low",
            "ci_high",
            "p",
        ],
        (
            [
                format_threshold(f.spec.threshold),
                f.spec.measure,
                c.name,
                c.beta,
                c.se,
                c.z,
                c.exp_b,
                c.ci_low,
                c.ci_high,
                c.p_value,
            ]
            for f in fits
            for c in f.coefficients
        ),
    )

    context.output.write_csv(
        "fixed_effects.csv",
        ["class", "measure", "kind", "level", "shift", "se"],
        (
            [
                format_threshold(f.spec.threshold),
                f.spec.measure,
                e.kind,
                e.level,
                e.shift,
                e.se,
            ]
            for f in fits
            for e in f.fixed_effects
        ),
    )

    stats = []

    for result in results:
        if result.ok:
            stats.append(result.fit.stats())
        else:
            stats.append(
                {
                    "class": format_threshold(result.spec.threshold),
                    "measure": result.spec.measure,
                    "error": str(result.error),
                }
            )

    context.output.write_json("fitstats.json", {"fits": stats})

    # Collinearity, on the covariates of each fitted sample
    collinearity = []

    for f in fits:
        frame = build_frame(
            units, context.pipeline.assignments((f.spec.threshold,)), f.spec
        )
        label = format_threshold(f.spec.threshold)

        try:
            pooled = collinearity_diagnostic(frame.covariates)
        except (SingularMatrixError, ValueError) as e:
            logger.warning("skipping collinearity of %s: %s", f.spec.label, e)
            pooled = {}

        for covariate, value in pooled.items():
            collinearity.append([label, f.spec.measure, "all", "all", covariate, value])

        for row in collinearity_by_period(frame, class_label=label):
            collinearity.append(
                [
                    label,
                    f.spec.measure,
                    row.period,
                    row.sample,
                    row.covariate,
                    row.value,
                ]
            )

    context.output.write_csv(
        "collinearity.csv",
        ["class", "measure", "period", "sample", "covariate", "value"],
        collinearity,
    )

    # Overlaps of confidence intervals across measures, per class
    overlaps = []
    by_class = {}

    for f in fits:
        by_class.setdefault(f.spec.threshold, {})[f.spec.measure] = f

    for threshold, class_fits in sorted(by_class.items()):
        if len(class_fits) < 2:
            continue

        for row in ci_overlap_report(class_fits):
            overlaps.append(
                [
                    format_threshold(threshold),
                    row.covariate,
                    row.fit,
                    list(row.overlaps) or None,
                ]
            )

    context.output.write_csv(
        "ci_overlap.csv",
        ["class", "covariate", "measure", "overlaps"],
        overlaps,
    )


def regression_results(context: Context, cli_args, strict: bool) -> List[GridResult]:
    config = context.config
    pipeline = context.pipeline
    thresholds = selected_thresholds(cli_args, config)
    measures = selected_measures(cli_args, config)
    assignments = pipeline.assignments(thresholds)

    # A single explicitly selected model: numeric failures are raised as is
    explicit = (
        getattr(cli_args, "threshold", None) is not None
        and getattr(cli_args, "measure", None) is not None
    )

    if explicit:
        spec = GlmSpec.from_config(config, thresholds[0], measures[0])
        return [GridResult(spec, fit=fit(pipeline.units, assignments, spec))]

    return fit_grid(
        pipeline.units,
        assignments,
        config,
        thresholds=thresholds,
        measures=measures,
        threads=pipeline.threads,
        strict=strict,
    )


# Actions
def validate_action(cli_args) -> int:
    context = Context(cli_args)
    write_validation(context)

    logger.info(
        "%s publications are valid", format_int(len(context.pipeline.corpus))
    )

    return 0


def panel_action(cli_args) -> int:
    context = Context(cli_args)
    write_panel(context, "panel.csv", with_measures=False)
    write_dropped(context)

    return 0


def productivity_action(cli_args) -> int:
    context = Context(cli_args)
    write_panel(context, "productivity.csv", with_measures=True)

    return 0


def classify_action(cli_args) -> int:
    context = Context(cli_args)
    write_assignments(context, cli_args.by)

    return 0


METRICS = {
    "shares": write_shares,
    "rpi": write_rpi,
    "tables": write_tables,
    "correlations": write_correlations,
    "persistence": write_persistence,
    "rules": lambda context, cli_args: write_rules(context),
}


def metrics_action(cli_args) -> int:
    context = Context(cli_args, with_share_basis=True)
    METRICS[cli_args.metric](context, cli_args)

    return 0


def regress_action(cli_args) -> int:
    context = Context(cli_args)

    results = regression_results(context, cli_args, strict=False)
    write_fits(context, results)

    for result in results:
        if not result.ok:
            raise result.error

    return 0


def simulate_action(cli_args) -> int:
    overrides = collect_overrides(cli_args)
    config = load_config(cli_args.config, overrides)

    params = {
        "seed": config.seed,
        "start_year": config.start_year,
        "end_year": config.end_year,
        "period_length": config.period_length,
        "home_country": config.home_country,
    }

    if cli_args.authors is not None:
        params["n_authors"] = cli_args.authors

    sim_config = SimConfig.from_mapping(config.simulation, **params)

    generate(sim_config, config.output_dir, threads=config.threads)

    return 0


def report_action(cli_args) -> int:
    """
    Runs the whole pipeline and writes the union of every subcommand output
    along with a summary.
    """
    context = Context(cli_args, with_share_basis=True)
    pipeline = context.pipeline
    by = cli_args.by

    write_validation(context)
    write_panel(context, "panel.csv", with_measures=False)
    write_dropped(context)
    write_panel(context, "productivity.csv", with_measures=True)
    write_assignments(context, by)
    write_shares(context, cli_args)
    write_rpi(context, cli_args)
    write_tables(context, cli_args)
    write_correlations(context, cli_args)
    write_persistence(context, cli_args)
    rules = write_rules(context)

    results = regression_results(context, cli_args, strict=False)
    write_fits(context, results)

    failures = [r for r in results if not r.ok]

    context.output.write_json(
        "summary.json",
        {
            "units": len(pipeline.units),
            "dropped": pipeline.panel.dropped_counts(),
            "rules": [
                {
                    "period": r.period_index,
                    "measure": r.measure,
                    "top10_share": r.top10_share,
                    "top1_share": r.top1_share,
                }
                for r in rules
            ],
            "fits": [
                r.fit.stats()
                if r.ok
                else {
                    "class": format_threshold(r.spec.threshold),
                    "measure": r.spec.measure,
                    "error": str(r.error),
                }
                for r in results
            ],
            "outputs": sorted(context.output.written + ["summary.json"]),
        },
    )

    if failures:
        raise failures[0].error

    return 0
