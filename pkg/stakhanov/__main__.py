from typing import Optional

import sys
import shlex
import shutil
import logging
from textwrap import dedent
from argparse import ArgumentParser, RawDescriptionHelpFormatter, ArgumentTypeError
from functools import partial

from stakhanov.types import MEASURES, SHARE_BASES, DIMENSIONS
from stakhanov.exceptions import StakhanovError, ValidationError, NumericError
from stakhanov.cli import (
    validate_action,
    panel_action,
    productivity_action,
    classify_action,
    metrics_action,
    regress_action,
    simulate_action,
    report_action,
)

USAGE_ERROR_CODE = 64

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
LOG_HANDLER = logging.StreamHandler(sys.stderr)
LOG_HANDLER.setFormatter(logging.Formatter(LOG_FORMAT))


def print_err(*args, **kwargs):
    print(*args, file=sys.stderr, **kwargs)


class StakhanovArgumentParser(ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR_CODE, "%s: error: %s\n" % (self.prog, message))


class SortingHelpFormatter(RawDescriptionHelpFormatter):
    def add_arguments(self, actions) -> None:
        actions = sorted(
            actions, key=lambda a: tuple(s.lower() for s in a.option_strings)
        )
        return super().add_arguments(actions)


def custom_formatter(prog):
    terminal_size = shutil.get_terminal_size()
    return SortingHelpFormatter(prog, width=terminal_size.columns, max_help_position=32)


def parse_threshold(string: str):
    try:
        value = float(string)
    except ValueError:
        raise ArgumentTypeError("expecting a percentage, got %s" % string)

    if not 0 < value < 100:
        raise ArgumentTypeError("class thresholds should lie in (0, 100)")

    return int(value) if value.is_integer() else value


class ThresholdType:
    def __call__(self, string):
        return parse_threshold(string)


class ThresholdsType:
    def __call__(self, string):
        return [parse_threshold(s.strip()) for s in string.split(",") if s.strip()]


class MeasuresType:
    def __call__(self, string):
        measures = []

        for s in string.split(","):
            measure = s.strip().lower()

            if measure not in MEASURES:
                raise ArgumentTypeError(
                    "%s is not a valid measure. Must be one of: %s"
                    % (s, ", ".join(MEASURES))
                )

            measures.append(measure)

        return measures


class DimensionsType:
    def __init__(self, allow_class: bool = False):
        self.valid = DIMENSIONS + (("class",) if allow_class else ())

    def __call__(self, string):
        dimensions = []

        if not string.strip():
            return dimensions

        for s in string.split(","):
            name = s.strip().lower().replace("-", "_")

            if name not in self.valid:
                raise ArgumentTypeError(
                    "%s is not a valid dimension. Must be one of: %s"
                    % (s, ", ".join(self.valid))
                )

            dimensions.append(name)

        return dimensions


class PositiveIntegerType:
    def __call__(self, string):
        try:
            number = int(string)
        except ValueError:
            raise ArgumentTypeError("expecting a non-zero positive integer")

        if number < 1:
            raise ArgumentTypeError("expecting a non-zero positive integer")

        return number


COMMON_ARGUMENTS = [
    (
        ("-c", "--config"),
        {"help": "Path to the TOML run configuration file."},
    ),
    (
        ("-i", "--input-dir"),
        {
            "help": "Directory containing publications.jsonl, authors.csv, journals.csv and institutions.csv. Overrides the configuration."
        },
    ),
    (
        ("-o", "--output-dir"),
        {"help": "Directory where outputs will be written. Overrides the configuration."},
    ),
    (
        ("-s", "--seed"),
        {"help": "Seed used for tie-breaking and simulation.", "type": int},
    ),
    (
        ("-t", "--threads"),
        {
            "help": "Maximum number of threads to use. Results do not depend on it.",
            "type": PositiveIntegerType(),
        },
    ),
    (
        ("--thresholds",),
        {
            "help": 'Comma-separated top performers classes, in percent, e.g. "1,3,5,10".',
            "type": ThresholdsType(),
        },
    ),
    (
        ("--measures",),
        {
            "help": 'Comma-separated productivity measures to use, e.g. "p1,p3".',
            "type": MeasuresType(),
        },
    ),
    (
        ("-v", "--verbose"),
        {"help": "Whether to log debug messages.", "action": "store_true"},
    ),
    (
        ("-q", "--quiet"),
        {"help": "Whether to only log errors.", "action": "store_true"},
    ),
]

SELECTION_ARGUMENTS = [
    (
        ("--class",),
        {
            "help": "Top performers class to use, in percent (e.g. 10 for the top 10%%). Defaults to every configured class.",
            "dest": "threshold",
            "type": ThresholdType(),
        },
    ),
    (
        ("--measure",),
        {
            "help": "Productivity measure to use. Defaults to every configured measure.",
            "choices": MEASURES,
        },
    ),
]

SHARE_ARGUMENTS = [
    (
        ("--share-basis",),
        {
            "help": "Basis of concentration shares. Defaults to the configured one.",
            "choices": SHARE_BASES,
        },
    ),
]

GROUPING_ARGUMENTS = [
    (
        ("-b", "--by"),
        {
            "help": 'Comma-separated dimensions to group by, among %s. Defaults to "period".'
            % ", ".join(DIMENSIONS),
            "type": DimensionsType(),
            "default": ["period"],
        },
    ),
]

TABLE_ARGUMENTS = [
    (
        ("--column",),
        {
            "help": "Comma-separated dimensions whose values are the columns of the table (percentages are taken within them).",
            "type": DimensionsType(allow_class=True),
        },
    ),
    (
        ("--members-of",),
        {
            "help": "Only tabulate members of the given class.",
            "type": ThresholdType(),
        },
    ),
]


def add_arguments(parser: ArgumentParser, arguments):
    for args, kwargs in arguments:
        parser.add_argument(*args, **kwargs)


add_common_arguments = partial(add_arguments, arguments=COMMON_ARGUMENTS)
add_selection_arguments = partial(add_arguments, arguments=SELECTION_ARGUMENTS)
add_share_arguments = partial(add_arguments, arguments=SHARE_ARGUMENTS)
add_grouping_arguments = partial(add_arguments, arguments=GROUPING_ARGUMENTS)
add_table_arguments = partial(add_arguments, arguments=TABLE_ARGUMENTS)

EXIT_CODES_HELP = """
exit codes:

    - (0): success.

    - (1): invalid inputs or configuration (schema errors, missing
        files, unknown configuration keys...).

    - (2): numeric failure of a model (non-convergence, separation,
        rank deficiency).

    - (64): invalid command line usage.
"""


def build_commands():
    parser = StakhanovArgumentParser(
        "stakhanov",
        description=dedent(
            """
            Stakhanov command line tool identifying top performers in
            national science systems from author-level publication data.

            available commands:

                - (validate): check inputs against their schemas and
                    referential constraints.

                - (panel): build the author-period units.

                - (productivity): compute the four productivity measures
                    and the covariates of every unit.

                - (classify): rank units within their discipline and period
                    and assign top performers classes.

                - (metrics): concentration shares, Relative Presence Index,
                    distribution tables, correlations, persistence and
                    concentration rules.

                - (regress): fit fixed effects logit models of class
                    membership.

                - (simulate): generate a synthetic closed-world corpus.

                - (report): run the full pipeline.
            """
        ),
        epilog=EXIT_CODES_HELP,
        formatter_class=custom_formatter,
    )

    subparsers = parser.add_subparsers(dest="action", help="Command to execute.")

    validate_parser = subparsers.add_parser(
        "validate",
        formatter_class=custom_formatter,
        description=dedent(
            """
            The validate command loads the input tables, checks their schemas,
            unique ids and declared first publication years, and writes
            validation.json with the counts of excluded publications,
            unranked venues and synthesized author profiles.
            """
        ),
        epilog=EXIT_CODES_HELP,
    )
    add_common_arguments(validate_parser)

    panel_parser = subparsers.add_parser(
        "panel",
        formatter_class=custom_formatter,
        description=dedent(
            """
            The panel command builds one unit per author and period in
            which they published, and writes panel.csv along with
            dropped_units.csv listing units that could not be built.
            """
        ),
    )
    add_common_arguments(panel_parser)

    productivity_parser = subparsers.add_parser(
        "productivity",
        formatter_class=custom_formatter,
        description=dedent(
            """
            The productivity command writes productivity.csv: the panel with
            the four productivity measures of every unit (p1 & p2 are
            prestige-normalized, p2 & p4 use fractional counting) and
            the covariates of the membership model.
            """
        ),
    )
    add_common_arguments(productivity_parser)

    classify_parser = subparsers.add_parser(
        "classify",
        formatter_class=custom_formatter,
        description=dedent(
            """
            The classify command ranks units within each discipline and
            period and writes assignments.csv (one row per unit and measure)
            and class_counts.csv (class sizes by the given dimensions).

            Classes are nested and tie-inclusive.
            """
        ),
    )
    add_common_arguments(classify_parser)
    add_grouping_arguments(classify_parser)

    metrics_parser = subparsers.add_parser(
        "metrics",
        formatter_class=custom_formatter,
        description=dedent(
            """
            The metrics command computes aggregates over the classified
            panel and writes them as tidy CSV files.
            """
        ),
    )
    metrics_subparsers = metrics_parser.add_subparsers(
        dest="metric", help="Metric to compute.", required=True
    )

    shares_parser = metrics_subparsers.add_parser(
        "shares",
        formatter_class=custom_formatter,
        description=dedent(
            """
            Writes shares.csv: the share of output held by class members
            and by the rest of each group.
            """
        ),
    )

    rpi_parser = metrics_subparsers.add_parser(
        "rpi",
        formatter_class=custom_formatter,
        description=dedent(
            """
            Writes rpi.csv: the Relative Presence Index of men and women in
            each class. Undefined indices (no representative of a gender)
            are written as "-".
            """
        ),
    )

    tables_parser = metrics_subparsers.add_parser(
        "tables",
        formatter_class=custom_formatter,
        description=dedent(
            """
            Writes distribution.csv: counts and column percentages of units
            over the given dimensions. The "class" dimension (narrowest
            class of a unit for --measure) can be used in --column.
            """
        ),
    )

    correlations_parser = metrics_subparsers.add_parser(
        "correlations",
        formatter_class=custom_formatter,
        description=dedent(
            """
            Writes correlations.csv: Pearson correlations between each pair
            of measures within each group.
            """
        ),
    )

    persistence_parser = metrics_subparsers.add_parser(
        "persistence",
        formatter_class=custom_formatter,
        description=dedent(
            """
            Writes persistence.csv: for each pair of consecutive periods,
            how many class members keep publishing and how many remain in
            the class.
            """
        ),
    )

    rules_parser = metrics_subparsers.add_parser(
        "rules",
        formatter_class=custom_formatter,
        description=dedent(
            """
            Writes rules.csv: per period and measure, the shares of the top
            10% and top 1% next to their 50% and 10% references.
            """
        ),
    )

    for p in (
        shares_parser,
        rpi_parser,
        tables_parser,
        correlations_parser,
        persistence_parser,
        rules_parser,
    ):
        add_common_arguments(p)
        add_share_arguments(p)

    for p in (shares_parser, rpi_parser, tables_parser, persistence_parser):
        add_selection_arguments(p)

    for p in (shares_parser, rpi_parser, correlations_parser):
        add_grouping_arguments(p)

    add_arguments(
        tables_parser,
        [
            (
                ("-b", "--by"),
                {
                    "help": 'Comma-separated dimensions to tabulate. Defaults to "period".',
                    "type": DimensionsType(allow_class=True),
                    "default": ["period"],
                },
            )
        ],
    )
    add_table_arguments(tables_parser)

    regress_parser = subparsers.add_parser(
        "regress",
        formatter_class=custom_formatter,
        description=dedent(
            """
            The regress command fits logit models of class membership with
            period and discipline fixed effects and writes coefficients.csv,
            fixed_effects.csv, fitstats.json, collinearity.csv and
            ci_overlap.csv.

            With both --class and --measure a single model is fitted and any
            numeric failure aborts the command. Otherwise every requested
            (class, measure) model is fitted, failures are recorded in
            fitstats.json and the command exits with code 2.
            """
        ),
        epilog=EXIT_CODES_HELP,
    )
    add_common_arguments(regress_parser)
    add_selection_arguments(regress_parser)

    simulate_parser = subparsers.add_parser(
        "simulate",
        formatter_class=custom_formatter,
        description=dedent(
            """
            The simulate command generates a synthetic closed-world corpus
            (publications.jsonl, authors.csv, journals.csv,
            institutions.csv) and its ground_truth.json in the output
            directory, using the [simulation] table of the configuration.
            """
        ),
    )
    add_common_arguments(simulate_parser)
    simulate_parser.add_argument(
        "-n",
        "--authors",
        help="Number of authors to generate. Overrides the configuration.",
        type=PositiveIntegerType(),
    )

    report_parser = subparsers.add_parser(
        "report",
        formatter_class=custom_formatter,
        description=dedent(
            """
            The report command runs the whole pipeline and writes the union
            of every other command outputs, along with summary.json.
            """
        ),
        epilog=EXIT_CODES_HELP,
    )
    add_common_arguments(report_parser)
    add_share_arguments(report_parser)
    add_grouping_arguments(report_parser)
    add_table_arguments(report_parser)

    commands = {
        "validate": (validate_parser, validate_action),
        "panel": (panel_parser, panel_action),
        "productivity": (productivity_parser, productivity_action),
        "classify": (classify_parser, classify_action),
        "metrics": (metrics_parser, metrics_action),
        "regress": (regress_parser, regress_action),
        "simulate": (simulate_parser, simulate_action),
        "report": (report_parser, report_action),
    }

    return parser, commands


STAKHANOV_PARSER, STAKHANOV_COMMANDS = build_commands()


def configure_logging(cli_args) -> None:
    logger = logging.getLogger("stakhanov")

    if LOG_HANDLER not in logger.handlers:
        logger.addHandler(LOG_HANDLER)

    if cli_args.verbose:
        logger.setLevel(logging.DEBUG)
    elif cli_args.quiet:
        logger.setLevel(logging.ERROR)
    else:
        logger.setLevel(logging.INFO)


def run(arguments_override: Optional[str] = None) -> int:
    cli_args = STAKHANOV_PARSER.parse_args(
        shlex.split(arguments_override) if arguments_override is not None else None
    )

    if cli_args.action is None:
        STAKHANOV_PARSER.print_help()
        return 0

    _, action = STAKHANOV_COMMANDS[cli_args.action]

    configure_logging(cli_args)

    try:
        return action(cli_args)
    except ValidationError as e:
        print_err("error: %s" % e)
        return 1
    except NumericError as e:
        print_err("numeric error: %s" % e)
        return 2
    except StakhanovError as e:
        print_err("error: %s" % e)
        return 1


def main():
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        sys.exit(1)


if __name__ == "__main__":
    main()
