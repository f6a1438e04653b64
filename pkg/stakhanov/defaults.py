# =============================================================================
# Stakhanov Defaults
# =============================================================================
#
# Default values used by the run configuration and the various stages.
#
from typing import Dict, Tuple

START_YEAR = 1992
END_YEAR = 2021
PERIOD_LENGTH = 6

THRESHOLDS: Tuple[float, ...] = (1, 3, 5, 10)

HOME_COUNTRY = "PL"
SEED = 0

# Prestige weights
FLOOR_PERCENTILE = 10
MAX_PERCENTILE = 99

# GLM
SCORE_TOLERANCE = 1e-8
LOGLIK_TOLERANCE = 1e-10
MAX_ITERATIONS = 100
SEPARATION_BOUND = 30.0
WALD_Z = 1.96

MIN_CORRELATION_CELL = 3

# ASJC subject areas (first two digits of the code) kept for analysis.
# Four-digit keys are also accepted in configuration and win over areas.
DISCIPLINES: Dict[str, str] = {
    "11": "AGRI",
    "13": "BIO",
    "15": "CHEMENG",
    "16": "CHEM",
    "17": "COMP",
    "19": "EARTH",
    "21": "ENER",
    "22": "ENG",
    "23": "ENVIR",
    "25": "MATER",
    "26": "MATH",
    "27": "MED",
    "28": "NEURO",
    "30": "PHARM",
    "31": "PHYS",
}

# Covariates of the membership model, in reporting order
COVARIATES: Tuple[str, ...] = (
    "academic_age",
    "avg_team_size",
    "intl_collaboration_rate",
    "collaboration_rate",
    "gender_male",
    "research_intensity_rest",
    "median_journal_percentile",
)

PUBLICATIONS_FILENAME = "publications.jsonl"
AUTHORS_FILENAME = "authors.csv"
JOURNALS_FILENAME = "journals.csv"
INSTITUTIONS_FILENAME = "institutions.csv"
GROUND_TRUTH_FILENAME = "ground_truth.json"
