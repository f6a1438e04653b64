from typing import Union, Tuple, Dict, Any, Literal

import sys

if sys.version_info >= (3, 11):
    import tomllib as toml_parser
else:
    import tomli as toml_parser

Gender = Literal["M", "F", "U"]
DocType = Literal["article", "conference_paper", "other"]
Measure = Literal["p1", "p2", "p3", "p4"]
ShareBasis = Literal["measure", "full", "coverage"]
UnknownGenderPolicy = Literal["exclude", "keep"]
DisciplineCoding = Literal["sum", "reference"]

GENDERS: Tuple[str, ...] = ("M", "F", "U")
KEPT_DOC_TYPES: Tuple[str, ...] = ("article", "conference_paper")
DOC_TYPES: Tuple[str, ...] = KEPT_DOC_TYPES + ("other",)
MEASURES: Tuple[str, ...] = ("p1", "p2", "p3", "p4")
SHARE_BASES: Tuple[str, ...] = ("measure", "full", "coverage")
AGE_GROUPS: Tuple[str, ...] = ("0-9", "10-19", "20-29", "30+")

# Dimensions units can be grouped by in tables
DIMENSIONS: Tuple[str, ...] = (
    "period",
    "discipline",
    "gender",
    "affiliation",
    "age_group",
)

GroupKey = Tuple[Union[str, int], ...]
JSONDict = Dict[str, Any]
