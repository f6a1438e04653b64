# =============================================================================
# Stakhanov Library Endpoint
# =============================================================================
#
__version__ = "0.1.0"

from stakhanov.config import RunConfig, load_config
from stakhanov.ingest import (
    CorpusPaths,
    Corpus,
    load_corpus,
    derive_first_pub_year,
)
from stakhanov.panel import Period, AuthorPeriodUnit, build_panel
from stakhanov.productivity import (
    prestige_weight,
    compute_measures,
    compute_productivity,
)
from stakhanov.classify import TopClassAssignment, classify, classify_panel
from stakhanov.metrics import (
    concentration_share,
    rpi,
    distribution_table,
    measure_correlations,
)
from stakhanov.felogit import (
    GlmSpec,
    GlmFit,
    fit,
    mcfadden,
    collinearity_diagnostic,
    ci_overlap_report,
)
from stakhanov.simgen import SimConfig, generate
