"""Blind identification of graph filters from multiple observed outputs."""

from .errors import ConfigError, GfidError, IoError
from .graphs import (
    Gso, SpectralBasis, SpectralSupport, eigendecompose, generate_graph, karate_club,
    spectral_support, vandermonde,
)
from .filters import (
    FilterBank, GraphFilter, IncrementBank, apply_filter, common_roots, frequency_response,
    generate_filters, generate_input,
)
from .dst import CrossRelationSystem, ObservationSet, Variant, build_system, dst, true_coefficients
from .recovery import alignment_error, solve_nullspace
from .identifiability import check_multi, check_single
from .noise import NoiseSpec, corrupt
from .sparse import (
    SparseProblem, build_weights, certificate, constrained_variants, robustness_constants,
    solve_l1_ball, solve_l1_equality,
)

from .experiments import ScenarioConfig, emit_csv, load_config, load_preset, run_scenario, summarize

__version__ = "0.1.0"
