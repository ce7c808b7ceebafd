"""Expected distortion of two-candidate majority elections with i.i.d. candidates."""

from .election import DistortionReport, distortion, expected_distortion, monte_carlo_distortion
from .generators import FamilyParams, generate
from .line import maximize_three_point, reduce_to_three
from .metric_core import Distribution, FiniteMetric, Instance, LineInstance, parse_document, read_instance, write_instance
from .search import SearchConfig, SearchResult, brute_force_small

__version__ = "0.1.0"

__all__ = [
    "Distribution",
    "DistortionReport",
    "FamilyParams",
    "FiniteMetric",
    "Instance",
    "LineInstance",
    "SearchConfig",
    "SearchResult",
    "brute_force_small",
    "distortion",
    "expected_distortion",
    "generate",
    "maximize_three_point",
    "monte_carlo_distortion",
    "parse_document",
    "read_instance",
    "reduce_to_three",
    "write_instance",
]
