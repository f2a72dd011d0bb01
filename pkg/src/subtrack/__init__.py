"""Change-point detection for dynamic networks by tracking embedding subspaces."""
from .detector import (
    ChangePointSet,
    DetectionReport,
    DetectorConfig,
    default_config,
    detect,
    estimate_subspace,
    refine,
    scan,
)
from .errors import DegenerateRankError, ParseError, SubtrackError, ValidationError
from .generator import ScenarioParams, build_scenario, build_toy, scenario_params
from .netdata import GraphSequence, parse_graph_sequence, read_dnet, sequence_sparsity_estimate

__version__ = "0.1.0"
