"""Poisson-line vehicular network toolkit.

Samples road networks with vehicles and roadside devices, evaluates
SIR coverage, throughput, covered-area and latency formulas by adaptive
quadrature, cross-validates them by Monte Carlo, and optimises a
coverage/area utility over the disk radius and vehicle density.
"""

from .core import (
    SCHEMA_VERSION,
    AlphaOutOfRange,
    DeviceDensityWarning,
    EmptyFeasibleSet,
    Estimate,
    LatencyVariant,
    LinecoxError,
    MissingDevices,
    NegativeSpeed,
    NetworkParams,
    NonPositiveDensity,
    NumericalError,
    ParameterError,
    QuadratureNotConverged,
    QuadratureSpec,
    TruncationPolicy,
    UnitParseError,
    WindowNotConverged,
    ZeroSpeed,
    convert_units,
    params_digest,
    substream,
    validate,
)
from .geometry import (
    Line,
    Snapshot,
    Vehicle,
    advance,
    nearest_vehicle_distance,
    ordinary_snapshot,
    palm_snapshot,
    place_devices,
    sample_lines,
    sample_manhattan_lines,
    sample_vehicles_on_line,
    snapshot_from_lines,
    snapshot_to_csv,
)
from .analytic import (
    AFVariant,
    DivergenceReport,
    af_cumulative,
    af_limit,
    af_snapshot,
    area_spectral_efficiency,
    coverage_probability,
    laplace,
    latency_ccdf,
    mean_latency,
)
from .montecarlo import (
    GridEstimate,
    LatencyResult,
    LatencySample,
    SirSample,
    WindowPolicy,
    WindowReport,
    estimate_af_cumulative,
    estimate_af_snapshot,
    estimate_ase,
    estimate_coverage,
    estimate_laplace,
    estimate_latency,
    interference_at_origin,
    randomized_speed_af,
    sample_latency,
)
from .optimize import (
    GridSpec,
    OptimizeResult,
    SurfaceCell,
    UtilityWeights,
    feasible_domain,
    optimize_grid,
    utility,
)

__version__ = "0.1.0"

__all__ = [
    "SCHEMA_VERSION",
    "__version__",
    # core
    "AlphaOutOfRange",
    "DeviceDensityWarning",
    "EmptyFeasibleSet",
    "Estimate",
    "LatencyVariant",
    "LinecoxError",
    "MissingDevices",
    "NegativeSpeed",
    "NetworkParams",
    "NonPositiveDensity",
    "NumericalError",
    "ParameterError",
    "QuadratureNotConverged",
    "QuadratureSpec",
    "TruncationPolicy",
    "UnitParseError",
    "WindowNotConverged",
    "ZeroSpeed",
    "convert_units",
    "params_digest",
    "substream",
    "validate",
    # geometry
    "Line",
    "Snapshot",
    "Vehicle",
    "advance",
    "nearest_vehicle_distance",
    "ordinary_snapshot",
    "palm_snapshot",
    "place_devices",
    "sample_lines",
    "sample_manhattan_lines",
    "sample_vehicles_on_line",
    "snapshot_from_lines",
    "snapshot_to_csv",
    # analytic
    "AFVariant",
    "DivergenceReport",
    "af_cumulative",
    "af_limit",
    "af_snapshot",
    "area_spectral_efficiency",
    "coverage_probability",
    "laplace",
    "latency_ccdf",
    "mean_latency",
    # montecarlo
    "GridEstimate",
    "LatencyResult",
    "LatencySample",
    "SirSample",
    "WindowPolicy",
    "WindowReport",
    "estimate_af_cumulative",
    "estimate_af_snapshot",
    "estimate_ase",
    "estimate_coverage",
    "estimate_laplace",
    "estimate_latency",
    "interference_at_origin",
    "randomized_speed_af",
    "sample_latency",
    # optimize
    "GridSpec",
    "OptimizeResult",
    "SurfaceCell",
    "UtilityWeights",
    "feasible_domain",
    "optimize_grid",
    "utility",
]
