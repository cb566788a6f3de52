"""Exciton transport on random dipole-coupled networks with dephasing and a sink."""

__version__ = "0.1.0"

from .dynamics import (
    ExcitedState,
    Liouvillian,
    Status,
    TransferResult,
    build_liouvillian,
    eigenstate_report,
    evolve_oracle,
    purity,
    transfer_time,
    transfer_times,
    two_site_transfer_time,
)
from .landscape import (
    GammaGrid,
    Landscape,
    density,
    make_gamma_grid,
    reference_lines,
    run_landscape,
    summarize,
)
from .network import (
    Configuration,
    ModelParams,
    NetworkModel,
    build_model,
    rng_stream,
    sample_configuration,
    scale_configuration,
)
from .optimizer import optimize_gamma0, sweep_optimized

__all__ = [
    "Configuration", "ExcitedState", "GammaGrid", "Landscape", "Liouvillian", "ModelParams",
    "NetworkModel", "Status", "TransferResult", "build_liouvillian", "build_model", "density",
    "eigenstate_report", "evolve_oracle", "make_gamma_grid", "optimize_gamma0", "purity",
    "reference_lines", "rng_stream", "run_landscape", "sample_configuration",
    "scale_configuration", "summarize", "sweep_optimized", "transfer_time", "transfer_times",
    "two_site_transfer_time",
]
