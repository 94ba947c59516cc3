"""DC microgrid secondary control: certificates, equilibria and simulation."""

from ._core import (
    ControllerGains,
    DguParams,
    Error,
    certificate,
    emit_config,
    equilibrium,
    format_number,
    load_config,
    parse_config,
    run,
    stability,
    synthesize_gains,
    trajectory_header,
    validate_gains,
)

__all__ = [
    "ControllerGains",
    "DguParams",
    "Error",
    "certificate",
    "emit_config",
    "equilibrium",
    "format_number",
    "load_config",
    "parse_config",
    "run",
    "stability",
    "synthesize_gains",
    "trajectory_header",
    "validate_gains",
]
