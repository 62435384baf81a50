"""Slotted-time simulator and analytic toolkit for three-node relay networks.

Compares conventional (immediate-forward) relaying against buffer-aided
relaying with Max-Weight scheduling, in terms of end-to-end packet delay,
throughput and queue stability.
"""

from bufrelay.errors import ConfigError, DomainError, EmptyResultError, NumericError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "EmptyResultError",
    "NumericError",
    "__version__",
]
