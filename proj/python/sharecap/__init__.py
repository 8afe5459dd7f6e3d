# SPDX-License-Identifier: Apache-2.0
"""Capacity and optimal transmit covariance of a Gaussian vector channel
under a total power constraint and per-user interference caps.

The heavy lifting lives in the C++ extension module; this package simply
re-exports it.
"""

from ._core import (
    Instance,
    classify,
    kkt_residuals,
    mutual_information,
    oracle,
    solve,
    solve_general,
    waterfilling,
)

__all__ = [
    "Instance",
    "classify",
    "kkt_residuals",
    "mutual_information",
    "oracle",
    "solve",
    "solve_general",
    "waterfilling",
]
