# Copyright 2026 The lbscan Authors.
# SPDX-License-Identifier: Apache-2.0
"""Locally bi-directional selective scan.

Array arguments are converted to float64 NumPy arrays. Configs are dicts in the
key=value config vocabulary, for example ``{"depth": "2", "head": "map"}``.
"""

from ._core import (
    FormatError,
    Model,
    NonFiniteError,
    RangeError,
    ShapeError,
    __version__,
    bench,
    forward_scan,
    forward_scan_ref,
    gen_task,
    global_bidir_scan,
    lbm_scan,
    lbm_scan_ref,
    model_cost,
    scan_cost,
    select_tile_len,
    verify,
)

__all__ = [
    "FormatError",
    "Model",
    "NonFiniteError",
    "RangeError",
    "ShapeError",
    "__version__",
    "bench",
    "forward_scan",
    "forward_scan_ref",
    "gen_task",
    "global_bidir_scan",
    "lbm_scan",
    "lbm_scan_ref",
    "model_cost",
    "scan_cost",
    "select_tile_len",
    "verify",
]
