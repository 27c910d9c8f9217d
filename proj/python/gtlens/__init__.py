# SPDX-License-Identifier: Apache-2.0
"""Spectral and representational diagnostics for graph transformers on molecular graphs."""

from ._gtlens import *  # noqa: F401,F403
from ._gtlens import GtlensError, __version__  # noqa: F401
