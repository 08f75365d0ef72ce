"""Multiplicative cascades on the binary tree."""

import json

from ._core import (
    Flow,
    coupling_upper_bound,
    kpz_closed_form,
    kpz_solve,
    overlap,
    registered_tests,
    simulate,
    wasserstein_exact,
    wasserstein_lp,
)
from . import _core


def regularity_report(t, h_values, weights="gaussian"):
    return json.loads(_core.regularity_report(t, list(h_values), weights))


def run_suite(**config):
    """Run verification tests; keyword arguments mirror the suite config keys."""
    return json.loads(_core.run_suite(json.dumps(config)))


__all__ = [
    "Flow",
    "coupling_upper_bound",
    "kpz_closed_form",
    "kpz_solve",
    "overlap",
    "registered_tests",
    "regularity_report",
    "run_suite",
    "simulate",
    "wasserstein_exact",
    "wasserstein_lp",
]
