# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the riskit RIS simulation core."""

import json

from . import _riskit
from ._riskit import *  # noqa: F401,F403
from ._riskit import ConfigError, DimensionError, DomainError, Error, NumericError, SingularError  # noqa: F401


def defaults(scenario):
    """Default parameters of a built-in scenario as a dict."""
    return json.loads(_riskit.scenario_defaults(scenario))


def run(scenario, seed=1, trials=0, **params):
    """Run a scenario; returns {table: {column: [values]}}."""
    return _riskit.run_scenario(scenario, seed, trials, json.dumps(params))
