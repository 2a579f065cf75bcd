"""Python interface to the NAT hole-punching simulator.

Scenario configs and campaign outputs cross the boundary as JSON; this
wrapper converts them to and from plain dicts.
"""

import json

try:
    from ._punchsim import (  # type: ignore[attr-defined]
        ConfigError,
        InvalidParams,
        birthday_success_prob,
        birthday_success_prob_independent,
        compute_wait_time,
        expected_improvement,
        population_mix,
        preset_json,
        preset_names,
        run_birthday_trials,
        run_campaign_json,
        sync_safe,
    )
except ImportError:  # CMake-built module on PYTHONPATH rather than installed
    from _punchsim import (
        ConfigError,
        InvalidParams,
        birthday_success_prob,
        birthday_success_prob_independent,
        compute_wait_time,
        expected_improvement,
        population_mix,
        preset_json,
        preset_names,
        run_birthday_trials,
        run_campaign_json,
        sync_safe,
    )

__all__ = [
    "ConfigError",
    "InvalidParams",
    "birthday_success_prob",
    "birthday_success_prob_independent",
    "compute_wait_time",
    "expected_improvement",
    "population_mix",
    "preset",
    "preset_names",
    "run_birthday_trials",
    "run_campaign",
    "sync_safe",
]


def preset(name):
    """Return a bundled scenario config as a dict."""
    return json.loads(preset_json(name))


def run_campaign(scenario, jobs=1):
    """Run a campaign from a scenario dict.

    Returns a dict with keys ``scenario_digest``, ``seed``, ``report`` and
    ``results``.
    """
    return json.loads(run_campaign_json(json.dumps(scenario), jobs))
