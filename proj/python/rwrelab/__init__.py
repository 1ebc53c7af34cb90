"""Random walks in random environments on Z^d.

Configs are plain dicts with the same schema as the CLI's JSON config files;
missing keys take their defaults.
"""

import json

from . import _core
from ._core import (
    BudgetError,
    ConfigError,
    EXIT_BUDGET,
    EXIT_FALSIFIED,
    EXIT_INCONCLUSIVE,
    EXIT_OK,
    EXIT_USAGE,
    expected_tau,
)

__all__ = [
    "BudgetError",
    "ConfigError",
    "EXIT_BUDGET",
    "EXIT_FALSIFIED",
    "EXIT_INCONCLUSIVE",
    "EXIT_OK",
    "EXIT_USAGE",
    "config_hash",
    "default_config",
    "expected_tau",
    "gap_report",
    "identity_annealed",
    "normalize_config",
    "rate_point",
    "run_command",
    "solve_tilt",
    "tilt_for_config",
    "verify",
]


def _dump(config):
    return json.dumps(config if config is not None else {})


def default_config():
    return json.loads(_core.default_config())


def normalize_config(config=None):
    """Fill in defaults and validate; raises ConfigError on unknown keys."""
    return json.loads(_core.normalize_config(_dump(config)))


def config_hash(config=None):
    return _core.config_hash(_dump(config))


def solve_tilt(means, z):
    """Tilt for marginal means ordered +e1, -e1, +e2, -e2, ... and drift z."""
    return json.loads(_core.solve_tilt(list(means), list(z)))


def tilt_for_config(config=None):
    return json.loads(_core.tilt_for_config(_dump(config)))


def identity_annealed(config, theta, n):
    """(lhs, rhs) of the annealed change-of-measure identity at time n."""
    return _core.identity_annealed(_dump(config), list(theta), n)


def verify(config=None, threads=1):
    return json.loads(_core.verify(_dump(config), threads))


def gap_report(config=None, threads=1):
    """Returns (exit_code, document) with the document as written to gap_report.json."""
    code, doc = _core.gap_report(_dump(config), threads)
    return code, json.loads(doc)


def rate_point(config, x, threads=1):
    return json.loads(_core.rate_point(_dump(config), list(x), threads))


def run_command(name, config=None, threads=1, out_dir=""):
    """Runs a CLI subcommand in process; returns (exit_code, stdout, stderr)."""
    return _core.run_command(name, _dump(config), threads, str(out_dir))
