"""Ricci measure and weak flow checks on singular metrics."""

import json
import os

from ._core import (
    ConfigError,
    RicciError,
    UnknownScenarioError,
    UnsupportedGeometryError,
    __version__,
    verbs,
)
from . import _core

__all__ = [
    "ConfigError",
    "RicciError",
    "UnknownScenarioError",
    "UnsupportedGeometryError",
    "__version__",
    "catalog",
    "config",
    "run",
    "verb",
    "verbs",
]


def _pairs(overrides):
    if not overrides:
        return []
    out = []
    for key, value in dict(overrides).items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        out.append((str(key), str(value)))
    return out


def _file(cfg):
    return "" if cfg is None else json.dumps(cfg)


def catalog(filter=""):
    """Scenario catalog as a list of dicts."""
    return json.loads(_core.catalog_json(filter))


def config(scenario, cfg=None, **overrides):
    """Resolved configuration: defaults, scenario, `cfg`, then dotted overrides."""
    return json.loads(_core.config_json(scenario, _file(cfg), _pairs(overrides)))


def run(scenario, cfg=None, out=None, timing=True, **overrides):
    """Run every check for a scenario. Returns (report, exit_code)."""
    doc, code = _core.run_json(scenario, _file(cfg), _pairs(overrides), timing, os.fspath(out) if out else "")
    return json.loads(doc), code


def verb(name, scenario, cfg=None, out=None, **overrides):
    """Run a single verb (qform, ricci-measure, flow-check, ...). Returns (doc, status)."""
    doc, status = _core.verb_json(name, scenario, _file(cfg), _pairs(overrides), os.fspath(out) if out else "")
    return json.loads(doc), status
