"""Distributional preference matching for cross-domain cold-start recommendation."""

import json

from . import _core
from ._core import ConfigError, NumericError, ShapeError, gaussian_kl, gradcheck, matching_loss, rank_of

__all__ = [
    "ConfigError",
    "NumericError",
    "ShapeError",
    "Session",
    "config",
    "gaussian_kl",
    "gradcheck",
    "main",
    "matching_loss",
    "rank_of",
    "report_from_ranks",
]


def config(path="", **overrides):
    """Resolved configuration as a dict. Keys may be dotted or unique leaf names."""
    pairs = [(k, _format(v)) for k, v in overrides.items()]
    return json.loads(_core.resolve_config(path, pairs))


def report_from_ranks(ranks, domain="target", seed=0):
    return json.loads(_core.report_from_ranks(list(ranks), domain, seed))


class Session:
    """Loaded data, configuration and parameters of one run."""

    def __init__(self, cfg=None, _core_session=None):
        if _core_session is None:
            if cfg is None:
                raise ValueError("a config dict is required (see prefmatch.config)")
            _core_session = _core.Session(json.dumps(cfg))
        self._s = _core_session

    @classmethod
    def load(cls, path):
        return cls(_core_session=_core.Session.load(str(path)))

    @property
    def config(self):
        return json.loads(self._s.config())

    def stats(self):
        return self._s.stats()

    def train(self):
        """Trains from the configured seed; returns the per-epoch loss log."""
        return self._s.train()

    def evaluate(self, split="test", popularity=False):
        """One report per direction, keyed by the domain being predicted."""
        reports = [json.loads(r) for r in self._s.evaluate(split, popularity)]
        return {r["domain"]: r for r in reports}

    def save(self, path):
        self._s.save(str(path))


def main(argv=None):
    import sys

    status, out, err = _core.run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return status


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)
