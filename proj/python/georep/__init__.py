"""Simulated geo-replicated BFT key-value deployments."""

from pathlib import Path

from ._core import (
    ConfigError,
    DecodeError,
    KvStore,
    LatencyRow,
    RunResult,
    Verdict,
    append_op,
    audit,
    get_op,
    irmc_conformance,
    parse_scenario,
    put_op,
    run_scenario,
)

__all__ = [
    "ConfigError",
    "DecodeError",
    "KvStore",
    "LatencyRow",
    "RunResult",
    "Verdict",
    "append_op",
    "audit",
    "get_op",
    "irmc_conformance",
    "load_scenario",
    "parse_scenario",
    "put_op",
    "run",
    "run_scenario",
]


def load_scenario(path):
    """Read and validate a scenario file; returns its canonical JSON text."""
    return parse_scenario(Path(path).read_text())


def run(path, **overrides):
    """Run a scenario file. Keyword overrides: seed, mode, irmc, full_trace."""
    return run_scenario(Path(path).read_text(), **overrides)
