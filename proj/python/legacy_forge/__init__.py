"""Python access to the legacy_forge pipeline."""

import json

from . import _core
from ._core import (
    DegenerateInput,
    EmptyInput,
    FatalConfig,
    ForgeError,
    ParseFailed,
    PreprocessFailed,
    SourceTooLarge,
    TargetNotFound,
    assemble_prompt,
    implied_closure,
    improvement_stats,
    pearson,
)

__all__ = [
    "DegenerateInput",
    "EmptyInput",
    "FatalConfig",
    "ForgeError",
    "ParseFailed",
    "PreprocessFailed",
    "SourceTooLarge",
    "TargetNotFound",
    "assemble_prompt",
    "generate_mockup",
    "implied_closure",
    "improvement_stats",
    "parse_counterexample",
    "parse_response",
    "parse_unit",
    "pearson",
    "report",
    "run",
]


def parse_unit(path, include_dirs=(), defines=()):
    """Symbols of a C file (system-header symbols omitted)."""
    return json.loads(_core.parse_unit_json(str(path), list(map(str, include_dirs)), list(defines)))


def generate_mockup(path, target):
    """Self-contained mockup of `target` with its source map and stubs."""
    return json.loads(_core.generate_mockup_json(str(path), target))


def parse_counterexample(raw_output):
    return json.loads(_core.parse_counterexample_json(raw_output))


def parse_response(text):
    return json.loads(_core.parse_response_json(text))


def run(config, output_dir=None, backend=None, max_iterations=None):
    """Runs the pipeline; returns the aggregate report plus `exit_code`."""
    return json.loads(
        _core.run_pipeline_json(
            str(config),
            None if output_dir is None else str(output_dir),
            backend,
            max_iterations,
        )
    )


def report(output_dir):
    """Recomputes the aggregate report from the session records in `output_dir`."""
    return json.loads(_core.report_json(str(output_dir)))
