"""
Output data models for the simulator command line.

This module defines the self-describing result envelope every command emits,
the validated run configuration parsed from CLI flags, and the writers that
put envelopes and tables on disk (or stdout).

Usage (example):

    from models import ResultEnvelope, write_envelope

    envelope = ResultEnvelope("correlate", {"alpha_deg": 60.0}, {"value": -0.5})
    write_envelope(envelope, "correlate.json", "json")

Outputs never carry timestamps: repeating a command with the same flags gives
byte-identical files.
"""
from __future__ import annotations

import errno
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple

import numpy as np
import pandas as pd

from backend.config import DEFAULT_SEED, DEFAULT_TRIALS, TOOL_VERSION
from backend.measurement_sim import MeasurementModel, RunConfig
from backend.spin_algebra import Axis

OUTPUT_FORMATS = ("json", "csv")
STDOUT = "-"


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # -0.0 and 0.0 must serialize identically
        return 0.0 if value == 0.0 else value
    if isinstance(value, MeasurementModel):
        return value.value
    return value


# ---------------------------------------------------------------------------
# ResultEnvelope
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ResultEnvelope:
    """Result of one command.

    Fields:
      - command: subcommand name (e.g. 'bell')
      - parameters: echo of every input that shaped the result
      - values: command-specific payload
      - tool_version: version of the simulator that produced it
    """

    command: str
    parameters: Dict[str, Any]
    values: Dict[str, Any]
    tool_version: str = TOOL_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "tool_version": self.tool_version,
            "parameters": _plain(self.parameters),
            "values": _plain(self.values),
        }

    def flatten(self) -> Dict[str, Any]:
        """Dotted-key view of the envelope, e.g. {'values.replica.value': 0.5}."""
        flat: Dict[str, Any] = {}

        def walk(prefix: str, node: Any) -> None:
            if isinstance(node, dict):
                for key, child in node.items():
                    walk(f"{prefix}.{key}" if prefix else key, child)
            elif isinstance(node, list):
                for i, child in enumerate(node):
                    walk(f"{prefix}.{i}", child)
            else:
                flat[prefix] = node

        walk("", self.to_dict())
        return flat


# ---------------------------------------------------------------------------
# CliConfig
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CliConfig:
    """Run configuration parsed from flags; validated before any computation."""

    seed: int = DEFAULT_SEED
    n_trials: int = DEFAULT_TRIALS
    model: MeasurementModel = MeasurementModel.LOCAL_INDEPENDENT
    output_format: str = "json"
    output_path: str = STDOUT
    angles_deg: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(f"--format must be one of {OUTPUT_FORMATS}, got {self.output_format!r}")
        for name, value in self.angles_deg.items():
            if not math.isfinite(float(value)):
                raise ValueError(f"{name} must be finite, got {value!r}")
        object.__setattr__(self, "model", MeasurementModel.from_flag(self.model))
        # RunConfig owns the seed / trial-count rules
        RunConfig(self.seed, self.n_trials, self.model, (Axis(0.0), Axis(0.0)))

    def axes(self) -> Tuple[Axis, Axis]:
        a = Axis.from_degrees(self.angles_deg.get("alpha_a_deg", 0.0), self.angles_deg.get("beta_a_deg", 0.0))
        b = Axis.from_degrees(self.angles_deg.get("alpha_b_deg", 0.0), self.angles_deg.get("beta_b_deg", 0.0))
        return a, b

    def run_config(self) -> RunConfig:
        return RunConfig(self.seed, self.n_trials, self.model, self.axes())


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------
def _write_text(text: str, path: str) -> None:
    if path == STDOUT:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def envelope_json(envelope: ResultEnvelope) -> str:
    return json.dumps(envelope.to_dict(), indent=2, allow_nan=False) + "\n"


def write_envelope(envelope: ResultEnvelope, path: str, output_format: str = "json") -> None:
    """Write an envelope as JSON, or as a two-column ``field,value`` CSV."""
    if output_format == "csv":
        flat = envelope.flatten()
        frame = pd.DataFrame({"field": list(flat), "value": list(flat.values())})
        write_frame(frame, path)
    else:
        _write_text(envelope_json(envelope), path)


def write_frame(frame: pd.DataFrame, path: str) -> None:
    _write_text(frame.to_csv(index=False, lineterminator="\n"), path)


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: not valid JSON ({e.msg} at line {e.lineno})") from e


def sibling_path(path: str, suffix: str, fallback: str) -> str:
    """``<stem><suffix>`` next to ``path``; ``fallback`` when writing to stdout."""
    if path == STDOUT:
        return fallback
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


def ensure_writable(*paths: str) -> None:
    """Fail before any output is written when one of ``paths`` cannot be created."""
    for path in paths:
        if path == STDOUT:
            continue
        parent = Path(path).parent
        if not parent.is_dir():
            raise FileNotFoundError(errno.ENOENT, "No such directory", str(parent))
        if not os.access(parent, os.W_OK):
            raise PermissionError(errno.EACCES, "Directory is not writable", str(parent))
