"""Episode trace records and their on-disk format.

One episode is one line-delimited JSON file: a header line (schema version,
config hash, seed, scenario, controller), one line per simulation tick, and
a terminal line with the outcome.  Bodies contain no timestamps and floats
are serialized with repr, so a given (config, seed) pair always produces
byte-identical files.  A batch run additionally writes a manifest listing
every episode file with its outcome.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Iterator

from .scenario import JointState

__all__ = [
    "SCHEMA_VERSION",
    "Outcome",
    "TickRecord",
    "EpisodeTrace",
    "trace_lines",
    "write_trace",
    "read_trace",
    "write_manifest",
    "read_manifest",
]

SCHEMA_VERSION = 1


class Outcome:
    """Episode outcomes (plain strings for JSON friendliness)."""

    PED_FIRST = "ped_first"
    VEH_FIRST = "veh_first"
    TIMEOUT = "timeout"

    ALL = (PED_FIRST, VEH_FIRST, TIMEOUT)


@dataclass(frozen=True)
class TickRecord:
    t: float
    x_veh: float
    v_veh: float
    y_ped: float
    v_ped: float
    u_cmd: float
    intention_raw: float
    intention_eff: float
    zone: str
    diag: dict = field(default_factory=dict)

    def state(self) -> JointState:
        return JointState(t=self.t, x_veh=self.x_veh, v_veh=self.v_veh,
                          y_ped=self.y_ped, v_ped=self.v_ped)


@dataclass
class EpisodeTrace:
    scenario: str
    controller: str
    seed: int
    config_hash: str
    ticks: list[TickRecord] = field(default_factory=list)
    t_end: float = 0.0
    outcome: str = Outcome.TIMEOUT
    schema_version: int = SCHEMA_VERSION

    def states(self) -> list[JointState]:
        return [tick.state() for tick in self.ticks]

    def header(self) -> dict:
        return {
            "kind": "header",
            "schema_version": self.schema_version,
            "config_hash": self.config_hash,
            "scenario": self.scenario,
            "controller": self.controller,
            "seed": self.seed,
        }


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def trace_lines(trace: EpisodeTrace) -> list[str]:
    """Serialize one episode as line-delimited JSON (header, ticks, end)."""
    lines = [_dump(trace.header())]
    for tick in trace.ticks:
        rec = asdict(tick)
        rec["kind"] = "tick"
        lines.append(_dump(rec))
    lines.append(_dump({"kind": "end", "t_end": trace.t_end, "outcome": trace.outcome}))
    return lines


def write_trace(trace: EpisodeTrace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(trace_lines(trace)) + "\n")


def read_trace(path: str) -> EpisodeTrace:
    """Parse a trace file; raises ValueError on schema problems."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty trace file")
    header = json.loads(lines[0])
    if header.get("kind") != "header":
        raise ValueError(f"{path}: first line is not a trace header")
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")

    trace = EpisodeTrace(
        scenario=header["scenario"],
        controller=header["controller"],
        seed=int(header["seed"]),
        config_hash=header["config_hash"],
        schema_version=version,
    )
    saw_end = False
    for line in lines[1:]:
        rec = json.loads(line)
        kind = rec.pop("kind", None)
        if kind == "tick":
            trace.ticks.append(TickRecord(**rec))
        elif kind == "end":
            trace.t_end = float(rec["t_end"])
            outcome = rec["outcome"]
            if outcome not in Outcome.ALL:
                raise ValueError(f"{path}: unknown outcome {outcome!r}")
            trace.outcome = outcome
            saw_end = True
        else:
            raise ValueError(f"{path}: unknown record kind {kind!r}")
    if not saw_end:
        raise ValueError(f"{path}: trace has no end record")
    return trace


def write_manifest(path: str, entries: list[dict], config_hash: str) -> None:
    """Write the batch manifest; entries are sorted canonically for determinism."""
    ordered = sorted(entries, key=lambda e: (e["scenario"], e["controller"], e["seed"]))
    doc = {
        "kind": "batch_manifest",
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash,
        "episodes": ordered,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def read_manifest(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "batch_manifest":
        raise ValueError(f"{path}: not a batch manifest")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def resolve_trace_paths(manifest: dict, manifest_path: str) -> list[str]:
    """Absolute paths of all episode traces listed in a manifest."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    return [os.path.join(base, e["path"]) for e in manifest["episodes"]]
