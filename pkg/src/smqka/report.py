"""Machine-readable run reports as line-delimited JSON records.

A document is a ``config`` record, one ``trial`` record per trial in index
order, an ``aggregate`` record and zero or more ``efficiency`` records. Every
record carries ``schema``; keys are sorted so identical runs give identical
bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

from .analysis import EfficiencyFigure, TrialAggregate, aggregate, qubit_efficiency, run_trials, trial_correct
from .config import ScenarioConfig, config_from_dict, config_to_dict
from .protocol import RunReport, bits_to_str

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TrialDigest:
    index: int
    aborted: bool
    correct: bool
    abort_hop: Optional[tuple[int, int, int]]  # (round, sender, receiver)
    final_keys: Optional[dict[int, str]]
    attack_flags: dict[str, bool]
    desired_key: Optional[str]
    stolen_keys: dict[int, str]
    decoys_checked: int
    decoy_errors: int

    @classmethod
    def from_report(cls, index: int, report: RunReport) -> TrialDigest:
        rec = report.abort_record
        return cls(
            index=index,
            aborted=report.aborted,
            correct=trial_correct(report),
            abort_hop=(rec.round, rec.sender, rec.receiver) if rec else None,
            final_keys=None if report.final_keys is None
            else {i: bits_to_str(key) for i, key in report.final_keys.items()},
            attack_flags=dict(report.attack_flags),
            desired_key=bits_to_str(report.desired_key) if report.desired_key is not None else None,
            stolen_keys={v: bits_to_str(key) for v, key in sorted(report.stolen_keys.items())},
            decoys_checked=sum(d.decoys_checked for d in report.detections),
            decoy_errors=sum(d.errors for d in report.detections),
        )

    def to_record(self) -> dict:
        out = asdict(self)
        if self.final_keys is not None:
            out["final_keys"] = {str(i): k for i, k in self.final_keys.items()}
        out["stolen_keys"] = {str(i): k for i, k in self.stolen_keys.items()}
        out["abort_hop"] = list(self.abort_hop) if self.abort_hop else None
        return out

    @classmethod
    def from_record(cls, rec: dict) -> TrialDigest:
        rec = {k: v for k, v in rec.items() if k not in ("record", "schema")}
        if rec["final_keys"] is not None:
            rec["final_keys"] = {int(i): k for i, k in rec["final_keys"].items()}
        rec["stolen_keys"] = {int(i): k for i, k in rec["stolen_keys"].items()}
        rec["abort_hop"] = tuple(rec["abort_hop"]) if rec["abort_hop"] else None
        return cls(**rec)


def _efficiency_record(fig: EfficiencyFigure) -> dict:
    return {"protocol": fig.protocol_label, "N": fig.N, "k": str(fig.k), "value": str(fig.value)}


@dataclass
class ReportDocument:
    config: ScenarioConfig
    trials: list[TrialDigest]
    aggregate: TrialAggregate
    efficiency: list[EfficiencyFigure] = field(default_factory=list)
    schema: int = SCHEMA_VERSION

    @classmethod
    def build(cls, config: ScenarioConfig, reports: list[RunReport]) -> ReportDocument:
        figures = [qubit_efficiency(label, config.N, config.k) for label in ("SMQKA", "LiuMQKA")]
        digests = [TrialDigest.from_report(i, r) for i, r in enumerate(reports)]
        return cls(config, digests, aggregate(reports), figures)

    def to_records(self) -> list[dict]:
        records = [{"record": "config", **config_to_dict(self.config)}]
        records += [{"record": "trial", **t.to_record()} for t in self.trials]
        records.append({"record": "aggregate", **self.aggregate.to_dict()})
        records += [{"record": "efficiency", **_efficiency_record(f)} for f in self.efficiency]
        return [{"schema": self.schema, **r} for r in records]

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.to_records())

    @classmethod
    def loads(cls, text: str) -> ReportDocument:
        config = aggregate_ = None
        trials, figures = [], []
        schema = SCHEMA_VERSION
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            schema = rec.pop("schema")
            if schema != SCHEMA_VERSION:
                raise ValueError(f"unsupported report schema {schema}")
            kind = rec.pop("record")
            if kind == "config":
                config = config_from_dict(rec)
            elif kind == "trial":
                trials.append(TrialDigest.from_record(rec))
            elif kind == "aggregate":
                aggregate_ = TrialAggregate(**rec)
            elif kind == "efficiency":
                figures.append(EfficiencyFigure(rec["protocol"], rec["N"], Fraction(rec["k"]), Fraction(rec["value"])))
            else:
                raise ValueError(f"unknown record type {kind!r}")
        if config is None or aggregate_ is None:
            raise ValueError("report lacks a config or aggregate record")
        return cls(config, trials, aggregate_, figures, schema)


def run_report(config: ScenarioConfig) -> ReportDocument:
    return ReportDocument.build(config, run_trials(config, config.trials, config.seed))
