"""
Per-iteration training records, streamed as JSON lines.
"""
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, IO, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    iteration: int
    epoch: int
    phase: str
    scalars: Dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class RunLog:
    """Ordered iteration records; optionally mirrored to a JSONL file."""

    def __init__(self, path: Optional[str] = None, append: bool = False):
        self.records: List[RunRecord] = []
        self.path = path
        self._handle: Optional[IO[str]] = None
        if path:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            self._handle = open(path, 'a' if append else 'w', encoding='utf-8')

    def append(self, record: RunRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ValueError(
                f"iteration {record.iteration} does not follow {self.records[-1].iteration}"
            )
        for key, value in record.scalars.items():
            if not math.isfinite(value):
                raise ValueError(f"run log value {key!r} is not finite at iteration {record.iteration}")
        self.records.append(record)
        if self._handle:
            self._handle.write(record.to_json() + '\n')
            self._handle.flush()

    def log(self, iteration: int, epoch: int, phase: str, **scalars: float) -> RunRecord:
        record = RunRecord(iteration, epoch, phase, {k: float(v) for k, v in scalars.items()})
        self.append(record)
        return record

    def phase_records(self, phase: str) -> List[RunRecord]:
        return [r for r in self.records if r.phase == phase]

    def close(self) -> None:
        if self._handle:
            self._handle.close()
            self._handle = None

    def __enter__(self) -> 'RunLog':
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __len__(self) -> int:
        return len(self.records)


def read_run_log(path: str) -> List[RunRecord]:
    records = []
    with open(path, 'r', encoding='utf-8') as handle:
        for line in handle:
            if line.strip():
                records.append(RunRecord(**json.loads(line)))
    return records
