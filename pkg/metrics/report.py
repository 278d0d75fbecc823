"""
Per-image metric rows with CSV and JSON summary output.
"""
import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from metrics.constants import REPORT_NOTE
from metrics.quality import (
    metric_en,
    metric_mi,
    metric_psnr,
    metric_qabf,
    metric_scd,
    metric_sd,
    metric_ssim,
    metric_vif,
)
from utils.helpers import summarize

logger = logging.getLogger(__name__)

METRICS = ('EN', 'SD', 'MI', 'VIF', 'QABF', 'SCD', 'PSNR', 'SSIM')
INPUT_METRICS = ('input_PSNR', 'input_SSIM')


def score_image(enhanced: np.ndarray, reference: np.ndarray, degraded: np.ndarray) -> Dict[str, float]:
    """Every report column for one enhanced image."""
    return {
        'EN': metric_en(enhanced),
        'SD': metric_sd(enhanced),
        'MI': metric_mi(enhanced, reference),
        'VIF': metric_vif(reference, enhanced),
        'QABF': metric_qabf(enhanced, reference),
        'SCD': metric_scd(enhanced, degraded, reference),
        'PSNR': metric_psnr(enhanced, reference),
        'SSIM': metric_ssim(enhanced, reference),
        'input_PSNR': metric_psnr(degraded, reference),
        'input_SSIM': metric_ssim(degraded, reference),
    }


def _cell(value: float) -> str:
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return repr(float(value))


@dataclass
class MetricReport:
    degradation: str = 'identity'
    rows: List[Tuple[str, Dict[str, float]]] = field(default_factory=list)

    @property
    def columns(self) -> Tuple[str, ...]:
        return METRICS + INPUT_METRICS

    def add(self, image: str, values: Dict[str, float]) -> None:
        missing = [c for c in self.columns if c not in values]
        if missing:
            raise ValueError(f"metric row for {image} lacks {missing}")
        self.rows.append((image, dict(values)))

    def column(self, name: str) -> List[float]:
        return [values[name] for _, values in self.rows]

    def mean(self, name: str) -> float:
        return summarize(self.column(name))[0]

    def summary(self) -> Dict[str, Dict[str, float]]:
        out = {}
        for name in self.columns:
            mean, std = summarize(self.column(name))
            out[name] = {'mean': mean, 'std': std}
        return out

    def __len__(self) -> int:
        return len(self.rows)

    def write_csv(self, path: str) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(('image',) + self.columns)
            for image, values in self.rows:
                writer.writerow([image] + [_cell(values[c]) for c in self.columns])
        logger.info(f"Wrote {len(self.rows)} metric rows to {path}")

    def write_json(self, path: str) -> None:
        def encode(value: float):
            return value if math.isfinite(value) else _cell(value)

        payload = {
            'note': REPORT_NOTE,
            'degradation': self.degradation,
            'images': len(self.rows),
            'metrics': {k: {s: encode(v) for s, v in stats.items()} for k, stats in self.summary().items()},
        }
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
        logger.info(f"Wrote metric summary to {path}")


def read_report_csv(path: str) -> MetricReport:
    report = MetricReport()
    with open(path, 'r', newline='', encoding='utf-8') as handle:
        for row in csv.DictReader(handle):
            image = row.pop('image')
            report.rows.append((image, {k: float(v) for k, v in row.items()}))
    return report
