"""
Progress service for per-epoch training summaries.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from config import config

logger = logging.getLogger(__name__)


@dataclass
class EpochSummary:
    epoch: int
    total_epochs: int
    phase: str
    loss: float
    generator_objective: Optional[float] = None
    warm_epochs: int = 0
    mean_weights: Optional[np.ndarray] = None


class ProgressService:
    """Service for calculating and formatting training progress."""

    @staticmethod
    def calculate_epoch_progress(epoch: int, total_epochs: int) -> Dict[str, int]:
        """
        Calculate completed-epoch progress.
        Returns dict with progress information.
        """
        percentage = min(100, round(epoch / total_epochs * 100)) if total_epochs > 0 else 100
        return {
            'epoch': epoch,
            'total_epochs': total_epochs,
            'percentage': percentage,
            'remaining_epochs': max(0, total_epochs - epoch),
        }

    @staticmethod
    def create_progress_bar(epoch: int, total_epochs: int, warm_epochs: int = 0, length: int = None) -> str:
        """
        Bar over the epoch schedule: warm-start epochs done as '▒',
        adversarial epochs done as '█', epochs still to run as '░'.
        """
        if length is None:
            length = config.PROGRESS_BAR_LENGTH
        if total_epochs <= 0:
            return f"[{'█' * length}]"

        def cells(epochs: int) -> int:
            return round(length * min(epochs, total_epochs) / total_epochs)

        done = cells(epoch)
        warm = min(cells(warm_epochs), done)
        return f"[{'▒' * warm}{'█' * (done - warm)}{'░' * (length - done)}]"

    @staticmethod
    def format_epoch_message(summary: EpochSummary) -> str:
        """
        Format one epoch summary line: bar, epoch counter, phase, losses and
        the dominant degradation operator.
        """
        progress = ProgressService.calculate_epoch_progress(summary.epoch, summary.total_epochs)
        progress_bar = ProgressService.create_progress_bar(summary.epoch, summary.total_epochs, summary.warm_epochs)

        message = (
            f"{progress_bar} epoch {summary.epoch}/{summary.total_epochs} ({progress['percentage']}%) "
            f"{summary.phase} loss={summary.loss:.5f}"
        )
        if summary.generator_objective is not None:
            message += f" generator={summary.generator_objective:.5f}"
        if summary.mean_weights is not None and np.size(summary.mean_weights):
            top = int(np.argmax(summary.mean_weights))
            message += f" top_op={top} ({float(summary.mean_weights[top]):.3f})"
        return message
