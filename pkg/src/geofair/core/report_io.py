"""Text and SVG renderings of reports and training histories.

CSV floats use shortest round-trip formatting so numbers can be recomputed
from the files exactly. All writers are deterministic.
"""

from __future__ import annotations

import io
import json
from collections.abc import Sequence
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from numpy.typing import ArrayLike  # noqa: E402

from .adaptation import AdversarialStep  # noqa: E402
from .evaluation import FairnessReport  # noqa: E402
from .models import Sample  # noqa: E402
from .training import EpochRecord  # noqa: E402

CURVE_COLUMNS = ["bin_lower", "bin_upper", "n", "accuracy", "moving_avg"]
HITS_COLUMNS = ["id", "label", "income", "continent", "hit"]
TRAINING_LOG_COLUMNS = ["epoch", "steps", "mean_loss", "train_topk", "val_topk"]
ADVERSARIAL_COLUMNS = ["step", "disc_loss", "gen_loss", "disc_acc"]
STEP_LOSS_COLUMNS = ["step", "loss"]


def _num(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int | np.integer):
        return str(int(value))
    return repr(float(value))


def _csv(rows: list[list[str]], columns: list[str]) -> str:
    frame = pd.DataFrame(rows, columns=columns, dtype=object)
    return frame.to_csv(index=False, lineterminator="\n")


def report_json(report: FairnessReport, extra: dict[str, Any] | None = None) -> str:
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2) + "\n"


def curve_csv(report: FairnessReport) -> str:
    rows = [
        [_num(b.bin_lower), _num(b.bin_upper), _num(b.count), _num(b.accuracy), _num(p.smoothed_accuracy)]
        for b, p in zip(report.per_bin, report.moving_avg_curve, strict=True)
    ]
    return _csv(rows, CURVE_COLUMNS)


def hits_csv(samples: Sequence[Sample], hits: ArrayLike) -> str:
    flags = np.asarray(hits, dtype=bool)
    rows = [
        [
            s.sample_id,
            str(s.label),
            _num(s.income),
            s.continent.value if s.continent else "",
            "1" if hit else "0",
        ]
        for s, hit in zip(samples, flags, strict=True)
    ]
    return _csv(rows, HITS_COLUMNS)


def training_log_csv(history: Sequence[EpochRecord]) -> str:
    rows = [
        [_num(r.epoch), _num(r.steps), _num(r.mean_loss), _num(r.train_topk), _num(r.val_topk)]
        for r in history
    ]
    return _csv(rows, TRAINING_LOG_COLUMNS)


def step_loss_csv(losses: Sequence[float]) -> str:
    return _csv([[str(i), _num(v)] for i, v in enumerate(losses, start=1)], STEP_LOSS_COLUMNS)


def adversarial_history_csv(history: Sequence[AdversarialStep]) -> str:
    rows = [
        [_num(h.step), _num(h.disc_loss), _num(h.gen_loss), _num(h.disc_acc)] for h in history
    ]
    return _csv(rows, ADVERSARIAL_COLUMNS)


def curve_svg(report: FairnessReport, title: str = "Accuracy by monthly income") -> str:
    """Line chart of raw and smoothed accuracy per income bucket."""
    with plt.rc_context({"svg.hashsalt": "geofair", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4))
        try:
            lowers = [b.bin_lower for b in report.per_bin]
            ax.plot(lowers, [b.accuracy for b in report.per_bin], ".", alpha=0.4, label="per bucket")
            ax.plot(
                [p.bin_lower for p in report.moving_avg_curve],
                [p.smoothed_accuracy for p in report.moving_avg_curve],
                "-",
                label=f"moving average ({report.window} buckets)",
            )
            ax.set_xlabel("monthly income (USD)")
            ax.set_ylabel(f"top-{report.k} accuracy")
            ax.set_ylim(0.0, 1.02)
            ax.set_title(title)
            ax.legend(loc="lower right")
            buffer = io.StringIO()
            fig.savefig(buffer, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return buffer.getvalue()
