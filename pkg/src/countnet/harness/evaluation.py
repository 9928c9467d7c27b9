"""Forecast accuracy: MSPE/MAPE over nodes and forecast horizons."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match truth shape {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty forecast")
    return pred, truth


def mspe(pred, truth) -> float:
    """Mean squared prediction error over all N x h entries."""
    pred, truth = _pair(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def mape(pred, truth) -> float:
    """Mean absolute prediction error over all N x h entries."""
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def prefix_errors(pred, truth):
    """MSPE and MAPE of the first ``h`` steps, for every ``h = 1..H``."""
    pred, truth = _pair(pred, truth)
    n = pred.shape[0]
    sq = np.cumsum(np.sum((pred - truth) ** 2, axis=0))
    ab = np.cumsum(np.sum(np.abs(pred - truth), axis=0))
    steps = np.arange(1, pred.shape[1] + 1) * n
    return sq / steps, ab / steps


@dataclass
class EvalReport:
    """Per-model, per-horizon accuracy of mean forecasts against a test window."""

    horizons: list
    mspe: dict = field(default_factory=dict)
    mape: dict = field(default_factory=dict)
    forecasts: dict = field(default_factory=dict)

    def add(self, model: str, forecast, truth) -> None:
        forecast = np.asarray(forecast, dtype=float)
        truth = np.asarray(truth, dtype=float)
        H = max(self.horizons)
        if forecast.shape[1] < H or truth.shape[1] < H:
            raise ValueError(f"need {H} forecast steps for model {model}")
        sq, ab = prefix_errors(forecast[:, :H], truth[:, :H])
        self.mspe[model] = {h: float(sq[h - 1]) for h in self.horizons}
        self.mape[model] = {h: float(ab[h - 1]) for h in self.horizons}
        self.forecasts[model] = forecast[:, :H]

    def rows(self, process: str = ""):
        """``(model, process, horizon, mspe, mape)`` rows."""
        out = []
        for model in self.mspe:
            for h in self.horizons:
                out.append((model, process, h, self.mspe[model][h], self.mape[model][h]))
        return out

    def plot_rows(self):
        """``(horizon, model, mape)`` rows, one curve per model."""
        return [(h, m, self.mape[m][h]) for m in self.mape for h in self.horizons]
