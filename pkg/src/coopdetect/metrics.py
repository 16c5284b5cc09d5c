"""Thresholding detector and activity error rate accounting.

A device counts as active when the estimate held by its assigned AP
exceeds ``iota * noise_power``.  The assigned AP is the geometrically
nearest one by default (ties to the lower index); ``b0_mode="max_gamma"``
instead assigns the AP holding the largest estimate, for geometry-free
operation.  Estimate matrices with a single row (pooled ablations) assign
every device to that row.

The error rate is reported per class: missed detections over the number of
active devices, false alarms over the number of inactive ones, and their
sum (the combined activity error rate).  A pooled variant (all errors over
N) is carried alongside so curves can be read under either convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClasses
from .scenario import Scenario


@dataclass
class DetectionReport:
    """Decisions and error decomposition for one run."""

    decisions: np.ndarray           # (N,) 0/1
    missed_detection_prob: float
    false_alarm_prob: float
    aer: float
    aer_pooled: float
    iota: float
    threshold: float                # iota * noise_power actually applied
    assigned_ap: np.ndarray         # (N,) AP index the decision was read from

    def to_dict(self) -> dict:
        return {
            "missed_detection_prob": self.missed_detection_prob,
            "false_alarm_prob": self.false_alarm_prob,
            "aer": self.aer,
            "aer_pooled": self.aer_pooled,
            "iota": self.iota,
            "threshold": self.threshold,
        }


def assign_aps(gamma_est: np.ndarray, scenario: Scenario, b0_mode: str = "nearest") -> np.ndarray:
    """Pick the AP whose estimate decides each device."""
    gamma_est = np.atleast_2d(gamma_est)
    if gamma_est.shape[0] == 1:
        return np.zeros(scenario.num_devices, dtype=int)
    if b0_mode == "nearest":
        return scenario.nearest_ap()
    if b0_mode == "max_gamma":
        return np.argmax(gamma_est, axis=0)
    raise ValueError(f"unknown b0_mode {b0_mode!r}")


def detect(gamma_est: np.ndarray, scenario: Scenario, noise_power: float,
           iota: float, b0_mode: str = "nearest") -> tuple[np.ndarray, np.ndarray]:
    """Elementwise thresholding at each device's assigned AP.

    Returns (decisions, assigned_ap); device n is declared active iff
    ``gamma_est[assigned_ap[n], n] > iota * noise_power``.
    """
    gamma_est = np.atleast_2d(gamma_est)
    assigned = assign_aps(gamma_est, scenario, b0_mode)
    read = gamma_est[assigned, np.arange(gamma_est.shape[1])]
    decisions = (read > iota * noise_power).astype(np.int8)
    return decisions, assigned


def aer(decisions: np.ndarray, truth: np.ndarray) -> tuple[float, float, float]:
    """Per-class error rates: (missed, false_alarm, their sum).

    Raises DegenerateClasses when every device is active or none is.
    """
    decisions = np.asarray(decisions)
    truth = np.asarray(truth)
    if decisions.shape != truth.shape:
        raise DegenerateClasses(f"shape mismatch {decisions.shape} vs {truth.shape}")
    k = int(np.sum(truth == 1))
    n = truth.size
    if k == 0 or k == n:
        raise DegenerateClasses(f"need both classes present, got {k} active of {n}")
    missed = float(np.sum((truth == 1) & (decisions == 0)) / k)
    false_alarm = float(np.sum((truth == 0) & (decisions == 1)) / (n - k))
    return missed, false_alarm, missed + false_alarm


def evaluate(gamma_est: np.ndarray, scenario: Scenario, iota: float,
             b0_mode: str = "nearest", noise_power: float | None = None) -> DetectionReport:
    """Threshold, score against ground truth, and assemble a report."""
    sigma2 = scenario.noise_power if noise_power is None else noise_power
    decisions, assigned = detect(gamma_est, scenario, sigma2, iota, b0_mode)
    missed, false_alarm, combined = aer(decisions, scenario.activity)
    errors = int(np.sum(decisions != scenario.activity))
    return DetectionReport(
        decisions=decisions,
        missed_detection_prob=missed,
        false_alarm_prob=false_alarm,
        aer=combined,
        aer_pooled=errors / scenario.num_devices,
        iota=iota,
        threshold=iota * sigma2,
        assigned_ap=assigned,
    )


DEFAULT_IOTA_GRID = tuple(np.logspace(-1.0, 3.0, 31))


def calibrate_threshold(validation_runs, grid=None, b0_mode: str = "nearest") -> float:
    """Grid-search the threshold multiplier minimizing mean combined AER.

    ``validation_runs`` is an iterable of (gamma_est, scenario) pairs with
    ground truth.  Ties break deterministically to the smallest multiplier.
    """
    grid = np.asarray(DEFAULT_IOTA_GRID if grid is None else grid, dtype=float)
    runs = list(validation_runs)
    if not runs:
        raise DegenerateClasses("calibration needs at least one validation run")
    means = np.empty(grid.size)
    for i, iota in enumerate(grid):
        scores = [evaluate(g, s, iota, b0_mode).aer for g, s in runs]
        means[i] = float(np.mean(scores))
    return float(grid[int(np.argmin(means))])
