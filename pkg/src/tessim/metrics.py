"""Model-comparison metrics: SOC error, freeze time, run statistics."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

FG_FREEZE_THRESHOLD = 0.999


@dataclass
class DeltaSoc:
    t: np.ndarray
    delta: np.ndarray
    max: float
    mean: float
    t_max: float


def delta_soc(t_a, soc_a, t_b, soc_b) -> DeltaSoc:
    """Pointwise |SOC_a - SOC_b| on the union of both time grids.

    Each series is linearly interpolated onto the union. If the horizons
    differ only their intersection is compared and a warning is issued.
    """
    t_a, soc_a = np.asarray(t_a, float), np.asarray(soc_a, float)
    t_b, soc_b = np.asarray(t_b, float), np.asarray(soc_b, float)
    if t_a.size == 0 or t_b.size == 0:
        raise ValueError("delta_soc needs non-empty series")
    lo, hi = max(t_a[0], t_b[0]), min(t_a[-1], t_b[-1])
    if hi < lo:
        raise ValueError("series do not overlap in time")
    if (t_a[0], t_a[-1]) != (t_b[0], t_b[-1]):
        warnings.warn(f"SOC series cover different horizons; comparing over [{lo:g}, {hi:g}] s", stacklevel=2)
    grid = np.union1d(t_a, t_b)
    grid = grid[(grid >= lo) & (grid <= hi)]
    d = np.abs(np.interp(grid, t_a, soc_a) - np.interp(grid, t_b, soc_b))
    k = int(np.argmax(d))
    return DeltaSoc(grid, d, float(d[k]), float(d.mean()), float(grid[k]))


def freeze_time(t, soc, threshold: float = FG_FREEZE_THRESHOLD) -> Optional[float]:
    """First time the SOC reaches ``threshold``, linearly interpolated.

    Returns ``None`` when the series never gets there.
    """
    t, soc = np.asarray(t, float), np.asarray(soc, float)
    hit = np.flatnonzero(soc >= threshold)
    if hit.size == 0:
        return None
    k = int(hit[0])
    if k == 0:
        return float(t[0])
    s0, s1 = soc[k - 1], soc[k]
    return float(t[k - 1] + (threshold - s0) / (s1 - s0) * (t[k] - t[k - 1]))


def run_stats_summary(runs: Sequence[dict]) -> dict:
    """Mean ``t_comp_s`` and ``n_steps`` over repeated runs."""
    if not runs:
        raise ValueError("need at least one run")
    return {
        "t_comp_s": float(np.mean([r["t_comp_s"] for r in runs])),
        "n_steps": float(np.mean([r["n_steps"] for r in runs])),
        "n_runs": len(runs),
    }


@dataclass
class ModelSummary:
    t_freeze_s: Optional[float]
    t_comp_s: float
    n_steps: int
    energy_residual_kj: float
    energy_throughput_kj: float

    @property
    def energy_residual_pct(self) -> float:
        if self.energy_throughput_kj == 0:
            return 0.0
        return 100.0 * self.energy_residual_kj / self.energy_throughput_kj


@dataclass
class ComparisonReport:
    scenario: str
    delta: DeltaSoc
    models: Dict[str, ModelSummary]
    t_max_mode: Optional[int] = None  # MB mode at the time of max error
    t_max_entry: Optional[str] = None  # transition that opened that mode, e.g. "2->4"
    notes: List[str] = field(default_factory=list)

    @property
    def max_delta_soc(self) -> float:
        return self.delta.max

    @property
    def mean_delta_soc(self) -> float:
        return self.delta.mean

    def as_dict(self) -> dict:
        models = {}
        for k, m in self.models.items():
            d = asdict(m)
            d["energy_residual_pct"] = m.energy_residual_pct
            models[k] = d
        return {
            "scenario": self.scenario,
            "max_delta_soc": self.delta.max,
            "mean_delta_soc": self.delta.mean,
            "t_max_delta_soc_s": self.delta.t_max,
            "mode_at_max": self.t_max_mode,
            "mode_entry_at_max": self.t_max_entry,
            "models": models,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [
            f"scenario            {self.scenario}",
            f"max delta SOC       {self.delta.max:.4f}  at t = {self.delta.t_max:.1f} s"
            + (f"  (MB mode {self.t_max_mode}, entered via {self.t_max_entry})" if self.t_max_mode else ""),
            f"mean delta SOC      {self.delta.mean:.4f}",
            "",
            f"{'model':<8}{'t_freeze [s]':>14}{'t_comp [s]':>12}{'n_steps':>10}{'E resid [kJ]':>14}{'E resid [%]':>13}",
        ]
        for k, m in self.models.items():
            tf = "-" if m.t_freeze_s is None else f"{m.t_freeze_s:.1f}"
            lines.append(f"{k:<8}{tf:>14}{m.t_comp_s:>12.3f}{m.n_steps:>10d}"
                         f"{m.energy_residual_kj:>14.4f}{m.energy_residual_pct:>13.4f}")
        lines.extend(self.notes)
        return "\n".join(lines) + "\n"
