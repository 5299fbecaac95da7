from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

__all__ = ["FitResult"]


@dataclass
class FitResult:
    """Outcome of one estimator run.

    ``wall_time`` is in seconds. ``info`` carries estimator-specific
    metadata (selected lambda grid, penalty scaling, fallback notes).
    """

    theta: np.ndarray
    objective: float
    grad_norm: float
    iters: int
    converged: bool
    estimator: str
    jitter_used: float = 0.0
    wall_time: float = 0.0
    lambda_: Optional[float] = None
    info: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["theta"] = [float(v) for v in self.theta]
        d["lambda"] = d.pop("lambda_")
        return d

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["lambda_"] = d.pop("lambda", None)
        d["theta"] = np.array(d["theta"], dtype=float)
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))
