from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test; ``reject`` is always ``p_value < alpha``."""

    __test__ = False  # keep pytest from collecting this class

    test_name: str
    statistic: float
    p_value: float
    alpha: float
    n_samples: int
    n_dims: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = float(self.p_value)
        if math.isnan(p):
            raise ValueError("p-value is NaN")
        object.__setattr__(self, "p_value", min(max(p, 0.0), 1.0))
        object.__setattr__(self, "statistic", float(self.statistic))

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reject"] = self.reject
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
