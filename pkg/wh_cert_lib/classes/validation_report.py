# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List

import pandas as pd


@dataclass
class ConditionCheck:
    """
    Sampled check of one barrier condition.
    For strict conditions `worst` is the smallest barrier value met (must stay > 0);
    otherwise it is the largest violation of the inequality (must stay <= tol).
    """

    name: str
    kind: str
    samples: int
    worst: float
    strict: bool = False
    satisfied: bool = True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "samples": self.samples,
            "worst": self.worst,
            "strict": self.strict,
            "satisfied": self.satisfied,
        }


@dataclass
class ValidationReport:
    variant: str
    n_samples: int
    tol: float
    checks: List[ConditionCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.satisfied for c in self.checks)

    @property
    def max_violation(self) -> float:
        """Largest violation over the non-strict conditions."""
        return max([c.worst for c in self.checks if not c.strict], default=0.0)

    def failed(self) -> List[ConditionCheck]:
        return [c for c in self.checks if not c.satisfied]

    def summary(self) -> str:
        if self.passed:
            return f"{len(self.checks)} conditions hold on {self.n_samples} samples (max violation {self.max_violation:.3e})"
        worst = ", ".join(f"{c.name} ({c.worst:.3e})" for c in self.failed()[:5])
        return f"{len(self.failed())} of {len(self.checks)} conditions violated: {worst}"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.to_dict() for c in self.checks], columns=list(ConditionCheck.__dataclass_fields__))

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "n_samples": self.n_samples,
            "tol": self.tol,
            "passed": self.passed,
            "max_violation": self.max_violation,
            "checks": [c.to_dict() for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)
