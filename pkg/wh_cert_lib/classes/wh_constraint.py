# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Tuple

from ..exceptions import ConstraintError, LossWordError


@dataclass(frozen=True)
class WhConstraint:
    """
    Weakly-hard constraint K(r, s): every window of s consecutive control attempts holds at least r successes.
    """

    r: int  # required successes
    s: int  # window length

    def __post_init__(self):
        if not (isinstance(self.r, int) and isinstance(self.s, int)):
            raise ConstraintError(f"r and s must be integers, got r={self.r!r}, s={self.s!r}")
        if not 1 <= self.r <= self.s:
            raise ConstraintError(f"K({self.r},{self.s}) violates 1 <= r <= s")

    @property
    def max_losses(self) -> int:
        return self.s - self.r

    @property
    def alphabet(self) -> range:
        """Labels of the WH graph, label l standing for the block 1 0^l."""
        return range(self.max_losses + 1)

    def to_dict(self) -> dict:
        return {"r": self.r, "s": self.s}

    @classmethod
    def from_dict(cls, d: dict) -> WhConstraint:
        return cls(int(d["r"]), int(d["s"]))

    def __str__(self) -> str:
        return f"K({self.r},{self.s})"


@dataclass(frozen=True)
class LossWord:
    """Finite loss sequence, 1 = successful delivery of the control input, 0 = loss."""

    bits: Tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise LossWordError(f"loss word may only contain 0 and 1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, text: str) -> LossWord:
        text = text.strip().replace(" ", "")
        if not text or set(text) - {"0", "1"}:
            raise LossWordError(f"invalid loss word string {text!r}")
        return cls(tuple(int(ch) for ch in text))

    @property
    def starts_with_success(self) -> bool:
        return len(self.bits) > 0 and self.bits[0] == 1

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return LossWord(self.bits[item])
        return self.bits[item]

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class LabelWord:
    """Sequence of WH graph labels; label l encodes the block 1 0^l."""

    labels: Tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(label) for label in self.labels)
        if any(label < 0 for label in labels):
            raise LossWordError(f"labels must be non-negative, got {self.labels!r}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of(cls, labels: Iterable[int]) -> LabelWord:
        return cls(tuple(labels))

    def expand(self) -> LossWord:
        bits = []
        for label in self.labels:
            bits.append(1)
            bits.extend([0] * label)
        return LossWord(tuple(bits))

    def to_json(self) -> str:
        return json.dumps(list(self.labels))

    @classmethod
    def from_json(cls, text: str) -> LabelWord:
        return cls(tuple(json.loads(text)))

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)
