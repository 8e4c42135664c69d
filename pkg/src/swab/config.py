"""Run configuration shared by the CLI, the benchmark harness and reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .core import ValidationError

BRANCHES = ("swab", "swab-m", "swab-c", "avg-rank", "inb", "modelgpt")
OT_METHODS = ("exact", "sinkhorn")
GAP_LEVELS = ("class_mean", "dataset_mean")


@dataclass(frozen=True)
class RunConfig:
    """All pipeline knobs; serialized verbatim into every report."""

    alpha: float = 0.5
    lambda_filter: float = 0.5
    mass_fraction: float = 0.9
    exponentiate_cost: bool = True
    noise_sigma: float = 0.1
    seeds: tuple[int, ...] = tuple(range(1, 11))
    ot_method: str = "exact"
    branch: str = "swab"
    ridge_lambda: float = 1e-3
    gap_level: str = "class_mean"
    partial_for_capability: bool = True
    partial_for_modality: bool = False

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.lambda_filter <= 1.0:
            raise ValidationError(f"lambda_filter must be in [0, 1], got {self.lambda_filter}")
        if not 0.0 < self.mass_fraction <= 1.0:
            raise ValidationError(f"mass_fraction must be in (0, 1], got {self.mass_fraction}")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be nonnegative")
        if not self.seeds:
            raise ValidationError("need at least one seed")
        if self.ot_method not in OT_METHODS:
            raise ValidationError(f"ot_method must be one of {OT_METHODS}")
        if self.branch not in BRANCHES:
            raise ValidationError(f"branch must be one of {BRANCHES}")
        if self.ridge_lambda < 0:
            raise ValidationError("ridge_lambda must be nonnegative")
        if self.gap_level not in GAP_LEVELS:
            raise ValidationError(f"gap_level must be one of {GAP_LEVELS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "seeds" in d:
            d = dict(d)
            d["seeds"] = tuple(d["seeds"])
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def parse_seeds(text: str) -> tuple[int, ...]:
    """"1-10" or "1,2,5" or "3" -> tuple of ints."""
    text = text.strip()
    if "-" in text and "," not in text:
        lo, hi = text.split("-", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ValidationError(f"bad seed range {text!r}")
        return tuple(range(lo, hi + 1))
    return tuple(int(part) for part in text.split(",") if part.strip())
