"""Central tolerance registry.

All numerical thresholds live in one frozen object so call sites never
hard-code them.  ``EXACTGATE_TOLERANCES`` may point at a JSON file of
overrides; the CLI reads it at startup.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

ENV_VAR = "EXACTGATE_TOLERANCES"


@dataclass(frozen=True)
class Tolerances:
    unitarity: float = 1e-10
    hermiticity: float = 1e-10
    proportionality: float = 1e-10
    eig: float = 1e-10
    log: float = 1e-9
    root: float = 1e-9
    branch: float = 1e-12
    # a state counts as entangled when its second Schmidt coefficient exceeds this
    schmidt: float = 1e-6
    # operator-Schmidt numerical rank cut, relative to the leading coefficient
    rank_rel: float = 1e-8
    recon: float = 1e-9
    span: float = 1e-3
    solve: float = 1e-9
    exact: float = 1e-7
    fd_step: float = 1e-5
    min_delta: float = 1e-6

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Tolerances":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    @classmethod
    def from_env(cls) -> "Tolerances":
        path = os.environ.get(ENV_VAR)
        return cls.load(path) if path else cls()


DEFAULT = Tolerances()
