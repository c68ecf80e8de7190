"""Latency distributions for the remote emulator.

Spec strings: ``fixed:500``, ``uniform:10,50``, ``lognormal:5.5,0.6``
(mean and sigma of the log of the delay in ms), or ``0``/``none``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Delay:
    kind: str = "fixed"
    a: float = 0.0
    b: float = 0.0

    @classmethod
    def parse(cls, text: str | float | int | None) -> Delay:
        if text is None:
            return cls()
        if isinstance(text, (int, float)):
            return cls("fixed", float(text))
        text = text.strip().lower()
        if text in ("", "0", "none", "zero"):
            return cls()
        kind, _, args = text.partition(":")
        try:
            vals = [float(x) for x in args.split(",")] if args else []
        except ValueError:
            raise ValueError(f"bad latency spec {text!r}") from None
        if kind == "fixed" and len(vals) == 1 and vals[0] >= 0:
            return cls("fixed", vals[0])
        if kind == "uniform" and len(vals) == 2 and 0 <= vals[0] <= vals[1]:
            return cls("uniform", vals[0], vals[1])
        if kind == "lognormal" and len(vals) == 2 and vals[1] >= 0:
            return cls("lognormal", vals[0], vals[1])
        raise ValueError(f"bad latency spec {text!r}; expected fixed:MS, uniform:A,B or lognormal:MU,SIGMA")

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "uniform":
            return float(rng.uniform(self.a, self.b))
        if self.kind == "lognormal":
            return float(rng.lognormal(self.a, self.b))
        return self.a

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.a:g}"
        return f"{self.kind}:{self.a:g},{self.b:g}"


@dataclass(frozen=True)
class LatencyProfile:
    queue_delay_ms: Delay = Delay()
    network_delay_ms: Delay = Delay()
    deadline_ms: float | None = None

    def to_dict(self) -> dict:
        return {"queue_delay_ms": str(self.queue_delay_ms),
                "network_delay_ms": str(self.network_delay_ms),
                "deadline_ms": self.deadline_ms}

    @classmethod
    def from_dict(cls, d: dict) -> LatencyProfile:
        return cls(Delay.parse(d.get("queue_delay_ms")), Delay.parse(d.get("network_delay_ms")),
                   d.get("deadline_ms"))
