"""Disturbance signals u(t) and the scenario families used to test certificates against simulation.

Every signal is clamped to |u_i(t)| <= bus_pattern_i, so a family built at
magnitude mu * c never exceeds the certified L-infinity bound.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

STEP = "step"
RAMP = "ramp-limited-step"
SINUSOID = "sinusoid"
NOISE = "filtered-noise"
SAMPLES = "custom-samples"
KINDS = (STEP, RAMP, SINUSOID, NOISE, SAMPLES)


@dataclass(frozen=True)
class Disturbance:
    kind: str
    bus_pattern: np.ndarray  # pu, per-input magnitude bound
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown disturbance kind {self.kind!r}, expected one of {KINDS}")
        pattern = np.asarray(self.bus_pattern, dtype=float)
        if np.any(pattern < 0) or not np.all(np.isfinite(pattern)):
            raise ValueError("bus_pattern must be finite and nonnegative")
        object.__setattr__(self, "bus_pattern", pattern)
        if self.kind == NOISE and "_samples" not in self.params:
            object.__setattr__(self, "params", {**self.params, "_samples": self._noise_samples()})

    @property
    def size(self) -> int:
        return self.bus_pattern.size

    def _signs(self) -> np.ndarray:
        signs = np.asarray(self.params.get("signs", 1.0), dtype=float)
        return np.broadcast_to(np.sign(signs), (self.size,))

    def _noise_samples(self) -> np.ndarray:
        """Low-pass filtered uniform samples on [-1, 1], normalized to span the box."""
        dt = float(self.params.get("dt", 0.05))
        horizon = float(self.params.get("horizon", 60.0))
        bandwidth = float(self.params.get("bandwidth", 1.0))  # rad/s
        rng = np.random.default_rng(int(self.params.get("seed", 0)))
        count = int(math.ceil(horizon / dt)) + 1
        white = rng.uniform(-1.0, 1.0, size=(count, self.size))
        alpha = 1.0 - math.exp(-bandwidth * dt)
        filtered = lfilter([0.0, alpha], [1.0, alpha - 1.0], white, axis=0)
        peak = np.max(np.abs(filtered), axis=0)
        return filtered / np.where(peak > 0, peak, 1.0)

    def __call__(self, t: float) -> np.ndarray:
        p = self.params
        if self.kind == STEP:
            raw = self.bus_pattern * self._signs() * (t >= p.get("t0", 0.0))
        elif self.kind == RAMP:
            rise = float(p.get("rise", 1.0))
            ramp = np.clip((t - p.get("t0", 0.0)) / rise, 0.0, 1.0) if rise > 0 else float(t >= p.get("t0", 0.0))
            raw = self.bus_pattern * self._signs() * ramp
        elif self.kind == SINUSOID:
            phase = np.broadcast_to(np.asarray(p.get("phase", 0.0), dtype=float), (self.size,))
            raw = self.bus_pattern * np.sin(p.get("omega", 1.0) * t + phase)
        elif self.kind == NOISE:
            samples = p["_samples"]
            dt = float(p.get("dt", 0.05))
            k = min(int(t // dt), samples.shape[0] - 2)
            frac = min(max(t / dt - k, 0.0), 1.0)
            raw = self.bus_pattern * ((1.0 - frac) * samples[k] + frac * samples[k + 1])
        else:
            times = np.asarray(p["times"], dtype=float)
            values = np.asarray(p["values"], dtype=float).reshape(times.size, self.size)
            raw = np.array([np.interp(t, times, values[:, i]) for i in range(self.size)])
        return np.clip(raw, -self.bus_pattern, self.bus_pattern)

    def sample(self, t: Sequence[float]) -> np.ndarray:
        return np.array([self(ti) for ti in t]).reshape(len(t), self.size)

    def breakpoints(self, horizon: float) -> list[float]:
        """Times in (0, horizon) where u(t) is not smooth."""
        p = self.params
        if self.kind == STEP:
            points = [p.get("t0", 0.0)]
        elif self.kind == RAMP:
            points = [p.get("t0", 0.0), p.get("t0", 0.0) + p.get("rise", 1.0)]
        elif self.kind == SAMPLES:
            points = list(np.asarray(p["times"], dtype=float))
        else:
            points = []
        return sorted({float(b) for b in points if 0 < b < horizon})

    def scaled(self, factor: float) -> 'Disturbance':
        return replace(self, bus_pattern=self.bus_pattern * factor)

    def with_pattern(self, pattern: np.ndarray) -> 'Disturbance':
        return replace(self, bus_pattern=np.asarray(pattern, dtype=float))

    def to_dict(self) -> dict:
        params = {k: v for k, v in self.params.items() if not k.startswith("_")}
        return {"kind": self.kind, "bus_pattern": self.bus_pattern, "params": params}

    @classmethod
    def from_dict(cls, data: dict) -> 'Disturbance':
        if not isinstance(data, dict) or "kind" not in data or "bus_pattern" not in data:
            raise ValueError("scenario requires 'kind' and 'bus_pattern'")
        params = {k: v for k, v in dict(data.get("params", {})).items() if not k.startswith("_")}
        return cls(kind=data["kind"], bus_pattern=np.asarray(data["bus_pattern"], dtype=float), params=params)


def tripping_scenario(pattern: np.ndarray, t0: float = 1.0, sign: float = -1.0) -> Disturbance:
    """Simultaneous loss of injection at every bus with a nonzero pattern entry."""
    return Disturbance(STEP, pattern, {"t0": t0, "signs": sign})


def wind_scenario(pattern: np.ndarray, seed: int = 0, bandwidth: float = 0.5, horizon: float = 60.0) -> Disturbance:
    """Stochastic injection variation at the wind buses."""
    return Disturbance(NOISE, pattern, {"seed": seed, "bandwidth": bandwidth, "horizon": horizon})


def step_family(pattern: np.ndarray, t0: float = 0.0) -> list[Disturbance]:
    """Positive and negative steps along the pattern."""
    return [Disturbance(STEP, pattern, {"t0": t0, "signs": 1.0}), Disturbance(STEP, pattern, {"t0": t0, "signs": -1.0})]


def random_family(pattern: np.ndarray, count: int, seed: int = 0, horizon: float = 10.0, kinds: Optional[Sequence[str]] = None) -> list[Disturbance]:
    """count randomized disturbances of mixed kinds, each with |u| <= pattern."""
    rng = np.random.default_rng(seed)
    pattern = np.asarray(pattern, dtype=float)
    kinds = list(kinds or KINDS)
    family = []
    for _ in range(count):
        kind = kinds[int(rng.integers(len(kinds)))]
        signs = rng.choice([-1.0, 1.0], size=pattern.size)
        if kind == STEP:
            params: dict[str, Any] = {"t0": float(rng.uniform(0.0, 0.3 * horizon)), "signs": signs}
        elif kind == RAMP:
            params = {"t0": float(rng.uniform(0.0, 0.3 * horizon)), "rise": float(rng.uniform(0.05, 2.0)), "signs": signs}
        elif kind == SINUSOID:
            params = {"omega": float(rng.uniform(0.2, 10.0)), "phase": rng.uniform(0.0, 2 * math.pi, size=pattern.size)}
        elif kind == NOISE:
            params = {"seed": int(rng.integers(2 ** 31)), "bandwidth": float(rng.uniform(0.2, 5.0)), "horizon": horizon + 1.0}
        else:
            times = np.sort(rng.uniform(0.0, horizon, size=8))
            params = {"times": times, "values": rng.uniform(-1.5, 1.5, size=(8, pattern.size)) * pattern}
        family.append(Disturbance(kind, pattern, params))
    return family
