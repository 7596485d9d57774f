"""Speed estimate record shared by every measurement method."""

from __future__ import annotations

from dataclasses import dataclass, field

METHODS = ("FrontSlope", "LevelSet", "Recursion", "SemiWave")


@dataclass
class SpeedEstimate:
    """A speed in distance per unit time with how it was obtained.

    residual is the RMS deviation of the fit (FrontSlope, LevelSet), the
    final bracket width (Recursion, SemiWave) or 0 when not applicable.
    """

    value: float
    method: str
    fit_window: tuple[float, float] = (0.0, 0.0)
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "fit_window": list(self.fit_window),
            "residual": self.residual,
            "meta": self.meta,
        }
