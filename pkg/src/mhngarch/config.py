"""Run configuration with documented defaults, loadable from JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

from .estimation import EstimationConfig

__all__ = ["RunConfig", "bundled_path"]


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("mhngarch") / "data" / name))


@dataclass
class RunConfig:
    r: float = 0.0002
    gammas: tuple = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    horizon: int = 252
    scenarios: int = 10_000
    seed: int = 42
    moneyness: tuple = tuple(round(0.7 + 0.05 * i, 10) for i in range(13))
    maturities: tuple = (21, 63, 126, 252)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    out_dir: str = "out"
    prices: str | None = None
    params: str | None = None
    index_id: str = "DJI"
    assets: tuple | None = None
    clamp: tuple | None = (-2.0, 2.0)
    wel_paths: int = 2000
    wel_gamma_for_sensitivity: float = 3.0
    sensitivity_parameters: tuple = ("gamma", "rho", "a")
    frontier_points: int = 15
    cvar_levels: tuple = (0.95, 0.99)
    hist_vol_window: int = 20
    external_vol: str | None = None

    def __post_init__(self):
        if isinstance(self.estimation, dict):
            self.estimation = EstimationConfig(**self.estimation)
        for name in ("gammas", "moneyness", "maturities", "cvar_levels", "sensitivity_parameters"):
            setattr(self, name, tuple(getattr(self, name)))
        if self.assets is not None:
            self.assets = tuple(self.assets)
        if self.clamp is not None:
            self.clamp = tuple(self.clamp)
        if self.horizon < 1 or self.scenarios < 100:
            raise ValueError("horizon must be >= 1 and scenarios >= 100")
        if any(g <= 0 for g in self.gammas):
            raise ValueError("gammas must be positive")

    @property
    def prices_path(self) -> Path:
        return Path(self.prices) if self.prices else bundled_path("synthetic_prices.csv")

    @property
    def params_path(self) -> Path:
        return Path(self.params) if self.params else Path(self.out_dir) / "params.json"

    @classmethod
    def from_json(cls, path, **overrides) -> "RunConfig":
        data = json.loads(Path(path).read_text()) if path else {}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)
