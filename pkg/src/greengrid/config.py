"""EnvConfig: the laws of physics for one world."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .cells import CellType, N_CORE_STATE


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    """Costs, rates and limits shared by every cell in an environment.

    Nutrient pairs are (earth, air). Dissipation is per agent specialization,
    ordered (unspecialized, root, leaf, flower).
    """

    state_size: int = 12
    max_nutrient_cell: float = 10.0
    generator_amount: float = 0.25
    diffusion_rate: float = 0.125
    diffusion_iterations_per_step: int = 1
    absorption_amount: float = 0.25
    dissipation: tuple[float, float, float, float] = (0.01, 0.01, 0.01, 0.02)
    specialize_cost: tuple[float, float] = (0.2, 0.2)
    spawn_cost: tuple[float, float] = (1.0, 1.0)
    reproduce_cost: tuple[float, float] = (2.5, 2.5)
    seed_min_nutrient: float = 0.2
    max_lifetime: int = 10_000
    aging_slope: float = 0.005
    struct_decay_earth: float = 1.0
    struct_decay_agent: float = 5.0
    struct_generation: float = 10.0
    structural_cap: float = 10.0
    struct_iterations_per_step: int = 5
    max_reproduce_per_step: int = 2
    max_programs: int = 64

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.state_size < N_CORE_STATE:
            raise ConfigError(f"state_size must be >= {N_CORE_STATE}, got {self.state_size}")
        if not (0.0 < self.diffusion_rate <= 1.0):
            raise ConfigError(f"diffusion_rate must be in (0, 1], got {self.diffusion_rate}")
        if self.max_reproduce_per_step < 1:
            raise ConfigError("max_reproduce_per_step must be >= 1")
        if self.max_programs < 1:
            raise ConfigError("max_programs must be >= 1")
        if len(self.dissipation) != 4:
            raise ConfigError("dissipation needs one value per agent specialization")
        nonneg = {
            "max_nutrient_cell": self.max_nutrient_cell,
            "generator_amount": self.generator_amount,
            "absorption_amount": self.absorption_amount,
            "seed_min_nutrient": self.seed_min_nutrient,
            "aging_slope": self.aging_slope,
            "struct_decay_earth": self.struct_decay_earth,
            "struct_decay_agent": self.struct_decay_agent,
            "struct_generation": self.struct_generation,
            "structural_cap": self.structural_cap,
            "max_lifetime": self.max_lifetime,
        }
        nonneg.update({f"dissipation[{i}]": v for i, v in enumerate(self.dissipation)})
        for name, pair in (("specialize_cost", self.specialize_cost),
                           ("spawn_cost", self.spawn_cost),
                           ("reproduce_cost", self.reproduce_cost)):
            for ch, v in zip(("earth", "air"), pair):
                nonneg[f"{name}.{ch}"] = v
        for name, v in nonneg.items():
            if v < 0:
                raise ConfigError(f"{name} must be >= 0, got {v}")
        if self.struct_iterations_per_step < 1:
            raise ConfigError("struct_iterations_per_step must be >= 1")
        if self.diffusion_iterations_per_step < 1:
            raise ConfigError("diffusion_iterations_per_step must be >= 1")

    @property
    def n_internal(self) -> int:
        return self.state_size - N_CORE_STATE

    def dissipation_for(self, cell_type: int) -> float:
        return self.dissipation[int(cell_type) - int(CellType.AGENT_UNSPECIALIZED)]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnvConfig":
        raw = json.loads(text)
        for key in ("dissipation", "specialize_cost", "spawn_cost", "reproduce_cost"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)
