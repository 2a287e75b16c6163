"""Noise configuration for the stochastic semantics.

A ``NoiseConfig`` says how dispense fractions, equilibration times, rate
constants and observations are perturbed. It is read from JSON files and
validated with pydantic; a handful of named presets cover the common regimes.
"""

import json
import math
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.utils.errors import ConfigurationError

# Default truncation interval for dispense fractions; both ends excluded.
DEFAULT_BOUNDS: Tuple[float, float] = (1e-6, 1.0 - 1e-6)

# Rejection sampling gives up after this many draws.
MAX_ATTEMPTS = 10_000

# ISO 8655 maximum systematic standard deviation per nominal volume (L -> L).
ISO_8655_SIGMA: Dict[float, float] = {1e-3: 0.3e-6}


class DispenseNoise(BaseModel):
    """Truncated Gaussian perturbation of dispense fractions.

    ``sigma_abs_volume`` (liters) takes precedence over ``sigma_rel`` and
    yields the relative deviation ``sigma_abs_volume / V`` for a sample of
    volume ``V``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["none", "truncated_gaussian"] = "none"
    sigma_rel: float = Field(default=0.0, ge=0.0)
    sigma_abs_volume: Optional[float] = Field(default=None, ge=0.0)
    bounds: Tuple[float, float] = DEFAULT_BOUNDS

    @field_validator("bounds")
    @classmethod
    def _check_bounds(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = value
        if not 0.0 < lo < hi < 1.0:
            raise ValueError(f"bounds must satisfy 0 < lo < hi < 1, got {value}")
        return value

    def sigma(self, volume: float) -> float:
        """Standard deviation of the fraction for a sample of ``volume`` liters."""
        if self.kind == "none":
            return 0.0
        if self.sigma_abs_volume is not None:
            return self.sigma_abs_volume / volume if volume > 0 else 0.0
        return self.sigma_rel

    @property
    def degenerate(self) -> bool:
        return self.kind == "none" or (
            self.sigma_abs_volume in (None, 0.0) and self.sigma_rel == 0.0
        )


class EquilibrateNoise(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["deterministic", "exponential"] = "deterministic"


class RateNoise(BaseModel):
    """Per-run perturbation of rate constants.

    ``sub_poisson`` draws each constant from a normal law with mean k and
    variance k / 2, with k read in the units the network was written in.
    ``gaussian`` uses a relative standard deviation ``sigma_rel``, either one
    value for all reactions or one per reaction.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["none", "sub_poisson", "gaussian"] = "none"
    sigma_rel: Union[float, List[float]] = 0.0

    @field_validator("sigma_rel")
    @classmethod
    def _check_sigma(cls, value: Union[float, List[float]]) -> Union[float, List[float]]:
        values = value if isinstance(value, list) else [value]
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise ValueError("sigma_rel entries must be finite and >= 0")
        return value

    def sigmas(
        self, rates: List[float], factors: Optional[List[float]] = None
    ) -> List[float]:
        """Absolute standard deviation for each internal rate constant.

        Args:
            rates: Rate constants in mol/L and seconds
            factors: Internal rate per declared rate, one per reaction;
                defaults to 1 (the network was written in M and s)
        """
        if self.kind == "none":
            return [0.0] * len(rates)
        if self.kind == "sub_poisson":
            factors = factors if factors is not None else [1.0] * len(rates)
            return [math.sqrt(k / f / 2.0) * f for k, f in zip(rates, factors)]
        relative = self.sigma_rel if isinstance(self.sigma_rel, list) else [self.sigma_rel] * len(rates)
        if len(relative) != len(rates):
            raise ConfigurationError(
                f"rate noise lists {len(relative)} sigmas for {len(rates)} reactions"
            )
        return [s * k for s, k in zip(relative, rates)]


class ObserveNoise(BaseModel):
    """Additive Gaussian noise on observed concentrations, clamped at zero."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["none", "additive_gaussian"] = "none"
    sigma: float = Field(default=0.0, ge=0.0, description="mol/L")


class NoiseConfig(BaseModel):
    """All noise sources of a stochastic run.

    The default instance perturbs nothing, so the stochastic semantics with it
    reproduces the deterministic one exactly.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    dispense: DispenseNoise = Field(default_factory=DispenseNoise)
    equilibrate: EquilibrateNoise = Field(default_factory=EquilibrateNoise)
    rates: RateNoise = Field(default_factory=RateNoise)
    observe_noise: ObserveNoise = Field(default_factory=ObserveNoise)

    @property
    def is_degenerate(self) -> bool:
        """True when every source is switched off."""
        return (
            self.dispense.degenerate
            and self.equilibrate.kind == "deterministic"
            and self.rates.kind == "none"
            and (self.observe_noise.kind == "none" or self.observe_noise.sigma == 0.0)
        )

    @classmethod
    def degenerate(cls) -> "NoiseConfig":
        return cls()

    @classmethod
    def preset(cls, name: str) -> "NoiseConfig":
        """A named preset.

        Raises:
            ConfigurationError: If ``name`` is not a preset
        """
        try:
            return PRESETS[name]
        except KeyError:
            raise ConfigurationError(
                f"unknown noise preset {name!r}; choose one of {', '.join(sorted(PRESETS))}"
            ) from None

    @classmethod
    def load(cls, source: Union[str, Path]) -> "NoiseConfig":
        """Load a config from a JSON file, or a preset given by name.

        Raises:
            ConfigurationError: If the file cannot be read or does not validate
        """
        source = str(source)
        if source in PRESETS:
            return PRESETS[source]
        path = Path(source)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigurationError(f"cannot read noise config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"noise config {path} is not valid JSON: {e}") from e
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"invalid noise config {path}:\n{e}") from e


def iso_8655_dispense(nominal_volume: float = 1e-3) -> DispenseNoise:
    """Dispense noise with the ISO 8655 deviation for ``nominal_volume`` liters."""
    try:
        sigma = ISO_8655_SIGMA[nominal_volume]
    except KeyError:
        raise ConfigurationError(
            f"no ISO 8655 entry for {nominal_volume} L; known volumes: {sorted(ISO_8655_SIGMA)}"
        ) from None
    return DispenseNoise(kind="truncated_gaussian", sigma_abs_volume=sigma)


PRESETS: Dict[str, NoiseConfig] = {
    "degenerate": NoiseConfig(),
    "protocol_only": NoiseConfig(dispense=iso_8655_dispense()),
    "rates_only": NoiseConfig(rates=RateNoise(kind="sub_poisson")),
    "both": NoiseConfig(dispense=iso_8655_dispense(), rates=RateNoise(kind="sub_poisson")),
    "full": NoiseConfig(
        dispense=iso_8655_dispense(),
        equilibrate=EquilibrateNoise(kind="exponential"),
        rates=RateNoise(kind="sub_poisson"),
    ),
}
