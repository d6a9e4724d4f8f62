"""Energy-harvester transfer models and their inversion to RF-power thresholds.

Two variants: a linear model with constant conversion efficiency, and a
normalized logistic model that is zero at zero input and saturates at
``e_sat``.  Inverting the model turns a harvested-energy requirement into the
minimum RF power that must reach the harvester; for the logistic model this
requirement diverges as the target approaches saturation.

All powers and energies are linear watts; dBm appears only at I/O boundaries.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


class InfeasibleThresholdError(ValueError):
    """Harvested-energy target at or beyond the model's saturation level."""


@dataclass(frozen=True)
class EhModel:
    kind: str  # "linear" | "logistic"
    eta: float = 0.5  # linear conversion efficiency
    e_sat: float = 0.0  # logistic saturation level, watts
    a: float = 0.0  # logistic steepness, 1/watt
    b: float = 0.0  # logistic turn-on midpoint, watts

    def __post_init__(self):
        if self.kind == "linear":
            if not 0.0 < self.eta <= 1.0:
                raise ValueError("linear efficiency must lie in (0, 1]")
        elif self.kind == "logistic":
            if self.e_sat <= 0 or self.a <= 0 or self.b <= 0:
                raise ValueError("logistic parameters must be positive")
        else:
            raise ValueError(f"unknown EH model kind {self.kind!r}")

    @classmethod
    def linear(cls, eta: float) -> "EhModel":
        return cls(kind="linear", eta=eta)

    @classmethod
    def logistic(cls, e_sat: float, a: float, b: float) -> "EhModel":
        return cls(kind="logistic", e_sat=e_sat, a=a, b=b)

    def spec_string(self) -> str:
        if self.kind == "linear":
            return f"linear:eta={self.eta!r}"
        e_sat_dbm = 10.0 * np.log10(self.e_sat / 1e-3)
        return f"logistic:esat_dbm={float(e_sat_dbm)!r},a={self.a!r},b={self.b!r}"


def parse_eh_model(spec: str) -> EhModel:
    """Parse ``linear:eta=0.5`` / ``logistic:esat_dbm=13.8,a=150,b=0.014``."""
    kind, _, rest = spec.strip().partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ValueError(f"malformed EH model spec {spec!r}")
            kv[key.strip()] = float(val)
    if kind == "linear":
        return EhModel.linear(kv.get("eta", 0.5))
    if kind == "logistic":
        if "esat_dbm" in kv:
            e_sat = 1e-3 * 10.0 ** (kv["esat_dbm"] / 10.0)
        elif "esat" in kv:
            e_sat = kv["esat"]
        else:
            raise ValueError("logistic model needs esat_dbm= or esat=")
        try:
            return EhModel.logistic(e_sat, kv["a"], kv["b"])
        except KeyError as exc:
            raise ValueError(f"logistic model spec missing {exc}") from None
    raise ValueError(f"unknown EH model kind {kind!r}")


def harvested_energy(model: EhModel, rf_power: float) -> float:
    """Harvested power for a given RF input power (both watts)."""
    p = float(rf_power)
    if p < 0:
        raise ValueError("RF power must be nonnegative")
    if model.kind == "linear":
        return model.eta * p
    # normalized logistic: exactly 0 at p = 0, -> e_sat as p -> inf
    floor = expit(-model.a * model.b)
    raw = expit(model.a * (p - model.b))
    return model.e_sat * (raw - floor) / (1.0 - floor)


def required_rf_power(model: EhModel, energy_threshold: float) -> float:
    """Minimum RF power whose harvested output meets ``energy_threshold``.

    Inverse of :func:`harvested_energy`; raises
    :class:`InfeasibleThresholdError` for logistic targets at or beyond
    saturation, where the requirement diverges.
    """
    e = float(energy_threshold)
    if e < 0:
        raise ValueError("energy threshold must be nonnegative")
    if e == 0.0:
        return 0.0
    if model.kind == "linear":
        return e / model.eta
    if e >= model.e_sat:
        raise InfeasibleThresholdError(
            f"target {e:.3e} W at or beyond saturation {model.e_sat:.3e} W"
        )
    ab = model.a * model.b
    # p = b - (1/a) * log(e^{ab} (e_sat - e) / (e^{ab} e + e_sat)), in log space
    log_num = ab + np.log(model.e_sat - e)
    log_den = np.logaddexp(ab + np.log(e), np.log(model.e_sat))
    p = model.b - (log_num - log_den) / model.a
    return max(float(p), 0.0)


def rf_thresholds(model: EhModel, eh_thresholds) -> np.ndarray:
    """Vectorized :func:`required_rf_power` over per-user targets."""
    return np.array([required_rf_power(model, e) for e in np.atleast_1d(eh_thresholds)])
