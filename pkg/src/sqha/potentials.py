"""External potential families V(q)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

FAMILIES = ("free", "harmonic", "power_tail", "lennard_jones_like", "tabulated")

# positional parameter names per family, with defaults (None = required)
_PARAMS = {
    "free": (),
    "harmonic": (("omega", None), ("mass", 1.0)),
    "power_tail": (("amplitude", None), ("kappa", None), ("core", 1.0)),
    "lennard_jones_like": (("epsilon", None), ("sigma", 1.0)),
    "tabulated": (),
}


@dataclass(frozen=True)
class PotentialSpec:
    """A tagged potential family.

    harmonic            V = m w^2 q^2 / 2
    power_tail          V = A [(q^2 + c^2)^(kappa/2) - c^kappa]   (~ A|q|^kappa far out, smooth core c)
    lennard_jones_like  V = -eps (1 + (q/sigma)^2)^-3                (attractive q^-6 tail, soft core)
    tabulated           V given on the simulation grid nodes
    """

    family: str
    params: tuple = ()
    table: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown potential family {self.family!r}", family=self.family)
        if self.family == "tabulated":
            if not self.table:
                raise ConfigError("tabulated potential needs values")
            if not np.all(np.isfinite(self.table)):
                raise ConfigError("tabulated potential has non-finite values")
            return
        spec = _PARAMS[self.family]
        params = tuple(float(p) for p in self.params)
        if len(params) > len(spec):
            raise ConfigError(f"too many parameters for {self.family}", given=len(params))
        filled = list(params)
        for name, default in spec[len(params):]:
            if default is None:
                raise ConfigError(f"{self.family} needs parameter {name!r}")
            filled.append(default)
        if not all(np.isfinite(filled)):
            raise ConfigError("potential parameters must be finite")
        object.__setattr__(self, "params", tuple(filled))
        if self.family == "harmonic" and (self.params[0] <= 0 or self.params[1] <= 0):
            raise ConfigError("harmonic needs omega > 0 and mass > 0")
        if self.family == "power_tail" and self.params[2] <= 0:
            raise ConfigError("power_tail core must be positive")
        if self.family == "lennard_jones_like" and self.params[1] <= 0:
            raise ConfigError("lennard_jones_like sigma must be positive")

    # constructors
    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def harmonic(cls, omega, mass=1.0):
        return cls("harmonic", (omega, mass))

    @classmethod
    def power_tail(cls, amplitude, kappa, core=1.0):
        return cls("power_tail", (amplitude, kappa, core))

    @classmethod
    def lennard_jones_like(cls, epsilon, sigma=1.0):
        return cls("lennard_jones_like", (epsilon, sigma))

    @classmethod
    def tabulated(cls, values):
        return cls("tabulated", (), tuple(float(v) for v in values))

    @classmethod
    def parse(cls, text: str) -> "PotentialSpec":
        """Parse 'family:p1,p2,...', e.g. 'harmonic:1.0' or 'power_tail:1,0.5'."""
        family, _, rest = text.strip().partition(":")
        if family == "tabulated":
            raise ConfigError("tabulated potentials are given as a value list in the config file")
        try:
            params = tuple(float(x) for x in rest.split(",") if x.strip())
        except ValueError:
            raise ConfigError(f"cannot parse potential {text!r}") from None
        return cls(family, params)

    @classmethod
    def from_dict(cls, d: dict, mass: float = 1.0) -> "PotentialSpec":
        family = d.get("family")
        p = d.get("params", {})
        if family == "tabulated":
            return cls.tabulated(p["values"] if isinstance(p, dict) else p)
        if isinstance(p, dict):
            names = [n for n, _ in _PARAMS.get(family, ())]
            if family == "harmonic":
                p = {"mass": mass, **p}
            unknown = set(p) - set(names)
            if unknown:
                raise ConfigError(f"unknown parameters for {family}: {sorted(unknown)}")
            vals = []
            for name in names:
                if name not in p:
                    break
                vals.append(p[name])
            p = vals
        return cls(family, tuple(p))

    def to_dict(self) -> dict:
        if self.family == "tabulated":
            return {"family": "tabulated", "params": {"values": list(self.table)}}
        names = [n for n, _ in _PARAMS[self.family]]
        return {"family": self.family, "params": dict(zip(names, self.params))}

    # evaluation
    def values(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        f = self.family
        if f == "free":
            return np.zeros_like(q)
        if f == "harmonic":
            w, m = self.params
            return 0.5 * m * w * w * q * q
        if f == "power_tail":
            a, kap, c = self.params
            return a * ((q * q + c * c) ** (0.5 * kap) - c ** kap)
        if f == "lennard_jones_like":
            eps, s = self.params
            return -eps * (1 + (q / s) ** 2) ** -3
        return self._table_for(q)

    def gradient(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        f = self.family
        if f == "free":
            return np.zeros_like(q)
        if f == "harmonic":
            w, m = self.params
            return m * w * w * q
        if f == "power_tail":
            a, kap, c = self.params
            return a * kap * q * (q * q + c * c) ** (0.5 * kap - 1)
        if f == "lennard_jones_like":
            eps, s = self.params
            return 6 * eps * q / s**2 * (1 + (q / s) ** 2) ** -4
        t = self._table_for(q)
        h = q[1] - q[0]
        return (np.roll(t, -1) - np.roll(t, 1)) / (2 * h)

    def _table_for(self, q):
        t = np.asarray(self.table, dtype=float)
        if t.shape != q.shape:
            raise ConfigError("tabulated potential length does not match grid",
                              table=t.size, grid=q.size)
        return t

    @property
    def tail_exponent(self) -> float | None:
        """Nominal large-|q| exponent kappa of V ~ |q|^kappa (None when not a power law)."""
        if self.family == "harmonic":
            return 2.0
        if self.family == "power_tail":
            return self.params[1]
        if self.family == "lennard_jones_like":
            return -6.0
        return None

    @property
    def grows(self) -> bool:
        """True when V increases without bound (a confining family)."""
        if self.family == "harmonic":
            return True
        if self.family == "power_tail":
            return self.params[0] > 0 and self.params[1] > 0
        return False

    def __str__(self):
        if self.family == "tabulated":
            return f"tabulated[{len(self.table)}]"
        return f"{self.family}:" + ",".join(repr(p) for p in self.params)
