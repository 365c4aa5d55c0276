"""Run configuration: JSON schema, validation and parameter resolution."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, SQHAError
from .noise import NoiseParams, check_resolved, correlation_length
from .potentials import PotentialSpec
from .qpotential import QuantumParams
from .spatial import Grid1D


@dataclass
class GridConfig:
    N: int = 512
    L: float = 40.0

    def build(self) -> Grid1D:
        return Grid1D(float(self.L), int(self.N))


@dataclass
class InitConfig:
    center: float = 0.0
    sigma: float = 1.0
    momentum: float = 0.0


@dataclass
class NoiseConfig:
    theta: float = 0.0
    k: float = 1.0
    mobility: float = 1.0
    f: float = 1.0


@dataclass
class TracerConfig:
    count: int = 0
    placement: str = "density"


@dataclass
class ScanConfig:
    """Reversal-asymmetry scan; horizon None means one packet-width crossing time."""
    thetas: list = field(default_factory=lambda: [0.0, 1e-4, 3e-4, 1e-3, 3e-3])
    horizon: float | None = None
    trials: int = 100
    replay_noise: bool = False


@dataclass
class LimitConfig:
    threshold: float = 0.1
    calibrate: bool = True


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    potential: dict = field(default_factory=lambda: {"family": "free", "params": {}})
    quantum: QuantumParams = field(default_factory=QuantumParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    init: InitConfig = field(default_factory=InitConfig)
    dt: float | None = None
    steps: int = 1000
    seed: int = 0
    tracers: TracerConfig = field(default_factory=TracerConfig)
    record_every: int = 10
    snapshot_every: int = 0
    scan: ScanConfig = field(default_factory=ScanConfig)
    limit: LimitConfig = field(default_factory=LimitConfig)
    samples: int = 10000      # noise-validate
    lambda_c: float = 1.0     # range probe length

    # resolved objects
    @property
    def grid_obj(self) -> Grid1D:
        return self.grid.build()

    @property
    def potential_spec(self) -> PotentialSpec:
        return PotentialSpec.from_dict(self.potential, mass=self.quantum.mass)

    @property
    def noise_params(self) -> NoiseParams:
        n = self.noise
        return NoiseParams(n.theta, n.k, n.mobility, n.f, self.quantum.mass, self.quantum.hbar)

    def with_theta(self, theta: float) -> "RunConfig":
        d = self.to_dict()
        d["noise"]["theta"] = theta
        return RunConfig.from_dict(d)

    def resolve_dt(self):
        """(dt, substeps, inner_dt): dt null means the step bound; a dt above the
        bound is split into equal substeps that respect it."""
        from .dynamics import stability_bound

        bound = stability_bound(self.grid_obj, self.potential_spec, self.quantum)
        dt = bound if self.dt is None else float(self.dt)
        if not dt > 0:
            raise ConfigError("dt must be positive", dt=dt)
        sub = max(1, math.ceil(dt / bound * (1 - 1e-12)))
        return dt, sub, dt / sub

    def validate(self):
        """Run every precondition that can be checked before compute."""
        try:
            g = self.grid_obj
            spec = self.potential_spec
            spec.values(g.q)
            npar = self.noise_params
            if npar.theta > 0:
                check_resolved(g, npar)
            self.resolve_dt()
        except SQHAError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from None
        if self.steps < 0 or self.record_every < 1 or self.snapshot_every < 0:
            raise ConfigError("steps >= 0, record_every >= 1 and snapshot_every >= 0 are required")
        if self.init.sigma <= 0:
            raise ConfigError("init sigma must be positive")
        if self.tracers.count < 0:
            raise ConfigError("tracer count must be >= 0")
        if self.scan.trials < 1 or self.samples < 1 or not self.lambda_c > 0:
            raise ConfigError("scan.trials and samples must be >= 1, lambda_c > 0")
        if self.scan.horizon is not None and not self.scan.horizon > 0:
            raise ConfigError("scan.horizon must be positive")
        if not self.limit.threshold > 0:
            raise ConfigError("limit.threshold must be positive")
        return self

    def crossing_time(self) -> float:
        """sigma m / |p|: time for the packet to move one width."""
        if self.init.momentum == 0:
            raise ConfigError("packet crossing time needs a nonzero initial momentum; set scan.horizon")
        return self.init.sigma * self.quantum.mass / abs(self.init.momentum)

    def resolution(self) -> dict:
        dt, sub, inner = self.resolve_dt()
        from .dynamics import stability_bound

        lc = correlation_length(self.noise_params)
        return {
            "lambda_c": "INFINITE_CORRELATION" if math.isinf(lc) else lc,
            "dt": dt,
            "substeps": sub,
            "inner_dt": inner,
            "dt_bound": stability_bound(self.grid_obj, self.potential_spec, self.quantum),
            "grid_spacing": self.grid_obj.spacing,
        }

    # (de)serialization
    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantum"] = {"hbar": self.quantum.hbar, "mass": self.quantum.mass}
        d["grid"] = {"N": self.grid.N, "L": self.grid.L}
        d["init"] = {"gaussian": asdict(self.init)}
        return json.loads(json.dumps(d))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw = {}
            if "grid" in d:
                kw["grid"] = GridConfig(**d["grid"])
            if "potential" in d:
                pot = d["potential"]
                if isinstance(pot, str):
                    pot = PotentialSpec.parse(pot).to_dict()
                kw["potential"] = dict(pot)
            if "quantum" in d:
                kw["quantum"] = QuantumParams(**d["quantum"])
            if "noise" in d:
                kw["noise"] = NoiseConfig(**d["noise"])
            if "init" in d:
                init = d["init"]
                init = init.get("gaussian", init) if isinstance(init, dict) else init
                kw["init"] = InitConfig(**init)
            if "tracers" in d:
                kw["tracers"] = TracerConfig(**d["tracers"])
            if "scan" in d:
                kw["scan"] = ScanConfig(**d["scan"])
            if "limit" in d:
                kw["limit"] = LimitConfig(**d["limit"])
            for k in ("dt", "steps", "seed", "record_every", "snapshot_every", "samples", "lambda_c"):
                if k in d:
                    kw[k] = d[k]
            cfg = cls(**kw)
        except SQHAError:
            raise
        except TypeError as exc:
            raise ConfigError(f"invalid configuration: {exc}") from None
        if cfg.dt is not None:
            cfg.dt = float(cfg.dt)
        cfg.steps, cfg.seed = int(cfg.steps), int(cfg.seed)
        cfg.record_every, cfg.snapshot_every = int(cfg.record_every), int(cfg.snapshot_every)
        cfg.samples, cfg.lambda_c = int(cfg.samples), float(cfg.lambda_c)
        cfg.scan.thetas = [float(t) for t in cfg.scan.thetas]
        cfg.scan.trials = int(cfg.scan.trials)
        if cfg.scan.horizon is not None:
            cfg.scan.horizon = float(cfg.scan.horizon)
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(d)
