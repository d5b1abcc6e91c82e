"""Experiment configuration: JSON schema, validation, divisor sampling."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .bundle import Divisor
from .errors import ConfigError

DEFAULT_EPS_LIST = (0.4, 0.2, 0.1, 0.05, 0.025)


@dataclass
class ExperimentConfig:
    """One experiment run: geometry, bundle degree, sweep and sampling knobs.

    A fixed ``seed`` makes every derived artifact (divisor draws, random
    suites, CSV bytes) reproducible.
    """

    n: int = 1
    rho_coeffs: list = field(default_factory=list)  # (l, m, value) real harmonics
    eps_list: list = field(default_factory=lambda: list(DEFAULT_EPS_LIST))
    l_max: int = 63
    moduli_samples: int = 5
    divisor_spec: object = "random:5"
    seed: int = 12345
    output_dir: str = "out"
    threads: int = 1
    # subcommand-specific options
    eps: float | None = None  # solve-vortex / metric-sample single coupling
    divisor: list | None = None  # explicit (theta, phi, mult) list for solve-vortex
    moduli_grid: list = field(default_factory=lambda: [24, 48])
    k_max: int = 3
    instances: int = 100  # check-laxmilgram suite size
    random_band: int = 8  # band limit of random fields in the laxmilgram suite
    dump_fields: bool = False

    def validate(self) -> "ExperimentConfig":
        if not isinstance(self.n, int) or self.n < 0:
            raise ConfigError("field 'n': must be a nonnegative integer")
        if self.l_max < 1:
            raise ConfigError("field 'l_max': must be a positive integer")
        if not self.eps_list:
            raise ConfigError("field 'eps_list': must be nonempty")
        for e in self.eps_list:
            if not (0.0 < float(e) < 1.0):
                raise ConfigError(f"field 'eps_list': value {e} outside (0, 1)")
        if list(self.eps_list) != sorted(self.eps_list, reverse=True) or len(
            set(self.eps_list)
        ) != len(self.eps_list):
            raise ConfigError("field 'eps_list': must be strictly decreasing")
        if self.eps is not None and not (0.0 < float(self.eps) < 1.0):
            raise ConfigError(f"field 'eps': value {self.eps} outside (0, 1)")
        for term in self.rho_coeffs:
            if len(term) != 3:
                raise ConfigError("field 'rho_coeffs': entries must be (l, m, value)")
            l, m, _ = term
            if int(l) < 0 or abs(int(m)) > int(l):
                raise ConfigError(f"field 'rho_coeffs': invalid harmonic (l={l}, m={m})")
        if isinstance(self.divisor_spec, str):
            if not self.divisor_spec.startswith("random:"):
                raise ConfigError("field 'divisor_spec': string form must be 'random:<count>'")
            try:
                count = int(self.divisor_spec.split(":", 1)[1])
            except ValueError:
                raise ConfigError("field 'divisor_spec': count is not an integer") from None
            if count < 1:
                raise ConfigError("field 'divisor_spec': count must be positive")
        elif not isinstance(self.divisor_spec, (list, tuple)):
            raise ConfigError("field 'divisor_spec': must be 'random:<count>' or a list")
        if len(self.moduli_grid) != 2 or any(int(v) < 4 for v in self.moduli_grid):
            raise ConfigError("field 'moduli_grid': must be [n_theta, n_phi] with both >= 4")
        if self.k_max < 1:
            raise ConfigError("field 'k_max': must be >= 1")
        if self.instances < 1:
            raise ConfigError("field 'instances': must be >= 1")
        if self.threads < 1:
            raise ConfigError("field 'threads': must be >= 1")
        if not isinstance(self.seed, int):
            raise ConfigError("field 'seed': must be an integer")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        for key in data:
            if key not in known:
                raise ConfigError(f"field '{key}': unknown configuration key")
        return cls(**data).validate()

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"field 'config': file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"field 'config': invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError("field 'config': top level must be an object")
        return cls.from_dict(data)

    def config_hash(self) -> str:
        """Hash of the experiment identity (output location and thread count
        do not change results and are excluded)."""
        payload = asdict(self)
        payload.pop("output_dir", None)
        payload.pop("threads", None)
        blob = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def divisors_from_config(cfg: ExperimentConfig) -> list[Divisor]:
    """Materialize the configured divisors (deterministic under the seed)."""
    if isinstance(cfg.divisor_spec, str):
        count = int(cfg.divisor_spec.split(":", 1)[1])
        rng = np.random.default_rng(cfg.seed)
        out = []
        for _ in range(count):
            z = rng.uniform(-1.0, 1.0, size=cfg.n)
            ph = rng.uniform(0.0, 2.0 * np.pi, size=cfg.n)
            out.append(Divisor.from_points([(np.arccos(zz), pp, 1) for zz, pp in zip(z, ph)]))
        return out
    divisors = []
    for spec in cfg.divisor_spec:
        divisors.append(Divisor.from_points([(t, p, int(k)) for t, p, k in spec]))
    for d in divisors:
        if d.degree != cfg.n:
            raise ConfigError(
                f"field 'divisor_spec': divisor of degree {d.degree} but n={cfg.n}"
            )
    return divisors
