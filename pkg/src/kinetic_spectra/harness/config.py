"""Sweep configuration: JSON ingestion, validation and normalization."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from ..blocks import BlockSpec, Geometry, make_block
from ..spectra import Window

OUT_ENV = "KINETIC_SPECTRA_OUT"
DEFAULT_GAMMAS = (10.0, 30.0, 100.0, 300.0)
DEFAULT_C0 = 10.0
DEFAULT_LAMBDAS = (-1 + 0j, -2 + 1j, -5 + 0j)
DEFAULT_TOLERANCES = {"final_error": 5e-2, "resolvent": 1e-2, "match": 5e-2}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"invalid config at '{key}': {message}")
        self.key = key


def load_schema(name: str) -> dict:
    return json.loads(resources.files("kinetic_spectra").joinpath("schemas").joinpath(name).read_text())


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "out"))


@dataclass(frozen=True)
class ModelFamily:
    geometry: Geometry
    parameters: tuple[float, ...]
    n: int = 2
    replicate: bool = False

    def blocks(self) -> list[BlockSpec]:
        return [make_block(self.geometry, p, self.n) for p in self.parameters]

    def multiplicity(self, block: BlockSpec) -> int:
        if self.replicate and block.geometry is Geometry.SPHERE:
            return 2 * int(block.parameter) + 1
        return 1


@dataclass(frozen=True)
class SweepConfig:
    families: tuple[ModelFamily, ...]
    gamma_grid: tuple[float, ...] = DEFAULT_GAMMAS
    window: Window = Window(-0.5, DEFAULT_C0, -1.0, 1.0)
    C0: float = DEFAULT_C0
    kmax_policy: str = "adaptive"
    K_max: int | None = None
    lambda_grid: tuple[complex, ...] = DEFAULT_LAMBDAS
    outputs: dict = field(default_factory=lambda: {"csv": "sweep.csv", "json": "summary.json"})
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        validator = jsonschema.Draft202012Validator(load_schema("sweep_config.schema.json"))
        errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
        if errors:
            err = errors[0]
            key = ".".join(str(p) for p in err.absolute_path) or "<root>"
            raise ConfigError(key, err.message)

        families = []
        for i, fam in enumerate(raw["families"]):
            geom = Geometry(fam["geometry"])
            n = fam.get("n", 2)
            if geom is not Geometry.TORUS and n != 2:
                raise ConfigError(f"families.{i}.n", f"{geom.value} blocks require n = 2")
            if geom is Geometry.SPHERE and any(p != int(p) for p in fam["parameters"]):
                raise ConfigError(f"families.{i}.parameters", "sphere degrees must be integers")
            families.append(ModelFamily(geom, tuple(float(p) for p in fam["parameters"]), n, fam.get("replicate", False)))

        gammas = tuple(float(g) for g in raw.get("gamma_grid", DEFAULT_GAMMAS))
        if any(b <= a for a, b in zip(gammas, gammas[1:])):
            raise ConfigError("gamma_grid", "must be strictly increasing")
        C0 = float(raw.get("C0", DEFAULT_C0))
        w = raw.get("window", [-0.5, C0, -1.0, 1.0])
        try:
            window = Window(*map(float, w))
        except ValueError as exc:
            raise ConfigError("window", str(exc)) from None
        policy = raw.get("kmax_policy", "adaptive")
        K_max = raw.get("K_max")
        if policy == "fixed" and K_max is None:
            raise ConfigError("K_max", "fixed policy needs an integer K_max")
        lams = tuple(complex(re, im) for re, im in raw.get("lambda_grid", [[z.real, z.imag] for z in DEFAULT_LAMBDAS]))
        outputs = {"csv": "sweep.csv", "json": "summary.json", **raw.get("outputs", {})}
        tol = {**DEFAULT_TOLERANCES, **raw.get("tolerances", {})}
        return cls(tuple(families), gammas, window, C0, policy, K_max, lams, outputs, tol)

    @classmethod
    def load(cls, path) -> "SweepConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<root>", f"not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "families": [
                {"geometry": f.geometry.value, "n": f.n, "parameters": list(f.parameters), "replicate": f.replicate}
                for f in self.families
            ],
            "gamma_grid": list(self.gamma_grid),
            "window": self.window.as_list(),
            "C0": self.C0,
            "kmax_policy": self.kmax_policy,
            "K_max": self.K_max,
            "lambda_grid": [[z.real, z.imag] for z in self.lambda_grid],
            "outputs": dict(self.outputs),
            "tolerances": dict(self.tolerances),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
