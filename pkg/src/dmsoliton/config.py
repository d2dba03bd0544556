"""Run configuration files: a strict line-oriented ``key = value`` format.

Values are Python literals (numbers, tuples, lists) or bare words for the
few enumerated options.  Unknown keys, duplicate keys, malformed values, and
violated constraints are all reported with the offending line number, so a
config diff review is enough to know what a run will do.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Optional

from dmsoliton.energy import Problem
from dmsoliton.evolution import EvolutionMethod
from dmsoliton.minimizer import SolveConfig
from dmsoliton.profile import (DiffractionMeasure, NonlinearitySpec, PiecewiseProfile,
                               measure_from_profile)


class ConfigError(ValueError):
    pass


_BARE_WORDS = {"spectral_ring", "taylor_scaled", "closed_kernel", "strang", "rk4",
               "true", "false"}

# key -> (python type or tuple of types, description)
_SCHEMA = {
    "lambda": (float, "power constraint ||phi||_2^2"),
    "d_av": (float, "average diffraction, >= 0"),
    "period": (float, "profile period L"),
    "segments": (list, "piecewise-constant profile [(length, value), ...]"),
    "mean_zero": (bool, "whether the profile must integrate to zero"),
    "atoms": (list, "direct atomic measure [(node, weight), ...]"),
    "n_quad": (int, "Gauss-Legendre nodes per profile segment"),
    "terms": (list, "nonlinearity terms [(coefficient, exponent), ...]"),
    "gamma0": (float, "super-quadraticity exponent"),
    "gamma1": (float, "lower growth exponent"),
    "gamma2": (float, "upper growth exponent"),
    "kappa": (float, "small-amplitude exponent, 2 <= kappa < 6"),
    "method": (str, "evolution method variant"),
    "series_tolerance": (float, "evolution series tolerance"),
    "box_radius": (int, "working box radius"),
    "max_box_radius": (int, "cap for automatic box growth"),
    "tail_floor": (float, "accepted truncation amplitude"),
    "grad_tol": (float, "projected-gradient stopping tolerance"),
    "max_iters": (int, "iteration cap per descent"),
    "step_init": (float, "initial step size"),
    "backtrack": (float, "backtracking factor in (0,1)"),
    "recenter_every": (int, "gauge-fixing period"),
    "restarts": (int, "random restarts"),
    "seed": (int, "master seed"),
    "lambda_grid": (list, "grid of powers for sweep/threshold"),
    "bracket": (tuple, "bisection bracket (lo, hi)"),
    "dt": (float, "time step"),
    "t_end": (float, "propagation horizon"),
    "epsilon": (float, "fast-scale parameter"),
    "epsilon_list": (list, "epsilons for the breather experiment"),
    "scheme": (str, "time integrator: strang or rk4"),
    "trials": (int, "verification trials"),
}


@dataclass
class RunConfig:
    raw: dict = field(default_factory=dict)
    path: str = ""

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def require(self, *keys):
        missing = [k for k in keys if k not in self.raw]
        if missing:
            raise ConfigError(f"{self.path}: missing required keys: {', '.join(missing)}")

    # -- assembled objects ---------------------------------------------------

    def nonlinearity(self) -> NonlinearitySpec:
        self.require("terms")
        terms = [(float(c), float(s)) for c, s in self.raw["terms"]]
        kwargs = {}
        if "gamma0" in self.raw:
            kwargs["gamma0"] = self.raw["gamma0"]
        if "kappa" in self.raw:
            kwargs["kappa"] = self.raw["kappa"]
        spec = NonlinearitySpec.from_terms(terms, **kwargs)
        if "gamma1" in self.raw or "gamma2" in self.raw:
            spec = NonlinearitySpec(spec.terms,
                                    gamma0=self.raw.get("gamma0", spec.gamma0),
                                    gamma1=self.raw.get("gamma1", spec.gamma1),
                                    gamma2=self.raw.get("gamma2", spec.gamma2),
                                    kappa=self.raw.get("kappa", spec.kappa))
        return spec

    def profile(self) -> Optional[PiecewiseProfile]:
        if "segments" not in self.raw:
            return None
        self.require("period")
        return PiecewiseProfile(self.raw["period"],
                                tuple((float(l), float(v)) for l, v in self.raw["segments"]),
                                mean_zero=self.raw.get("mean_zero", True))

    def measure(self) -> DiffractionMeasure:
        if "atoms" in self.raw:
            return DiffractionMeasure.from_atoms(self.raw["atoms"])
        prof = self.profile()
        if prof is None:
            raise ConfigError(f"{self.path}: need either 'atoms' or 'segments'+'period'")
        return measure_from_profile(prof, self.raw.get("n_quad", 32))

    def evolution_method(self) -> EvolutionMethod:
        return EvolutionMethod(self.raw.get("method", "spectral_ring"),
                               self.raw.get("series_tolerance", 1e-14))

    def problem(self, lam: Optional[float] = None) -> Problem:
        self.require("d_av")
        if lam is None:
            self.require("lambda")
            lam = self.raw["lambda"]
        return Problem(self.raw["d_av"], self.measure(), self.nonlinearity(),
                       lam, self.evolution_method())

    def solve_config(self) -> SolveConfig:
        kwargs = {}
        for k in ("max_iters", "grad_tol", "step_init", "backtrack", "recenter_every",
                  "restarts", "seed", "box_radius", "tail_floor", "max_box_radius"):
            if k in self.raw:
                kwargs[k] = self.raw[k]
        return SolveConfig(**kwargs)


def parse_config(path) -> RunConfig:
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            expected, _desc = _SCHEMA[key]
            if value in _BARE_WORDS:
                parsed = {"true": True, "false": False}.get(value, value)
            else:
                try:
                    parsed = ast.literal_eval(value)
                except (ValueError, SyntaxError) as exc:
                    raise ConfigError(f"{path}:{lineno}: cannot parse value for "
                                      f"{key!r}: {exc}") from None
            if expected is float and isinstance(parsed, int):
                parsed = float(parsed)
            if expected is tuple and isinstance(parsed, list):
                parsed = tuple(parsed)
            if not isinstance(parsed, expected):
                raise ConfigError(
                    f"{path}:{lineno}: {key} must be {expected.__name__} ({_desc})")
            raw[key] = parsed
    cfg = RunConfig(raw=raw, path=str(path))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    raw = cfg.raw
    if "d_av" in raw and raw["d_av"] < 0:
        raise ConfigError(f"{cfg.path}: d_av must be >= 0")
    if "lambda" in raw and raw["lambda"] <= 0:
        raise ConfigError(f"{cfg.path}: lambda must be positive")
    if "backtrack" in raw and not 0 < raw["backtrack"] < 1:
        raise ConfigError(f"{cfg.path}: backtrack must lie in (0, 1)")
    if "dt" in raw and not 0 < raw["dt"] < 0.1:
        raise ConfigError(f"{cfg.path}: dt must lie in (0, 0.1)")
    if "method" in raw and raw["method"] not in ("spectral_ring", "taylor_scaled",
                                                 "closed_kernel"):
        raise ConfigError(f"{cfg.path}: unknown evolution method {raw['method']!r}")
    if "scheme" in raw and raw["scheme"] not in ("strang", "rk4"):
        raise ConfigError(f"{cfg.path}: unknown scheme {raw['scheme']!r}")
    if "lambda_grid" in raw:
        grid = raw["lambda_grid"]
        if any(l <= 0 for l in grid) or sorted(grid) != list(grid):
            raise ConfigError(f"{cfg.path}: lambda_grid must be positive and increasing")
