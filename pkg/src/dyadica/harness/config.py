"""TOML experiment configuration: schema, validation, object builders.

One master seed drives everything; per-component streams come from the
documented hash chain numpy SeedSequence(entropy=seed, spawn_key=(cid,)),
with component ids listed in COMPONENT_IDS. Identical config + seed gives
bit-identical reports.
"""

from __future__ import annotations

import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import jsonschema

from .. import kernel as kn
from .. import lattice as lt
from .. import measure as ms


class ConfigError(ValueError):
    def __init__(self, msg, path=""):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


COMPONENT_IDS = {
    "measure_n": 1,
    "measure_m": 2,
    "b_n": 3,
    "b_m": 4,
    "lattice_n": 5,
    "lattice_m": 6,
    "kernel": 7,
    "f": 8,
    "plan": 9,
    "probe": 10,
    "suite": 11,
}


def subseed(master: int, component: str) -> int:
    """Deterministic per-component seed from the master seed."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(COMPONENT_IDS[component],))
    return int(ss.generate_state(1)[0])


_measure_schema = {
    "type": "object",
    "properties": {
        "preset": {"enum": ["uniform", "two-cell", "random-dirichlet", "csv"]},
        "n": {"type": "integer", "minimum": 1, "maximum": 2},
        "L": {"type": "integer", "minimum": 1, "maximum": 10},
        "path": {"type": "string"},
    },
    "required": ["preset", "n", "L"],
    "additionalProperties": False,
}

_lambda_schema = {
    "type": "object",
    "properties": {
        "family": {"enum": ["power_law"]},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "d": {"type": "number", "exclusiveMinimum": 0},
        "sharp_rescale": {"type": "boolean"},
    },
    "additionalProperties": False,
}

_b_schema = {
    "type": "object",
    "properties": {
        "preset": {"enum": ["one", "random-accretive", "csv"]},
        "strength": {"type": "number", "minimum": 0, "maximum": 0.5},
        "path": {"type": "string"},
    },
    "additionalProperties": False,
}

_lattice_schema = {
    "type": "object",
    "properties": {
        "r": {"type": "integer", "minimum": 1},
        "gamma": {"anyOf": [{"type": "number"}, {"enum": ["auto", "auto(alpha)"]}]},
    },
    "required": ["r", "gamma"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": {"type": "integer"},
        "measure_n": _measure_schema,
        "measure_m": _measure_schema,
        "lambda_n": _lambda_schema,
        "lambda_m": _lambda_schema,
        "b_n": _b_schema,
        "b_m": _b_schema,
        "lattice_n": _lattice_schema,
        "lattice_m": _lattice_schema,
        "kernel": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["standard_product", "b_annihilating", "violator", "tabulated"]},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "c": {"type": "number", "exclusiveMinimum": 0},
                "sign_factor": {"type": "boolean"},
                "seed": {"type": "integer"},
                "path": {"type": "string"},
            },
            "required": ["kind", "alpha", "beta"],
            "additionalProperties": False,
        },
        "quadrature": {
            "type": "object",
            "properties": {"G": {"type": "integer", "minimum": 1, "maximum": 64}},
            "additionalProperties": False,
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "f": {
            "type": "object",
            "properties": {
                "preset": {"enum": ["random-normal", "ones", "b-tensor"]},
            },
            "additionalProperties": False,
        },
        "avgid": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["exact", "mc"]},
                "trials": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "pigood": {
            "type": "object",
            "properties": {
                "level": {"type": "integer", "minimum": 0},
                "mode": {"enum": ["exact", "mc"]},
                "trials": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "carleson": {
            "type": "object",
            "properties": {
                "omega_count": {"type": "integer", "minimum": 0},
                "rect_count": {"type": "integer", "minimum": 1},
                "include_full_square": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "gnorm": {
            "type": "object",
            "properties": {"split": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "probe": {
            "type": "object",
            "properties": {
                "L_list": {"type": "array", "items": {"type": "integer", "minimum": 2, "maximum": 8}},
                "starts": {"type": "integer", "minimum": 1},
                "sweeps": {"type": "integer", "minimum": 0},
                "skip_verify": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "cubes_per_level": {"type": "integer", "minimum": 1},
                "exterior_samples": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "suite": {
            "type": "object",
            "properties": {"profile": {"enum": ["quick", "full"]}},
            "additionalProperties": False,
        },
    },
    "required": ["seed", "measure_n", "measure_m"],
    "additionalProperties": False,
}

DEFAULT_TOLERANCES = {
    # calibrated on standard_product with sign_factor at refined sample plans
    "size": 1.05,
    "holder": 48.0,
    "mixed_y1": 9.0,
    "mixed_y2": 9.0,
    "carleson_size": 4.0,
    "carleson_holder": 16.0,
    "carleson_condition": 2.0,
    "accretivity": 0.0,
    "upper_doubling": 1.0,
}


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        path = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(e.message, path) from None


def tolerances(cfg: dict) -> dict:
    out = dict(DEFAULT_TOLERANCES)
    out.update(cfg.get("tolerances", {}))
    return out


# ---------------------------------------------------------------------------
# builders


def build_measure(cfg: dict, which: str, seed: int) -> ms.FactorMeasure:
    sec = cfg[which]
    if sec["preset"] == "csv":
        n, L, vals = ms.load_weights_csv(sec["path"])
        if (n, L) != (sec["n"], sec["L"]):
            raise ConfigError(f"csv header (n={n}, L={L}) mismatches config", which)
        return ms.build_factor_measure(n, L, vals.real)
    return ms.preset_measure(sec["preset"], sec["n"], sec["L"], seed=subseed(seed, which))


def build_lambda(cfg: dict, which: str, M: ms.FactorMeasure) -> ms.DominatingFunction:
    sec = cfg.get(which, {})
    c = sec.get("c", 2.0)
    d = sec.get("d", 1.0)
    lam = ms.power_law_dominating(c, d)
    if sec.get("sharp_rescale", False):
        rep = ms.verify_upper_doubling(M, ms.power_law_dominating(1.0, d))
        lam = ms.power_law_dominating(rep.value, d)
    return lam


def build_b(cfg: dict, which: str, M: ms.FactorMeasure, seed: int) -> np.ndarray:
    sec = cfg.get(which, {"preset": "one"})
    if sec["preset"] == "csv":
        n, L, vals = ms.load_weights_csv(sec["path"])
        if (n, L) != (M.n, M.L):
            raise ConfigError(f"csv header (n={n}, L={L}) mismatches measure", which)
        return vals
    return ms.preset_b(
        sec["preset"], M, seed=subseed(seed, which), strength=sec.get("strength", 0.5)
    )


def build_lattice(cfg: dict, which: str, M: ms.FactorMeasure, lam, seed: int) -> lt.ShiftedLattice:
    """gamma may be the literal 'auto' / 'auto(alpha)': alpha (factor n) or
    beta (factor m) is taken from the kernel section together with this
    factor's d_lambda."""
    sec = cfg.get(which, {"r": 5, "gamma": 0.25})
    g = sec["gamma"]
    if isinstance(g, str):
        expo = cfg["kernel"]["beta" if which.endswith("_m") else "alpha"]
        g = lt.gamma_from(expo, lam.d_lambda)
    if not (0.0 < g < 0.5):
        raise ConfigError(f"gamma={g} outside (0, 1/2)", which)
    return lt.build_lattice(M.n, M.L, subseed(seed, which), sec["r"], float(g))


def build_kernel(cfg: dict, M_n, M_m, lam_n, lam_m, b1=None, b2=None) -> kn.KernelSpec:
    sec = cfg["kernel"]
    kind = sec["kind"]
    params = {"alpha": sec["alpha"], "beta": sec["beta"], "lam_n": lam_n, "lam_m": lam_m}
    if kind == "standard_product":
        params["c"] = sec.get("c", 1.0)
        params["sign_factor"] = sec.get("sign_factor", True)
        return kn.make_builtin(kind, params)
    if kind == "violator":
        return kn.make_builtin(kind, params)
    if kind == "b_annihilating":
        params.update({"b1": b1, "b2": b2, "M_n": M_n, "M_m": M_m})
        return kn.make_builtin(kind, params)
    if kind == "tabulated":
        return kn.load_tabulated(sec["path"], sec["alpha"], sec["beta"], lam_n, lam_m)
    raise ConfigError(f"unknown kernel kind {kind}", "kernel.kind")


def build_f(cfg: dict, M_n, M_m, b1, b2, seed: int) -> np.ndarray:
    sec = cfg.get("f", {"preset": "random-normal"})
    if sec["preset"] == "ones":
        return np.ones((M_n.num_cells, M_m.num_cells))
    if sec["preset"] == "b-tensor":
        return np.outer(b1, b2)
    rng = np.random.default_rng(subseed(seed, "f"))
    return rng.normal(size=(M_n.num_cells, M_m.num_cells))


class Problem:
    """All configured objects for one experiment run."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        seed = cfg["seed"]
        self.M_n = build_measure(cfg, "measure_n", seed)
        self.M_m = build_measure(cfg, "measure_m", seed)
        self.lam_n = build_lambda(cfg, "lambda_n", self.M_n)
        self.lam_m = build_lambda(cfg, "lambda_m", self.M_m)
        self.b1 = build_b(cfg, "b_n", self.M_n, seed)
        self.b2 = build_b(cfg, "b_m", self.M_m, seed)
        self.lat_n = build_lattice(cfg, "lattice_n", self.M_n, self.lam_n, seed)
        self.lat_m = build_lattice(cfg, "lattice_m", self.M_m, self.lam_m, seed)
        self.K = build_kernel(cfg, self.M_n, self.M_m, self.lam_n, self.lam_m, self.b1, self.b2)
        self.f = build_f(cfg, self.M_n, self.M_m, self.b1, self.b2, seed)
        self.G = cfg.get("quadrature", {}).get("G", 4)
        self.tol = tolerances(cfg)

    def rebuilt_at_depth(self, L: int) -> "Problem":
        for which in ("measure_n", "measure_m"):
            if self.cfg[which]["preset"] == "csv":
                raise ConfigError("csv measures cannot be re-instantiated at another depth", which)
        cfg = {**self.cfg}
        cfg["measure_n"] = {**cfg["measure_n"], "L": L}
        cfg["measure_m"] = {**cfg["measure_m"], "L": L}
        return Problem(cfg)


def default_config(seed: int = 20160423, L: int = 4) -> dict:
    """The documented default experiment (uniform measures, standard kernel)."""
    return {
        "seed": seed,
        "measure_n": {"preset": "uniform", "n": 1, "L": L},
        "measure_m": {"preset": "uniform", "n": 1, "L": L},
        "lambda_n": {"family": "power_law", "c": 2.0, "d": 1.0},
        "lambda_m": {"family": "power_law", "c": 2.0, "d": 1.0},
        "b_n": {"preset": "one"},
        "b_m": {"preset": "one"},
        "lattice_n": {"r": 5, "gamma": 0.25},
        "lattice_m": {"r": 5, "gamma": 0.25},
        "kernel": {"kind": "standard_product", "alpha": 1.0, "beta": 1.0, "c": 1.0, "sign_factor": True},
        "quadrature": {"G": 4},
        "f": {"preset": "random-normal"},
        "avgid": {"mode": "exact", "trials": 200},
        "pigood": {"level": 3, "mode": "exact", "trials": 10000},
        "carleson": {"omega_count": 20, "rect_count": 4, "include_full_square": True},
        "probe": {"L_list": [3, 4], "starts": 2, "sweeps": 2, "skip_verify": True},
        "suite": {"profile": "quick"},
    }
