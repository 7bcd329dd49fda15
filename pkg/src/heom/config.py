"""
Run configuration: JSON schema, dataclasses and model construction.

Operators are referenced by name. A named system builder provides the
Hamiltonian and a table of operators; dense operators given as nested
``[re, im]`` arrays may be added under ``system.operators``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import bath as bathmod
from . import systems

__all__ = [
    "ConfigError",
    "SystemConfig",
    "BathConfig",
    "LindbladConfig",
    "TruncationConfig",
    "TaskConfig",
    "OutputConfig",
    "RunConfig",
    "SCHEMA",
    "parse_config",
    "load_config",
    "bundled_config",
    "Model",
    "build_model",
    "grid_values",
    "matrix_from",
    "matrix_to_doc",
]

CONFIG_DIR = Path(__file__).with_name("configs")


class ConfigError(ValueError):
    pass


_number = {"type": "number"}
_complex = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}
_matrix = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _complex}}
_grid = {
    "type": "object",
    "additionalProperties": False,
    "required": ["from", "to", "points"],
    "properties": {"from": _number, "to": _number, "points": {"type": "integer", "minimum": 1}},
}
_grid_or_list = {"oneOf": [_grid, {"type": "array", "items": _number, "minItems": 1}]}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "truncation", "tasks"],
    "properties": {
        "name": {"type": "string"},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "builder": {"enum": ["fermion_level", "boson_mode", "charge_cavity"]},
                "params": {"type": "object", "additionalProperties": _number},
                "hamiltonian": _matrix,
                "operators": {"type": "object", "additionalProperties": _matrix},
            },
        },
        "baths": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["flavor", "family", "couplings"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "flavor": {"enum": ["fermionic", "bosonic"]},
                    "family": {"enum": ["lorentzian", "drude_lorentz", "exponents"]},
                    "couplings": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "Gamma": {"type": "number", "minimum": 0},
                    "Delta": {"type": "number", "minimum": 0},
                    "W": {"type": "number", "exclusiveMinimum": 0},
                    "mu": _number,
                    "bias_sign": {"enum": [-1, 0, 1]},
                    "kT": {"type": "number", "exclusiveMinimum": 0},
                    "N": {"type": "integer", "minimum": 1},
                    "decomposition": {"enum": ["pade", "matsubara"]},
                    "combine": {"type": "boolean"},
                    "exponents": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["coeff", "rate"],
                            "properties": {
                                "coeff": _complex,
                                "rate": _complex,
                                "nu": {"enum": [-1, 1]},
                                "part": {"enum": ["R", "I", "RI"]},
                            },
                        },
                    },
                },
            },
        },
        "lindblad": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["operator"],
                "properties": {
                    "operator": {"type": "string"},
                    "rate": {"type": "number", "minimum": 0},
                    "thermal": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["omega", "kT", "Delta", "W"],
                        "properties": {
                            "omega": {"type": "number", "exclusiveMinimum": 0},
                            "kT": {"type": "number", "exclusiveMinimum": 0},
                            "Delta": {"type": "number", "minimum": 0},
                            "W": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
            },
        },
        "truncation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m_max": {"type": "integer", "minimum": 0},
                "n_max": {"type": "integer", "minimum": 0},
                "I_th": {"type": "number", "minimum": 0},
                "max_ados": {"type": "integer", "minimum": 1},
            },
        },
        "tasks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["type"],
                "properties": {
                    "type": {"enum": ["evolve", "steadystate", "dos", "psd", "current", "conductance"]},
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "phi": {"oneOf": [_number, _grid, {"type": "array", "items": _number, "minItems": 1}]},
                    "omega": _grid_or_list,
                    "times": _grid_or_list,
                    "operator": {"type": "string"},
                    "bath": {"type": "string"},
                    "observables": {"type": "array", "items": {"type": "string"}},
                    "initial": {"oneOf": [{"enum": ["ground", "maximally_mixed"]}, _matrix]},
                    "method": {"enum": ["ode", "expm", "direct", "gmres"]},
                    "rtol": {"type": "number", "exclusiveMinimum": 0},
                    "atol": {"type": "number", "exclusiveMinimum": 0},
                    "dump_ados": {"type": "boolean"},
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "coo"]}},
            },
        },
        "threads": {"type": "integer", "minimum": 1},
    },
}

_TASK_REQUIRED = {
    "evolve": ("times",),
    "dos": ("operator", "omega"),
    "psd": ("operator", "omega"),
    "current": ("bath",),
    "conductance": ("bath", "phi"),
}


def _path(error) -> str:
    out = "config"
    for part in error.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def _validate(doc) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{_path(e)}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


# ---------------------------------------------------------------------------
# Dataclasses


@dataclass
class SystemConfig:
    builder: str | None = None
    params: dict = field(default_factory=dict)
    hamiltonian: list | None = None
    operators: dict = field(default_factory=dict)


@dataclass
class BathConfig:
    id: str
    flavor: str
    family: str
    couplings: list
    Gamma: float | None = None
    Delta: float | None = None
    W: float | None = None
    mu: float = 0.0
    bias_sign: int = 0
    kT: float | None = None
    N: int | None = None
    decomposition: str = "pade"
    combine: bool = False
    exponents: list | None = None


@dataclass
class LindbladConfig:
    operator: str
    rate: float | None = None
    thermal: dict | None = None


@dataclass
class TruncationConfig:
    m_max: int = 0
    n_max: int = 0
    I_th: float = 0.0
    max_ados: int = 5_000_000


@dataclass
class TaskConfig:
    type: str
    name: str
    phi: Any = 0.0
    omega: Any = None
    times: Any = None
    operator: str | None = None
    bath: str | None = None
    observables: list = field(default_factory=list)
    initial: Any = "ground"
    method: str | None = None
    rtol: float = 1e-8
    atol: float = 1e-10
    dump_ados: bool = False


@dataclass
class OutputConfig:
    directory: str = "heom_out"
    formats: list = field(default_factory=lambda: ["csv"])


@dataclass
class RunConfig:
    system: SystemConfig
    truncation: TruncationConfig
    tasks: list
    baths: list = field(default_factory=list)
    lindblad: list = field(default_factory=list)
    output: OutputConfig = field(default_factory=OutputConfig)
    threads: int = 1
    name: str = "run"

    def to_dict(self) -> dict:
        """JSON-ready document; parsing it again gives an equal config."""
        def strip(obj):
            if isinstance(obj, dict):
                return {k: strip(v) for k, v in obj.items() if v is not None}
            if isinstance(obj, list):
                return [strip(v) for v in obj]
            return obj

        return strip(asdict(self))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def parse_config(document) -> RunConfig:
    """Validate a config document (dict, JSON text or path) into a RunConfig."""
    if isinstance(document, (str, Path)) and not str(document).lstrip().startswith("{"):
        return load_config(document)
    doc = json.loads(document) if isinstance(document, str) else copy.deepcopy(document)
    _validate(doc)
    sys_doc = doc["system"]
    if ("builder" in sys_doc) == ("hamiltonian" in sys_doc):
        raise ConfigError("config.system: give exactly one of 'builder' or 'hamiltonian'")
    system = SystemConfig(**sys_doc)

    baths = []
    seen = set()
    for i, b in enumerate(doc.get("baths", [])):
        b = dict(b)
        b.setdefault("id", f"bath{i}")
        where = f"config.baths[{i}]"
        if b["family"] == "exponents":
            if not b.get("exponents"):
                raise ConfigError(f"{where}: family 'exponents' needs a non-empty 'exponents' list")
        else:
            expected = "fermionic" if b["family"] == "lorentzian" else "bosonic"
            if b["flavor"] != expected:
                raise ConfigError(f"{where}: family {b['family']!r} is {expected}")
            strength = "Gamma" if expected == "fermionic" else "Delta"
            missing = [k for k in (strength, "W", "kT", "N") if k not in b]
            if missing:
                raise ConfigError(f"{where}: missing {', '.join(missing)}")
        key = (b["id"], tuple(b["couplings"]))
        if key in seen:
            raise ConfigError(f"{where}: duplicate bath id/couplings {key}")
        seen.add(key)
        baths.append(BathConfig(**b))

    lindblad = []
    for i, item in enumerate(doc.get("lindblad", [])):
        if ("rate" in item) == ("thermal" in item):
            raise ConfigError(f"config.lindblad[{i}]: give exactly one of 'rate' or 'thermal'")
        lindblad.append(LindbladConfig(**item))

    tasks, names = [], set()
    for i, t in enumerate(doc["tasks"]):
        t = dict(t)
        for key in _TASK_REQUIRED.get(t["type"], ()):
            if key not in t:
                raise ConfigError(f"config.tasks[{i}]: task {t['type']!r} needs {key!r}")
        name = t.get("name") or t["type"]
        base, k = name, 2
        while name in names:
            name = f"{base}_{k}"
            k += 1
        names.add(name)
        t["name"] = name
        tasks.append(TaskConfig(**t))

    return RunConfig(
        system=system,
        truncation=TruncationConfig(**doc["truncation"]),
        tasks=tasks,
        baths=baths,
        lindblad=lindblad,
        output=OutputConfig(**doc.get("output", {})),
        threads=doc.get("threads", 1),
        name=doc.get("name", "run"),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(doc)


def bundled_config(name: str) -> RunConfig:
    """One of the shipped configs, e.g. ``"example1"``."""
    return load_config(CONFIG_DIR / f"{name}.json")


# ---------------------------------------------------------------------------
# Model construction


def grid_values(spec) -> np.ndarray:
    """Expand ``{from, to, points}``, a list or a scalar into an array."""
    if spec is None:
        return np.array([])
    if isinstance(spec, dict):
        return np.linspace(spec["from"], spec["to"], spec["points"])
    return np.atleast_1d(np.asarray(spec, dtype=float))


def matrix_from(doc) -> np.ndarray:
    arr = np.asarray(doc, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError("operators must be square nested arrays of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def matrix_to_doc(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _builder_model(name, params):
    try:
        if name == "fermion_level":
            spinful = bool(params.get("spinful", 1))
            if spinful:
                imp = systems.fermion_level(params["eps"], params.get("U", 0.0))
                ops = {"d_up": imp.d_up, "d_dn": imp.d_dn}
                ops["n_up"] = imp.d_up.conj().T @ imp.d_up
                ops["n_dn"] = imp.d_dn.conj().T @ imp.d_dn
                return imp.H, ops
            H, d = systems.fermion_level(params["eps"], spinful=False)
            return H, {"d": d, "n": d.conj().T @ d}
        if name == "boson_mode":
            a = systems.boson_annihilator(int(params["n_photon"]))
            H = params["omega"] * a.conj().T @ a
            return H, {"a": a, "x": a + a.conj().T, "n": a.conj().T @ a}
        if name == "charge_cavity":
            cc = systems.charge_cavity(params["eps"], params["omega_c"], params["g"],
                                       int(params["n_photon"]))
            return cc.H, {"d": cc.d, "a": cc.a, "x": cc.quadrature,
                          "n": cc.d.conj().T @ cc.d, "n_photon": cc.a.conj().T @ cc.a}
    except KeyError as exc:
        raise ConfigError(f"config.system.params: builder {name!r} needs {exc.args[0]!r}") from exc
    raise ConfigError(f"unknown builder {name!r}")


@dataclass
class Model:
    H: np.ndarray
    operators: dict
    baths: list
    jumps: list

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def operator(self, name) -> np.ndarray:
        try:
            return self.operators[name]
        except KeyError:
            raise ConfigError(
                f"unknown operator {name!r}; available: {', '.join(sorted(self.operators))}"
            ) from None


def build_model(cfg: RunConfig, phi: float = 0.0) -> Model:
    """Hamiltonian, named operators, bath specs and jump operators at bias ``phi``.

    A bath with ``bias_sign = s`` gets ``mu + s * phi / 2``.
    """
    s = cfg.system
    if s.builder is not None:
        H, ops = _builder_model(s.builder, s.params)
    else:
        H, ops = matrix_from(s.hamiltonian), {}
    for name, m in s.operators.items():
        ops[name] = matrix_from(m)
    d = H.shape[0]
    for name, m in ops.items():
        if m.shape != (d, d):
            raise ConfigError(f"operator {name!r} has shape {m.shape}, system dimension is {d}")
    model = Model(H, ops, [], [])

    for i, b in enumerate(cfg.baths):
        mu = b.mu + b.bias_sign * phi / 2
        for ch in b.couplings:
            op = model.operator(ch)
            try:
                model.baths.append(_bath_spec(b, op, ch, mu))
            except bathmod.BathError as exc:
                raise ConfigError(f"config.baths[{i}]: {exc}") from exc

    for item in cfg.lindblad:
        op = model.operator(item.operator)
        if item.rate is not None:
            model.jumps.append(np.sqrt(item.rate) * op)
        else:
            th = item.thermal
            rate = float(bathmod.drude_lorentz_spectral_density(th["omega"], th["Delta"], th["W"]))
            model.jumps.extend(systems.thermal_jump_operators(op, rate, th["omega"], th["kT"]))
    return model


def _bath_spec(b: BathConfig, op, channel, mu):
    if b.family == "lorentzian":
        if b.decomposition == "pade":
            return bathmod.lorentzian_pade_fermion(op, b.Gamma, b.W, mu, b.kT, b.N,
                                                   channel=channel, bath_id=b.id)
        return bathmod.matsubara_decomposition(bathmod.Flavor.FERMIONIC, op, b.Gamma, b.W, mu,
                                               b.kT, b.N, channel=channel, bath_id=b.id)
    if b.family == "drude_lorentz":
        if b.decomposition == "pade":
            return bathmod.drude_lorentz_pade_boson(op, b.Delta, b.W, b.kT, b.N, channel=channel,
                                                    bath_id=b.id, combine=b.combine)
        return bathmod.matsubara_decomposition(bathmod.Flavor.BOSONIC, op, b.Delta, b.W, 0.0,
                                               b.kT, b.N, channel=channel, bath_id=b.id,
                                               combine=b.combine)
    coeffs = [complex(*e["coeff"]) for e in b.exponents]
    rates = [complex(*e["rate"]) for e in b.exponents]
    if b.flavor == "fermionic":
        nus = [e.get("nu", 1) for e in b.exponents]
        plus = [i for i, n in enumerate(nus) if n == 1]
        minus = [i for i, n in enumerate(nus) if n == -1]
        return bathmod.fermionic_bath(
            op, [coeffs[i] for i in plus], [rates[i] for i in plus],
            [coeffs[i] for i in minus], [rates[i] for i in minus],
            channel=channel, bath_id=b.id)
    parts = [bathmod.Part(e.get("part", "RI")) for e in b.exponents]
    return bathmod.bosonic_bath(op, coeffs, rates, parts, channel=channel, bath_id=b.id)
