"""Run configuration: INI-style sections of ``key = value`` pairs.

Sections
--------
[run]          seed, tol, output_dir, mc_samples, a_csl_m, species, weighting
[species]      optional inline species: name, mass_number, mass_kg, scattering_length_m
[environment]  tau_1_s, tau_1_sigma_s, jitter_psd_m2_per_Hz, pressure_note
[trap NAME]    f1_Hz, f2_Hz, f3_Hz, depth_nK, a_s_a0, plus either data files
               (number_data, fraction_data) or fitted values (n0, f0, tau_n_s,
               tau_f_s, tau_cool_s, k3c_m6_per_s and their *_sigma keys)
[simulate]     mode (bec-decay | cloud), lambda_per_s, n_atoms, temperature_nK,
               hbar_omega_nK, t_csl_nK, t_max_s, slices, steps

Unknown sections or keys are rejected before anything is computed.
Relative data paths are resolved against the config file's directory.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .core import A0, Species, species_by_name, trap_derived
from .errors import ConfigError

_RUN = {
    "seed": (int, 0),
    "tol": (float, 1e-10),
    "output_dir": (str, "out"),
    "mc_samples": (int, 2000),
    "a_csl_m": (float, 1e-7),
    "species": (str, "Cs-133"),
    "weighting": (str, "unweighted"),
}
_SPECIES = {
    "name": (str, None),
    "mass_number": (int, None),
    "mass_kg": (float, None),
    "scattering_length_m": (float, None),
}
_ENV = {
    "tau_1_s": (float, 320.0),
    "tau_1_sigma_s": (float, 0.0),
    "jitter_psd_m2_per_Hz": (float, 0.0),
    "pressure_note": (str, ""),
}
_FITTED = {
    "n0": "n0",
    "f0": "f0",
    "tau_n_s": "tau_n",
    "tau_f_s": "tau_f",
    "tau_cool_s": "tau_cool",
    "k3c_m6_per_s": "k3c",
}
_TRAP = {
    "f1_Hz": (float, None),
    "f2_Hz": (float, None),
    "f3_Hz": (float, None),
    "depth_nK": (float, None),
    "a_s_a0": (float, None),
    "number_data": (str, None),
    "fraction_data": (str, None),
}
_SIM = {
    "mode": (str, None),
    "lambda_per_s": (float, None),
    "n_atoms": (float, 5000.0),
    "temperature_nK": (float, 0.0),
    "hbar_omega_nK": (float, 5.0),
    "t_csl_nK": (float, 0.0),
    "t_max_s": (float, None),
    "slices": (int, 5),
    "steps": (int, 100),
}


def _sigma_key(key: str) -> str:
    if key == "k3c_m6_per_s":
        return "k3c_sigma_m6_per_s"
    if key.endswith("_s"):
        return key[:-2] + "_sigma_s"
    return key + "_sigma"


for _k in _FITTED:
    _TRAP[_k] = (float, None)
    _TRAP[_sigma_key(_k)] = (float, 0.0)


@dataclass
class TrapConfig:
    name: str
    trap: object
    species: Species
    number_data: Path | None = None
    fraction_data: Path | None = None
    fitted: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    seed: int
    tol: float
    output_dir: Path
    mc_samples: int
    a_csl: float
    species: Species
    weighting: str
    tau_1: tuple
    jitter_psd: float
    pressure_note: str
    traps: list
    simulate: dict | None
    source_hash: str


def _parse_section(section, schema, where):
    out = {}
    for key in section:
        if key not in schema:
            raise ConfigError(f"[{where}] unknown key {key!r}")
    for key, (conv, default) in schema.items():
        if key in section:
            raw = section[key].strip()
            try:
                out[key] = conv(raw)
            except ValueError:
                raise ConfigError(f"[{where}] {key} = {raw!r} is not a valid {conv.__name__}") from None
        else:
            out[key] = default
    return out


def _require(values, keys, where):
    missing = [k for k in keys if values.get(k) is None]
    if missing:
        raise ConfigError(f"[{where}] missing required keys: {', '.join(missing)}")


def _positive(values, keys, where):
    for k in keys:
        v = values.get(k)
        if v is not None and not (v > 0):
            raise ConfigError(f"[{where}] {k} must be positive")


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    base_dir = Path(base_dir)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    known = {"run", "species", "environment", "simulate"}
    for name in cp.sections():
        if name not in known and not name.startswith("trap "):
            raise ConfigError(f"unknown section [{name}]")

    run = _parse_section(cp["run"] if cp.has_section("run") else {}, _RUN, "run")
    _positive(run, ["tol", "a_csl_m"], "run")
    if run["mc_samples"] < 0:
        raise ConfigError("[run] mc_samples must be >= 0")
    if run["seed"] < 0:
        raise ConfigError("[run] seed must be >= 0")
    if run["weighting"] not in ("unweighted", "inverse_variance"):
        raise ConfigError("[run] weighting must be unweighted or inverse_variance")

    if cp.has_section("species"):
        sp = _parse_section(cp["species"], _SPECIES, "species")
        _require(sp, list(_SPECIES), "species")
        try:
            species = Species(sp["name"], sp["mass_number"], sp["mass_kg"], sp["scattering_length_m"])
        except ValueError as exc:
            raise ConfigError(f"[species] {exc}") from None
    else:
        try:
            species = species_by_name(run["species"])
        except (KeyError, ValueError):
            raise ConfigError(f"[run] unknown species {run['species']!r}") from None

    env = _parse_section(cp["environment"] if cp.has_section("environment") else {}, _ENV, "environment")
    _positive(env, ["tau_1_s"], "environment")
    if env["jitter_psd_m2_per_Hz"] < 0 or env["tau_1_sigma_s"] < 0:
        raise ConfigError("[environment] PSD and sigma must be >= 0")

    traps = []
    for name in cp.sections():
        if not name.startswith("trap "):
            continue
        label = name[5:].strip()
        v = _parse_section(cp[name], _TRAP, name)
        _require(v, ["f1_Hz", "f2_Hz", "f3_Hz", "depth_nK"], name)
        _positive(v, ["f1_Hz", "f2_Hz", "f3_Hz", "depth_nK", "a_s_a0"], name)
        sp = species if v["a_s_a0"] is None else species.with_scattering_length(v["a_s_a0"] * A0)
        trap = trap_derived(v["f1_Hz"], v["f2_Hz"], v["f3_Hz"], v["depth_nK"], sp)
        fitted = {}
        for key, short in _FITTED.items():
            if v[key] is not None:
                fitted[short] = (v[key], v[_sigma_key(key)])
        if v["number_data"] and any(k in fitted for k in ("n0", "tau_n", "tau_cool", "k3c")):
            raise ConfigError(f"[{name}] give either number_data or fitted number values, not both")
        if v["fraction_data"] and ("tau_f" in fitted or "f0" in fitted):
            raise ConfigError(f"[{name}] give either fraction_data or f0/tau_f_s, not both")
        need = set()
        if not v["number_data"]:
            need |= {"n0", "tau_n", "tau_cool"}
        if not v["fraction_data"]:
            need |= {"f0", "tau_f"}
        missing = sorted(need - set(fitted))
        if missing:
            raise ConfigError(f"[{name}] missing fitted values or data files for: {', '.join(missing)}")
        for short, (val, sd) in fitted.items():
            if not val > 0 or sd < 0:
                raise ConfigError(f"[{name}] {short} must be positive with sigma >= 0")
        if "f0" in fitted and not fitted["f0"][0] < 1:
            raise ConfigError(f"[{name}] f0 must be below 1")
        traps.append(
            TrapConfig(
                label,
                trap,
                sp,
                base_dir / v["number_data"] if v["number_data"] else None,
                base_dir / v["fraction_data"] if v["fraction_data"] else None,
                fitted,
            )
        )

    simulate = None
    if cp.has_section("simulate"):
        simulate = _parse_section(cp["simulate"], _SIM, "simulate")
        _require(simulate, ["mode", "lambda_per_s", "t_max_s"], "simulate")
        if simulate["mode"] not in ("bec-decay", "cloud"):
            raise ConfigError("[simulate] mode must be bec-decay or cloud")
        _positive(simulate, ["t_max_s", "n_atoms", "hbar_omega_nK", "slices", "steps"], "simulate")
        if simulate["lambda_per_s"] < 0 or simulate["temperature_nK"] < 0:
            raise ConfigError("[simulate] lambda and temperature must be >= 0")

    return RunConfig(
        run["seed"],
        run["tol"],
        base_dir / run["output_dir"],
        run["mc_samples"],
        run["a_csl_m"],
        species,
        run["weighting"],
        (env["tau_1_s"], env["tau_1_sigma_s"]),
        env["jitter_psd_m2_per_Hz"],
        env["pressure_note"],
        traps,
        simulate,
        hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)
