"""End-to-end batch run: fits, audits, aggregate bound and simulation output."""

from __future__ import annotations

import datetime as _dt
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .audit import AuditInput, Measured, aggregate_traps, residual_heating
from .config import RunConfig
from .core import CslParams, Species, t_csl_of
from .csl_dynamics import bec_spectrum, bec_survival, default_grid, evolve_series, thermal_distribution
from .fitting import DecayModel, fit_fraction_decay, fit_number_decay
from .io import format_csv, ingest_series, to_json

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# simulations


def simulate_bec_decay(n0: float, rate_A2: float, t_max: float, steps: int, correction: float = 0.0):
    """Rows (t_s, N) of the condensate population with no repopulation."""
    t = np.linspace(0.0, t_max, steps + 1)
    return list(zip(t, bec_survival(n0, rate_A2, t, correction)))


def simulate_cloud(
    n_atoms: float,
    rate_A2: float,
    t_csl: float,
    t_max: float,
    slices: int,
    temperature: float = 0.0,
    hbar_omega: float = 5.0,
    eps1: float | None = None,
    tol: float = 1e-12,
):
    """Energy spectra at ``slices`` evenly spaced times in [0, t_max].

    A positive temperature starts from a thermal cloud above T_c; zero
    starts from a condensate at energy ``eps1`` (default hbar*omega/2).
    Returns (spectrum rows (t_s, eps_nK, N_per_nK), ground rows (t_s, N)).
    """
    times = np.linspace(0.0, t_max, max(slices, 2))
    extent = 40 * temperature if temperature > 0 else 10 * hbar_omega
    grid = default_grid(t_csl, rate_A2 * t_max, extent, tol=tol)
    rows, ground = [], []
    if temperature > 0:
        dist0 = thermal_distribution(n_atoms, temperature, hbar_omega, grid)
        for t in times:
            d = evolve_series(dist0, rate_A2, t_csl, t, tol=tol)
            rows += [(t, e, v) for e, v in zip(d.grid, d.values)]
    else:
        eps1 = hbar_omega / 2 if eps1 is None else eps1
        for t in times:
            g, d = bec_spectrum(n_atoms, eps1, rate_A2, t_csl, t, grid, tol=tol)
            ground.append((t, g))
            rows += [(t, e, v) for e, v in zip(d.grid, d.values)]
    return rows, ground


# ---------------------------------------------------------------------------
# audit pipeline


def _fit_entry(fit, units):
    out = {}
    for name, unit in units.items():
        out[f"{name}_{unit}"] = fit[name]
        out[f"{name}_sigma_{unit}"] = fit.sigma(name)
    return out


def _process_trap(tc, cfg: RunConfig, seed: int):
    """Fit (when data are given) and audit one trap.

    Returns the report entry, the AuditReport and CSV artifacts as
    (filename, text) pairs; files are written by the caller.
    """
    artifacts = []
    fitted = {k: Measured(*v) for k, v in tc.fitted.items()}
    fit_info = {"source": "config" if not (tc.number_data or tc.fraction_data) else "data"}
    if tc.fraction_data:
        series = ingest_series(tc.fraction_data, "condensate_fraction")
        fr = fit_fraction_decay(series)
        fitted["f0"] = Measured(fr["f0"], fr.sigma("f0"))
        fitted["tau_f"] = Measured(fr["tau_f"], fr.sigma("tau_f"))
        fit_info["fraction"] = _fit_entry(fr, {"f0": "fraction", "tau_f": "s"})
        fit_info["fraction"]["rss_fraction2"] = fr.rss
        model = fr["f0"] * np.exp(-series.t / fr["tau_f"])
        artifacts.append((f"fit_{tc.name}_fraction.csv", format_csv(["t_s", "value", "model"], zip(series.t, series.values, model))))
    if tc.number_data:
        series = ingest_series(tc.number_data, "particle_number")
        nf = fit_number_decay(series, tc.trap, tc.species, f0=fitted["f0"].value)
        fitted["n0"] = Measured(nf["n0"], nf.sigma("n0"))
        fitted["k3c"] = Measured(nf["k3c"], nf.sigma("k3c"))
        fitted["tau_cool"] = Measured(nf["tau_cool"], nf.sigma("tau_cool"))
        fitted["tau_n"] = Measured(nf.derived["tau_n"], nf.derived["tau_n_sigma"])
        entry = _fit_entry(nf, {"k3c": "m6_per_s", "n0": "atoms", "tau_cool": "s"})
        entry["tau_n_s"] = nf.derived["tau_n"]
        entry["tau_n_sigma_s"] = nf.derived["tau_n_sigma"]
        entry["temperature_nK"] = nf.derived["temperature_nK"]
        entry["runs_test_p_dimensionless"] = nf.derived["runs_p"]
        fit_info["number"] = entry
        dm = DecayModel(nf.derived["temperature_nK"], tc.trap, tc.species, n_range=(1e-4 * 4 * series.values.max(), 4 * series.values.max()))
        model = dm.solve(nf["k3c"], nf["n0"], nf["tau_cool"], series.t)
        artifacts.append((f"fit_{tc.name}_number.csv", format_csv(["t_s", "value", "model"], zip(series.t, series.values, model))))
    units = {"n0": "atoms", "f0": "fraction", "tau_n": "s", "tau_f": "s", "tau_cool": "s", "k3c": "m6_per_s"}
    fit_info["inputs"] = {}
    for k, m in sorted(fitted.items()):
        fit_info["inputs"][f"{k}_{units[k]}"] = m.value
        fit_info["inputs"][f"{k}_sigma_{units[k]}"] = m.sigma
    inp = AuditInput(
        tc.trap,
        fitted,
        tc.species,
        tau_1=Measured(*cfg.tau_1),
        jitter_psd=cfg.jitter_psd,
        a_csl=cfg.a_csl,
        name=tc.name,
    )
    report = residual_heating(inp, n_samples=cfg.mc_samples, seed=seed)
    d = report.to_dict()
    entry = {
        "name": tc.name,
        "fit": fit_info,
        "thermo": d["thermo"],
        "channels": {**d["channels"], "du_dt_exp_nK_per_s": d["du_dt_exp_nK_per_s"], "du_dt_exp_sigma_nK_per_s": d["du_dt_exp_sigma_nK_per_s"], "dT_dt_nK_per_s": d["dT_dt_nK_per_s"]},
        "r_in": d["r_in"],
        "flags": d["flags"],
    }
    return entry, report, artifacts


def _simulate_block(cfg: RunConfig):
    sim = cfg.simulate
    species: Species = cfg.species
    rate = CslParams(sim["lambda_per_s"], cfg.a_csl).rate_A2(species)
    t_csl = sim["t_csl_nK"] or t_csl_of(species, cfg.a_csl)
    tol = max(cfg.tol, 1e-15)
    if sim["mode"] == "bec-decay":
        rows = simulate_bec_decay(sim["n_atoms"], rate, sim["t_max_s"], sim["steps"])
        return [("spectrum_bec_decay.csv", format_csv(["t_s", "N"], rows))]
    rows, ground = simulate_cloud(sim["n_atoms"], rate, t_csl, sim["t_max_s"], sim["slices"], sim["temperature_nK"], sim["hbar_omega_nK"], tol=tol)
    out = [("spectrum_cloud.csv", format_csv(["t_s", "eps_nK", "N_per_nK"], rows))]
    if ground:
        out.append(("spectrum_ground.csv", format_csv(["t_s", "N"], ground)))
    return out


def run_pipeline(cfg: RunConfig, out_dir=None, max_workers: int = 4) -> int:
    """Run every configured stage and write artifacts to the output directory.

    Returns 0 on success. If any stage fails, everything written is kept
    with a ``.partial`` suffix and 1 is returned.
    """
    out_dir = Path(out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    children = np.random.SeedSequence(cfg.seed).spawn(len(cfg.traps))
    seeds = [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]
    errors = []
    results = [None] * len(cfg.traps)
    artifacts = []

    if cfg.traps:
        with ThreadPoolExecutor(max_workers=min(max_workers, len(cfg.traps))) as pool:
            futures = [pool.submit(_process_trap, tc, cfg, s) for tc, s in zip(cfg.traps, seeds)]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:  # report every failing trap, keep going
                    log.error("trap %s failed: %s", cfg.traps[i].name, exc)
                    errors.append({"trap": cfg.traps[i].name, "error": f"{type(exc).__name__}: {exc}"})
    for r in results:
        if r is not None:
            artifacts += r[2]
    if cfg.simulate is not None:
        try:
            artifacts += _simulate_block(cfg)
        except Exception as exc:
            log.error("simulation failed: %s", exc)
            errors.append({"stage": "simulate", "error": f"{type(exc).__name__}: {exc}"})

    done = [r for r in results if r is not None]
    agg = aggregate_traps([r[1] for r in done], cfg.species, cfg.a_csl, cfg.weighting)
    report = {
        "traps": [r[0] for r in done],
        "aggregate": {
            "n_traps": agg["n_traps"],
            "r_in_mean_nK_per_s": agg["r_in_mean_nK_per_s"],
            "r_in_sigma_nK_per_s": agg["r_in_sigma_nK_per_s"],
            "lambda_bound_per_s": agg["lambda_bound_per_s"],
            "lambda_sigma_per_s": agg["lambda_sigma_per_s"],
            "a_csl_m": cfg.a_csl,
            "t_csl_nK": t_csl_of(cfg.species, cfg.a_csl),
        },
        "provenance": {
            "config_sha256": cfg.source_hash,
            "seed": cfg.seed,
            "version": __version__,
            "mc_samples": cfg.mc_samples,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        },
    }
    if cfg.pressure_note:
        report["provenance"]["pressure_note"] = cfg.pressure_note
    if errors:
        report["errors"] = errors
    suffix = ".partial" if errors else ""
    for name, text in artifacts:
        (out_dir / (name + suffix)).write_text(text, encoding="utf-8")
    (out_dir / ("report.json" + suffix)).write_text(to_json(report), encoding="utf-8")
    return 1 if errors else 0


__all__ = ["run_pipeline", "simulate_bec_decay", "simulate_cloud"]
