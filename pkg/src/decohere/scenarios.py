"""Named experiment scenarios and the run report.

Each scenario writes its data files into the output directory and returns a
list of :class:`Check` results; a run passes iff every check passes.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .bath import correlation_function
from .config import SCENARIOS, ExperimentConfig
from .evolution import (ReducedDensityMatrix, SGrid, coherence_visibility, evolve_double_bath,
                        evolve_single_bath, purity, symmetry_protected_evolution,
                        to_momentum_representation)
from .io import emit_table, fmt, write_oracle_result
from .kernels import (DecoherenceFunctions, acceleration_factor, asymptotic_rate, decoherence_functions,
                      f_closed, f_phi_integral, golden_rule_rate, ohmic_rate_limit, phi_closed,
                      short_time_coefficients)
from .oracle import (FockBathConfig, convergence_report, double_bath_fock_propagate, fock_propagate,
                     mc_chi_square, mc_z_scores, wigner_mc_average)

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "DECOHERE_OUTPUT_DIR"


class ScenarioError(RuntimeError):
    pass


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""


@dataclass
class RunReport:
    scenario: str
    config_hash: str
    checks: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        # wall time is left out so the file is reproducible byte for byte
        d = {"scenario": self.scenario, "config_hash": self.config_hash, "passed": self.passed,
             "checks": [asdict(c) for c in self.checks], "outputs": self.outputs}
        return json.dumps(d, indent=2, sort_keys=True, default=float) + "\n"

    def lines(self) -> list[str]:
        out = [f"scenario {self.scenario} (config {self.config_hash})"]
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            out.append(f"  [{tag}] {c.name}: measured {fmt(c.measured)} vs {fmt(c.threshold)}"
                       + (f"  ({c.detail})" if c.detail else ""))
        out.append(f"  {'PASSED' if self.passed else 'FAILED'} in {self.wall_time:.2f} s")
        return out


class _Writer:
    def __init__(self, out: Path, cfg: ExperimentConfig):
        self.out = out
        self.cfg = cfg
        self.files: list[str] = []

    @property
    def provenance(self) -> list[str]:
        return [f"scenario={self.cfg.scenario} config_hash={self.cfg.config_hash} seed={self.cfg.seed}"]

    def table(self, name: str, data: dict):
        emit_table(data, self.out / name, self.provenance)
        self.files.append(name)

    def oracle(self, name: str, result):
        write_oracle_result(result, self.out / name, self.cfg.units,
                            {"config_hash": self.cfg.config_hash, "seed": self.cfg.seed})
        self.files.append(name)


def _loglog_slope(t, y) -> float:
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


def _pinned_coefficient(t, y, power: float) -> float:
    """Prefactor of ``y ~ c t^power`` fitted in log space with the exponent held fixed."""
    return float(np.exp(np.mean(np.log(y) - power * np.log(t))))


def _max_rel(a, b) -> float:
    scale = np.abs(b).max()
    d = np.abs(a - b).max()
    return float(d / scale) if scale > 0 else float(d)


# --- scenarios ------------------------------------------------------------------

def scenario_kernels(cfg: ExperimentConfig, w: _Writer) -> list[Check]:
    tol = cfg.tolerances
    bath, th, u = cfg.bath.build(), cfg.thermal, cfg.units
    t = cfg.time_grid()
    fc, pc = f_closed(bath, th, u, t), phi_closed(bath, u, t)
    fi, pi = f_phi_integral(correlation_function(bath, th, u, t), u)
    w.table("kernels.csv", {"t": t, "f": fc, "phi": pc, "f_integral": fi, "phi_integral": pi})
    dev = max(_max_rel(fi, fc), _max_rel(pi, pc))
    checks = [Check("integral_vs_closed", dev < tol["integral_rel"], dev, tol["integral_rel"],
                    "max deviation relative to the sup norm")]

    ts = np.logspace(-3, -2, 25) / bath.omega.max()
    fs, ps = f_closed(bath, th, u, ts), phi_closed(bath, u, ts)
    coeff = short_time_coefficients(bath, th, u)
    if np.all(fs > 0) and np.all(ps > 0):
        fslope, pslope = _loglog_slope(ts, fs), _loglog_slope(ts, ps)
        a_fit, b_fit = _pinned_coefficient(ts, fs, 2.0), _pinned_coefficient(ts, ps, 3.0)
        crel = max(abs(a_fit / coeff.f_quadratic - 1), abs(b_fit / coeff.phi_cubic - 1))
    else:
        fslope = pslope = crel = float("nan")
    w.table("short_time.csv", {"t": ts, "f": fs, "phi": ps})
    checks += [
        Check("f_short_time_slope", abs(fslope - 2.0) <= tol["f_slope"], fslope, 2.0, f"+/- {tol['f_slope']}"),
        Check("phi_short_time_slope", abs(pslope - 3.0) <= tol["phi_slope"], pslope, 3.0,
              f"+/- {tol['phi_slope']}"),
        Check("short_time_coefficients", crel < tol["coefficient_rel"], crel, tol["coefficient_rel"]),
    ]
    return checks


def scenario_single_bath_cat(cfg: ExperimentConfig, w: _Writer) -> list[Check]:
    delta = cfg.params["separation"]
    bath, th, u = cfg.bath.build(), cfg.thermal, cfg.units
    t = cfg.time_grid()
    K = decoherence_functions(bath, th, u, t)
    grid = SGrid(-delta / 2, delta, 2)
    rho0 = ReducedDensityMatrix.from_state(grid, [1.0, 1.0])
    vis, pur = [], []
    for k in range(t.size):
        rho = evolve_single_bath(rho0, K, k)
        vis.append(coherence_visibility(rho, [0], [1]))
        pur.append(purity(rho))
    vis, pur = np.array(vis), np.array(pur)
    pred = np.exp(-delta ** 2 * K.f)
    w.table("visibility.csv", {"t": t, "f": K.f, "visibility": vis, "predicted": pred, "purity": pur})
    dev = float(np.abs(vis - pred).max())
    rises = float(np.max(np.diff(pur), initial=0.0)) if np.all(np.diff(K.f) >= 0) else 0.0
    return [Check("visibility_vs_prediction", dev < cfg.tolerances["visibility_abs"], dev,
                  cfg.tolerances["visibility_abs"]),
            Check("purity_nonincreasing", rises <= 1e-15, rises, 1e-15, "largest step-to-step increase")]


def _double_bath_state(p: dict) -> ReducedDensityMatrix:
    n, ds = p["n"], p["ds"]
    grid = SGrid(-(n // 2) * ds, ds, n)
    s = grid.s
    psi = (np.exp(-(s - p["shift"]) ** 2 / (4 * p["width"] ** 2))
           + np.exp(-(s + p["shift"]) ** 2 / (4 * p["width"] ** 2)))
    return ReducedDensityMatrix.from_state(grid, psi)


def scenario_double_bath(cfg: ExperimentConfig, w: _Writer) -> list[Check]:
    p, tol = cfg.params, cfg.tolerances
    th, u = cfg.thermal, cfg.units
    bS, bR = cfg.bath.build(), cfg.bath_r.build()
    rho0 = _double_bath_state(p)
    t = p["step"] * np.arange(1, p["n_steps"] + 1)
    res = double_bath_fock_propagate(rho0, FockBathConfig(bS, p["n_max_s"], p["thermal_cutoff"]),
                                     FockBathConfig(bR, p["n_max_r"], p["thermal_cutoff"]),
                                     th, u, t, step=p["step"], boundary_band=2)
    K = decoherence_functions(bS, th, u, t, second_bath=bR)
    dev = np.array([np.abs(res.rho_series[k].elements - evolve_double_bath(rho0, K, u, k).elements).max()
                    for k in range(t.size)])
    w.table("double_bath_deviation.csv", {"t": t, "f": K.f, "F": K.F, "deviation": dev})
    pick = np.unique(np.round(np.logspace(0, np.log10(t.size), 12)).astype(int)) - 1
    sub = type(res)(t[pick], [res.rho_series[k] for k in pick], metadata=res.metadata)
    w.oracle("double_bath_oracle.txt", sub)
    exponent = _loglog_slope(t[pick], dev[pick])

    # momentum-basis decay of the smoothing factor alone (f = 0)
    F = p["momentum_F"]
    K0 = DecoherenceFunctions(np.array([0.0, 1.0]), np.zeros(2), np.zeros(2), np.array([0.0, F]))
    lhs = to_momentum_representation(evolve_double_bath(rho0, K0, u, 1), u)
    rho_r = to_momentum_representation(rho0, u)
    r = rho_r.grid.s
    rhs = rho_r.elements * np.exp(-(r[:, None] - r[None, :]) ** 2 * F)
    mdev = float(np.abs(lhs.elements - rhs).max())
    return [Check("short_time_exponent", exponent >= tol["min_exponent"], exponent, tol["min_exponent"],
                  f"log-log fit over t in [{t[0]:g}, {t[-1]:g}]"),
            Check("momentum_decay_identity", mdev < tol["momentum_abs"], mdev, tol["momentum_abs"])]


def scenario_golden_rule_compare(cfg: ExperimentConfig, w: _Writer) -> list[Check]:
    p, tol = cfg.params, cfg.tolerances
    th, u = cfg.thermal, cfg.units
    J = cfg.bath.spectral_density()
    bath = cfg.bath.build()
    wc = J.omega_c
    tr = np.linspace(0.0, p["rate_window"], p["rate_points"])
    rate = asymptotic_rate(correlation_function(bath, th, u, tr), u)
    limit = ohmic_rate_limit(J, th, u)
    g_gr = golden_rule_rate(J, p["Omega"], th, u)
    rate_rel = abs(rate.gamma - limit) / limit if limit > 0 else abs(rate.gamma)

    t_long = np.linspace(p["long_time_factor"] / wc, p["long_time_max"], 60)
    lin = float(np.max(np.abs(f_closed(bath, th, u, t_long) / t_long - rate.gamma)) / rate.gamma)
    t_short = np.linspace(0.0, p["short_time_factor"] / wc, 51)[1:]
    short = float(np.max(f_closed(bath, th, u, t_short) / (g_gr * t_short)))

    t_all = np.logspace(np.log10(1e-4 / wc), np.log10(p["long_time_max"]), 200)
    f_all = f_closed(bath, th, u, t_all)
    w.table("golden_rule.csv", {"t": t_all, "f": f_all, "f_over_t": f_all / t_all,
                                "gamma": np.full_like(t_all, rate.gamma), "gamma_gr": np.full_like(t_all, g_gr)})
    return [Check("rate_vs_limit_formula", rate_rel < tol["rate_rel"], rate_rel, tol["rate_rel"],
                  f"gamma={rate.gamma:.6g}, limit={limit:.6g}, tail bound {rate.tail_bound:.2g}"),
            Check("linear_regime", lin < tol["linear_rel"], lin, tol["linear_rel"],
                  f"max |f/t - gamma|/gamma for t in [{t_long[0]:g}, {t_long[-1]:g}]"),
            Check("golden_rule_breakdown", short < tol["short_ratio"], short, tol["short_ratio"],
                  f"max f/(gamma_GR t) for t <= {t_short[-1]:g}, gamma_GR={g_gr:.6g}")]


def scenario_acceleration_sweep(cfg: ExperimentConfig, w: _Writer) -> list[Check]:
    p = cfg.params
    bath = cfg.bath.build()
    K = decoherence_functions(bath, cfg.thermal, cfg.units, cfg.time_grid())
    est = [acceleration_factor(K, p["gamma_diss"], d) for d in p["deltas"]]
    deltas = np.array([e.delta for e in est])
    ratios = np.array([e.ratio for e in est])
    w.table("acceleration.csv", {"delta": deltas, "tau_dec": [e.tau_dec for e in est],
                                 "tau_diss": [e.tau_diss for e in est], "ratio": ratios,
                                 "ratio_delta2": ratios * deltas ** 2})
    slope = _loglog_slope(deltas, ratios)
    return [Check("ratio_scaling_slope", abs(slope + 2.0) <= cfg.tolerances["slope"], slope, -2.0,
                  f"+/- {cfg.tolerances['slope']}")]


def scenario_symmetry_protection(cfg: ExperimentConfig, w: _Writer) -> list[Check]:
    sigma = cfg.params["sigma"]
    bath, th, u = cfg.bath.build(), cfg.thermal, cfg.units
    t = cfg.time_grid()
    K = decoherence_functions(bath, th, u, t)
    # Sigma eigenvalues -sigma, 0, sigma, 2 sigma; the coupling agent is Sigma^2
    grid = SGrid(-sigma, sigma, 4)
    rho0 = ReducedDensityMatrix.from_state(grid, [1.0, 0.0, 1.0, 1.0])
    s1, s2 = sigma ** 2, (2 * sigma) ** 2
    prot, other = [], []
    for k in range(t.size):
        rho = symmetry_protected_evolution(rho0, np.square, K, k)
        prot.append(rho.elements[0, 2])
        other.append(rho.elements[2, 3])
    prot, other = np.array(prot), np.array(other)
    pred = rho0.elements[2, 3] * np.exp(-(s1 - s2) ** 2 * K.f + 1j * (s1 ** 2 - s2 ** 2) * K.phi)
    w.table("symmetry.csv", {"t": t, "protected_abs": np.abs(prot), "other_abs": np.abs(other),
                             "other_predicted_abs": np.abs(pred)})
    pdev = float(np.abs(prot - rho0.elements[0, 2]).max())
    odev = float(np.abs(other - pred).max())
    tol = cfg.tolerances
    return [Check("degenerate_coherence_unchanged", pdev <= tol["protected_abs"], pdev, tol["protected_abs"]),
            Check("nondegenerate_coherence_decay", odev <= tol["decay_abs"], odev, tol["decay_abs"])]


def scenario_oracle_validate(cfg: ExperimentConfig, w: _Writer) -> list[Check]:
    p, tol = cfg.params, cfg.tolerances
    bath, th, u = cfg.bath.build(), cfg.thermal, cfg.units
    t = cfg.time_grid()
    if cfg.grid is not None:
        grid = SGrid(cfg.grid["s_min"], cfg.grid["ds"], cfg.grid["n"])
    else:
        grid = SGrid(-p["separation"] / 2, p["separation"] / 2, 3)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    rho0 = ReducedDensityMatrix.from_state(grid, rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n))
    fcfg = FockBathConfig(bath, p["n_max"], p["thermal_cutoff"])
    res = fock_propagate(rho0, fcfg, th, u, t)
    doubled = fock_propagate(rho0, fcfg.doubled(), th, u, t, step_check=False)
    res.convergence = convergence_report(res, doubled)
    K = decoherence_functions(bath, th, u, t)
    dev = np.array([np.abs(res.rho_series[k].elements - evolve_single_bath(rho0, K, k).elements).max()
                    for k in range(t.size)])
    w.table("oracle_deviation.csv", {"t": t, "f": K.f, "phi": K.phi, "deviation": dev})
    w.oracle("oracle_result.txt", res)
    return [Check("cutoff_convergence", res.convergence < tol["convergence"], res.convergence, tol["convergence"]),
            Check("oracle_vs_analytic", dev.max() < tol["deviation"], float(dev.max()), tol["deviation"])]


def scenario_mc_validate(cfg: ExperimentConfig, w: _Writer) -> list[Check]:
    p = cfg.params
    bath, th, u = cfg.bath.build(), cfg.thermal, cfg.units
    t = cfg.time_grid()
    s, sp = p["s"], p["s_prime"]
    mc = wigner_mc_average((s, sp), bath, th, u, t, p["n_samples"], cfg.seed)
    ref = np.exp(-(s - sp) ** 2 * f_closed(bath, th, u, t) + 1j * (s ** 2 - sp ** 2) * phi_closed(bath, u, t))
    w.table("mc.csv", {"t": t, "mean_re": mc.mean.real, "mean_im": mc.mean.imag, "stderr_re": mc.stderr_re,
                       "stderr_im": mc.stderr_im, "reference_re": ref.real, "reference_im": ref.imag})
    nsig = cfg.tolerances["n_sigma"]
    worst = float(np.max(mc_z_scores(mc, ref)))
    chi2, dof, (lo, hi) = mc_chi_square(mc, ref)
    return [Check("pointwise_within_n_sigma", worst <= nsig, worst, nsig,
                  f"max |mean - ref| / stderr over {t.size} times"),
            Check("chi_square_in_band", dof == 0 or lo <= chi2 <= hi, chi2, hi,
                  f"dof={dof}, 99.8% band [{lo:.4g}, {hi:.4g}]")]


SCENARIO_RUNNERS: dict[str, Callable[[ExperimentConfig, _Writer], list]] = {
    "kernels": scenario_kernels,
    "single_bath_cat": scenario_single_bath_cat,
    "double_bath": scenario_double_bath,
    "golden_rule_compare": scenario_golden_rule_compare,
    "acceleration_sweep": scenario_acceleration_sweep,
    "symmetry_protection": scenario_symmetry_protection,
    "oracle_validate": scenario_oracle_validate,
    "mc_validate": scenario_mc_validate,
}
assert set(SCENARIO_RUNNERS) == set(SCENARIOS)

# every report must list exactly these checks
SCENARIO_CHECKS: dict[str, tuple[str, ...]] = {
    "kernels": ("integral_vs_closed", "f_short_time_slope", "phi_short_time_slope", "short_time_coefficients"),
    "single_bath_cat": ("visibility_vs_prediction", "purity_nonincreasing"),
    "double_bath": ("short_time_exponent", "momentum_decay_identity"),
    "golden_rule_compare": ("rate_vs_limit_formula", "linear_regime", "golden_rule_breakdown"),
    "acceleration_sweep": ("ratio_scaling_slope",),
    "symmetry_protection": ("degenerate_coherence_unchanged", "nondegenerate_coherence_decay"),
    "oracle_validate": ("cutoff_convergence", "oracle_vs_analytic"),
    "mc_validate": ("pointwise_within_n_sigma", "chi_square_in_band"),
}


def output_directory(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)


def run_scenario(cfg: ExperimentConfig, output_dir=None) -> RunReport:
    """Run one scenario, write its files and ``report.json``, and return the report."""
    out = Path(output_dir) if output_dir is not None else output_directory(cfg)
    writer = _Writer(out, cfg)
    start = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        checks = SCENARIO_RUNNERS[cfg.scenario](cfg, writer)
    except Exception as exc:
        raise ScenarioError(f"scenario {cfg.scenario}: {exc}") from exc
    names = tuple(c.name for c in checks)
    if names != SCENARIO_CHECKS[cfg.scenario]:
        raise ScenarioError(f"scenario {cfg.scenario}: reported checks {names} "
                            f"differ from the declared {SCENARIO_CHECKS[cfg.scenario]}")
    report = RunReport(cfg.scenario, cfg.config_hash, checks, writer.files + ["report.json"])
    report.wall_time = time.perf_counter() - start
    try:
        (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"scenario {cfg.scenario}: {exc}") from exc
    return report
