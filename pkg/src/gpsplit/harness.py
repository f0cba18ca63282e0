"""Convergence studies over a tau-ladder: configuration, order fits, reports.

A study builds one discretized problem, computes a fine Strang reference
once per initial datum, then runs every (stepper, tau) pair against it,
measuring L2 and energy-norm errors at the final time and as a sup over
common snapshot times. Everything is deterministic given the config and
seed; reports serialize byte-identically.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cutoff import CutoffProfile
from .errors import BlowUpSuspected, ConfigError, InsufficientData
from .flows import (
    STEPPERS,
    LambdaRule,
    NonlinearitySpec,
    Problem,
    SchemeConfig,
    run_scheme,
    strang_reference,
)
from .hamiltonian import (
    DiscretizedHamiltonian,
    Grid1D,
    PotentialSpec,
    State,
    eigendecompose,
    load_potential_table,
)
from . import diagnostics

FIT_FLOOR = 1e-13
CSV_COLUMNS = ("stepper", "tau", "lambda", "err_L2_final", "err_L2_sup",
               "err_H1_final", "err_H1_sup", "mass_drift", "energy_drift", "status")


@dataclass
class ExperimentConfig:
    """Flat description of one study; field names double as config-file keys."""

    grid_n: int = 512
    grid_half_width: float = 12.0
    potential: str = "harmonic"
    potential_omega: float = 1.0
    potential_offset: float = 0.0
    potential_table: str = ""
    perturbation: str = "none"
    perturbation_amplitude: float = 1.0
    perturbation_width: float = 1.0
    perturbation_table: str = ""
    sigma: float = 1.0
    epsilon: int = 1
    initial_kind: str = "gaussian"
    initial_center: float = 0.0
    initial_width: float = 1.0
    initial_alpha: float = 1.25
    initial_coeffs: str = "1"
    steppers: str = "cutoff_lie"
    lambda_rule: str = "inverse"
    lambda_c: float = 1.0
    lambda_gamma: float = 1.0
    cutoff_profile: str = "exp_bump"
    smoothstep_order: int = 5
    tau0: float = 2.0 ** -4
    ladder_levels: int = 7
    final_time: float = 1.0
    tau_ref: float = 2.0 ** -15
    error_norms: str = "L2,calH1"
    seed: int = 0
    snapshot_stride: int = 1
    blowup_guard_factor: float = 1e6
    probe_lambdas: str = "8,32,128"
    probe_trials: int = 12
    probe_p: float = 1.0
    probe_q: float = math.inf
    probe_strichartz_q: float = 8.0
    probe_strichartz_r: float = 4.0
    probe_t_count: int = 8
    probe_horizon: float = 1.0

    def __post_init__(self):
        self.validate()

    @property
    def taus(self) -> list[float]:
        return [self.tau0 * 2.0 ** -k for k in range(self.ladder_levels)]

    @property
    def stepper_list(self) -> list[str]:
        return [s.strip() for s in self.steppers.split(",") if s.strip()]

    def validate(self) -> None:
        if self.ladder_levels < 4:
            raise ConfigError("order fits need at least 4 ladder points")
        if not 0 < self.tau0 < 1:
            raise ConfigError(f"need tau0 in (0, 1), got {self.tau0}")
        for tau in self.taus:
            steps = self.final_time / tau
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                raise ConfigError(f"final_time/tau = {steps} is not an integer (tau={tau})")
        if self.tau_ref > min(self.taus) / 32 * (1 + 1e-12):
            raise ConfigError(
                f"tau_ref = {self.tau_ref} must be <= min(tau)/32 = {min(self.taus)/32}"
            )
        ratio = min(self.taus) / self.tau_ref
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError("min(tau) must be an integer multiple of tau_ref")
        if not self.stepper_list:
            raise ConfigError("no steppers configured")
        for s in self.stepper_list:
            if s not in STEPPERS:
                raise ConfigError(f"unknown stepper {s!r}")
        norms = [s.strip() for s in self.error_norms.split(",") if s.strip()]
        if set(norms) - {"L2", "calH1"}:
            raise ConfigError(f"unsupported error norms in {self.error_norms!r}")
        if self.initial_kind not in ("gaussian", "eigen_mix", "rough"):
            raise ConfigError(f"unknown initial data kind {self.initial_kind!r}")
        if self.initial_kind == "rough" and not self.initial_alpha > 1:
            raise ConfigError("rough data needs alpha > 1 to lie in the energy space")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: (repr(v) if isinstance(v, float) else v) for k, v in d.items()}


_CONFIG_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _convert(key: str, raw: str):
    kind = _CONFIG_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Flat key = value format, '#' comments; unknown keys are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))


@dataclass
class Experiment:
    """Config resolved into concrete grid-level objects."""

    config: ExperimentConfig
    ham: DiscretizedHamiltonian
    w_values: np.ndarray
    problem: Problem
    u0: State


def build_experiment(cfg: ExperimentConfig) -> Experiment:
    grid = Grid1D(cfg.grid_n, cfg.grid_half_width)
    kwargs = {}
    if cfg.perturbation == "gaussian":
        kwargs = dict(w_kind="gaussian", w_amplitude=cfg.perturbation_amplitude,
                      w_width=cfg.perturbation_width)
    elif cfg.perturbation == "tabulated":
        kwargs = dict(w_kind="tabulated",
                      w_values=load_potential_table(cfg.perturbation_table, grid))
    elif cfg.perturbation != "none":
        raise ConfigError(f"unknown perturbation {cfg.perturbation!r}")
    if cfg.potential == "harmonic":
        pot = PotentialSpec.harmonic(cfg.potential_omega, cfg.potential_offset, **kwargs)
    elif cfg.potential == "tabulated":
        pot = PotentialSpec.tabulated(load_potential_table(cfg.potential_table, grid), **kwargs)
    else:
        raise ConfigError(f"unknown potential {cfg.potential!r}")
    ham = eigendecompose(grid, pot)
    w_values = pot.sample_perturbation(grid)
    nl = NonlinearitySpec(cfg.sigma, cfg.epsilon)
    u0 = make_initial_data(cfg.initial_kind, ham, cfg.seed, center=cfg.initial_center,
                           width=cfg.initial_width, alpha=cfg.initial_alpha,
                           coeffs=cfg.initial_coeffs)
    return Experiment(cfg, ham, w_values, Problem(ham, w_values, nl), u0)


def make_initial_data(kind: str, ham: DiscretizedHamiltonian, seed: int, *,
                      center: float = 0.0, width: float = 1.0, alpha: float = 1.25,
                      coeffs: str = "1") -> State:
    """Initial data in the two regularity classes the studies need.

    gaussian: normalized grid Gaussian (entire, so in every energy space);
    eigen_mix: prescribed eigenbasis coefficients, taken as given;
    rough(alpha): c_j = (1 + mu_j)^(-alpha) e^(i theta_j) with seeded
    phases, normalized; alpha = 1.25 sits in the energy space but not in
    the domain of H.
    """
    if kind == "gaussian":
        x = ham.grid.nodes
        vals = np.exp(-((x - center) ** 2) / (2.0 * width ** 2)).astype(complex)
        return State.from_grid(ham, vals / ham.grid.norm(vals))
    if kind == "eigen_mix":
        c = np.asarray([float(s) for s in str(coeffs).replace(",", " ").split()],
                       dtype=complex)
        return State.from_coeffs(ham, c)
    if kind == "rough":
        rng = np.random.default_rng([seed, 0x0ff])
        theta = rng.uniform(0.0, 2.0 * np.pi, ham.n_modes)
        c = (1.0 + ham.eigenvalues) ** (-alpha) * np.exp(1j * theta)
        return State.from_coeffs(ham, c / np.linalg.norm(c))
    raise ConfigError(f"unknown initial data kind {kind!r}")


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_used: int
    n_floored: int


def fit_order(taus, errors, floor: float = FIT_FLOOR) -> FitResult:
    """Least-squares line through (log tau, log err).

    Points with err <= floor sit at the reference-noise level and are
    excluded (counted in n_floored) so they cannot contaminate the slope.
    """
    taus = np.asarray(taus, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if taus.shape != errors.shape or taus.ndim != 1:
        raise ConfigError("taus and errors must be 1-d arrays of equal length")
    if np.any(taus <= 0) or np.any(errors < 0):
        raise ConfigError("taus must be positive and errors nonnegative")
    keep = errors > floor
    n_floored = int(np.sum(~keep))
    if np.sum(keep) < 4:
        raise InsufficientData(
            f"only {int(np.sum(keep))} usable points after excluding {n_floored} "
            f"at the error floor; need at least 4"
        )
    lt, le = np.log(taus[keep]), np.log(errors[keep])
    design = np.vstack([lt, np.ones_like(lt)]).T
    sol, *_ = np.linalg.lstsq(design, le, rcond=None)
    resid = le - design @ sol
    total = np.sum((le - le.mean()) ** 2)
    r2 = 1.0 if total == 0 else 1.0 - float(np.sum(resid ** 2)) / float(total)
    return FitResult(float(sol[0]), float(sol[1]), r2, int(np.sum(keep)), n_floored)


@dataclass(frozen=True)
class RunRow:
    """One (stepper, tau) outcome; errors are None when the run aborted."""

    stepper: str
    tau: float
    lam: float
    status: str = "ok"
    err_l2_final: float | None = None
    err_l2_sup: float | None = None
    err_h1_final: float | None = None
    err_h1_sup: float | None = None
    mass_drift: float | None = None
    energy_drift: float | None = None


@dataclass(frozen=True)
class ReferenceSummary:
    tau_ref: float
    richardson_l2: float
    mass_drift: float
    energy_drift: float


@dataclass
class ConvergenceReport:
    config: dict
    seed: int
    reference: ReferenceSummary
    rows: list
    fits: dict  # stepper -> {"L2": FitResult, "calH1": FitResult}


def _h1_error(ham, diff):
    c = ham.analyze(diff)
    return float(np.sqrt(np.sum(ham.eigenvalues * np.abs(c) ** 2)))


def run_convergence_study(cfg: ExperimentConfig,
                          experiment: Experiment | None = None) -> ConvergenceReport:
    """Run the full ladder for every configured stepper against one shared
    fine-Strang reference; fit orders on the final-time errors.

    A run that trips the blow-up guard is recorded as a `blowup` row with
    null errors instead of aborting the study.
    """
    exp = experiment if experiment is not None else build_experiment(cfg)
    ham, problem, u0 = exp.ham, exp.problem, exp.u0
    taus = cfg.taus
    tau_min = min(taus)
    record_every = int(round(tau_min / cfg.tau_ref))

    reference = strang_reference(u0, cfg.final_time, cfg.tau_ref, problem,
                                 record_every=record_every)
    ref_traj = reference.trajectory
    ref_states = ref_traj.states  # index m <-> time m * tau_min
    ref_mass_drift = _series_drift(ref_traj.mass)
    ref_energy = [diagnostics.energy(State.from_grid(ham, s), problem)
                  for s in ref_states]
    ref_summary = ReferenceSummary(cfg.tau_ref, reference.richardson_l2,
                                   ref_mass_drift, _series_drift(np.asarray(ref_energy)))

    rows = []
    fits = {}
    rule = LambdaRule(cfg.lambda_rule, cfg.lambda_c, cfg.lambda_gamma)
    profile = CutoffProfile(cfg.cutoff_profile, cfg.smoothstep_order)
    for stepper in cfg.stepper_list:
        fit_taus, fit_l2, fit_h1 = [], [], []
        for tau in taus:
            scheme = SchemeConfig(tau=tau, final_time=cfg.final_time, stepper=stepper,
                                  lambda_rule=rule, profile=profile,
                                  nonlinearity=problem.nonlinearity)
            lam = scheme.lam if stepper == "cutoff_lie" else math.inf
            try:
                traj = run_scheme(u0, scheme, exp.w_values, stride=1,
                                  guard_factor=cfg.blowup_guard_factor)
            except BlowUpSuspected:
                rows.append(RunRow(stepper, tau, lam, status="blowup"))
                continue
            stride_ref = int(round(tau / tau_min))
            e_l2, e_h1 = [], []
            for n, state in zip(traj.steps, traj.states):
                diff = state - ref_states[n * stride_ref]
                e_l2.append(ham.grid.norm(diff))
                e_h1.append(_h1_error(ham, diff))
            energies = [diagnostics.energy(State.from_grid(ham, s), problem)
                        for s in traj.states]
            rows.append(RunRow(
                stepper, tau, lam, "ok",
                err_l2_final=e_l2[-1], err_l2_sup=max(e_l2),
                err_h1_final=e_h1[-1], err_h1_sup=max(e_h1),
                mass_drift=_series_drift(traj.mass),
                energy_drift=_series_drift(np.asarray(energies)),
            ))
            fit_taus.append(tau)
            fit_l2.append(e_l2[-1])
            fit_h1.append(e_h1[-1])
        if len(fit_taus) >= 4:
            fits[stepper] = {
                "L2": fit_order(fit_taus, fit_l2),
                "calH1": fit_order(fit_taus, fit_h1),
            }
    return ConvergenceReport(cfg.as_dict(), cfg.seed, ref_summary, rows, fits)


def _series_drift(series: np.ndarray) -> float:
    ref = abs(float(series[0]))
    if ref == 0:
        return float(np.max(np.abs(series - series[0])))
    return float(np.max(np.abs(series - series[0])) / ref)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_csv(report: ConvergenceReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        lines.append(",".join([
            row.stepper, _fmt(row.tau), _fmt(row.lam),
            _fmt(row.err_l2_final), _fmt(row.err_l2_sup),
            _fmt(row.err_h1_final), _fmt(row.err_h1_sup),
            _fmt(row.mass_drift), _fmt(row.energy_drift), row.status,
        ]))
    return "\n".join(lines) + "\n"


def report_to_json(report: ConvergenceReport) -> str:
    payload = {
        "config": report.config,
        "seed": report.seed,
        "reference": dataclasses.asdict(report.reference),
        "rows": [dataclasses.asdict(r) for r in report.rows],
        "fits": {s: {n: dataclasses.asdict(f) for n, f in by_norm.items()}
                 for s, by_norm in report.fits.items()},
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> ConvergenceReport:
    payload = json.loads(text)
    return ConvergenceReport(
        config=payload["config"],
        seed=payload["seed"],
        reference=ReferenceSummary(**payload["reference"]),
        rows=[RunRow(**r) for r in payload["rows"]],
        fits={s: {n: FitResult(**f) for n, f in by_norm.items()}
              for s, by_norm in payload["fits"].items()},
    )


def emit_report(report: ConvergenceReport, out_dir, formats=("csv", "json")) -> list:
    """Write convergence.csv / convergence.json under out_dir.

    Output is byte-deterministic for a given report; float fields use
    their shortest round-trip representation.
    """
    import os

    written = []
    for fmt in formats:
        if fmt == "csv":
            path = os.path.join(out_dir, "convergence.csv")
            text = report_to_csv(report)
        elif fmt == "json":
            path = os.path.join(out_dir, "convergence.json")
            text = report_to_json(report)
        else:
            raise ConfigError(f"unknown report format {fmt!r}")
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        written.append(path)
    return written


def write_probe_csv(rows, path) -> None:
    """Probe table: columns (lambda, t_or_pq, trial, ratio)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("lambda,t_or_pq,trial,ratio\n")
        for lam, t_or_pq, trial, ratio in rows:
            fh.write(f"{_fmt(float(lam))},{_fmt(t_or_pq)},{trial},{_fmt(float(ratio))}\n")
