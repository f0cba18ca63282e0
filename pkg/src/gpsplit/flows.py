"""Nonlinear flow, splitting steppers, and trajectory evolution.

The central scheme composes the exact pointwise nonlinear flow N(tau)
with the truncated linear group S_lambda(tau), after a single initial
cutoff of the data:

    u^n = (S_lambda(tau) N(tau))^n Pi_lambda u0,    lambda = 1/tau.

A plain Lie stepper (lambda = infinity), an FFT-based splitting that
moves the full potential into the pointwise phase, and a fine-step Strang
reference are provided for comparison and error measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cutoff import CutoffProfile, projector_weights
from .errors import BlowUpSuspected, ConfigError, NumericalFailure, ReferenceUnreliable
from .hamiltonian import DiscretizedHamiltonian, State, spectral_derivative

STEPPERS = ("cutoff_lie", "plain_lie", "fourier_lie", "strang_reference")
RICHARDSON_TOL = 1e-8
BLOWUP_GUARD_FACTOR = 1e6


@dataclass(frozen=True)
class NonlinearitySpec:
    """Power nonlinearity epsilon |u|^(2 sigma) u.

    epsilon = +1 is defocusing, -1 focusing; epsilon = 0 switches the
    nonlinear term off entirely, which is what the linear sanity runs use.
    """

    sigma: float = 1.0
    epsilon: int = 1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError(f"need sigma > 0, got {self.sigma}")
        if self.epsilon not in (-1, 0, 1):
            raise ConfigError(f"epsilon must be -1, 0 or +1, got {self.epsilon}")

    @property
    def l2_subcritical(self) -> bool:
        # sigma < 2/d with d = 1: the regime with unconditional global existence
        return self.sigma < 2.0


@dataclass(frozen=True)
class LambdaRule:
    """Coupling between the cutoff level and the time step."""

    kind: str = "inverse"
    c: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("inverse", "scaled"):
            raise ConfigError(f"unknown lambda rule {self.kind!r}")
        if self.kind == "scaled" and not self.c > 0:
            raise ConfigError(f"need c > 0, got {self.c}")

    def value(self, tau: float) -> float:
        if self.kind == "inverse":
            return 1.0 / tau
        return self.c * tau ** (-self.gamma)


@dataclass(frozen=True)
class SchemeConfig:
    tau: float
    final_time: float = 1.0
    stepper: str = "cutoff_lie"
    lambda_rule: LambdaRule = LambdaRule()
    profile: CutoffProfile = CutoffProfile()
    nonlinearity: NonlinearitySpec = NonlinearitySpec()

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"need tau in (0, 1), got {self.tau}")
        if not self.final_time > 0:
            raise ConfigError(f"need final_time > 0, got {self.final_time}")
        if self.stepper not in STEPPERS:
            raise ConfigError(f"unknown stepper {self.stepper!r}")
        steps = self.final_time / self.tau
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"final_time/tau = {steps} is not an integer")
        if self.lambda_rule.kind == "inverse" and self.lam * self.tau < 1.0 - 1e-12:
            raise ConfigError("inverse rule must give lambda * tau >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.final_time / self.tau))

    @property
    def lam(self) -> float:
        return self.lambda_rule.value(self.tau)


@dataclass(frozen=True)
class Problem:
    """Everything the exact flow needs: operator, perturbation, nonlinearity."""

    ham: DiscretizedHamiltonian
    w_values: np.ndarray
    nonlinearity: NonlinearitySpec


@dataclass
class Trajectory:
    """Snapshots u^n at times n tau, plus the per-step mass record.

    `spacing` is the grid spacing of the states, carried along so that
    space-time norms over snapshots use the same quadrature as everything
    else.
    """

    tau: float
    steps: list
    states: list
    mass: np.ndarray
    spacing: float = 1.0

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.asarray(self.steps, dtype=float)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _nonlinear_phase(u: np.ndarray, tau: float, nl: NonlinearitySpec,
                     w_values: np.ndarray) -> np.ndarray:
    # |u|^(2 sigma) with the 0 -> 0 convention; numpy's power already
    # maps 0.0 ** s to 0.0 for s > 0
    phase = np.multiply(tau, w_values, dtype=float)
    if nl.epsilon:
        phase = phase + (tau * nl.epsilon) * np.abs(u) ** (2.0 * nl.sigma)
    return u * np.exp(-1j * phase)


def nonlinear_flow(u: State, tau: float, nonlinearity: NonlinearitySpec,
                   w_values: np.ndarray) -> State:
    """Exact flow of i u_t = W u + eps |u|^(2 sigma) u.

    Pointwise u -> u exp(-i tau W - i tau eps |u|^(2 sigma)); the modulus
    is preserved exactly, so every grid L^p norm is invariant. Negative tau
    is legal (the flow is a group).
    """
    return State.from_grid(u.ham, _nonlinear_phase(u.grid_values, tau, nonlinearity, w_values))


class _DiagPropagator:
    """Fused synthesize(diag * analyze(u)) as a single complex matrix.

    Built once per (ham, diagonal) pair; one complex matvec per step is
    what keeps fine-step reference runs at desk scale.
    """

    def __init__(self, ham: DiscretizedHamiltonian, diag: np.ndarray):
        phi = ham.eigenvectors
        phit = ham.grid.spacing * phi.T
        d = np.asarray(diag, dtype=complex)
        self.matrix = (phi * d.real) @ phit + 1j * ((phi * d.imag) @ phit)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u


def lie_step_cutoff(u: State, cfg: SchemeConfig, w_values: np.ndarray) -> State:
    """One step S_lambda(tau) N(tau): pointwise phase in grid space, then a
    diagonal multiply in the eigenbasis. One analysis and one synthesis."""
    lam = cfg.lam if cfg.stepper == "cutoff_lie" else np.inf
    v = nonlinear_flow(u, cfg.tau, cfg.nonlinearity, w_values)
    weights = projector_weights(u.ham, lam, cfg.profile) if np.isfinite(lam) else 1.0
    c = weights * np.exp(-1j * cfg.tau * u.ham.eigenvalues) * v.eigen_coeffs
    return State.from_grid(u.ham, u.ham.synthesize(c))


def fourier_splitting_step(u: State, cfg: SchemeConfig, w_values: np.ndarray) -> State:
    """Alternative splitting: full potential in the pointwise phase, then
    exact free flight through the discrete Fourier diagonalization."""
    ham = u.ham
    if ham.grid.n_points % 2:
        raise ConfigError("fourier stepper requires even n_points")
    nl = cfg.nonlinearity
    vals = u.grid_values
    phase = ham.v_values + w_values
    if nl.epsilon:
        phase = phase + nl.epsilon * np.abs(vals) ** (2.0 * nl.sigma)
    vals = vals * np.exp(-1j * cfg.tau * phase)
    free = np.exp(-1j * cfg.tau * ham.grid.wavenumbers ** 2)
    return State.from_grid(ham, np.fft.ifft(free * np.fft.fft(vals)))


def _h1_norm_grid(ham: DiscretizedHamiltonian, u: np.ndarray) -> float:
    # FFT route to ||u||_H1; avoids a dense matvec inside the step loop
    du = spectral_derivative(ham.grid, u, 1)
    h = ham.grid.spacing
    return float(np.sqrt(h * np.sum(np.abs(du) ** 2 + ham.v_values * np.abs(u) ** 2)))


def run_scheme(u0: State, cfg: SchemeConfig, w_values: np.ndarray | None = None,
               stride: int = 1, guard_factor: float = BLOWUP_GUARD_FACTOR) -> Trajectory:
    """Evolve u0 for final_time/tau steps of the configured stepper.

    The cutoff stepper applies Pi_lambda to the data exactly once, before
    the loop. Snapshots are recorded every `stride` steps (step 0 and the
    final step always included). The run aborts with BlowUpSuspected when
    a non-finite value appears or the energy norm exceeds guard_factor
    times its initial value.
    """
    ham = u0.ham
    if w_values is None:
        w_values = np.zeros(ham.grid.n_points)
    tau, nl = cfg.tau, cfg.nonlinearity
    mu = ham.eigenvalues

    if cfg.stepper == "cutoff_lie":
        weights = projector_weights(ham, cfg.lam, cfg.profile)
        u = ham.synthesize(weights * u0.eigen_coeffs)
        step_prop = _DiagPropagator(ham, weights * np.exp(-1j * tau * mu))
    elif cfg.stepper == "plain_lie":
        u = u0.grid_values.copy()
        step_prop = _DiagPropagator(ham, np.exp(-1j * tau * mu))
    elif cfg.stepper == "fourier_lie":
        u = u0.grid_values.copy()
        step_prop = None
    else:  # strang_reference as a ladder stepper: no cutoff, symmetric step
        u = u0.grid_values.copy()
        step_prop = _DiagPropagator(ham, np.exp(-0.5j * tau * mu))

    h = ham.grid.spacing
    mass = [h * float(np.sum(np.abs(u) ** 2))]
    steps, states = [0], [u.copy()]
    h1_initial = _h1_norm_grid(ham, u) if mass[0] > 0 else 0.0

    for n in range(1, cfg.n_steps + 1):
        if cfg.stepper == "fourier_lie":
            u = fourier_splitting_step(State.from_grid(ham, u), cfg, w_values).grid_values
        elif cfg.stepper == "strang_reference":
            u = step_prop(_nonlinear_phase(step_prop(u), tau, nl, w_values))
        else:
            u = step_prop(_nonlinear_phase(u, tau, nl, w_values))
        mass.append(h * float(np.sum(np.abs(u) ** 2)))
        if not np.isfinite(mass[-1]) or (
                h1_initial > 0 and _h1_norm_grid(ham, u) > guard_factor * h1_initial):
            raise BlowUpSuspected(n, f"blow-up suspected at step {n} of {cfg.n_steps}")
        if (n % stride == 0) or n == cfg.n_steps:
            steps.append(n)
            states.append(u.copy())
    return Trajectory(tau, steps, states, np.asarray(mass), spacing=h)


@dataclass
class ReferenceSolution:
    """Fine Strang run standing in for the exact flow, with its self-check."""

    tau_ref: float
    trajectory: Trajectory
    richardson_l2: float

    @property
    def final(self) -> np.ndarray:
        return self.trajectory.final


def _strang_run(problem: Problem, u0: np.ndarray, tau: float, n_steps: int,
                record_every: int | None) -> Trajectory:
    """Merged Strang loop: half step once, full steps inside, and an
    explicit half-step closure whenever a state is recorded."""
    ham, w_values, nl = problem.ham, problem.w_values, problem.nonlinearity
    mu = ham.eigenvalues
    half = _DiagPropagator(ham, np.exp(-0.5j * tau * mu))
    full = _DiagPropagator(ham, np.exp(-1j * tau * mu))
    closure = _DiagPropagator(ham, np.exp(+0.5j * tau * mu))
    h = ham.grid.spacing
    mass = [h * float(np.sum(np.abs(u0) ** 2))]
    steps, states = [0], [u0.copy()]
    u = half(u0)
    for n in range(1, n_steps + 1):
        u = _nonlinear_phase(u, tau, nl, w_values)
        last = n == n_steps
        u = (half if last else full)(u)
        mass.append(h * float(np.sum(np.abs(u) ** 2)))
        if not np.isfinite(mass[-1]):
            raise NumericalFailure(f"reference produced non-finite values at step {n}")
        if last or (record_every and n % record_every == 0):
            state = u if last else closure(u)
            steps.append(n)
            states.append(np.array(state))
    return Trajectory(tau, steps, states, np.asarray(mass), spacing=h)


def strang_reference(u0: State, final_time: float, tau_ref: float, problem: Problem,
                     record_every: int | None = None,
                     richardson_tol: float = RICHARDSON_TOL) -> ReferenceSolution:
    """Reference solution: Strang splitting S(t/2) N(t) S(t/2) at a fine step,
    no cutoff, validated by comparing against a run at tau_ref / 2.

    Caller is responsible for tau_ref being much smaller than any step
    size whose error will be measured against this reference.
    """
    if tau_ref == 0 or final_time == 0:
        return ReferenceSolution(
            tau_ref,
            Trajectory(tau_ref, [0], [u0.grid_values.copy()],
                       np.asarray([u0.ham.grid.norm(u0.grid_values) ** 2]),
                       spacing=u0.ham.grid.spacing),
            0.0,
        )
    n_steps = final_time / tau_ref
    if n_steps < 0 or abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, abs(n_steps)):
        raise ConfigError(f"final_time/tau_ref = {n_steps} is not a positive integer")
    n_steps = int(round(n_steps))
    traj = _strang_run(problem, u0.grid_values, tau_ref, n_steps, record_every)
    check = _strang_run(problem, u0.grid_values, tau_ref / 2, 2 * n_steps, None)
    diff = u0.ham.grid.norm(traj.final - check.final)
    if diff > richardson_tol:
        raise ReferenceUnreliable(
            f"reference self-check failed: |u(tau_ref) - u(tau_ref/2)| = {diff:.3e} "
            f"> {richardson_tol:.1e}; shrink tau_ref or final_time"
        )
    return ReferenceSolution(tau_ref, traj, float(diff))


def write_snapshots(traj: Trajectory, path) -> None:
    """Dump snapshots as text: one line per snapshot holding
    n, t, then interleaved (re, im) grid values."""
    with open(path, "w", encoding="ascii") as fh:
        for n, t, state in zip(traj.steps, traj.times, traj.states):
            parts = [str(int(n)), repr(float(t))]
            for z in state:
                parts.append(repr(float(z.real)))
                parts.append(repr(float(z.imag)))
            fh.write(" ".join(parts) + "\n")
