"""Norms, conserved quantities, and discrete space-time (Strichartz) norms.

Every quadrature here is the same h-weighted sum used by the operator
module, so Parseval identities and conservation checks are exact rather
than quadrature-limited.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cutoff import CutoffProfile, probe_states, projector_weights
from .errors import ConfigError
from .flows import Problem, Trajectory
from .hamiltonian import DiscretizedHamiltonian, State, spectral_derivative

ADMISSIBLE_TOL = 1e-12


def lp_norm(u: State, p: float) -> float:
    """Grid L^p norm (h sum |u|^p)^(1/p); max norm for p = infinity."""
    if not p >= 1:
        raise ConfigError(f"need p >= 1, got {p}")
    vals = np.abs(u.grid_values)
    if np.isinf(p):
        return float(vals.max())
    return float((u.ham.grid.spacing * np.sum(vals ** p)) ** (1.0 / p))


def mass(u: State) -> float:
    """Squared L2 norm, the first conserved quantity."""
    return u.norm() ** 2


def energy(u: State, problem: Problem) -> float:
    """h sum(|grad u|^2 + (V + W)|u|^2 + eps/(sigma+1) |u|^(2 sigma + 2)).

    The gradient is spectral on the periodic grid; V carries the gauge
    shift, which only offsets the energy by shift * mass and therefore
    does not affect drift diagnostics.
    """
    ham, nl = problem.ham, problem.nonlinearity
    vals = u.grid_values
    du = spectral_derivative(ham.grid, vals, 1)
    density = np.abs(du) ** 2 + (ham.v_values + problem.w_values) * np.abs(vals) ** 2
    if nl.epsilon:
        density = density + (nl.epsilon / (nl.sigma + 1.0)) * np.abs(vals) ** (2.0 * nl.sigma + 2.0)
    return float(ham.grid.spacing * np.sum(density))


@dataclass(frozen=True)
class AdmissiblePair:
    """Exponents with the dispersive scaling 2/q = d(1/2 - 1/r), d = 1."""

    q: float
    r: float

    def __post_init__(self):
        if not (self.q >= 4 or np.isinf(self.q)):
            raise ConfigError(f"need q in [4, inf] for d = 1, got {self.q}")
        if not (2 <= self.r or np.isinf(self.r)):
            raise ConfigError(f"need r in [2, inf], got {self.r}")
        lhs = 0.0 if np.isinf(self.q) else 2.0 / self.q
        rhs = 0.5 - (0.0 if np.isinf(self.r) else 1.0 / self.r)
        if abs(lhs - rhs) > ADMISSIBLE_TOL:
            raise ConfigError(
                f"(q, r) = ({self.q}, {self.r}) is not admissible: 2/q = {lhs} vs {rhs}"
            )


def canonical_pairs(sigma: float, d: int = 1):
    """The pair (q0, r0) = ((4 sigma + 4)/(d sigma), 2 sigma + 2) driving the
    nonlinear estimates, and the companion exponent
    theta = 2 sigma (2 sigma + 2) / (2 - (d - 2) sigma).

    theta < q0 exactly when sigma < 2/d.
    """
    if d != 1:
        raise ConfigError("only d = 1 is implemented")
    if not sigma > 0:
        raise ConfigError(f"need sigma > 0, got {sigma}")
    q0 = (4.0 * sigma + 4.0) / (d * sigma)
    r0 = 2.0 * sigma + 2.0
    theta = 2.0 * sigma * (2.0 * sigma + 2.0) / (2.0 - (d - 2.0) * sigma)
    AdmissiblePair(q0, r0)
    return q0, r0, theta


def discrete_strichartz_norm(traj: Trajectory, q: float, r: float,
                             interval: tuple[float, float] | None = None) -> float:
    """(tau sum_{n tau in I} ||u(n tau)||_r^q)^(1/q); sup over I for q = inf.

    Admissibility of (q, r) is not required; the norm is defined for any
    exponents >= 1.
    """
    if not (q >= 1 and r >= 1):
        raise ConfigError(f"need q, r >= 1, got ({q}, {r})")
    if interval is None:
        interval = (traj.times[0], traj.times[-1])
    t0, t1 = interval
    tol = 1e-9 * max(1.0, abs(traj.tau))
    picked = [s for s, t in zip(traj.states, traj.times) if t0 - tol <= t <= t1 + tol]
    if not picked:
        raise ConfigError(f"interval {interval} contains no snapshots")
    norms = []
    for state in picked:
        vals = np.abs(state)
        if np.isinf(r):
            norms.append(vals.max())
        else:
            norms.append((traj.spacing * np.sum(vals ** r)) ** (1.0 / r))
    norms = np.asarray(norms)
    if np.isinf(q):
        return float(norms.max())
    return float((traj.tau * np.sum(norms ** q)) ** (1.0 / q))


def strichartz_constant_probe(ham: DiscretizedHamiltonian, lam: float, tau: float,
                              pair: AdmissiblePair, n_trials: int = 16,
                              horizon: float = 1.0, profile: CutoffProfile = CutoffProfile(),
                              seed: int = 0):
    """Max over trial states of
        ||S_lambda(n tau) phi||_{l^q L^r} / ((lambda tau)^(1/q) ||phi||_2)
    over n tau in [0, horizon]. Requires lambda * tau >= 1 and horizon <= 1.

    Returns (max_ratio, rows) with rows (lambda, "q|r", trial, ratio).
    """
    if lam * tau < 1.0 - 1e-12:
        raise ConfigError(f"need lambda * tau >= 1, got {lam * tau}")
    if horizon > 1.0 + 1e-12:
        raise ConfigError(f"probe horizon must be <= 1, got {horizon}")
    w = projector_weights(ham, lam, profile)
    mu = ham.eigenvalues
    n_snap = int(round(horizon / tau))
    h = ham.grid.spacing
    scale = 1.0 if np.isinf(pair.q) else (lam * tau) ** (1.0 / pair.q)
    rows = []
    for label, phi in probe_states(ham, n_trials, seed):
        l2 = np.sqrt(h * np.sum(np.abs(phi) ** 2))
        c = ham.analyze(phi)
        lr = []
        for n in range(n_snap + 1):
            ut = ham.synthesize(w * np.exp(-1j * n * tau * mu) * c)
            vals = np.abs(ut)
            lr.append(vals.max() if np.isinf(pair.r)
                      else (h * np.sum(vals ** pair.r)) ** (1.0 / pair.r))
        lr = np.asarray(lr)
        st = lr.max() if np.isinf(pair.q) else (tau * np.sum(lr ** pair.q)) ** (1.0 / pair.q)
        rows.append((lam, f"q={pair.q:g}|r={pair.r:g}", label, float(st / (scale * l2))))
    return max(r for *_, r in rows), rows
