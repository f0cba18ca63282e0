"""Spatial discretization of H = -Laplacian + V(x) on a periodic box.

The operator is assembled with a Fourier spectral second derivative on
[-L, L) and diagonalized densely, so every spectral operation downstream
(propagators, cutoffs, fractional powers) is a plain diagonal multiply in
the eigenbasis. All inner products are h-weighted, which makes Parseval
exact up to the orthonormality of the eigenvector matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalFailure, ShapeError

EIGEN_RESIDUAL_TOL = 1e-8
ORTHONORMALITY_TOL = 1e-10


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [-L, L) with n_points nodes."""

    n_points: int
    half_width: float

    def __post_init__(self):
        if self.n_points < 8:
            raise ConfigError(f"need n_points >= 8, got {self.n_points}")
        if not self.half_width > 0:
            raise ConfigError(f"need half_width > 0, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n_points)

    @property
    def wavenumbers(self) -> np.ndarray:
        """FFT-ordered wavenumbers for the periodic box of length 2L."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)

    def inner(self, f, g) -> complex:
        """Discrete L2 inner product h * sum f conj(g)."""
        return self.spacing * np.sum(f * np.conj(g))

    def norm(self, f) -> float:
        return float(np.sqrt(self.spacing * np.sum(np.abs(f) ** 2)))


def spectral_derivative(grid: Grid1D, u: np.ndarray, order: int) -> np.ndarray:
    """Differentiate on the periodic box via FFT multipliers.

    For odd orders the Nyquist mode is zeroed (the standard convention:
    its derivative has no consistent sign on the grid).
    """
    if grid.n_points % 2:
        raise ConfigError("spectral differentiation requires even n_points")
    if u.shape != (grid.n_points,):
        raise ShapeError(f"state has shape {u.shape}, grid has {grid.n_points} nodes")
    k = grid.wavenumbers
    mult = (1j * k) ** order
    if order % 2:
        mult[grid.n_points // 2] = 0.0
    return np.fft.ifft(mult * np.fft.fft(u))


def second_derivative_matrix(grid: Grid1D) -> np.ndarray:
    """Dense Fourier spectral d^2/dx^2 (real symmetric circulant)."""
    if grid.n_points % 2:
        raise ConfigError("spectral differentiation requires even n_points")
    n = grid.n_points
    mult = -(grid.wavenumbers ** 2)
    d2 = np.fft.ifft(mult[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0).real
    return 0.5 * (d2 + d2.T)


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Confining potential V plus an optional bounded perturbation W.

    V is either harmonic, V(x) = omega^2 x^2 + offset, or tabulated on the
    grid. After sampling, V is shifted up so that min V >= 1; the shift is
    recorded so observables can be un-gauged. W is none, a Gaussian bump
    a*exp(-x^2/s^2), or tabulated.
    """

    kind: str = "harmonic"
    omega: float = 1.0
    offset: float = 0.0
    values: np.ndarray | None = None
    w_kind: str = "none"
    w_amplitude: float = 0.0
    w_width: float = 1.0
    w_values: np.ndarray | None = None

    @classmethod
    def harmonic(cls, omega=1.0, offset=0.0, **w) -> "PotentialSpec":
        if omega <= 0:
            raise ConfigError(f"need omega > 0, got {omega}")
        if offset < 0:
            raise ConfigError(f"need offset >= 0, got {offset}")
        return cls(kind="harmonic", omega=omega, offset=offset, **w)

    @classmethod
    def tabulated(cls, values, **w) -> "PotentialSpec":
        return cls(kind="tabulated", values=np.asarray(values, dtype=float), **w)

    def sample_confining(self, grid: Grid1D) -> tuple[np.ndarray, float]:
        """Sample V at the nodes; return (shifted values, gauge shift)."""
        if self.kind == "harmonic":
            v = self.omega ** 2 * grid.nodes ** 2 + self.offset
        elif self.kind == "tabulated":
            if self.values is None or self.values.shape != (grid.n_points,):
                raise ShapeError("tabulated potential does not match the grid")
            v = self.values.astype(float)
        else:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("potential has non-finite samples")
        shift = max(0.0, 1.0 - float(v.min()))
        return v + shift, shift

    def sample_perturbation(self, grid: Grid1D) -> np.ndarray:
        if self.w_kind == "none":
            return np.zeros(grid.n_points)
        if self.w_kind == "gaussian":
            return self.w_amplitude * np.exp(-(grid.nodes / self.w_width) ** 2)
        if self.w_kind == "tabulated":
            if self.w_values is None or self.w_values.shape != (grid.n_points,):
                raise ShapeError("tabulated perturbation does not match the grid")
            w = self.w_values.astype(float)
            if not np.all(np.isfinite(w)):
                raise ConfigError("perturbation has non-finite samples")
            return w
        raise ConfigError(f"unknown perturbation kind {self.w_kind!r}")


def load_potential_table(path, grid: Grid1D) -> np.ndarray:
    """Read a two-column (x, V(x)) text table matched to the grid nodes.

    The x column must reproduce the nodes exactly (up to last-digit text
    round-off); any mismatch is an error, never interpolation.
    """
    data = np.loadtxt(path, ndmin=2)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ConfigError(f"{path}: expected two whitespace-separated columns")
    if data.shape[0] != grid.n_points:
        raise ConfigError(
            f"{path}: {data.shape[0]} rows, grid has {grid.n_points} nodes"
        )
    if not np.allclose(data[:, 0], grid.nodes, rtol=0.0, atol=1e-12):
        raise ConfigError(f"{path}: x column does not match the grid nodes")
    return data[:, 1].copy()


def assemble_hamiltonian(grid: Grid1D, potential: PotentialSpec) -> np.ndarray:
    """Dense real symmetric matrix of -D2 + diag(V) (V gauge-shifted)."""
    v, _ = potential.sample_confining(grid)
    h_mat = -second_derivative_matrix(grid) + np.diag(v)
    return 0.5 * (h_mat + h_mat.T)


@dataclass(eq=False)
class DiscretizedHamiltonian:
    """Full eigendecomposition of the discretized H = -Laplacian + V.

    Eigenvector columns are orthonormal under the h-weighted inner
    product, so analysis/synthesis between grid values and eigenbasis
    coefficients is exactly unitary up to the eigensolver's precision.
    """

    grid: Grid1D
    v_values: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gauge_shift: float
    _analysis: np.ndarray | None = field(default=None, repr=False)
    _synthesis: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    def analyze(self, u_grid: np.ndarray) -> np.ndarray:
        """Coefficients c_j = h * sum_i Phi_j(x_i) u(x_i)."""
        if u_grid.shape != (self.grid.n_points,):
            raise ShapeError(
                f"state has shape {u_grid.shape}, grid has {self.grid.n_points} nodes"
            )
        if self._analysis is None:
            self._analysis = np.ascontiguousarray(self.grid.spacing * self.eigenvectors.T)
        a = self._analysis
        if np.iscomplexobj(u_grid):
            return a @ u_grid.real + 1j * (a @ u_grid.imag)
        return (a @ u_grid).astype(complex)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Grid values sum_j c_j Phi_j(x_i); short vectors are zero-padded."""
        c = np.asarray(coeffs)
        if c.ndim != 1 or c.size > self.n_modes:
            raise ShapeError(f"coefficient vector of length {c.size} exceeds {self.n_modes} modes")
        if self._synthesis is None:
            self._synthesis = np.ascontiguousarray(self.eigenvectors)
        s = self._synthesis[:, : c.size]
        if np.iscomplexobj(c):
            return s @ c.real + 1j * (s @ c.imag)
        return (s @ c).astype(complex)

    def verify(self, matrix: np.ndarray) -> None:
        """Residual and orthonormality checks against the assembled matrix."""
        mu, phi = self.eigenvalues, self.eigenvectors
        resid = matrix @ phi - phi * mu
        resid_norms = np.sqrt(self.grid.spacing * np.sum(resid ** 2, axis=0))
        rel = resid_norms / (1.0 + np.abs(mu))
        j = int(np.argmax(rel))
        if rel[j] > EIGEN_RESIDUAL_TOL:
            raise NumericalFailure(
                f"eigenpair {j} residual {rel[j]:.3e} exceeds {EIGEN_RESIDUAL_TOL}"
            )
        gram = self.grid.spacing * (phi.T @ phi)
        defect = np.abs(gram - np.eye(self.n_modes)).max()
        if defect > ORTHONORMALITY_TOL:
            raise NumericalFailure(f"orthonormality defect {defect:.3e}")


def eigendecompose(grid: Grid1D, potential: PotentialSpec,
                   matrix: np.ndarray | None = None) -> DiscretizedHamiltonian:
    """Diagonalize the assembled operator and wrap it with its basis.

    Eigenvalues come out ascending; eigenvectors are rescaled by 1/sqrt(h)
    so their columns are orthonormal under the discrete inner product.
    """
    v, shift = potential.sample_confining(grid)
    if matrix is None:
        matrix = -second_derivative_matrix(grid) + np.diag(v)
        matrix = 0.5 * (matrix + matrix.T)
    if not np.allclose(matrix, matrix.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(matrix).max())):
        raise ConfigError("matrix is not symmetric")
    try:
        mu, vec = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails here
        raise NumericalFailure(f"eigensolver did not converge: {exc}") from exc
    ham = DiscretizedHamiltonian(
        grid=grid,
        v_values=v,
        eigenvalues=mu,
        eigenvectors=vec / np.sqrt(grid.spacing),
        gauge_shift=shift,
    )
    ham.verify(matrix)
    return ham


class State:
    """A wavefunction under a fixed DiscretizedHamiltonian.

    Holds either grid values or eigenbasis coefficients and converts
    lazily; conversions are cached because both are needed once each in a
    typical splitting step.
    """

    def __init__(self, ham: DiscretizedHamiltonian, grid_values=None, eigen_coeffs=None):
        if (grid_values is None) == (eigen_coeffs is None):
            raise ShapeError("provide exactly one of grid_values or eigen_coeffs")
        self.ham = ham
        self._grid = None if grid_values is None else np.asarray(grid_values, dtype=complex)
        if self._grid is not None and self._grid.shape != (ham.grid.n_points,):
            raise ShapeError(
                f"state has shape {self._grid.shape}, grid has {ham.grid.n_points} nodes"
            )
        self._coeffs = None if eigen_coeffs is None else np.asarray(eigen_coeffs, dtype=complex)
        if self._coeffs is not None and self._coeffs.size > ham.n_modes:
            raise ShapeError("more coefficients than modes")

    @classmethod
    def from_grid(cls, ham, values) -> "State":
        return cls(ham, grid_values=values)

    @classmethod
    def from_coeffs(cls, ham, coeffs) -> "State":
        return cls(ham, eigen_coeffs=coeffs)

    @property
    def grid_values(self) -> np.ndarray:
        if self._grid is None:
            self._grid = self.ham.synthesize(self._coeffs)
        return self._grid

    @property
    def eigen_coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = self.ham.analyze(self._grid)
        return self._coeffs

    def norm(self) -> float:
        """Discrete L2 norm (coefficient route when available)."""
        if self._coeffs is not None:
            return float(np.linalg.norm(self._coeffs))
        return self.ham.grid.norm(self._grid)


def to_eigenbasis(u: State) -> State:
    """Analysis: grid representation -> eigenbasis coefficients."""
    return State.from_coeffs(u.ham, u.eigen_coeffs)


def from_eigenbasis(u: State) -> State:
    """Synthesis: eigenbasis coefficients -> grid representation."""
    return State.from_grid(u.ham, u.grid_values)


def apply_spectral_weight(u: State, f) -> State:
    """Apply f(H) diagonally: c_j -> f(mu_j) c_j.

    f(mu) = mu^s gives fractional powers, exp(-i t mu) the propagator,
    chi^2(mu/lambda) the spectral cutoff.
    """
    weights = np.asarray(f(u.ham.eigenvalues[: u.eigen_coeffs.size]))
    if not np.all(np.isfinite(weights)):
        raise NumericalFailure("spectral weight is non-finite on the spectrum")
    return State.from_coeffs(u.ham, weights * u.eigen_coeffs)


def norm_sobolev(u: State, which: str) -> float:
    """Energy-weighted norms of a state.

    L2 is the discrete L2 norm; calH1 = ||H^(1/2) u|| computed in the
    eigenbasis; calH2 = sqrt(||Lap u||^2 + ||V u||^2) with the Laplacian
    taken spectrally on the grid; gradL2 / VL2 / DeltaL2 are the
    individual pieces.
    """
    ham = u.ham
    if which == "L2":
        return u.norm()
    if which == "calH1":
        c = u.eigen_coeffs
        return float(np.sqrt(np.sum(ham.eigenvalues[: c.size] * np.abs(c) ** 2)))
    if which == "gradL2":
        return ham.grid.norm(spectral_derivative(ham.grid, u.grid_values, 1))
    if which == "DeltaL2":
        return ham.grid.norm(spectral_derivative(ham.grid, u.grid_values, 2))
    if which == "VL2":
        return ham.grid.norm(ham.v_values * u.grid_values)
    if which == "calH2":
        return float(np.hypot(norm_sobolev(u, "DeltaL2"), norm_sobolev(u, "VL2")))
    raise ConfigError(f"unknown norm {which!r}")
