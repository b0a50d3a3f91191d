"""Finite truncated Hamiltonians, bath discretizations, and bath correlators.

Conventions used throughout the package:

* two-level system basis is {|e>, |g>} (excited first), so
  sigma_z = diag(+1, -1) and sigma_+ = |e><g|;
* joint spaces are ordered system (x) bath, index (alpha, n) -> alpha*d_b + n;
* density matrices are vectorized by column stacking (Fortran order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._util import herm_defect, symmetrize

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T

HERMITICITY_TOL = 1e-12

ANALYTIC_BATHS = ("analytic-Drude-Lorentz", "analytic-Ohmic", "analytic-subOhmic")
BATH_KINDS = ("single-mode-Fock", "discrete-multimode") + ANALYTIC_BATHS


class ModelMismatchError(ValueError):
    """A builder was handed a bath kind it does not describe."""


class DimensionOverflowError(ValueError):
    """Requested truncation exceeds the configured dimension cap."""


@dataclass(frozen=True)
class SystemSpec:
    """Two-level system parameters.

    ``level_splitting`` is the qubit energy scale: omega_0 for the
    cavity-coupled model, the tunneling amplitude for the boson-coupled one.
    ``coupling_axis`` names the system operator entering the interaction.
    """

    kind: str = "two-level"
    level_splitting: float = 1.0
    coupling_axis: str = "raising-lowering"

    def __post_init__(self):
        if self.kind != "two-level":
            raise ValueError(f"unsupported system kind {self.kind!r}")
        if not np.isfinite(self.level_splitting):
            raise ValueError("level_splitting must be finite")
        if self.coupling_axis not in ("raising-lowering", "sigma-z"):
            raise ValueError(f"unknown coupling_axis {self.coupling_axis!r}")


@dataclass(frozen=True)
class BathSpec:
    """Bath description: a single truncated mode, a discrete mode set, or an
    analytic spectral density."""

    kind: str
    cutoff: float = 1.0          # omega_c, or gamma for Drude-Lorentz
    coupling: float = 0.0        # g, eta, or lambda depending on kind
    exponent: float = 1.0        # s, sub-Ohmic only
    fock_truncation: int = 1     # N_max (single mode) or n_max (per mode)
    mode_count: int = 1          # N_bath
    inverse_temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in BATH_KINDS:
            raise ValueError(f"unknown bath kind {self.kind!r}")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.kind == "analytic-subOhmic" and not (0.0 < self.exponent < 1.0):
            raise ValueError("sub-Ohmic exponent must satisfy 0 < s < 1")
        if self.fock_truncation < 1 or self.mode_count < 1:
            raise ValueError("truncations must be >= 1")


@dataclass(frozen=True)
class JointHamiltonian:
    """Hermitian matrix on system (x) bath with dimension bookkeeping."""

    matrix: np.ndarray
    dims: tuple[int, int]
    provenance: tuple = field(default=(), compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise ValueError("matrix shape inconsistent with dims")
        if herm_defect(m) > HERMITICITY_TOL:
            raise ValueError("matrix is not Hermitian to tolerance")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.dims[0] * self.dims[1]

    def eigensystem(self):
        """Cached dense eigendecomposition (energies, vectors)."""
        cache = getattr(self, "_eig", None)
        if cache is None:
            cache = np.linalg.eigh(self.matrix)
            object.__setattr__(self, "_eig", cache)
        return cache


@dataclass(frozen=True)
class BathCorrelatorPoles:
    """Exponential decomposition C(t) = sum_k c_k exp(-nu_k t), Re nu_k > 0."""

    amplitudes: tuple
    rates: tuple
    matsubara_count: int

    def __post_init__(self):
        if any(np.real(nu) <= 0 for nu in self.rates):
            raise ValueError("all decay rates must have positive real part")
        if len(self.amplitudes) != len(self.rates):
            raise ValueError("amplitude/rate length mismatch")

    def time_series(self, t):
        """Evaluate C(t) on an array of times (t >= 0)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for c, nu in zip(self.amplitudes, self.rates):
            out += c * np.exp(-nu * t)
        return out

    def frequency_series(self, omega):
        """C~(omega) = sum_k c_k / (nu_k - i omega) on a real frequency grid."""
        omega = np.asarray(omega, dtype=float)
        out = np.zeros(omega.shape, dtype=complex)
        for c, nu in zip(self.amplitudes, self.rates):
            out += c / (nu - 1j * omega)
        return out

    def lower_half_plane_poles(self):
        """Pole locations and residues of C~ in the complex omega plane.

        c/(nu - i w) = (ic)/(w - (-i nu)); the pole -i*nu has Im < 0, which is
        what makes C~ analytic in the upper half plane.
        """
        return [(1j * c, -1j * nu) for c, nu in zip(self.amplitudes, self.rates)]


def _destroy(n_levels):
    return np.diag(np.sqrt(np.arange(1.0, n_levels)), 1).astype(complex)


def _embed(op, position, dims):
    out = np.ones((1, 1), dtype=complex)
    for i, d in enumerate(dims):
        out = np.kron(out, op if i == position else np.eye(d))
    return out


def build_jc(system: SystemSpec, bath: BathSpec) -> JointHamiltonian:
    """Qubit + single truncated cavity mode with rotating-wave coupling.

    H = (omega_0/2) sigma_z + omega_c a^dag a + g (sigma_+ a + sigma_- a^dag),
    truncated at N_max photons, d = 2 (N_max + 1).  Conserves the total
    excitation number sigma_z/2 + a^dag a.
    """
    if bath.kind != "single-mode-Fock":
        raise ModelMismatchError(f"build_jc needs a single-mode-Fock bath, got {bath.kind!r}")
    nb = bath.fock_truncation + 1
    a = _destroy(nb)
    ident_b = np.eye(nb)
    h = (system.level_splitting / 2.0) * np.kron(SIGMA_Z, ident_b)
    h = h + bath.cutoff * np.kron(np.eye(2), a.conj().T @ a)
    h = h + bath.coupling * (np.kron(SIGMA_PLUS, a) + np.kron(SIGMA_MINUS, a.conj().T))
    return JointHamiltonian(symmetrize(h), (2, nb), provenance=(system, bath))


def build_spin_boson(system: SystemSpec, bath: BathSpec, modes=None,
                     dim_cap: int = 4096) -> JointHamiltonian:
    """Qubit with sigma_x tunneling coupled through sigma_z to discrete modes.

    H = (Delta/2) sigma_x + sum_k omega_k a_k^dag a_k
        + sigma_z sum_k g_k (a_k + a_k^dag),
    each mode truncated at n_max quanta, d = 2 (n_max + 1)^N_bath.

    ``modes`` is a list of (omega_k, g_k); when omitted, a default ladder
    omega_k = k * Delta with uniform g_k = bath.coupling is used (the mode
    placement is a modelling choice, see discretize_bath for density-matched
    sets).
    """
    if bath.kind != "discrete-multimode":
        raise ModelMismatchError(f"build_spin_boson needs a discrete-multimode bath, got {bath.kind!r}")
    if modes is None:
        modes = [((k + 1) * abs(system.level_splitting), bath.coupling)
                 for k in range(bath.mode_count)]
    n_bath = len(modes)
    nb = bath.fock_truncation + 1
    d = 2 * nb ** n_bath
    if d > dim_cap:
        raise DimensionOverflowError(f"joint dimension {d} exceeds cap {dim_cap}")
    dims = [2] + [nb] * n_bath
    a = _destroy(nb)
    h = (system.level_splitting / 2.0) * _embed(SIGMA_X, 0, dims)
    sz_full = _embed(SIGMA_Z, 0, dims)
    for k, (omega_k, g_k) in enumerate(modes):
        h = h + omega_k * _embed(a.conj().T @ a, k + 1, dims)
        h = h + g_k * (sz_full @ _embed(a + a.conj().T, k + 1, dims))
    return JointHamiltonian(symmetrize(h), (2, nb ** n_bath), provenance=(system, bath, tuple(modes)))


def spectral_density(bath: BathSpec, omega) -> np.ndarray:
    """Evaluate the analytic spectral density J(omega) for omega >= 0.

    Drude-Lorentz: J = 2 lambda gamma omega / (omega^2 + gamma^2)
    Ohmic:         J = eta omega exp(-omega/omega_c)
    sub-Ohmic:     J = eta omega^s exp(-omega/omega_c) / omega_c^(s-1)
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    if bath.kind == "analytic-Drude-Lorentz":
        lam, gamma = bath.coupling, bath.cutoff
        return 2.0 * lam * gamma * omega / (omega ** 2 + gamma ** 2)
    if bath.kind == "analytic-Ohmic":
        return bath.coupling * omega * np.exp(-omega / bath.cutoff)
    if bath.kind == "analytic-subOhmic":
        s, wc = bath.exponent, bath.cutoff
        return bath.coupling * omega ** s * np.exp(-omega / wc) / wc ** (s - 1.0)
    raise ModelMismatchError(f"{bath.kind!r} has no analytic spectral density")


def reorganization_energy(bath: BathSpec) -> float:
    """(1/pi) integral of J(omega)/omega; equals lambda for Drude-Lorentz."""
    val, _ = integrate.quad(lambda w: spectral_density(bath, w) / w, 0.0, np.inf, limit=400)
    return val / np.pi


def discretize_bath(bath: BathSpec, mode_count: int, support_factor: float = 4.0,
                    node_placement: str = "linear", match_reorganization: bool = True):
    """Represent an analytic density by ``mode_count`` discrete modes.

    The support [0, support_factor * cutoff] is split into equal cells
    (log-spaced cells with ``node_placement="logarithmic"``); each cell
    contributes one mode at its J-weighted mean frequency carrying the cell
    integral g_k^2 = (1/pi) int_cell J.  With ``match_reorganization`` the
    couplings are rescaled so sum_k g_k^2/omega_k reproduces the full
    reorganization energy (1/pi) int J/omega, compensating the truncated tail.

    Returns a list of (omega_k, g_k).
    """
    if mode_count < 1:
        raise ValueError("mode_count must be >= 1")
    if bath.kind not in ANALYTIC_BATHS:
        raise ModelMismatchError("discretize_bath needs an analytic bath kind")
    w_max = support_factor * bath.cutoff
    if node_placement == "linear":
        edges = np.linspace(0.0, w_max, mode_count + 1)
    elif node_placement == "logarithmic":
        edges = np.concatenate(([0.0], np.geomspace(w_max / 10.0 ** mode_count * 10.0,
                                                    w_max, mode_count)))
    else:
        raise ValueError(f"unknown node placement {node_placement!r}")
    modes = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        weight, _ = integrate.quad(lambda w: spectral_density(bath, w), lo, hi, limit=200)
        first, _ = integrate.quad(lambda w: w * spectral_density(bath, w), lo, hi, limit=200)
        if weight <= 0.0:
            modes.append((0.5 * (lo + hi), 0.0))
            continue
        modes.append((first / weight, np.sqrt(weight / np.pi)))
    total = sum(g * g / w for w, g in modes if g > 0.0)
    if match_reorganization and total > 0.0:
        scale = np.sqrt(reorganization_energy(bath) / total)
        modes = [(w, g * scale) for w, g in modes]
    return modes


def thermal_state(h_bath, beta: float) -> np.ndarray:
    """Gibbs state exp(-beta H)/Z of a Hermitian matrix; beta >= 0.

    Computed in the eigenbasis with the ground energy subtracted, so large
    beta underflows gracefully to the ground-state projector.
    """
    if beta < 0:
        raise ValueError("inverse temperature must be >= 0")
    h_bath = np.asarray(h_bath, dtype=complex)
    energies, states = np.linalg.eigh(h_bath)
    weights = np.exp(-beta * (energies - energies.min()))
    weights /= weights.sum()
    rho = (states * weights) @ states.conj().T
    return symmetrize(rho)


def bath_correlator_poles(bath: BathSpec, matsubara_count: int = 4) -> BathCorrelatorPoles:
    """Drude-Lorentz correlator as a Drude pole plus Matsubara terms.

    C(t) = lambda gamma [cot(beta gamma / 2) - i] e^{-gamma t}
           + sum_{n>=1} (4 lambda gamma / beta) nu_n / (nu_n^2 - gamma^2) e^{-nu_n t},
    nu_n = 2 pi n / beta.  All decay rates are real and positive, so the
    frequency-domain correlator is a sum of simple poles below the real axis.
    """
    if bath.kind != "analytic-Drude-Lorentz":
        raise ModelMismatchError("pole decomposition implemented for Drude-Lorentz only")
    if bath.inverse_temperature <= 0:
        raise ValueError("beta must be positive")
    lam, gamma, beta = bath.coupling, bath.cutoff, bath.inverse_temperature
    if lam == 0.0:
        return BathCorrelatorPoles((), (), matsubara_count)
    amps = [lam * gamma * (1.0 / np.tan(beta * gamma / 2.0) - 1.0j)]
    rates = [gamma + 0.0j]
    for n in range(1, matsubara_count + 1):
        nu_n = 2.0 * np.pi * n / beta
        amps.append(4.0 * lam * gamma / beta * nu_n / (nu_n ** 2 - gamma ** 2) + 0.0j)
        rates.append(nu_n + 0.0j)
    return BathCorrelatorPoles(tuple(amps), tuple(rates), matsubara_count)


def correlator_quadrature(bath: BathSpec, t, omega_max: float = None) -> np.ndarray:
    """Direct quadrature of C(t) = (1/pi) int J [coth(beta w/2) cos - i sin].

    Independent of the pole decomposition; used as its oracle.  The Drude
    1/omega tail makes the t = 0 real part log-divergent, so comparisons
    should be made at t > 0 or under a stated ``omega_max`` cutoff.
    """
    from scipy.special import sici

    beta = bath.inverse_temperature
    if omega_max is None:
        omega_max = 80.0 * bath.cutoff
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t.shape, dtype=complex)
    # Drude J ~ 2 lambda gamma / omega at large omega; the oscillatory 1/omega
    # tail beyond omega_max is added back in closed form via Si/Ci.
    tail_amp = 0.0
    if bath.kind == "analytic-Drude-Lorentz":
        tail_amp = 2.0 * bath.coupling * bath.cutoff

    def j_coth(w):
        if w < 1e-12:
            # J(w) coth(beta w/2) -> (2/beta) * lim J(w)/w, finite for s >= 1
            return 2.0 / beta * spectral_density(bath, max(w, 1e-12)) / max(w, 1e-12)
        return spectral_density(bath, w) / np.tanh(beta * w / 2.0)

    for i, ti in enumerate(t):
        if ti == 0.0:
            re, _ = integrate.quad(j_coth, 0.0, omega_max, limit=800)
            im = 0.0
        else:
            # oscillatory weights keep the quadrature honest at large omega_max
            re, _ = integrate.quad(j_coth, 0.0, omega_max, weight="cos", wvar=ti,
                                   limit=800)
            im, _ = integrate.quad(lambda w: spectral_density(bath, w), 0.0, omega_max,
                                   weight="sin", wvar=ti, limit=800)
            if tail_amp:
                si, ci = sici(omega_max * ti)
                re += -tail_amp * ci
                im += tail_amp * (np.pi / 2.0 - si)
        out[i] = (re - 1j * im) / np.pi
    return out


def jc_bath_hamiltonian(bath: BathSpec) -> np.ndarray:
    """Bare cavity Hamiltonian omega_c a^dag a on the truncated Fock space."""
    nb = bath.fock_truncation + 1
    a = _destroy(nb)
    return bath.cutoff * (a.conj().T @ a)


def multimode_bath_hamiltonian(modes, n_max: int) -> np.ndarray:
    """Bare bath Hamiltonian sum_k omega_k n_k on the tensor-product space."""
    nb = n_max + 1
    dims = [nb] * len(modes)
    a = _destroy(nb)
    h = np.zeros((nb ** len(modes),) * 2, dtype=complex)
    for k, (omega_k, _) in enumerate(modes):
        h = h + omega_k * _embed(a.conj().T @ a, k, dims)
    return h


def discrete_mode_correlator(modes, beta: float):
    """Free correlator of sum_k g_k (a_k + a_k^dag) in a thermal state.

    C(t) = sum_k g_k^2 [coth(beta w_k/2) cos(w_k t) - i sin(w_k t)]; returned
    as BathCorrelatorPoles-compatible callables via a small adapter class.
    """
    modes = [(float(w), float(g)) for w, g in modes]

    def series(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for w, g in modes:
            if g == 0.0:
                continue
            out += g * g * (np.cos(w * t) / np.tanh(beta * w / 2.0) - 1j * np.sin(w * t))
        return out

    return series
