"""Memory-kernel construction, Volterra extraction, and effective-kernel tools.

Extraction solves the grid-level Volterra equation

    f(t_n) = sum_{m=0}^{n} K(t_m) V(t_{n-m}) dt,    f = dV/dt - L_s V,

step by step; the sum rule is the plain rectangle quadrature (trapezoidal
variant behind a flag), the derivative is the same centered-difference scheme
used by the dynamics engine.  The t = 0 value comes from the n = 0 equation
f(0) = K(0) V(0) dt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import convolve_causal, time_derivative
from .dynamics import TimeGrid, TrajectorySet
from .spectral import LaplaceSlice

DET_MASK_RELATIVE = 1e-10
CONDITION_LIMIT = 1e10


class IllConditionedStep(RuntimeError):
    """A Volterra step inversion exceeded the conditioning threshold."""

    def __init__(self, step, cond):
        super().__init__(f"Volterra step {step}: condition number {cond:.3g} "
                         f"exceeds the threshold")
        self.step = step
        self.cond = cond


@dataclass(frozen=True)
class KernelSeries:
    """Matrix (or scalar) kernel samples on a uniform causal grid."""

    grid: TimeGrid
    values: np.ndarray  # (n_t, m, m); scalars stored as (n_t, 1, 1)
    channel_label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None, None]
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ValueError("kernel values must be square matrices per step")
        if v.shape[0] != self.grid.n_steps + 1:
            raise ValueError("kernel length must match the grid")
        object.__setattr__(self, "values", v)

    @property
    def scalar_values(self):
        if self.values.shape[1] != 1:
            raise ValueError("not a scalar kernel")
        return self.values[:, 0, 0]

    def op_norms(self):
        return np.linalg.norm(self.values, ord=2, axis=(1, 2))


def born_kernel(correlator, grid: TimeGrid, prefactor=1.0,
                channel_label: str = "born") -> KernelSeries:
    """Scalar weak-coupling kernel: the bath correlator sampled on the grid.

    ``correlator`` is a BathCorrelatorPoles or any callable t -> C(t); the
    fixed system-operator prefactor multiplying C(t) is a stated convention
    of the caller (it cancels in every dispersion or sign test).
    """
    ts = grid.times
    series = correlator.time_series(ts) if hasattr(correlator, "time_series") \
        else np.asarray(correlator(ts), dtype=complex)
    return KernelSeries(grid, prefactor * series, channel_label)


def extract_matrix_kernel(tset: TrajectorySet, l_s, rule: str = "rect",
                          condition_limit: float = CONDITION_LIMIT) -> KernelSeries:
    """Multi-preparation Volterra deconvolution of the full matrix kernel.

    Solves K(t_n) from the stacked trajectory matrix V(t) (columns = one
    preparation each) and the residual F = dV/dt - L_s V.  The inversion
    reuses V(0)^{-1} at every step; rank or conditioning failures raise with
    the offending step index.
    """
    grid = tset.grid
    dt = grid.dt
    v = tset.stacked()               # (n_t, m, n_prep)
    l_s = np.asarray(l_s, dtype=complex)
    f = time_derivative(v, dt) - np.einsum("ab,tbj->taj", l_s, v)
    n_t, m, n_prep = v.shape
    if m != n_prep:
        raise ValueError("need as many preparations as vectorized components")
    cond0 = np.linalg.cond(v[0])
    if cond0 > condition_limit:
        raise IllConditionedStep(0, cond0)
    v0_inv = np.linalg.inv(v[0])
    kernel = np.empty((n_t, m, m), dtype=complex)
    w_end = 0.5 if rule == "trapz" else 1.0
    kernel[0] = f[0] @ v0_inv / dt
    for n in range(1, n_t):
        past = np.einsum("mab,mbj->aj", kernel[:n], v[n:0:-1])
        if rule == "trapz":
            past = past - 0.5 * kernel[0] @ v[n]
        kernel[n] = (f[n] / dt - past) @ v0_inv / w_end
    return KernelSeries(grid, kernel, "matrix")


def extract_scalar_kernel(channel, grid: TimeGrid, ell_s: complex = 0.0,
                          rule: str = "rect",
                          channel_label: str = "") -> KernelSeries:
    """Scalar-channel Volterra deconvolution (the force-fit extraction).

    The channel series sigma(t) is fitted to the homogeneous model
    d sigma/dt = ell_s sigma + (k * sigma); a correlated preparation makes the
    result an effective kernel that silently absorbs the discarded
    inhomogeneous term.
    """
    sigma = np.asarray(channel, dtype=complex)
    if sigma.shape[0] != grid.n_steps + 1:
        raise ValueError("channel length must match the grid")
    if abs(sigma[0]) < 1e-12:
        raise ValueError("scalar deconvolution undefined: channel starts at zero")
    dt = grid.dt
    f = time_derivative(sigma, dt) - ell_s * sigma
    n_t = sigma.size
    k = np.empty(n_t, dtype=complex)
    w_end = 0.5 if rule == "trapz" else 1.0
    k[0] = f[0] / (sigma[0] * dt)
    inv0 = 1.0 / sigma[0]
    for n in range(1, n_t):
        past = np.dot(k[:n], sigma[n:0:-1])
        if rule == "trapz":
            past = past - 0.5 * k[0] * sigma[n]
        k[n] = (f[n] / dt - past) * inv0 / w_end
    return KernelSeries(grid, k, channel_label)


def volterra_forward(kernel: KernelSeries, v0, l_s, rule: str = "rect") -> np.ndarray:
    """Regenerate trajectories from a kernel under the matched discrete scheme.

    Inverts the extraction step by step: given K and V(0), solve
    f(t_n) = sum K(t_m) V(t_{n-m}) dt together with the same
    centered-difference relation between V and f.  Matched schemes make
    extraction/integration an exact round trip up to float roundoff.
    """
    vals = kernel.values
    n_t = vals.shape[0]
    dt = kernel.grid.dt
    l_s = np.asarray(l_s, dtype=complex)
    v0 = np.asarray(v0, dtype=complex)
    scalar = v0.ndim == 0 or (vals.shape[1] == 1 and v0.size == 1)
    if scalar:
        v = np.empty(n_t, dtype=complex)
        v[0] = complex(v0)
        kk = vals[:, 0, 0]
        ell = complex(l_s)
        # Heun bootstrap for v[1]; the interior uses the leapfrog form matching
        # the centered-difference derivative of the extraction.
        dv0 = ell * v[0] + kk[0] * v[0] * dt
        v[1] = v[0] + dt * dv0
        for _ in range(2):
            conv1 = (kk[0] * v[1] + kk[1] * v[0]) * dt
            if rule == "trapz":
                conv1 -= 0.5 * dt * (kk[0] * v[1] + kk[1] * v[0])
            v[1] = v[0] + 0.5 * dt * (dv0 + ell * v[1] + conv1)
        for n in range(1, n_t - 1):
            conv = np.dot(kk[: n + 1], v[n::-1]) * dt
            if rule == "trapz":
                conv -= 0.5 * dt * (kk[0] * v[n] + kk[n] * v[0])
            v[n + 1] = v[n - 1] + 2.0 * dt * (ell * v[n] + conv)
        return v
    m = vals.shape[1]
    v0 = v0 if v0.ndim == 2 else v0[:, None]
    v = np.empty((n_t, m, v0.shape[1]), dtype=complex)
    v[0] = v0
    dv0 = l_s @ v[0] + vals[0] @ v[0] * dt
    v[1] = v[0] + dt * dv0
    for _ in range(2):
        conv1 = (vals[0] @ v[1] + vals[1] @ v[0]) * dt
        if rule == "trapz":
            conv1 -= 0.5 * dt * (vals[0] @ v[1] + vals[1] @ v[0])
        v[1] = v[0] + 0.5 * dt * (dv0 + l_s @ v[1] + conv1)
    for n in range(1, n_t - 1):
        conv = np.einsum("mab,mbj->aj", vals[: n + 1], v[n::-1]) * dt
        if rule == "trapz":
            conv -= 0.5 * dt * (vals[0] @ v[n] + vals[n] @ v[0])
        v[n + 1] = v[n - 1] + 2.0 * dt * (l_s @ v[n] + conv)
    return v


@dataclass(frozen=True)
class EffectiveKernelSlice:
    """Force-fit kernel on a frequency line, with its ingredients retained."""

    omega: np.ndarray
    epsilon: float
    values: np.ndarray
    kernel_part: np.ndarray
    inhom_part: np.ndarray
    sigma_part: np.ndarray
    mask: np.ndarray  # True where the quotient is defined

    def recombine(self):
        """Re-evaluate kernel + inhom/sigma; bitwise-reproduces ``values``."""
        return _combine_effective(self.kernel_part, self.inhom_part,
                                  self.sigma_part, self.mask)


def _combine_effective(kpart, ipart, spart, mask):
    out = np.array(kpart, dtype=complex, copy=True)
    if spart.ndim == 1:
        out[mask] = kpart[mask] + ipart[mask] / spart[mask]
    else:
        inv = np.linalg.inv(spart[mask])
        out[mask] = kpart[mask] + np.einsum("tab,tbc->tac", ipart[mask], inv)
    return out


def effective_kernel(kernel_slice: LaplaceSlice, inhom_slice: LaplaceSlice,
                     sigma_slice: LaplaceSlice, mode: str = "scalar",
                     det_mask_relative: float = DET_MASK_RELATIVE) -> EffectiveKernelSlice:
    """Assemble the force-fit kernel quotient on a shared frequency line.

    Scalar mode divides channelwise; matrix mode inverts the stacked
    trajectory matrix wherever |det| clears the relative threshold and marks
    the remaining frequencies masked (reported, never interpolated).
    """
    for other in (inhom_slice, sigma_slice):
        if other.values.shape[0] != kernel_slice.values.shape[0] or \
                other.epsilon != kernel_slice.epsilon:
            raise ValueError("slices must share the frequency grid and shift")
    kpart = kernel_slice.values
    ipart = inhom_slice.values
    spart = sigma_slice.values
    if mode == "scalar":
        if spart.ndim == 3:
            raise ValueError("scalar mode needs scalar sigma")
        mask = np.abs(spart) > det_mask_relative * np.abs(spart).max()
    elif mode == "matrix":
        dets = np.abs(np.linalg.det(spart))
        mask = dets > det_mask_relative * dets.max()
    else:
        raise ValueError("mode must be 'scalar' or 'matrix'")
    values = _combine_effective(kpart, ipart, spart, mask)
    return EffectiveKernelSlice(kernel_slice.omega, kernel_slice.epsilon,
                                values, kpart, ipart, spart, mask)


@dataclass(frozen=True)
class ZeroResidueSet:
    """Upper-half-plane zeros with force-fit pole residues."""

    zeros: tuple
    residues: tuple

    def __post_init__(self):
        if len(self.zeros) != len(self.residues):
            raise ValueError("zeros/residues length mismatch")


def residue_at_zero(inhom, transform, zeta, step: float = 1e-8) -> complex:
    """R = inhom(zeta) / transform'(zeta) with a complex-step derivative.

    The derivative (f(z + ih) - f(z))/(ih) suffers no subtractive loss at a
    zero of f, which is exactly where it is needed.
    """
    deriv = (transform(zeta + 1j * step) - transform(zeta)) / (1j * step)
    return complex(inhom(zeta)) / complex(deriv)


def modified_kk_correction(zero_set: ZeroResidueSet, omega) -> np.ndarray:
    """Dispersion-relation correction from uncancelled UHP zeros.

    Delta(w) = 2 sum_j Re[ R_j / (w - zeta_j) ]; empty sets return zero (the
    robust regime, where the standard relation is recovered).
    """
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(omega.shape)
    for zeta, res in zip(zero_set.zeros, zero_set.residues):
        if np.imag(zeta) <= 0:
            raise ValueError("correction terms require Im zeta > 0")
        out += 2.0 * np.real(res / (omega - zeta))
    return out


@dataclass(frozen=True)
class SelfConsistencyReport:
    """Dispersion residuals of a robust-regime kernel and its perturbations."""

    factorized_residual: float
    perturbed_residual: float
    broken_residual: float
    epsilon_strength: float
    correction_max: float  # max |Delta| of the (empty) UHP zero set


def ibm_self_consistency(bath, epsilon_strength: float, omega,
                         matsubara_count: int = 4) -> SelfConsistencyReport:
    """Robust-regime dispersion self-consistency for a dephasing-type model.

    The weak-coupling kernel slice is the bath-correlator pole sum; a
    correlation perturbation built from the same machinery (simple poles kept
    below the axis, so its real and imaginary parts stay Hilbert partners) is
    added at strength epsilon.  Both the factorized and the perturbed kernels
    must satisfy the dispersion relation at roundoff; deliberately dropping
    the imaginary partner of the perturbation breaks it by orders of
    magnitude.  Residuals are max-abs over the grid, evaluated against the
    closed-form pole reconstruction.
    """
    from .models import bath_correlator_poles
    from .spectral import hilbert_exact_poles, pole_sum

    omega = np.asarray(omega, dtype=float)
    poles = bath_correlator_poles(bath, matsubara_count).lower_half_plane_poles()
    # Perturbation: reuse the pole set, shifted and reweighted; still a
    # UHP-analytic rational function, i.e. a Hilbert-paired correction with an
    # empty UHP zero contribution (Delta = 0 identically).
    pert = [(0.5 * a, p - 0.3 * bath.cutoff) for a, p in poles]
    empty = ZeroResidueSet((), ())
    delta = modified_kk_correction(empty, omega)

    def residual(pole_list):
        direct = pole_sum(pole_list, omega).real
        recon = hilbert_exact_poles(pole_list, omega)
        return float(np.max(np.abs(direct - recon)))

    fact = residual(poles)
    combined = poles + [(epsilon_strength * a, p) for a, p in pert]
    perturbed = residual(combined)
    # Broken pairing: add only the real part of the perturbation, leaving the
    # imaginary side untouched.
    direct = pole_sum(poles, omega)
    pert_vals = pole_sum([(epsilon_strength * a, p) for a, p in pert], omega)
    broken_re = direct.real + pert_vals.real
    broken = float(np.max(np.abs(broken_re - hilbert_exact_poles(poles, omega))))
    return SelfConsistencyReport(fact, perturbed, broken, epsilon_strength,
                                 float(np.max(np.abs(delta))))
