"""Piecewise-constant Schrodinger propagation of the mixture components.

The field is held constant on each step ``[t_n, t_n + dt)`` and every step
propagator is the exact exponential ``exp(-i (H0 + mu E_n) dt)`` obtained from
an eigendecomposition of the (small, dense) Hermitian step generator.

Two unit modes are supported for the dipole:

``"scaled"``
    ``dipole * field`` is already an angular frequency [rad/s]. This is the
    default because no dipole magnitudes are fixed by the model.
``"si"``
    dipole in [C m], field in [V/m]; the product is divided by hbar.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.constants import hbar

from .errors import ConfigurationError, UsageError, ValidationError

__all__ = [
    "QuantumComponent",
    "ControlField",
    "StateTrajectory",
    "Evolution",
    "evolve",
    "propagate",
    "excitation_probability",
    "interaction_dipole",
]

_HERMITIAN_TOL = 1e-12
_NORM_TOL = 1e-10


@dataclass(frozen=True)
class QuantumComponent:
    """One species of the mixture.

    ``initial_state`` is either a unit ket of length ``dim`` or a ``dim x dim``
    density matrix (mixed initial condition).
    """

    label: str
    energies: np.ndarray
    dipole: np.ndarray
    initial_state: np.ndarray
    excited_indices: tuple
    weight: float = 1.0
    dipole_units: str = "scaled"

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=float)
        dipole = np.asarray(self.dipole, dtype=complex)
        init = np.asarray(self.initial_state, dtype=complex)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "dipole", dipole)
        object.__setattr__(self, "initial_state", init)
        object.__setattr__(self, "excited_indices", tuple(int(i) for i in self.excited_indices))

        dim = energies.shape[0] if energies.ndim == 1 else -1
        if energies.ndim != 1 or dim < 1:
            raise ConfigurationError(f"{self.label}: energies must be a non-empty vector")
        if dipole.shape != (dim, dim):
            raise ConfigurationError(
                f"{self.label}: dipole shape {dipole.shape} does not match dim {dim}")
        if init.shape not in ((dim,), (dim, dim)):
            raise ConfigurationError(
                f"{self.label}: initial state shape {init.shape} does not match dim {dim}")
        if self.dipole_units not in ("scaled", "si"):
            raise ValidationError(f"{self.label}: dipole_units must be 'scaled' or 'si'")

        scale = max(1.0, float(np.max(np.abs(dipole))))
        if np.max(np.abs(dipole - dipole.conj().T)) > _HERMITIAN_TOL * scale:
            raise ValidationError(f"{self.label}: dipole matrix is not Hermitian")
        if not np.all(np.isfinite(energies)):
            raise ValidationError(f"{self.label}: energies must be finite")

        if init.ndim == 1:
            if abs(np.linalg.norm(init) - 1.0) > _NORM_TOL:
                raise ValidationError(f"{self.label}: initial state is not normalized")
        else:
            if np.max(np.abs(init - init.conj().T)) > _HERMITIAN_TOL:
                raise ValidationError(f"{self.label}: initial density matrix is not Hermitian")
            if abs(np.trace(init).real - 1.0) > _NORM_TOL:
                raise ValidationError(f"{self.label}: initial density matrix has trace != 1")
            if np.min(np.linalg.eigvalsh(init)) < -_NORM_TOL:
                raise ValidationError(f"{self.label}: initial density matrix is not positive")

        if not self.excited_indices:
            raise ValidationError(f"{self.label}: excited_indices is empty")
        if any(i < 0 or i >= dim for i in self.excited_indices):
            raise ValidationError(f"{self.label}: excited index out of range 0..{dim - 1}")
        basis = self._basis_index()
        if basis is not None and basis in self.excited_indices and len(set(self.excited_indices)) < dim:
            raise ValidationError(
                f"{self.label}: initial basis state {basis} lies in the excited space")
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValidationError(f"{self.label}: weight must be finite and >= 0")

    def _basis_index(self):
        d = np.abs(self.rho0.diagonal())
        k = int(np.argmax(d))
        return k if abs(d[k] - 1.0) < _NORM_TOL else None

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    @property
    def is_pure(self) -> bool:
        return self.initial_state.ndim == 1

    @property
    def rho0(self) -> np.ndarray:
        if self.is_pure:
            psi = self.initial_state
            return np.outer(psi, psi.conj())
        return self.initial_state

    @property
    def projector(self) -> np.ndarray:
        p = np.zeros((self.dim, self.dim), dtype=complex)
        idx = list(self.excited_indices)
        p[idx, idx] = 1.0
        return p

    @property
    def coupling(self) -> np.ndarray:
        """Dipole in [rad/s per unit field]."""
        if self.dipole_units == "si":
            return self.dipole / hbar
        return self.dipole


@dataclass(frozen=True)
class ControlField:
    """Field samples ``E_n`` held on ``[n dt, (n+1) dt)``."""

    dt: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.atleast_1d(np.asarray(self.samples, dtype=float))
        object.__setattr__(self, "samples", samples)
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("ControlField.dt must be finite and > 0")
        if samples.ndim != 1 or samples.size < 1:
            raise ValidationError("ControlField needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("ControlField samples must be finite")

    @property
    def n_steps(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        """Left edges of the steps."""
        return np.arange(self.n_steps) * self.dt

    def with_samples(self, samples) -> "ControlField":
        return ControlField(self.dt, samples)


@dataclass(frozen=True)
class StateTrajectory:
    """States at the ``n_steps + 1`` grid points.

    For a pure start ``states`` has shape ``(n+1, dim)``; for a density-matrix
    start it has shape ``(n+1, dim, dim)``. ``unitaries`` holds the cumulative
    propagators ``U(t_n)`` when requested.
    """

    states: np.ndarray
    unitaries: Optional[np.ndarray] = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


class Evolution:
    """Step eigendecompositions and cumulative propagators for one component/field pair.

    Shared by propagation, interaction-picture dipoles and the exact gradient so
    the eigendecompositions are computed once.
    """

    def __init__(self, component: QuantumComponent, field: ControlField):
        self.component = component
        self.field = field
        mu = component.coupling
        h = np.diag(component.energies).astype(complex)[None, :, :] \
            + field.samples[:, None, None] * mu[None, :, :]
        self.eigvals, self.eigvecs = np.linalg.eigh(h)
        phase = np.exp(-1j * self.eigvals * field.dt)
        # S_n = W diag(phase) W^dagger
        self.steps = np.einsum("nab,nb,ncb->nac", self.eigvecs, phase, self.eigvecs.conj())
        self._cumulative = None

    @property
    def cumulative(self) -> np.ndarray:
        """``U(t_n)`` for n = 0..N, with ``U(0) = I``."""
        if self._cumulative is None:
            n, d = self.steps.shape[0], self.component.dim
            out = np.empty((n + 1, d, d), dtype=complex)
            out[0] = np.eye(d)
            for k in range(n):
                out[k + 1] = self.steps[k] @ out[k]
            self._cumulative = out
        return self._cumulative

    @property
    def final_unitary(self) -> np.ndarray:
        return self.cumulative[-1]

    def step_averaged_dipoles(self) -> np.ndarray:
        """``(1/dt) int_{t_n}^{t_n+dt} U^dagger(t) mu U(t) dt`` for every step, mu in rad/s per unit field.

        This is the exact derivative of the step propagator with respect to
        the step's field value, mapped to the interaction picture; it reduces
        to ``U^dagger(t_n) mu U(t_n)`` as ``dt -> 0``.
        """
        mu = self.component.coupling
        w = self.eigvecs
        lam = self.eigvals
        mu_eig = np.einsum("nba,bc,ncd->nad", w.conj(), mu, w)
        z = (lam[:, :, None] - lam[:, None, :]) * self.field.dt
        small = np.abs(z) < 1e-8
        z_safe = np.where(small, 1.0, z)
        # (e^{iz} - 1)/(iz), series for tiny z
        phi = np.where(small, 1.0 + 0.5j * z, np.expm1(1j * z_safe) / (1j * z_safe))
        inner = np.einsum("nab,nbc,ndc->nad", w, mu_eig * phi, w.conj())
        u = self.cumulative[:-1]
        return np.einsum("nba,nbc,ncd->nad", u.conj(), inner, u)


def evolve(component: QuantumComponent, field: ControlField) -> Evolution:
    return Evolution(component, field)


def propagate(component: QuantumComponent, field: ControlField, initial=None,
              return_unitaries: bool = False) -> StateTrajectory:
    """Propagate the component's initial state (or ``initial``) across the field grid.

    States are advanced step by step, so continuing a half-grid propagation
    from its final state reproduces the full-grid result bit for bit.
    """
    evo = Evolution(component, field)
    start = component.initial_state if initial is None else np.asarray(initial, dtype=complex)
    if start.shape not in ((component.dim,), (component.dim, component.dim)):
        raise ConfigurationError("initial state does not match component dimension")
    n = field.n_steps
    states = np.empty((n + 1,) + start.shape, dtype=complex)
    states[0] = start
    if start.ndim == 1:
        for k in range(n):
            states[k + 1] = evo.steps[k] @ states[k]
    else:
        for k in range(n):
            s = evo.steps[k]
            states[k + 1] = s @ states[k] @ s.conj().T
    return StateTrajectory(states, evo.cumulative if return_unitaries else None)


def _expect_excited(component: QuantumComponent, state: np.ndarray) -> float:
    idx = list(component.excited_indices)
    if state.ndim == 1:
        p = float(np.sum(np.abs(state[idx]) ** 2))
    else:
        p = float(np.real(np.sum(state[idx, idx])))
    return min(1.0, max(0.0, p))


def excitation_probability(component: QuantumComponent, field: ControlField) -> float:
    """``<Psi(tau_p)| P |Psi(tau_p)>`` for the component's excited-space projector."""
    return _expect_excited(component, propagate(component, field).final)


def interaction_dipole(component: QuantumComponent, field: ControlField,
                       step_index: int) -> np.ndarray:
    """``U^dagger(t_n) mu U(t_n)`` at grid point ``n`` (``0 <= n <= n_steps``)."""
    if not 0 <= step_index <= field.n_steps:
        raise UsageError(f"step_index {step_index} outside 0..{field.n_steps}")
    u = Evolution(component, field).cumulative[step_index]
    return u.conj().T @ component.dipole @ u


def excited_probabilities(components: Sequence[QuantumComponent], field: ControlField):
    return np.array([excitation_probability(c, field) for c in components])
