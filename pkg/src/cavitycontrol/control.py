"""Discrimination objective, its exact field gradient, and gradient ascent.

The objective for target ``j`` is ``P_j - sum_{k != j} alpha_k P_k`` evaluated
at the end of the field grid. Its functional derivative at step ``n`` is

    -i Tr([rho0_j, P_j(tau)] V_j(t_n)) + i sum_k alpha_k Tr([rho0_k, P_k(tau)] V_k(t_n))

with ``P(tau) = U^dagger(tau) P U(tau)``. ``V(t_n)`` is the interaction-picture
dipole averaged over step ``n``, which makes ``dt * gradient`` the exact partial
derivative of the discretized objective with respect to ``E_n``.

In drive mode the field comes out of the cavity synthesis map and the chain
rule is closed with central differences of that map in each drive sample.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Union

import numpy as np

from .cavity import CavityConfig, PztDrive, control_field_from_drive
from .errors import ConfigurationError, NumericError, ValidationError
from .quantum import ControlField, Evolution, QuantumComponent, excitation_probability

logger = logging.getLogger(__name__)

__all__ = [
    "Mixture",
    "AscentConfig",
    "AscentReport",
    "DriveMap",
    "objective",
    "gradient_field",
    "gradient_drive",
    "ascend",
]


@dataclass(frozen=True)
class Mixture:
    components: tuple
    target_index: int = 0
    # optional (dt, n_steps) every field must match
    grid: Optional[tuple] = None

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValidationError("mixture has no components")
        if not 0 <= self.target_index < len(comps):
            raise ValidationError(f"target_index {self.target_index} out of range")
        for k, c in enumerate(comps):
            if k != self.target_index and not c.weight > 0:
                raise ValidationError(f"competitor {c.label!r} needs weight > 0")

    @property
    def target(self) -> QuantumComponent:
        return self.components[self.target_index]

    def signs(self) -> np.ndarray:
        """+1 for the target, -alpha_k for competitors."""
        return np.array([1.0 if k == self.target_index else -c.weight
                         for k, c in enumerate(self.components)])

    def check_field(self, field: ControlField) -> None:
        if self.grid is None:
            return
        dt, n = self.grid
        if field.n_steps != n or abs(field.dt - dt) > 1e-12 * dt:
            raise ConfigurationError(
                f"field grid (dt={field.dt:g}, n={field.n_steps}) does not match "
                f"mixture grid (dt={dt:g}, n={n})")

    @property
    def bounds(self) -> tuple:
        return -float(np.sum(np.abs(self.signs())) - 1.0), 1.0


@dataclass(frozen=True)
class AscentConfig:
    step_size: float = 1.0
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    line_search: bool = True
    fd_epsilon: float = 1e-9
    seed: int = 0
    max_halvings: int = 30
    growth: float = 1.5

    def __post_init__(self):
        problems = []
        if not self.step_size > 0:
            problems.append("ascent.step_size must be > 0")
        if not self.gradient_tolerance > 0:
            problems.append("ascent.gradient_tolerance must be > 0")
        if not self.fd_epsilon > 0:
            problems.append("ascent.fd_epsilon must be > 0")
        if self.max_iterations < 0:
            problems.append("ascent.max_iterations must be >= 0")
        if problems:
            raise ValidationError("; ".join(problems), problems)


@dataclass(frozen=True)
class AscentReport:
    objective_history: np.ndarray
    gradient_norm_history: np.ndarray
    final_field: ControlField
    final_drive: Optional[PztDrive]
    iterations_used: int
    step_history: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    converged: bool = False

    @property
    def final_objective(self) -> float:
        return float(self.objective_history[-1])


# --------------------------------------------------------------------------- objective / gradient

def objective(mixture: Mixture, field: ControlField) -> float:
    mixture.check_field(field)
    probs = np.array([excitation_probability(c, field) for c in mixture.components])
    return float(mixture.signs() @ probs)


def _component_gradient(component: QuantumComponent, field: ControlField) -> np.ndarray:
    evo = Evolution(component, field)
    u_final = evo.final_unitary
    p_tau = u_final.conj().T @ component.projector @ u_final
    rho0 = component.rho0
    comm = rho0 @ p_tau - p_tau @ rho0
    v = evo.step_averaged_dipoles()
    # -i Tr(C V_n)
    return np.real(-1j * np.einsum("ab,nba->n", comm, v))


def gradient_field(mixture: Mixture, field: ControlField) -> np.ndarray:
    """Functional derivative ``dF/dE(t_n)`` per step.

    Multiply by ``field.dt`` to get the partial derivative with respect to the
    sample ``E_n``.
    """
    mixture.check_field(field)
    grad = np.zeros(field.n_steps)
    for sign, comp in zip(mixture.signs(), mixture.components):
        grad += sign * _component_gradient(comp, field)
    return grad


# --------------------------------------------------------------------------- drive chain

class DriveMap:
    """Frozen synthesis map from sampled drive values to a ControlField.

    Jitter and every synthesis option are fixed at construction so repeated
    evaluations are deterministic.
    """

    def __init__(self, cavity: CavityConfig, dt: float, n_steps: int, drive_dt: float,
                 **synthesis_kw):
        self.cavity = cavity
        self.dt = dt
        self.n_steps = n_steps
        self.drive_dt = drive_dt
        self.synthesis_kw = synthesis_kw

    def drive(self, samples) -> PztDrive:
        return PztDrive.sampled(self.drive_dt, samples)

    def __call__(self, samples) -> ControlField:
        return control_field_from_drive(self.cavity, self.drive(samples), self.dt, self.n_steps,
                                        **self.synthesis_kw)

    def jacobian(self, samples, eps: float) -> np.ndarray:
        """Central-difference ``dE_n/du_m``, shape ``(n_steps, n_drive)``."""
        samples = np.asarray(samples, dtype=float)
        jac = np.empty((self.n_steps, samples.size))
        for m in range(samples.size):
            up = samples.copy()
            dn = samples.copy()
            up[m] += eps
            dn[m] -= eps
            col = (self(up).samples - self(dn).samples) / (2.0 * eps)
            if not np.all(np.isfinite(col)):
                raise NumericError(f"non-finite synthesis derivative for drive sample {m}")
            jac[:, m] = col
        return jac


def gradient_drive(mixture: Mixture, drive: PztDrive, cavity: CavityConfig,
                   config: AscentConfig, *, dt: float, n_steps: int,
                   drive_map: Optional[DriveMap] = None, **synthesis_kw) -> np.ndarray:
    """``dF/du_m = sum_n dt * dF/dE(t_n) * dE(t_n)/du_m``.

    ``dE/du`` comes from central differences of the synthesis map with step
    ``config.fd_epsilon`` [m].
    """
    if not drive.is_sampled:
        raise ConfigurationError("gradient_drive needs a sampled PztDrive")
    dmap = drive_map or DriveMap(cavity, dt, n_steps, drive.dt, **synthesis_kw)
    field = dmap(drive.samples)
    g = gradient_field(mixture, field) * field.dt
    return g @ dmap.jacobian(drive.samples, config.fd_epsilon)


# --------------------------------------------------------------------------- ascent

def _checked(value: float, iteration: int) -> float:
    if not np.isfinite(value):
        raise NumericError(f"objective diverged (value {value}) at iteration {iteration}")
    return value


def _run(f: Callable, grad: Callable, x0: np.ndarray, config: AscentConfig):
    x = np.array(x0, dtype=float)
    fx = _checked(f(x), 0)
    objective_hist, grad_hist, steps = [fx], [], []
    eps = config.step_size
    converged = False
    it = 0
    while True:
        g = grad(x)
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if not np.isfinite(gnorm):
            raise NumericError(f"gradient diverged at iteration {it}")
        grad_hist.append(gnorm)
        if gnorm < config.gradient_tolerance:
            converged = True
            break
        if it >= config.max_iterations:
            break
        it += 1
        if config.line_search:
            trial_eps = eps
            for _ in range(config.max_halvings + 1):
                x_new = x + trial_eps * g
                if not np.all(np.isfinite(x_new)):
                    trial_eps *= 0.5
                    continue
                f_new = f(x_new)
                if np.isfinite(f_new) and f_new > fx:
                    break
                trial_eps *= 0.5
            else:
                logger.info("line search stalled at iteration %d", it)
                converged = True
                break
            eps = trial_eps * config.growth
            steps.append(trial_eps)
        else:
            x_new = x + eps * g
            if not np.all(np.isfinite(x_new)):
                raise NumericError(f"control diverged to non-finite values at iteration {it}")
            f_new = _checked(f(x_new), it)
            steps.append(eps)
        x, fx = x_new, _checked(f_new, it)
        objective_hist.append(fx)
        logger.debug("iteration %d: F=%.10g |grad|=%.3g", it, fx, gnorm)
    return x, np.array(objective_hist), np.array(grad_hist), np.array(steps), it, converged


def ascend(mixture: Mixture, initial: Union[ControlField, PztDrive],
           cavity: Optional[CavityConfig] = None, config: AscentConfig = AscentConfig(),
           *, dt: Optional[float] = None, n_steps: Optional[int] = None,
           **synthesis_kw) -> AscentReport:
    """Gradient ascent ``x <- x + eps grad F`` on field samples or drive samples.

    With ``line_search`` the step is halved (up to ``max_halvings`` times) until
    the objective increases and grown by ``growth`` after each accepted step,
    so the objective history is non-decreasing. Iteration stops when the
    gradient sup-norm drops below ``gradient_tolerance``, the line search
    stalls, or ``max_iterations`` updates have been made.
    """
    if isinstance(initial, ControlField):
        template = initial
        x, fh, gh, sh, it, conv = _run(
            lambda s: objective(mixture, template.with_samples(s)),
            lambda s: gradient_field(mixture, template.with_samples(s)),
            initial.samples, config)
        return AscentReport(fh, gh, template.with_samples(x), None, it, sh, conv)

    if cavity is None or dt is None or n_steps is None:
        raise ConfigurationError("drive-mode ascent needs cavity, dt and n_steps")
    drive = initial if initial.is_sampled else initial.to_sampled(dt * n_steps / 8, 9)
    dmap = DriveMap(cavity, dt, n_steps, drive.dt, **synthesis_kw)

    def f(s):
        return objective(mixture, dmap(s))

    def grad(s):
        return gradient_drive(mixture, dmap.drive(s), cavity, config, dt=dt, n_steps=n_steps,
                              drive_map=dmap)

    x, fh, gh, sh, it, conv = _run(f, grad, drive.samples, config)
    return AscentReport(fh, gh, dmap(x), dmap.drive(x), it, sh, conv)
