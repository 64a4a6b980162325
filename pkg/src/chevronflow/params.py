"""Physical and numerical constants of the chevron model.

Everything is kept in nondimensional form; no unit system is imposed.  The
default preset is a desk-scale configuration chosen for fast runs, not a
material database.  Two relations deserve attention:

* realizability: ``cos(theta) * sqrt(1 + b^2) <= 1`` is required for a unit
  director with in-plane component ``cos(theta) * sqrt(1 + b^2)`` to exist;
* tilt compatibility: ``c_perp = 2 * a_perp * sin(theta)**2`` makes a
  uniformly tilted, uniformly layered smectic-C monodomain stress free.  The
  default preset satisfies it; without it the bulk carries a residual stress
  that grows with the wave number.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .errors import (
    InvalidThickness,
    NonPositiveCoefficient,
    ParamOutOfRange,
    RealizabilityViolated,
    RhoOutOfRange,
)

_THETA_DEFAULT = math.radians(25.0)
_B_DEFAULT = math.tan(math.radians(20.0))
_CPERP_DEFAULT = 2.0 * math.sin(_THETA_DEFAULT) ** 2


@dataclass(frozen=True)
class PhysicalParams:
    """Material, field, and regularization constants.

    L        half cell width
    q        smectic wave number (2*pi over the bulk layer thickness)
    b        layer-mismatch parameter, tan(arccos(d_bulk / d_surface))
    theta    bulk tilt angle in radians
    K        Frank elastic constant (one-constant approximation)
    a_perp, a_par    fourth-order elastic coefficients
    c_perp, c_par    second-order elastic coefficients
    g_coef   smectic penalization strength
    P_pol    spontaneous polarization magnitude
    E_field  applied field strength, signed
    rho      weight of the third-derivative regularizer, in [0, 1)
    """

    L: float = 1.0
    q: float = 50.0
    b: float = _B_DEFAULT
    theta: float = _THETA_DEFAULT
    K: float = 1.0
    a_perp: float = 1.0
    a_par: float = 1.0
    c_perp: float = _CPERP_DEFAULT
    c_par: float = 1.0
    g_coef: float = 1.0
    P_pol: float = 1.0
    E_field: float = 0.0
    rho: float = 1e-3


@dataclass(frozen=True)
class ValidatedParams(PhysicalParams):
    """A ``PhysicalParams`` that passed :func:`validate`."""


@dataclass(frozen=True)
class FlowConfig:
    """Time-stepping and inner-solver configuration.

    ``n_steps * tau`` must exceed the horizon ``T``.  ``precondition``
    toggles the quasi-Newton acceleration of the inner minimizer; the plain
    projected-gradient path is kept behind the same contract.
    """

    tau: float = 1e-3
    T: float = 0.1
    n_steps: int = 101
    inner_tol: float = 1e-8
    inner_max_iters: int = 400
    n_nodes: int = 257
    precondition: bool = True


def mismatch_from_thickness(d_b: float, d_s: float) -> float:
    """Layer mismatch b = tan(arccos(d_b / d_s)) from bulk and surface thickness."""
    if not (0.0 < d_b <= d_s):
        raise InvalidThickness(
            f"need 0 < d_b <= d_s, got d_b={d_b!r}, d_s={d_s!r}"
        )
    ratio = d_b / d_s
    # tan(arccos(r)) = sqrt(1 - r^2) / r, exact 0 at r = 1
    return math.sqrt(max(0.0, 1.0 - ratio * ratio)) / ratio


_POSITIVE_COEFFS = ("a_perp", "a_par", "c_perp", "c_par", "g_coef", "K")


def validate(params: PhysicalParams) -> ValidatedParams:
    """Check every invariant; return the values re-wrapped as validated.

    Raises the error naming the first violated invariant.  Idempotent:
    validating an already validated instance returns an equal one.
    """
    p = params
    for f in fields(PhysicalParams):
        value = getattr(p, f.name)
        if not math.isfinite(value):
            raise ParamOutOfRange(f.name, f"{f.name} must be finite, got {value!r}")
    if p.L <= 0:
        raise ParamOutOfRange("L", f"L must be > 0, got {p.L}")
    if p.q < 1.0:
        raise ParamOutOfRange("q", f"q must be >= 1, got {p.q}")
    if not (0.0 <= p.rho < 1.0):
        raise RhoOutOfRange(f"rho must lie in [0, 1), got {p.rho}")
    for name in _POSITIVE_COEFFS:
        value = getattr(p, name)
        if value <= 0:
            raise NonPositiveCoefficient(name, f"{name} must be > 0, got {value}")
    if p.b < 0:
        raise ParamOutOfRange("b", f"b must be >= 0, got {p.b}")
    if not (0.0 < p.theta < math.pi / 2):
        raise ParamOutOfRange("theta", f"theta must lie in (0, pi/2), got {p.theta}")
    if math.cos(p.theta) * math.sqrt(1.0 + p.b * p.b) > 1.0:
        raise RealizabilityViolated(
            "cos(theta) * sqrt(1 + b^2) = "
            f"{math.cos(p.theta) * math.sqrt(1.0 + p.b * p.b):.6f} > 1; "
            "no unit director realizes this tilt/mismatch pair"
        )
    return ValidatedParams(**asdict(p))


def validate_flow_config(cfg: FlowConfig) -> FlowConfig:
    """Check the flow configuration invariants; return the config unchanged."""
    if not (cfg.tau > 0):
        raise ParamOutOfRange("tau", f"tau must be > 0, got {cfg.tau}")
    if not (cfg.T > 0):
        raise ParamOutOfRange("T", f"T must be > 0, got {cfg.T}")
    if cfg.n_steps * cfg.tau <= cfg.T:
        raise ParamOutOfRange(
            "n_steps",
            f"n_steps * tau = {cfg.n_steps * cfg.tau} must exceed T = {cfg.T}",
        )
    if cfg.n_nodes < 16:
        raise ParamOutOfRange("n_nodes", f"n_nodes must be >= 16, got {cfg.n_nodes}")
    if not (cfg.inner_tol > 0):
        raise ParamOutOfRange("inner_tol", f"inner_tol must be > 0, got {cfg.inner_tol}")
    if cfg.inner_max_iters < 1:
        raise ParamOutOfRange(
            "inner_max_iters", f"inner_max_iters must be >= 1, got {cfg.inner_max_iters}"
        )
    return cfg


def default_preset() -> ValidatedParams:
    """The built-in desk-scale parameter preset (a choice, not material data)."""
    return validate(PhysicalParams())
