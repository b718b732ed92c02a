"""Physical and regularization constants of the viscous-plastic sea-ice model.

All quantities are SI.  The defaults are literature-standard values for
Hibler-type models (axis ratio e = 2, ice strength p* = 27.5 kPa, strength
decay c = 20, ice/air/water densities, quadratic drag coefficients); every
one of them can be overridden per run.  The regularization constant ``delta``
carries units of s^-2 so that the regularized deformation measure
sqrt(delta + Delta^2) keeps units of s^-1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


VARIANTS = ("sqrt-delta", "min-cap", "tanh")


class InvalidStateError(ValueError):
    """A state (h, a) or parameter set left its admissible range."""


@dataclass(frozen=True)
class RheologyParams:
    """Constants of the rheology, drag forcing and balance laws.

    Attributes
    ----------
    e : ratio of major to minor axis of the elliptical yield curve.
    delta : regularization constant under the square root, s^-2.
    p_star : ice strength scale, N m^-2.
    c : strength decay rate with open-water fraction, dimensionless.
    kappa : thickness threshold below which a cell is open water, m.
    rho_ice, rho_atm, rho_ocean : densities, kg m^-3.
    C_atm, C_ocean : air and water drag coefficients, dimensionless.
    theta_atm, theta_ocean : drag rotation angles, rad.
    c_cor : Coriolis parameter, s^-1.
    g : gravity, m s^-2.
    d_h, d_a : thickness/compactness diffusivities, m^2 s^-1.
    variant : viscosity regularization, one of VARIANTS.
    zeta_max, eta_max : viscosity caps for the min-cap and tanh variants.
    """

    e: float = 2.0
    delta: float = 1e-12
    p_star: float = 27.5e3
    c: float = 20.0
    kappa: float = 0.1
    rho_ice: float = 900.0
    rho_atm: float = 1.3
    rho_ocean: float = 1026.0
    C_atm: float = 1.2e-3
    C_ocean: float = 5.5e-3
    theta_atm: float = 0.0
    theta_ocean: float = 0.0
    c_cor: float = 1.46e-4
    g: float = 9.81
    d_h: float = 1.0
    d_a: float = 1.0
    variant: str = "sqrt-delta"
    zeta_max: float = 1.0e12
    eta_max: float = 2.5e11

    def __post_init__(self):
        positive = (
            "e", "delta", "p_star", "c", "kappa", "rho_ice", "rho_atm",
            "rho_ocean", "C_atm", "C_ocean", "g", "d_h", "d_a",
            "zeta_max", "eta_max",
        )
        for name in positive:
            value = getattr(self, name)
            if not value > 0.0:
                raise InvalidStateError(f"parameter {name} must be > 0, got {value!r}")
        if self.variant not in VARIANTS:
            raise InvalidStateError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}")

    def with_(self, **kwargs) -> "RheologyParams":
        """Copy with selected fields replaced."""
        return replace(self, **kwargs)


def scaled_params(**overrides) -> RheologyParams:
    """Nondimensional parameter set used by desk-scale experiments.

    Unit ice density and strength keep all assembled operators O(1) so that
    identity checks can run at absolute tolerances near machine precision.
    """
    base = dict(
        e=2.0, delta=1e-6, p_star=1.0, c=2.0, kappa=0.1,
        rho_ice=1.0, rho_atm=1.3e-3, rho_ocean=1.1,
        C_atm=1.2e-3, C_ocean=5.5e-3, c_cor=0.0, g=1.0,
        d_h=1.0, d_a=1.0,
    )
    base.update(overrides)
    return RheologyParams(**base)
