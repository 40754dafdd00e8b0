"""Scaling regimes, material numbers and predicted convergence exponents.

Every exponent used elsewhere in the package is computed here.  The
exponents ``gamma`` and ``kappa`` are kept as exact rationals so that the
critical inertia case ``tau == -1`` is an exact equality test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Union

RationalLike = Union[Fraction, int, str, float]

#: ``"literal"`` takes the limit formulas exactly as stated: forcing kernel sign
#: ``+`` and bending stiffness integrated over a slab of thickness 2.
#: ``"consistent"`` flips the sign of the forcing kernel and uses the bending
#: stiffness of a plate of unit reference thickness; this is the variant that
#: agrees with the full 3D problem solved by :mod:`thinfsi.fsi_oracle`.
Convention = Literal["literal", "consistent"]
CONVENTIONS: tuple[str, ...] = ("literal", "consistent")


def as_rational(value: RationalLike) -> Fraction:
    """Convert ``value`` to an exact :class:`Fraction`.

    Strings such as ``"7/2"`` or ``"3.5"`` are parsed exactly.  Floats are
    converted through their shortest decimal representation so that ``3.5``
    becomes ``7/2`` and not a 53-bit binary fraction.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite exponent {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def check_convention(convention: str) -> str:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    return convention


def forcing_sign(convention: str) -> float:
    """Sign multiplying the forcing kernel ``F_alpha`` as stated in its literal form."""
    return 1.0 if check_convention(convention) == "literal" else -1.0


@dataclass(frozen=True)
class MaterialParams:
    """Dimensionless material numbers of the rescaled problem."""

    eta: float = 1.0
    rho_f: float = 1.0
    mu_hat: float = 1.0
    lambda_hat: float = 0.0
    rho_s_hat: float = 1.0

    def __post_init__(self):
        for name in ("eta", "rho_f", "mu_hat", "rho_s_hat"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and > 0, got {val!r}")
        if not (math.isfinite(self.lambda_hat) and self.lambda_hat >= 0):
            raise ValueError(f"lambda_hat must be finite and >= 0, got {self.lambda_hat!r}")

    @property
    def plate_modulus(self) -> float:
        """``mu (mu + lambda) / (2 mu + lambda)`` for the hatted Lame numbers."""
        mu, lam = self.mu_hat, self.lambda_hat
        return mu * (mu + lam) / (2 * mu + lam)


@dataclass(frozen=True)
class ScalingRegime:
    """The triple (gamma, kappa, tau) together with a thickness ``h``.

    ``eps``, ``tau``, ``chi_tau`` and ``T_scale`` are derived on access so
    they can never drift from the stored exponents.
    """

    gamma: Fraction
    kappa: Fraction
    h: float

    @property
    def eps(self) -> float:
        return self.h ** float(self.gamma)

    @property
    def tau(self) -> Fraction:
        return self.kappa - 3 * self.gamma - 3

    @property
    def chi_tau(self) -> int:
        return 1 if self.tau == -1 else 0

    @property
    def T_scale(self) -> float:
        return self.h ** float(self.tau)

    @property
    def reduced_valid(self) -> bool:
        return self.tau <= -1

    def lame(self, materials: MaterialParams) -> tuple[float, float, float]:
        """Physical ``(mu^h, lambda^h, rho_s^h)`` for this thickness."""
        scale = self.h ** (-float(self.kappa))
        return (materials.mu_hat * scale, materials.lambda_hat * scale,
                materials.rho_s_hat * scale)

    def with_h(self, h: float) -> "ScalingRegime":
        return build_regime(self.gamma, self.kappa, h)

    def as_manifest(self) -> dict[str, str]:
        return {
            "regime.gamma": str(self.gamma),
            "regime.kappa": str(self.kappa),
            "regime.tau": str(self.tau),
            "regime.h": repr(self.h),
            "regime.eps": repr(self.eps),
            "regime.chi_tau": str(self.chi_tau),
            "regime.T_scale": repr(self.T_scale),
            "regime.gamma_decimal": f"{float(self.gamma):.12g}",
            "regime.kappa_decimal": f"{float(self.kappa):.12g}",
            "regime.tau_decimal": f"{float(self.tau):.12g}",
        }


def build_regime(gamma: RationalLike, kappa: RationalLike, h: float) -> ScalingRegime:
    """Create a :class:`ScalingRegime`, validating the exponents and ``h``."""
    g, k = as_rational(gamma), as_rational(kappa)
    if g <= 0:
        raise ValueError(f"gamma must be > 0, got {g}")
    if k <= 0:
        raise ValueError(f"kappa must be > 0, got {k}")
    h = float(h)
    if not (0.0 < h < 1.0):
        raise ValueError(f"h must lie in (0, 1), got {h!r}")
    return ScalingRegime(g, k, h)


@dataclass(frozen=True)
class RatePrediction:
    vel_eps_pow: Fraction
    vel_h_exp: Fraction
    pressure_eps_pow: Fraction
    pressure_h_exp: Fraction
    disp_horiz_exp: Fraction
    disp_vert_exp: Fraction
    theorem_applicable: bool


def applicability_window(gamma: RationalLike) -> tuple[Fraction, Fraction]:
    """Half-open kappa window ``[lo, hi)`` in which the error rates are proved."""
    g = as_rational(gamma)
    lo = max(2 * g + 1, Fraction(7, 4) * g + Fraction(3, 2))
    return lo, 2 + 2 * g


def predict_rates(regime: ScalingRegime) -> RatePrediction:
    g, k = regime.gamma, regime.kappa
    lo, hi = applicability_window(g)
    half = Fraction(1, 2)
    rate = min(g / 2, 2 * g - k + 2)
    return RatePrediction(
        vel_eps_pow=Fraction(5, 2),
        vel_h_exp=rate,
        pressure_eps_pow=half,
        pressure_h_exp=rate,
        disp_horiz_exp=min(Fraction(1), g / 2, 2 * g + 2 - k),
        disp_vert_exp=min(half, g / 2, 2 * g + 2 - k),
        # the rates are only claimed for tau < -1
        theorem_applicable=(lo <= k < hi) and regime.tau < -1,
    )


@dataclass(frozen=True)
class PlateCoefficients:
    C_plate: float
    C_biharm: float
    C_inertia: float


def rescaled_coefficients(regime: ScalingRegime, materials: MaterialParams,
                          convention: Convention = "consistent") -> PlateCoefficients:
    """Coefficients of the pressure law and of the sixth-order equation.

    ``C_biharm`` multiplies the bi-Laplacian in the pressure law,
    ``C_plate = C_biharm / (12 eta)`` the sixth-order term and
    ``C_inertia`` the rotational inertia term (zero unless ``tau == -1``).
    """
    if not regime.reduced_valid:
        raise ValueError(f"tau = {regime.tau} > -1: the reduced model does not apply")
    check_convention(convention)
    # 8/3 integrates (z3 - 1/2)^2 over a slab of thickness 2, 1/3 over unit thickness
    thickness_factor = 8.0 / 3.0 if convention == "literal" else 1.0 / 3.0
    c_biharm = thickness_factor * materials.plate_modulus
    c_plate = c_biharm / (12.0 * materials.eta)
    c_inertia = regime.chi_tau * materials.rho_s_hat / (12.0 * materials.eta)
    return PlateCoefficients(C_plate=c_plate, C_biharm=c_biharm, C_inertia=c_inertia)
