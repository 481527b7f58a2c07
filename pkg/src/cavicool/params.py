"""System parameters, unit conventions, derived scales, and regime classification.

Unit conventions (fixed project-wide):

* All frequencies are angular and quoted in units of the trap frequency, so
  ``nu = 1`` is the default reduced-unit choice. The CLI can rescale absolute
  inputs on ingestion.
* ``kappa`` is the cavity *field* half-linewidth: photon energy decays at
  ``2*kappa``.
* ``Delta`` is the drive detuning from the (shifted) molecular resonance and is
  understood to already include the static cavity-induced shift of the
  transition. ``Delta_c`` is the cavity detuning from the same resonance, and
  the gradient-force spectrum is organised around ``Delta_g = Delta_c - Delta``.
* ``N`` is the thermal occupation of the cavity mode at the blackbody
  temperature of the environment (see :func:`thermal_occupation`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy import constants as _const

__all__ = [
    "SystemParams",
    "DerivedParams",
    "RegimeReport",
    "derive",
    "thermal_occupation",
    "classify_regime",
]


@dataclass(frozen=True)
class SystemParams:
    """Static parameter set of the cooling problem.

    All rates/frequencies in units of the trap frequency ``nu`` unless the
    caller consistently uses another scale (everything downstream is
    scale-covariant).
    """

    g: float            # molecule-cavity coupling
    kappa: float        # cavity field half-linewidth (energy decay 2*kappa)
    Omega: float        # drive Rabi frequency (>= 0 by convention)
    Delta: float        # drive detuning, Stark shift already included
    Delta_c: float      # cavity detuning from the molecular resonance
    N: float = 0.0      # thermal photon number of the cavity environment
    eta: float = 0.0    # Lamb-Dicke parameter of the running-wave drive
    eta_c: float = 0.0  # Lamb-Dicke parameter of the cavity mode gradient
    nu: float = 1.0     # trap frequency (unit of all other rates)

    def __post_init__(self):
        for name in ("g", "kappa", "Omega", "N", "eta", "eta_c", "nu"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value!r}")
        for name in ("Delta", "Delta_c"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive (a lossless cavity is not eliminable)")

    def replace(self, **kw) -> "SystemParams":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {
            "g": self.g, "kappa": self.kappa, "Omega": self.Omega,
            "Delta": self.Delta, "Delta_c": self.Delta_c, "N": self.N,
            "eta": self.eta, "eta_c": self.eta_c, "nu": self.nu,
        }


@dataclass(frozen=True)
class DerivedParams:
    """Handful of derived scales that every regime discussion is phrased in."""

    gamma: float          # cavity-induced decay 2 g^2 kappa / (kappa^2 + Delta_c^2)
    gamma_N: float        # thermally enhanced width (2N+1) * gamma
    delta_c_shift: float  # cavity-induced static shift (2N+1) g^2 Delta_c / (kappa^2 + Delta_c^2)
    Delta_g: float        # Delta_c - Delta
    Delta_bar: float      # dressed splitting sqrt(Delta^2 + Omega^2)
    sin_phi: float        # Omega / Delta_bar (0 when undriven and resonant)
    phi: float            # mixing angle, sin(phi) = Omega/Delta_bar, phi in [0, pi/2]
    rho_ee_thermal: float  # undriven excited population N/(2N+1)
    rho_ee_drive: float    # weak-drive population increment Omega^2/(2(2N+1)(2 Delta^2 + Omega^2))


def derive(p: SystemParams) -> DerivedParams:
    lorentz = p.kappa ** 2 + p.Delta_c ** 2
    gamma = 2.0 * p.g ** 2 * p.kappa / lorentz
    factor = 2.0 * p.N + 1.0
    delta_shift = factor * p.g ** 2 * p.Delta_c / lorentz
    bar = math.hypot(p.Delta, p.Omega)
    if bar == 0.0:
        sin_phi = 0.0
    else:
        sin_phi = p.Omega / bar
    denom = 2.0 * p.Delta ** 2 + p.Omega ** 2
    rho_drive = 0.0 if denom == 0.0 else p.Omega ** 2 / (2.0 * factor * denom)
    return DerivedParams(
        gamma=gamma,
        gamma_N=factor * gamma,
        delta_c_shift=delta_shift,
        Delta_g=p.Delta_c - p.Delta,
        Delta_bar=bar,
        sin_phi=sin_phi,
        phi=math.asin(min(1.0, sin_phi)),
        rho_ee_thermal=p.N / factor,
        rho_ee_drive=rho_drive,
    )


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose occupation of a mode at angular frequency ``omega`` (rad/s) and
    temperature ``temperature`` (K)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0.0:
        return 0.0
    x = _const.hbar * omega / (_const.k * temperature)
    if x > 700.0:  # exp would overflow; occupation is zero for all purposes
        return 0.0
    return 1.0 / math.expm1(x)


@dataclass(frozen=True)
class RegimeReport:
    """Where a parameter point sits relative to the analytic approximations.

    Every entry is advisory: out-of-regime points are flagged, never rejected.
    """

    bad_cavity: bool
    bad_cavity_ratio: float      # g sqrt(N+1) / kappa
    drive: str                   # "weak" | "strong" | "saturated" | "intermediate"
    casc_limit: str              # "sideband" if gamma_N < nu else "doppler"
    nabla_g_limit: str           # "sideband" if kappa < nu else "doppler"
    lamb_dicke: bool
    drive_elimination: bool      # eta*Omega small against the effective linewidth
    gradient_elimination: bool   # eta_c g^2/kappa small against the effective linewidth
    notes: tuple = field(default_factory=tuple)


def classify_regime(p: SystemParams) -> RegimeReport:
    """Tag the point with the validity regions of the closed-form results."""
    d = derive(p)
    ratio = p.g * math.sqrt(p.N + 1.0) / p.kappa
    notes = []
    if ratio > 0.3:
        notes.append("cavity not adiabatically eliminable: g*sqrt(N+1)/kappa > 0.3")

    if p.Omega < 0.1 * d.gamma_N:
        drive = "weak"
    elif p.Omega > 10.0 * max(d.gamma_N, abs(p.Delta)):
        drive = "saturated"
    elif 1.0 / 3.0 <= d.sin_phi <= 1.0 and p.Omega > d.gamma_N:
        drive = "strong"
    else:
        drive = "intermediate"

    lamb_dicke = p.eta <= 0.3 and p.eta_c <= 0.3
    if not lamb_dicke:
        notes.append("outside the Lamb-Dicke expansion: eta or eta_c > 0.3")

    # Perturbative elimination of the motion from the internal dynamics uses
    # the thermally broadened linewidth as the fast scale.
    gn = d.gamma_N if d.gamma_N > 0 else float("inf")
    drive_elim = p.eta * p.Omega <= 0.1 * gn
    grad_elim = p.eta_c * p.g ** 2 / p.kappa <= 0.1 * gn
    if not drive_elim:
        notes.append("drive recoil not perturbative: eta*Omega > 0.1*gamma_N")
    if not grad_elim:
        notes.append("gradient recoil not perturbative: eta_c*g^2/kappa > 0.1*gamma_N")

    return RegimeReport(
        bad_cavity=ratio <= 0.3,
        bad_cavity_ratio=ratio,
        drive=drive,
        casc_limit="sideband" if d.gamma_N < p.nu else "doppler",
        nabla_g_limit="sideband" if p.kappa < p.nu else "doppler",
        lamb_dicke=lamb_dicke,
        drive_elimination=drive_elim,
        gradient_elimination=grad_elim,
        notes=tuple(notes),
    )
