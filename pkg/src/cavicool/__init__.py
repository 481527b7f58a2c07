"""cavicool: cavity-assisted cooling of a trapped dipole.

Analytic force-fluctuation spectra, cooling/heating rates, and final
occupations for a driven two-level dipole coupled to a lossy thermal cavity,
with a brute-force Lindblad evolution as ground truth.
"""

__version__ = "0.1.0"

from .params import SystemParams, derive, classify_regime, thermal_occupation
from .bloch import bloch_coefficients, bloch_system, steady_density
from .spectra import (full_spectrum, s_omega_regression, s_omega_resolvent,
                      s_g, s_interference)
from .cooling import (rates_from_spectrum, casc_closed_forms, casc_strong_drive,
                      nabla_g_closed_forms, table1, imperfection_scan)
from .presets import preset, preset_names

__all__ = [
    "__version__",
    "SystemParams", "derive", "classify_regime", "thermal_occupation",
    "bloch_coefficients", "bloch_system", "steady_density",
    "full_spectrum", "s_omega_regression", "s_omega_resolvent",
    "s_g", "s_interference",
    "rates_from_spectrum", "casc_closed_forms", "casc_strong_drive",
    "nabla_g_closed_forms", "table1", "imperfection_scan",
    "preset", "preset_names",
]
