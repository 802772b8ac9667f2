"""Regenerate the synthetic decay series used by synthetic.ini.

Atom numbers follow the TBR + evaporation model with the published fit
parameters plus 2% noise; fractions are exponentials with 3% noise.
"""

from pathlib import Path

import numpy as np

from cslheat.core import preset_trap
from cslheat.fitting import synthetic_fraction_series, synthetic_number_series
from cslheat.io import write_series

# trap: (K3 [m^6/s], N0, tau_cool [s], f0, tau_f [s])
FITS = {
    "1": (3.6e-41, 7.0e4, 62.0, 0.76, 96.0),
    "2": (2.1e-41, 8.3e4, 43.0, 0.75, 383.0),
    "3": (3.2e-41, 8.2e4, 67.0, 0.71, 61.0),
    "4": (3.5e-41, 9.0e4, 75.0, 0.82, 203.0),
}


def main(out=Path(__file__).parent, seed=0):
    t = np.linspace(0.0, 150.0, 31)
    for i, (name, (k3, n0, tc, f0, tf)) in enumerate(FITS.items()):
        trap = preset_trap(name)
        write_series(out / f"number_{name}.csv", synthetic_number_series(k3, n0, tc, trap, f0, t, 0.02, seed + i))
        write_series(out / f"fraction_{name}.csv", synthetic_fraction_series(f0, tf, t, 0.03, seed + 100 + i))


if __name__ == "__main__":
    main()
