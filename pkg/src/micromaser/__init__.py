"""Two-photon micromaser: dark states, hard walls, metastability and phase sensitivity."""

__version__ = "0.1.0"

from .channels import AtomState, KrausSet, discrete_map, generator_L0, kraus_two_photon
from .errors import MicromaserError
from .metrology import metrology_report, qfi
from .steady import pure_stationary
from .walls import phi_for_wall, wall_sequence
