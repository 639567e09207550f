"""Few-mode scattering for one-dimensional potentials and dielectric cavities."""
from .geometry import *        # noqa: F401,F403
from .modes import *           # noqa: F401,F403
from .projection import *      # noqa: F401,F403
from .scattering import *      # noqa: F401,F403
from .interaction import *     # noqa: F401,F403
from .convergence import *     # noqa: F401,F403
from . import geometry, modes, projection, scattering, interaction, convergence

__version__ = "0.1.0"

__all__ = (geometry.__all__ + modes.__all__ + projection.__all__ + scattering.__all__
           + interaction.__all__ + convergence.__all__)
