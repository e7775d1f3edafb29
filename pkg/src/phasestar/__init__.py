"""Phase-space quantum mechanics on a grid: Weyl maps, star products,
propagators and star exponentials."""
from .errors import ConfigError, DomainError, PhaseStarError
from .numerics import PhaseGrid

__version__ = "0.1.0"
__all__ = ["ConfigError", "DomainError", "PhaseStarError", "PhaseGrid", "__version__"]
