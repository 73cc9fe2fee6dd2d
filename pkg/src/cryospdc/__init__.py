"""Design and analysis tools for quasi-phase-matched Type-II SPDC waveguide sources."""

__version__ = "0.1.0"
