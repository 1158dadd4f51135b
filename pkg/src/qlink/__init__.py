"""Control-pulse design for photon-mediated state transfer over dispersive waveguides."""

__version__ = "0.1.0"
