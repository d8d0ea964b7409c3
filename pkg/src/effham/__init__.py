"""Energy-truncated effective Hamiltonians for finite spin chains, with
numerical certificates for their spectral-overlap and stability bounds."""

__version__ = "0.1.0"
