"""telesim: simulator and analysis toolkit for photonic qubit teleportation
over a lossy free-space link."""

__version__ = "0.1.0"
