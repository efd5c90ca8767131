"""chaosde: simulation of SDEs driven by finite-order Wiener-chaos
processes, with pathwise Malliavin calculus and density diagnostics."""

__version__ = "0.1.0"
