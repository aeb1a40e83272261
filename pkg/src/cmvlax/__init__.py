"""CMV-matrix Lax pairs for the defocusing Ablowitz-Ladik hierarchy.

Builds CMV, Floquet and half-line CMV matrices from Verblunsky coefficients,
evaluates the conserved quantities K_n and their gradients, and checks the
Lax identities {L, H} = [L, B] numerically.
"""

__version__ = "0.1.0"
