"""Mass-action kinetics for reaction networks.

This module computes net changes, propensities and the drift of the rate
equations. Temperature and volume are threaded through every signature so a
temperature-dependent rate law can be added without changing callers; with the
current constant-rate model neither affects the result.
"""

from typing import Sequence

import numpy as np

from src.models.crn import Crn, Reaction
from src.utils.errors import StructuralError

# Integrator round-off below this magnitude is clamped to zero.
NEGATIVE_TOLERANCE = 1e-12


def net_change(reaction: Reaction) -> np.ndarray:
    """Return ``product - source`` as an integer vector."""
    return np.subtract(reaction.product, reaction.source, dtype=np.int64)


def clamp_concentrations(conc: Sequence[float]) -> np.ndarray:
    """Clamp round-off negatives to zero.

    Args:
        conc: Concentration vector (mol/L)

    Returns:
        np.ndarray: A non-negative copy of ``conc``

    Raises:
        StructuralError: If an entry is below ``-NEGATIVE_TOLERANCE``
    """
    values = np.asarray(conc, dtype=float)
    if values.size and values.min() < 0.0:
        if values.min() < -NEGATIVE_TOLERANCE:
            raise StructuralError(
                f"negative concentration {values.min():.3e} exceeds round-off "
                f"tolerance {NEGATIVE_TOLERANCE:g}; tighten the integrator tolerances"
            )
        values = np.maximum(values, 0.0)
    return values


def rate_constant(reaction: Reaction, temperature: float) -> float:
    """Rate constant at ``temperature``; constant at its reference temperature."""
    return reaction.rate


def propensity(
    crn: Crn, reaction: Reaction, conc: Sequence[float], temperature: float
) -> float:
    """Mass-action propensity ``k(T) * prod_S conc_S ** r_S``.

    Args:
        crn: Network the reaction belongs to
        reaction: The reaction
        conc: Concentration vector (mol/L)
        temperature: Sample temperature (K)

    Returns:
        float: The non-negative propensity
    """
    values = clamp_concentrations(conc)
    if values.shape != (crn.size,):
        raise StructuralError(
            f"concentration vector has shape {values.shape}, expected ({crn.size},)"
        )
    return rate_constant(reaction, temperature) * float(
        np.prod(np.power(values, reaction.source))
    )


def propensities(crn: Crn, conc: Sequence[float], temperature: float) -> np.ndarray:
    """Vector of all reaction propensities, in reaction order."""
    values = clamp_concentrations(conc)
    if values.shape != (crn.size,):
        raise StructuralError(
            f"concentration vector has shape {values.shape}, expected ({crn.size},)"
        )
    if not crn.reactions:
        return np.zeros(0)
    monomials = np.prod(np.power(values[np.newaxis, :], crn.source_matrix), axis=1)
    return crn.rates * monomials


def drift(
    crn: Crn, conc: Sequence[float], volume: float, temperature: float
) -> np.ndarray:
    """Right-hand side of the rate equations, ``sum_tau net_tau * gamma_tau``.

    Args:
        crn: The network
        conc: Concentration vector (mol/L)
        volume: Sample volume (L); unused by concentration mass action
        temperature: Sample temperature (K)

    Returns:
        np.ndarray: d conc / dt

    Raises:
        StructuralError: On dimension mismatch or a large negative entry
    """
    props = propensities(crn, conc, temperature)
    if props.size == 0:
        return np.zeros(crn.size)
    return (crn.net_matrix * props[:, np.newaxis]).sum(axis=0)


def conservation_defect(crn: Crn, weights: Sequence[float]) -> float:
    """Largest ``|w . net_tau|`` over reactions; zero for a conserved vector."""
    w = np.asarray(weights, dtype=float)
    if not crn.reactions:
        return 0.0
    return float(np.max(np.abs(crn.net_matrix @ w)))


def drift_with_multipliers(
    crn: Crn, conc: Sequence[float], multipliers: Sequence[float], temperature: float
) -> np.ndarray:
    """Drift with every rate constant ``k_tau`` replaced by ``m_tau * k_tau``."""
    props = propensities(crn, conc, temperature)
    if props.size == 0:
        return np.zeros(crn.size)
    props = props * np.asarray(multipliers, dtype=float)
    return (crn.net_matrix * props[:, np.newaxis]).sum(axis=0)
