"""Projections of ideal element weights onto the Lorentzian circle.

Unconstrained weight optimization ignores the amplitude-phase coupling of the
tunable elements, so its solution must be mapped back to the feasible circle
q = (j + e^{j*phi})/2.  Four schemes are provided:

* ``lcph``  -- keep each weight's phase, shape the amplitude sinusoidally,
  and switch off elements whose phase falls in the lower half-plane;
* ``lcush`` -- shift each unit-phase weight onto the circle by adding j;
* ``aoh``   -- amplitude-matched projection through an arcsine phase map;
* ``arlch`` -- fit a relaxed circle of adjustable diameter to the ideal
  weights (1-D discrepancy minimization over the radius), take the per-element
  projection phases at the best radius, then realize them on the unit circle.

``uw`` (or None) is the pass-through used by the unconstrained-weight bound.
"""

from dataclasses import dataclass

import numpy as np

from dma_swipt.dma import DmaWeights, lorentzian_weight

SCHEMES = ("arlch", "lcph", "lcush", "aoh", "uw")

_GRID_POINTS = 256
_RADIUS_TOL = 1e-6
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def wrap_phase(phase):
    """Wrap angles to [0, 2*pi)."""
    return np.mod(np.asarray(phase, float), 2.0 * np.pi)


@dataclass(frozen=True)
class ArlchResult:
    radius: float
    phases: np.ndarray
    discrepancy: float
    weights: DmaWeights


def map_lcph(ideal) -> DmaWeights:
    """Phase-preserving map: sin(psi) e^{j*psi} on [0, pi], zero below."""
    psi = wrap_phase(np.angle(np.asarray(ideal)))
    upper = psi <= np.pi
    vals = np.where(upper, np.sin(psi) * np.exp(1j * psi), 0.0)
    return DmaWeights(vals, tag="lorentzian")


def map_lcush(ideal) -> DmaWeights:
    """Unitary-shift map: (j + e^{j*psi})/2 from the ideal phases."""
    psi = wrap_phase(np.angle(np.asarray(ideal)))
    return DmaWeights(lorentzian_weight(psi), tag="lorentzian")


def map_aoh(ideal) -> DmaWeights:
    """Amplitude-matched map through theta = arcsin((1 + cos(psi))/2)."""
    psi = wrap_phase(np.angle(np.asarray(ideal)))
    theta = np.arcsin((1.0 + np.cos(psi)) / 2.0)
    return DmaWeights(np.sin(theta) * np.exp(1j * theta), tag="lorentzian")


def _projection_phases(ideal, radius):
    """Per-element phase of the projection onto the circle centre j*r/2,
    radius r/2; elements sitting exactly at the centre project to pi/2."""
    rel = ideal - 0.5j * radius
    phases = wrap_phase(np.angle(rel))
    at_centre = np.abs(rel) == 0.0
    if np.any(at_centre):
        phases = np.where(at_centre, np.pi / 2.0, phases)
    return phases


def _discrepancy(ideal, radii):
    """Sum of squared radial distances to the circle of each candidate radius."""
    radii = np.atleast_1d(radii)
    dist = np.abs(ideal[None, :] - 0.5j * radii[:, None])
    return ((dist - radii[:, None] / 2.0) ** 2).sum(axis=1)


def map_arlch(ideal) -> ArlchResult:
    """Adaptive-radius map: pick the circle diameter minimizing the squared
    discrepancy to the ideal weights, then realize the projection phases on
    the unit-diameter circle."""
    q = np.asarray(ideal, dtype=complex)
    if q.size == 0 or not np.any(q != 0):
        raise ValueError("adaptive-radius mapping needs a nonzero weight vector")

    r_max = 2.0 * float(np.max(np.abs(q - 1j))) + 1.0
    grid = np.linspace(r_max / _GRID_POINTS, r_max, _GRID_POINTS)
    if not np.any(np.isclose(grid, 1.0)):
        grid = np.sort(np.append(grid, 1.0))
    dvals = _discrepancy(q, grid)

    best_idx = int(np.argmin(dvals))
    best_r = float(grid[best_idx])
    best_d = float(dvals[best_idx])

    # golden-section refinement inside the bracketing grid interval
    lo = grid[max(best_idx - 1, 0)]
    hi = grid[min(best_idx + 1, grid.size - 1)]
    a, b = float(lo), float(hi)
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1 = float(_discrepancy(q, x1)[0])
    f2 = float(_discrepancy(q, x2)[0])
    while b - a > _RADIUS_TOL:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = float(_discrepancy(q, x1)[0])
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = float(_discrepancy(q, x2)[0])
        x, f = (x1, f1) if f1 <= f2 else (x2, f2)
        if f < best_d:
            best_r, best_d = float(x), float(f)

    phases = _projection_phases(q, best_r)
    weights = DmaWeights(lorentzian_weight(phases), tag="lorentzian")
    return ArlchResult(radius=best_r, phases=phases, discrepancy=best_d, weights=weights)


def map_weights(ideal, scheme) -> DmaWeights:
    """Dispatch to the selected mapping scheme; ``uw``/None passes through."""
    if scheme is None or scheme == "uw":
        return DmaWeights(np.asarray(ideal, dtype=complex), tag="unconstrained")
    if scheme == "lcph":
        return map_lcph(ideal)
    if scheme == "lcush":
        return map_lcush(ideal)
    if scheme == "aoh":
        return map_aoh(ideal)
    if scheme == "arlch":
        return map_arlch(ideal).weights
    raise ValueError(f"unknown mapping scheme {scheme!r}; expected one of {SCHEMES}")
