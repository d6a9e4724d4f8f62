"""Uniform planar array geometry and near-field line-of-sight channels.

The array sits in the xy-plane with boresight along +z.  Channel entries
follow the spherical-wavefront model: an element-gain factor, free-space
inverse-distance amplitude decay and a phase term advancing with the exact
element-to-user distance, so users inside the Fraunhofer distance see
per-element phase curvature rather than a planar wavefront.
"""

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class ArrayGeometry:
    """Regular UPA: ``n_rows`` microstrips of ``n_cols`` elements each.

    Element (i, l) (1-based row/column) sits at
    ((l-1)*spacing_x, (i-1)*spacing_y, 0); vectors over elements are ordered
    (1,1),(1,2),...,(1,n_cols),(2,1),...,(n_rows,n_cols).
    """

    n_rows: int
    n_cols: int
    spacing_x: float
    spacing_y: float
    carrier_frequency: float
    gain_exponent: float = 2.0
    aperture_override: float | None = field(default=None)

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("array needs at least one row and one column")
        if self.spacing_x <= 0 or self.spacing_y <= 0:
            raise ValueError("element spacings must be positive")
        if self.carrier_frequency <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.gain_exponent < 0:
            raise ValueError("gain exponent must be nonnegative")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def n_elements(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def aperture(self) -> float:
        """Aperture length: the larger array dimension unless overridden."""
        if self.aperture_override is not None:
            return self.aperture_override
        return max((self.n_cols - 1) * self.spacing_x, (self.n_rows - 1) * self.spacing_y)

    @property
    def fraunhofer_distance(self) -> float:
        return fraunhofer_distance(self.aperture, self.wavelength)

    def element_positions(self) -> np.ndarray:
        """(N, 3) element coordinates in the declared ordering."""
        ii, ll = np.meshgrid(np.arange(self.n_rows), np.arange(self.n_cols), indexing="ij")
        pos = np.zeros((self.n_elements, 3))
        pos[:, 0] = (ll * self.spacing_x).ravel()
        pos[:, 1] = (ii * self.spacing_y).ravel()
        return pos


def half_wavelength_geometry(carrier_frequency, n_rows, n_cols, gain_exponent=2.0) -> ArrayGeometry:
    """UPA with lambda/2 spacing on both axes."""
    lam = SPEED_OF_LIGHT / carrier_frequency
    return ArrayGeometry(
        n_rows=n_rows,
        n_cols=n_cols,
        spacing_x=lam / 2.0,
        spacing_y=lam / 2.0,
        carrier_frequency=carrier_frequency,
        gain_exponent=gain_exponent,
    )


def fraunhofer_distance(aperture: float, wavelength: float) -> float:
    """Near/far-field boundary 2*D^2/lambda."""
    if aperture <= 0 or wavelength <= 0:
        raise ValueError("aperture and wavelength must be positive")
    return 2.0 * aperture**2 / wavelength


def element_gain(psi, gain_exponent):
    """Element radiation pattern: 6*cos(psi)^g in the front half-space, 0 behind.

    ``psi`` is the angle from array boresight, in [0, pi].  Accepts scalars or
    arrays.
    """
    psi = np.asarray(psi, dtype=float)
    if np.any(psi < 0) or np.any(psi > np.pi):
        raise ValueError("boresight angle must lie in [0, pi]")
    if gain_exponent < 0:
        raise ValueError("gain exponent must be nonnegative")
    front = psi <= np.pi / 2
    gain = np.where(front, 6.0 * np.cos(np.where(front, psi, 0.0)) ** gain_exponent, 0.0)
    return gain if gain.ndim else float(gain)


def boresight_angle(user_position, element_position) -> float:
    """Angle between +z and the element-to-user direction."""
    d = np.asarray(user_position, float) - np.asarray(element_position, float)
    r = np.linalg.norm(d)
    if r == 0.0:
        raise ValueError("user coincides with an array element")
    return float(np.arccos(np.clip(d[2] / r, -1.0, 1.0)))


def channel_entry(user_position, element_position, geometry: ArrayGeometry) -> complex:
    """Single-element complex channel amplitude.

    sqrt(gain) * lambda / (4*pi*d) * exp(-j * wavenumber * d) with d the exact
    element-to-user distance.
    """
    diff = np.asarray(user_position, float) - np.asarray(element_position, float)
    d = float(np.linalg.norm(diff))
    if d == 0.0:
        raise ValueError("user coincides with an array element")
    psi = float(np.arccos(np.clip(diff[2] / d, -1.0, 1.0)))
    g = element_gain(psi, geometry.gain_exponent)
    amp = np.sqrt(g) * geometry.wavelength / (4.0 * np.pi * d)
    return complex(amp * np.exp(-1j * geometry.wavenumber * d))


def channel_vector(geometry: ArrayGeometry, user_position) -> np.ndarray:
    """Length-N complex channel for one user, in the element ordering."""
    pos = geometry.element_positions()
    diff = np.asarray(user_position, float)[None, :] - pos
    d = np.linalg.norm(diff, axis=1)
    if np.any(d == 0.0):
        raise ValueError("user coincides with an array element")
    cos_psi = np.clip(diff[:, 2] / d, -1.0, 1.0)
    psi = np.arccos(cos_psi)
    g = element_gain(psi, geometry.gain_exponent)
    amp = np.sqrt(g) * geometry.wavelength / (4.0 * np.pi * d)
    return amp * np.exp(-1j * geometry.wavenumber * d)


def channel_matrix(geometry: ArrayGeometry, user_positions) -> np.ndarray:
    """(K, N) stack of channel vectors."""
    return np.array([channel_vector(geometry, u) for u in user_positions])
