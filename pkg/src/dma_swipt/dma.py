"""Metasurface transmitter model: waveguide feeds, Lorentzian weights, signal powers.

The transmitter has ``n_rows`` microstrips, each fed by one RF chain and
loaded with ``n_cols`` tunable elements.  A reference wave decays and rotates
along each strip (diagonal matrix H); each element multiplies it by a weight
constrained to the circle q = (j + e^{j*phi})/2, which couples amplitude and
phase: writing q = |q| e^{j*theta} forces |q| = sin(theta).

The element weight matrix mapping RF-chain inputs to element outputs is block
diagonal (strip i only sees chain i), so it is kept in factored per-strip
form; ``assemble_block_diagonal`` materializes it for oracles and tests.
"""

from dataclasses import dataclass

import numpy as np

from dma_swipt.geometry import ArrayGeometry

# numerical realization of the open interval 0 < rho < 1
RHO_EPS = 1e-4
# membership tolerance for the Lorentzian circle |q - j/2| = 1/2
LORENTZIAN_TOL = 1e-9


@dataclass(frozen=True)
class WaveguideModel:
    """Per-strip attenuation (1/m) and propagation constant (rad/m).

    ``element_offsets`` holds the position of each element along its strip;
    row i must be strictly increasing.
    """

    attenuation: np.ndarray
    phase_constant: np.ndarray
    element_offsets: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.attenuation) < 0):
            raise ValueError("attenuation must be nonnegative")
        off = np.asarray(self.element_offsets)
        if off.ndim != 2:
            raise ValueError("element_offsets must be (n_rows, n_cols)")
        if off.shape[1] > 1 and np.any(np.diff(off, axis=1) <= 0):
            raise ValueError("element offsets must increase along each strip")

    @classmethod
    def uniform(cls, geometry: ArrayGeometry, attenuation: float, phase_constant: float):
        """Same constants on every strip; elements spaced like the array grid,
        first element at the feed."""
        offsets = np.tile(np.arange(geometry.n_cols) * geometry.spacing_x, (geometry.n_rows, 1))
        return cls(
            attenuation=np.full(geometry.n_rows, float(attenuation)),
            phase_constant=np.full(geometry.n_rows, float(phase_constant)),
            element_offsets=offsets,
        )


@dataclass(frozen=True)
class DmaWeights:
    """Length-N complex element weights, tagged by feasibility domain."""

    values: np.ndarray
    tag: str = "unconstrained"  # "unconstrained" | "lorentzian"

    def __post_init__(self):
        if self.tag not in ("unconstrained", "lorentzian"):
            raise ValueError(f"unknown weight tag {self.tag!r}")
        if self.tag == "lorentzian":
            err = np.abs(np.abs(self.values - 0.5j) - 0.5)
            if np.any(err > LORENTZIAN_TOL):
                raise ValueError(
                    f"weights off the Lorentzian circle by up to {err.max():.2e}"
                )


@dataclass(frozen=True)
class QosTargets:
    """Per-user service requirements and receiver noise levels (linear units).

    ``sinr_targets`` are linear ratios, ``eh_thresholds`` are harvested-energy
    requirements in watts, and the noise fields are the antenna and
    baseband-conversion noise variances in watts.  Scalars broadcast to all
    users.
    """

    sinr_targets: np.ndarray
    eh_thresholds: np.ndarray
    antenna_noise: np.ndarray
    conversion_noise: np.ndarray

    @classmethod
    def broadcast(cls, n_users, sinr_target, eh_threshold, antenna_noise, conversion_noise):
        full = lambda v: np.broadcast_to(np.asarray(v, float), (n_users,)).copy()
        t = cls(full(sinr_target), full(eh_threshold), full(antenna_noise), full(conversion_noise))
        if np.any(t.sinr_targets <= 0):
            raise ValueError("SINR targets must be positive")
        if np.any(t.eh_thresholds < 0) or np.any(t.antenna_noise < 0) or np.any(t.conversion_noise < 0):
            raise ValueError("thresholds and noise variances must be nonnegative")
        return t

    @property
    def n_users(self) -> int:
        return len(self.sinr_targets)


def validate_ps_ratios(rho) -> np.ndarray:
    rho = np.atleast_1d(np.asarray(rho, float))
    if np.any(rho < RHO_EPS) or np.any(rho > 1.0 - RHO_EPS):
        raise ValueError(f"splitting ratios must lie in [{RHO_EPS}, {1 - RHO_EPS}]")
    return rho


def lorentzian_weight(phase):
    """Weight (j + e^{j*phase})/2 on the Lorentzian circle.  Vectorized."""
    return (1j + np.exp(1j * np.asarray(phase, float))) / 2.0


def propagation_diagonal(waveguide: WaveguideModel, geometry: ArrayGeometry) -> np.ndarray:
    """Length-N diagonal of the reference-wave propagation matrix."""
    alpha = np.asarray(waveguide.attenuation, float)[:, None]
    beta = np.asarray(waveguide.phase_constant, float)[:, None]
    d = np.asarray(waveguide.element_offsets, float)
    if d.shape != (geometry.n_rows, geometry.n_cols):
        raise ValueError("waveguide offsets do not match the array")
    return np.exp(-d * (alpha + 1j * beta)).ravel()


def propagation_matrix(waveguide: WaveguideModel, geometry: ArrayGeometry) -> np.ndarray:
    """Dense N x N diagonal matrix form of :func:`propagation_diagonal`."""
    return np.diag(propagation_diagonal(waveguide, geometry))


def assemble_block_diagonal(weights, n_rows: int) -> np.ndarray:
    """Dense (N, n_rows) weight matrix: column i carries strip i's weights."""
    q = np.asarray(weights).ravel()
    n_cols = q.size // n_rows
    if n_rows * n_cols != q.size:
        raise ValueError("weight length is not a multiple of the strip count")
    out = np.zeros((q.size, n_rows), dtype=complex)
    for i in range(n_rows):
        out[i * n_cols : (i + 1) * n_cols, i] = q[i * n_cols : (i + 1) * n_cols]
    return out


def _per_strip(vec, n_rows):
    vec = np.asarray(vec).ravel()
    return vec.reshape(n_rows, -1)


def effective_channel(gamma, h_diag, weights, n_rows: int) -> np.ndarray:
    """Compound channel seen by the digital precoder, one entry per RF chain.

    Returned as the column vector a with conj(a[i]) = sum_l conj(gamma[i,l])
    * h[i,l] * q[i,l], so the received amplitude for precoder w is the
    Hermitian product conj(a) @ w.
    """
    g = _per_strip(gamma, n_rows)
    h = _per_strip(h_diag, n_rows)
    q = _per_strip(weights, n_rows)
    if not (g.shape == h.shape == q.shape):
        raise ValueError("channel, propagation and weight lengths disagree")
    return (g * (h * q).conj()).sum(axis=1)


def effective_channels(channels, h_diag, weights, n_rows: int) -> np.ndarray:
    """(K, n_rows) stack of per-user effective channels."""
    return np.array([effective_channel(g, h_diag, weights, n_rows) for g in np.atleast_2d(channels)])


def tx_gram(h_diag, weights, n_rows: int) -> np.ndarray:
    """Transmit-power Gram matrix over RF chains (diagonal by block structure)."""
    hq2 = np.abs(_per_strip(h_diag, n_rows) * _per_strip(weights, n_rows)) ** 2
    return np.diag(hq2.sum(axis=1)).astype(complex)


def transmit_power(h_diag, weights, precoders, n_rows: int) -> float:
    """Total radiated power sum_m ||H Q w_m||^2 for unit-power symbols."""
    w = np.atleast_2d(np.asarray(precoders))  # (M, n_rows)
    hq2 = (np.abs(_per_strip(h_diag, n_rows) * _per_strip(weights, n_rows)) ** 2).sum(axis=1)
    return float(hq2 @ (np.abs(w) ** 2).sum(axis=0))


def received_amplitudes(channels, h_diag, weights, precoders, n_rows: int) -> np.ndarray:
    """(K, M) matrix of received amplitudes a_k^H w_m."""
    a = effective_channels(channels, h_diag, weights, n_rows)
    w = np.atleast_2d(np.asarray(precoders))
    return a.conj() @ w.T


def sinr_from_amplitudes(amps, k: int, rho_k: float, targets: QosTargets) -> float:
    """Decoder SINR for user k given the (K, M) received-amplitude matrix."""
    if not 0.0 < rho_k < 1.0:
        raise ValueError("splitting ratio must lie strictly inside (0, 1)")
    p = np.abs(amps[k]) ** 2
    signal = p[k]
    interference = p.sum() - signal
    noise = targets.antenna_noise[k] + targets.conversion_noise[k] / rho_k
    return float(signal / (interference + noise))


def sinr(k, channels, h_diag, weights, precoders, rho_k, targets, n_rows) -> float:
    """Decoder SINR: |a_k^H w_k|^2 over interference plus effective noise."""
    amps = received_amplitudes(channels, h_diag, weights, precoders, n_rows)
    return sinr_from_amplitudes(amps, k, rho_k, targets)


def eh_received_power_from_amplitudes(amps, k: int, rho_k: float) -> float:
    if not 0.0 < rho_k < 1.0:
        raise ValueError("splitting ratio must lie strictly inside (0, 1)")
    return float((1.0 - rho_k) * (np.abs(amps[k]) ** 2).sum())


def eh_received_power(k, channels, h_diag, weights, precoders, rho_k, n_rows) -> float:
    """RF power entering user k's harvester: (1-rho_k) * sum_m |a_k^H w_m|^2."""
    amps = received_amplitudes(channels, h_diag, weights, precoders, n_rows)
    return eh_received_power_from_amplitudes(amps, k, rho_k)
