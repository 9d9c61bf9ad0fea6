"""Semiclassical equations of motion for the driven chain.

Heisenberg equations of

    H = J sum_n (a_n^dag a_{n+1} + h.c.)
        + (g/2)(a_m s+ + a_m^dag s-) + (1/2)(W2(t) s+ + W2(t)* s-)

with the mean-field factorisation <a_m s+> = alpha_m <s+>. The driven spin
sees the field W = g*alpha_m + W2 and precesses as ds/dt = B x s with
B = (Re W, -Im W, 0); the phonon amplitude at site m feels the back-action
-i (g/2) <s->, <s-> = (s_x - i s_y)/2. Both |s| and (for W2 = 0) the
excitation number sum|alpha|^2 + (1 + s_z)/2 are exact invariants.

Flat real layout: ``[Re alpha (N), Im alpha (N), s_x, s_y, s_z]``.
"""

from __future__ import annotations

import cmath

import numpy as np

from .model import ChainParams, ChainState, ConfigurationError, DriveConfig


class DriveSample(tuple):
    """``(omega2, w_total)`` at one instant."""

    __slots__ = ()

    def __new__(cls, omega2: complex, w_total: complex):
        return super().__new__(cls, (complex(omega2), complex(w_total)))

    @property
    def omega2(self) -> complex:
        return self[0]

    @property
    def w_total(self) -> complex:
        return self[1]


def carrier_drive(t: float, config: DriveConfig, params: ChainParams, reference=None) -> complex:
    """Carrier Rabi frequency at time ``t``.

    In tracking mode ``reference(t)`` must give the laser-free amplitude of
    the driven site; the drive is ``g * alpha_m_free(t) * exp(i*phase)``.
    """
    if not config.carrier_on:
        return 0j
    if config.carrier_mode == "constant":
        return config.omega2
    if reference is None:
        raise ConfigurationError("tracking carrier needs a free-propagation reference")
    return params.coupling * reference(t) * cmath.exp(1j * config.phase)


def drive_sample(t, alpha_m: complex, config: DriveConfig, params: ChainParams, reference=None):
    omega2 = carrier_drive(t, config, params, reference)
    w = omega2 + (params.coupling * alpha_m if config.jc_on else 0j)
    return DriveSample(omega2, w)


def hop_apply(alpha: np.ndarray, hop: float) -> np.ndarray:
    """-i J (alpha_{k+1} + alpha_{k-1}) with open ends."""
    out = np.zeros_like(alpha, dtype=complex)
    out[:-1] += alpha[1:]
    out[1:] += alpha[:-1]
    return -1j * hop * out


def spin_rhs(w: complex, s) -> np.ndarray:
    sx, sy, sz = s
    return np.array([-w.imag * sz, -w.real * sz, w.real * sy + w.imag * sx])


def free_rhs(state: ChainState, params: ChainParams) -> ChainState:
    """Derivative under hopping only; the Bloch derivative is zero."""
    _check_dims(state, params)
    return ChainState(hop_apply(state.amplitudes, params.hop), (0.0, 0.0, 0.0))


def full_rhs(t: float, state: ChainState, params: ChainParams, config: DriveConfig,
             reference=None) -> ChainState:
    _check_dims(state, params)
    system = ChainSystem(params, config, reference)
    return ChainState.from_flat(system.rhs(t, state.to_flat()))


def single_ion_rhs(t: float, bloch, omega_tilde: complex, omega2: complex) -> np.ndarray:
    """Bloch precession in the effective single-ion model (alpha held fixed)."""
    return spin_rhs(complex(omega_tilde) + complex(omega2), bloch)


def _check_dims(state: ChainState, params: ChainParams):
    if state.n_ions != params.n_ions:
        raise ConfigurationError(
            f"state has {state.n_ions} amplitudes but params.n_ions={params.n_ions}"
        )


class ChainSystem:
    """Right-hand side and analytic Jacobian of the chain in flat coordinates."""

    def __init__(self, params: ChainParams, config: DriveConfig, reference=None):
        if config.carrier_on and config.carrier_mode == "tracking" and reference is None:
            raise ConfigurationError("tracking carrier needs a free-propagation reference")
        self.params = params
        self.config = config
        self.reference = reference
        n = params.n_ions
        self.n = n
        self.m = params.m
        self.g = params.coupling if config.jc_on else 0.0
        self._hop_block = params.hop * (np.eye(n, k=1) + np.eye(n, k=-1))

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        n, m = self.n, self.m
        re, im = y[:n], y[n:2 * n]
        sx, sy, sz = y[2 * n:]
        J = self.params.hop
        out = np.empty_like(y)
        # -i J (a_{k+1} + a_{k-1}) split into real and imaginary parts
        d_re = out[:n]
        d_im = out[n:2 * n]
        d_re[:] = 0.0
        d_im[:] = 0.0
        d_re[:-1] += im[1:]
        d_re[1:] += im[:-1]
        d_im[:-1] -= re[1:]
        d_im[1:] -= re[:-1]
        d_re *= J
        d_im *= J
        # back-action -i (g/2) <s->
        d_re[m] -= 0.25 * self.g * sy
        d_im[m] -= 0.25 * self.g * sx
        w = self.drive(t, complex(re[m], im[m])).w_total
        out[2 * n] = -w.imag * sz
        out[2 * n + 1] = -w.real * sz
        out[2 * n + 2] = w.real * sy + w.imag * sx
        return out

    def drive(self, t: float, alpha_m: complex) -> DriveSample:
        return drive_sample(t, alpha_m, self.config, self.params, self.reference)

    def jacobian(self, t: float, y: np.ndarray) -> np.ndarray:
        n, m, g = self.n, self.m, self.g
        dim = 2 * n + 3
        jac = np.zeros((dim, dim))
        jac[:n, n:2 * n] = self._hop_block
        jac[n:2 * n, :n] = -self._hop_block
        sx, sy, sz = y[2 * n:]
        w = self.drive(t, complex(y[m], y[n + m])).w_total
        ix, iy, iz = 2 * n, 2 * n + 1, 2 * n + 2
        jac[m, iy] = -0.25 * g
        jac[n + m, ix] = -0.25 * g
        # ds_x = -Im(W) s_z, ds_y = -Re(W) s_z, ds_z = Re(W) s_y + Im(W) s_x
        jac[ix, iz] = -w.imag
        jac[iy, iz] = -w.real
        jac[iz, ix] = w.imag
        jac[iz, iy] = w.real
        jac[ix, n + m] = -g * sz
        jac[iy, m] = -g * sz
        jac[iz, m] = g * sy
        jac[iz, n + m] = g * sx
        return jac


def chain_jacobian(t: float, state: ChainState, params: ChainParams, config: DriveConfig,
                   reference=None) -> np.ndarray:
    """Analytic d(full_rhs)/dy in the flat real coordinates (2N + 3 square)."""
    _check_dims(state, params)
    return ChainSystem(params, config, reference).jacobian(t, state.to_flat())
