"""Independent reference solutions.

* closed-form propagation of the laser-free chain in its eigenmode basis,
* Bessel-function limits of the infinite and semi-infinite chain,
* the resonant two-level Rabi formula,
* exact state-vector evolution in a truncated Fock space (single ion and
  chains of up to three ions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln, jv

from .integrate import IntegratorSettings, integrate
from .model import ChainParams, ConfigurationError, DriveConfig, TimeSeries

TAIL_THRESHOLD = 1e-10
MAX_FOCK_DIM = 2 ** 14


@dataclass(frozen=True)
class EigenmodeBasis:
    """Normal modes of the open nearest-neighbour chain.

    The hopping matrix ``J * (delta_{k,l+1} + delta_{k,l-1})`` has
    eigenvalues ``2J cos(j pi / (N+1))`` and sine eigenvectors.
    """

    n_ions: int
    hop: float
    frequencies: np.ndarray
    mode_shapes: np.ndarray  # mode_shapes[j, k] = v_j(k)

    @classmethod
    def for_chain(cls, n_ions: int, hop: float = 1.0) -> "EigenmodeBasis":
        j = np.arange(1, n_ions + 1)
        theta = j * np.pi / (n_ions + 1)
        freqs = 2.0 * hop * np.cos(theta)
        shapes = math.sqrt(2.0 / (n_ions + 1)) * np.sin(np.outer(j, j) * np.pi / (n_ions + 1))
        return cls(n_ions, hop, freqs, shapes)

    def propagate(self, amplitudes: np.ndarray, t: float) -> np.ndarray:
        coeffs = self.mode_shapes @ np.asarray(amplitudes, dtype=complex)
        return self.mode_shapes.T @ (np.exp(-1j * self.frequencies * t) * coeffs)


def eigenmode_propagate(params: ChainParams, t: float, amplitudes=None) -> np.ndarray:
    """Exact laser-free amplitudes at time ``t``.

    Starts from the pulse ``alpha0`` on site 1 unless ``amplitudes`` is given.
    """
    if amplitudes is None:
        amplitudes = np.zeros(params.n_ions, dtype=complex)
        amplitudes[0] = params.alpha0
    basis = EigenmodeBasis.for_chain(params.n_ions, params.hop)
    return basis.propagate(amplitudes, t)


class FreeChainReference:
    """Laser-free amplitude ``a_k_free(t)`` of one site, in closed form.

    Used as the reference for the tracking carrier. Immutable after
    construction, so concurrent evaluation is safe.
    """

    def __init__(self, params: ChainParams, site: int | None = None):
        self.site = params.driven_site if site is None else site
        basis = EigenmodeBasis.for_chain(params.n_ions, params.hop)
        self._freqs = basis.frequencies
        self._weights = basis.mode_shapes[:, self.site - 1] * basis.mode_shapes[:, 0] * params.alpha0
        self._freqs.setflags(write=False)
        self._weights.setflags(write=False)

    def __call__(self, t: float) -> complex:
        return complex(np.dot(self._weights, np.exp(-1j * self._freqs * t)))

    def derivative(self, t: float) -> complex:
        return complex(np.dot(-1j * self._freqs * self._weights, np.exp(-1j * self._freqs * t)))


def bessel_amplitude(k: int, jt: float) -> float:
    """|J_{k-1}(2 Jt)|: site-k amplitude on an infinite chain fed at site 1."""
    if k < 1 or jt < 0:
        raise ValueError("need k >= 1 and jt >= 0")
    return abs(float(jv(k - 1, 2.0 * jt)))


def edge_bessel_amplitude(k: int, jt: float) -> float:
    """|J_{k-1}(2 Jt) + J_{k+1}(2 Jt)|: semi-infinite chain fed at its end site.

    The open boundary acts as a node at site 0, so the infinite-chain
    solution picks up an antisymmetric image source at site -1.
    """
    if k < 1 or jt < 0:
        raise ValueError("need k >= 1 and jt >= 0")
    return abs(float(jv(k - 1, 2.0 * jt) + jv(k + 1, 2.0 * jt)))


def edge_amplitude(k: int, jt: float, alpha0: complex = 1.0) -> complex:
    """Complex semi-infinite-chain amplitude, phase included."""
    return complex((-1j) ** (k - 1) * (jv(k - 1, 2.0 * jt) + jv(k + 1, 2.0 * jt)) * alpha0)


def rabi_closed_form(w: float, t):
    """Excited population of a resonantly driven two-level system started in |g>."""
    return np.sin(0.5 * w * np.asarray(t)) ** 2


# --- truncated Fock space -------------------------------------------------

def coherent_tail(alpha: complex, dim: int) -> float:
    """Probability mass of |alpha> outside the first ``dim`` Fock states."""
    x = abs(alpha) ** 2
    if x == 0:
        return 0.0
    n = np.arange(dim, dim + 2000)
    terms = np.exp(-x + n * math.log(x) - gammaln(n + 1))
    return float(terms.sum())


def min_fock_dim(alpha: complex, threshold: float = TAIL_THRESHOLD) -> int:
    dim = 1
    while coherent_tail(alpha, dim) >= threshold:
        dim += 1
    return dim


def coherent_vector(alpha: complex, dim: int) -> np.ndarray:
    vec = np.empty(dim, dtype=complex)
    vec[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, dim):
        vec[n] = vec[n - 1] * alpha / math.sqrt(n)
    return vec


@dataclass(frozen=True)
class FockConfig:
    """Fock truncation and initial coherent amplitude.

    ``dim=None`` uses the default (32), raised if needed to the smallest
    dimension that meets the tail bound.
    """

    alpha: complex = 1.0
    dim: int | None = None

    def resolved_dim(self, default: int = 32) -> int:
        dim = self.dim if self.dim is not None else max(default, min_fock_dim(self.alpha))
        tail = coherent_tail(self.alpha, dim)
        if tail >= TAIL_THRESHOLD:
            raise ConfigurationError(
                f"Fock truncation dim={dim} leaves tail mass {tail:.3e} >= {TAIL_THRESHOLD:g} "
                f"for alpha={self.alpha}; need dim >= {min_fock_dim(self.alpha)}"
            )
        return dim


def _destroy(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, dim)), 1, format="csr", dtype=complex)


_SIGMA_PLUS = sp.csr_matrix(np.array([[0, 0], [1, 0]], dtype=complex))  # |e><g|, basis (g, e)
_PROJ_E = sp.csr_matrix(np.array([[0, 0], [0, 1]], dtype=complex))


def _kron_all(ops):
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), ops)


class _Schrodinger:
    """-i H(t) psi in flat real coordinates [Re psi, Im psi]."""

    def __init__(self, h_static, sigma_plus, omega2_of_t=None):
        self.h_static = h_static.tocsr()
        self.sp = sigma_plus.tocsr()
        self.sm = sigma_plus.getH().tocsr()
        self.omega2_of_t = omega2_of_t
        self.n = h_static.shape[0]

    def __call__(self, t, y):
        n = self.n
        psi = y[:n] + 1j * y[n:]
        hpsi = self.h_static @ psi
        if self.omega2_of_t is not None:
            w = self.omega2_of_t(t)
            hpsi = hpsi + 0.5 * (w * (self.sp @ psi) + np.conj(w) * (self.sm @ psi))
        d = -1j * hpsi
        return np.concatenate([d.real, d.imag])


def _oracle_settings(settings: IntegratorSettings | None) -> IntegratorSettings:
    return settings or IntegratorSettings(rtol=1e-10, atol=1e-12, method="explicit_rk54")


def fock_single_ion(config: FockConfig, g: float, omega2: complex, t_span, samples,
                    settings: IntegratorSettings | None = None,
                    jc_on: bool = True) -> TimeSeries:
    """Exact single-ion dynamics under (g/2)(a s+ + a^dag s-) + (1/2)(W2 s+ + W2* s-).

    The motional mode starts in ``|alpha>``, the ion in ``|g>``.
    ``samples`` is either a count (uniform grid over ``t_span``) or an
    array of sample times.
    """
    dim = config.resolved_dim(32)
    a = _destroy(dim)
    eye_f = sp.identity(dim, dtype=complex, format="csr")
    splus = sp.kron(eye_f, _SIGMA_PLUS, format="csr")
    h = 0.5 * omega2 * splus
    h = h + h.getH()
    if jc_on:
        jc = 0.5 * g * sp.kron(a, _SIGMA_PLUS, format="csr")
        h = h + jc + jc.getH()
    psi0 = np.kron(coherent_vector(config.alpha, dim), np.array([1.0, 0.0]))
    rhs = _Schrodinger(h, splus)
    ts = _sample_grid(t_span, samples)
    series = integrate(rhs, None, np.concatenate([psi0.real, psi0.imag]), t_span,
                       _oracle_settings(settings), ts)
    return _fock_observables(series, dim_total=2 * dim, proj_e=sp.kron(eye_f, _PROJ_E),
                             lowering=[sp.kron(a, sp.identity(2))])


def fock_tiny_chain(params: ChainParams, config: DriveConfig, t_span, samples,
                    per_site_dim: int | None = None,
                    settings: IntegratorSettings | None = None) -> TimeSeries:
    """Exact dynamics of the full chain Hamiltonian for ``n_ions <= 3``.

    Records ``P_e`` and the mean amplitudes ``<a_k>`` (complex, shape (S, N)),
    which are the quantities compared with the semiclassical model.
    """
    from .dynamics import carrier_drive  # local: dynamics imports nothing from here at module level

    n = params.n_ions
    if n > 3:
        raise ConfigurationError(f"fock_tiny_chain supports n_ions <= 3, got {n}")
    d = per_site_dim if per_site_dim is not None else min_fock_dim(params.alpha0)
    tail = coherent_tail(params.alpha0, d)
    if tail >= TAIL_THRESHOLD:
        raise ConfigurationError(
            f"per_site_dim={d} leaves coherent tail {tail:.3e} >= {TAIL_THRESHOLD:g}"
        )
    total = d ** n * 2
    if total > MAX_FOCK_DIM:
        raise ConfigurationError(f"Hilbert dimension {total} exceeds cap {MAX_FOCK_DIM}")

    eye_d = sp.identity(d, dtype=complex, format="csr")
    eye_q = sp.identity(2, dtype=complex, format="csr")
    a = _destroy(d)

    def site_op(op, k):
        ops = [op if j == k else eye_d for j in range(n)] + [eye_q]
        return _kron_all(ops)

    lowering = [site_op(a, k) for k in range(n)]
    splus = _kron_all([eye_d] * n + [_SIGMA_PLUS])
    h = sp.csr_matrix((total, total), dtype=complex)
    for k in range(n - 1):
        hop = params.hop * (lowering[k].getH() @ lowering[k + 1])
        h = h + hop + hop.getH()
    if config.jc_on:
        jc = 0.5 * params.coupling * (lowering[params.m] @ splus)
        h = h + jc + jc.getH()

    omega2_of_t = None
    if config.carrier_on:
        reference = FreeChainReference(params)
        omega2_of_t = lambda t: carrier_drive(t, config, params, reference)  # noqa: E731

    vacuum = np.zeros(d, dtype=complex)
    vacuum[0] = 1.0
    factors = [coherent_vector(params.alpha0, d)] + [vacuum] * (n - 1) + [np.array([1.0, 0.0])]
    psi0 = reduce(np.kron, factors)
    rhs = _Schrodinger(h, splus, omega2_of_t)
    ts = _sample_grid(t_span, samples)
    series = integrate(rhs, None, np.concatenate([psi0.real, psi0.imag]), t_span,
                       _oracle_settings(settings), ts)
    return _fock_observables(series, dim_total=total,
                             proj_e=_kron_all([eye_d] * n + [_PROJ_E]), lowering=lowering)


def _sample_grid(t_span, samples) -> np.ndarray:
    if np.ndim(samples) == 0:
        return np.linspace(t_span[0], t_span[1], int(samples))
    return np.asarray(samples, dtype=float)


def _fock_observables(series: TimeSeries, dim_total: int, proj_e, lowering) -> TimeSeries:
    y = series["y"]
    psi = y[:, :dim_total] + 1j * y[:, dim_total:]
    norm = np.sum(np.abs(psi) ** 2, axis=1)
    pe = np.real(np.einsum("si,si->s", psi.conj(), (proj_e @ psi.T).T))
    amps = np.stack([np.einsum("si,si->s", psi.conj(), (op @ psi.T).T) for op in lowering], axis=1)
    return TimeSeries(series.times, {"P_e": pe, "amplitudes": amps, "norm": norm},
                      dict(series.stats))
