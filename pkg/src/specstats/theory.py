"""Analytic fluctuation measures for the unitary and symplectic universality classes.

Complete-spectrum quantities: two-point cluster function Y2(r), form-factor
complement b(tau) (K = 1 - b), number variance Sigma^2(L) and spectral
rigidity Delta_3(L) by quadrature over Y2.

Incomplete-spectrum quantities for an observed fraction phi of levels:
nearest-neighbor spacing density p(s), number variance sigma^2(L), rigidity
delta_3(L), and the displacement power spectrum s(tau_tilde), together with a
one-parameter fit of phi to measured curves.

All level sequences are assumed unfolded to unit mean spacing; for thinned
sequences the mean spacing is that of the thinned sequence itself.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.special import sici

from .errors import EstimationFailure

__all__ = [
    "EnsembleClass",
    "SpacingFit",
    "MissingLevelParams",
    "spacing_model",
    "constrained_gamma_chi",
    "surmise_fit",
    "default_missing_params",
    "cluster_y2",
    "form_b",
    "form_factor",
    "sigma2_complete",
    "delta3_complete",
    "p_missing",
    "sigma2_missing",
    "delta3_missing",
    "power_missing",
    "estimate_phi",
]


class EnsembleClass(enum.Enum):
    """Symmetry class of the chaotic system: broken time reversal (GUE)
    or time reversal with T^2 = -1 (GSE)."""

    GUE = "GUE"
    GSE = "GSE"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).upper())


# ---------------------------------------------------------------------------
# spacing-model family  P~(s) = gamma * s^mu * exp(-chi * s^2)
# ---------------------------------------------------------------------------

def spacing_model(s, gamma, mu, chi):
    """Density gamma * s^mu * exp(-chi s^2); s may be scalar or array."""
    scalar = np.isscalar(s)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = gamma * s[pos] ** mu * np.exp(-chi * s[pos] ** 2)
    return float(out[0]) if scalar else out


def model_area_mean(gamma, mu, chi):
    """Closed-form area and mean of the spacing-model density."""
    a = gamma * gamma_fn((mu + 1) / 2) / (2 * chi ** ((mu + 1) / 2))
    m = gamma * gamma_fn((mu + 2) / 2) / (2 * chi ** ((mu + 2) / 2))
    return a, m / a


def constrained_gamma_chi(mu, mean):
    """(gamma, chi) making the model have unit area and the given mean."""
    chi = (gamma_fn(mu / 2 + 1) / (mean * gamma_fn((mu + 1) / 2))) ** 2
    gamma = 2 * chi ** ((mu + 1) / 2) / gamma_fn((mu + 1) / 2)
    return gamma, chi


@dataclass(frozen=True)
class SpacingFit:
    """Fitted spacing-model parameters for the order-n spacing density.

    order n means spacings between levels n+1 apart, so the constrained
    model has unit area and mean n+1 (enforced unless constrained=False,
    used for raw fits to unnormalized data). `residual` is the rms weighted
    fit residual; `raw_params` keeps the pre-projection (gamma, mu, chi).
    """

    order: int
    gamma: float
    mu: float
    chi: float
    residual: float = 0.0
    raw_params: tuple = None
    constrained: bool = True

    def __post_init__(self):
        if self.gamma <= 0 or self.chi <= 0 or self.mu <= 0:
            raise ValueError("spacing-model parameters must be positive")
        if not self.constrained:
            return
        area, mean = model_area_mean(self.gamma, self.mu, self.chi)
        if abs(area - 1.0) > 0.01:
            raise ValueError(f"fitted model area {area:.4f} deviates from 1 by >1%")
        if abs(mean - (self.order + 1)) > 0.02 * (self.order + 1):
            raise ValueError(
                f"fitted model mean {mean:.4f} deviates from {self.order + 1} by >2%"
            )

    def density(self, s):
        return spacing_model(s, self.gamma, self.mu, self.chi)


def surmise_fit(cls, order=0):
    """Constrained spacing-model member with the class's repulsion exponent.

    mu = 2 (GUE) or 4 (GSE) at order 0; for the nearest-neighbor law these
    are the classic closed forms (32/pi^2) s^2 e^{-4s^2/pi} and
    (2^18/3^6 pi^3) s^4 e^{-64 s^2/(9 pi)}.
    """
    cls = EnsembleClass.coerce(cls)
    mu = {EnsembleClass.GUE: 2.0, EnsembleClass.GSE: 4.0}[cls] * (order + 1)
    g, c = constrained_gamma_chi(mu, order + 1.0)
    return SpacingFit(order=order, gamma=g, mu=mu, chi=c)


# ---------------------------------------------------------------------------
# two-point cluster function and form factor
# ---------------------------------------------------------------------------

def _dsinc2(r):
    """d/dr [ sin(2 pi r) / (2 pi r) ], series-protected near r = 0."""
    r = np.asarray(r, dtype=float)
    u = 2 * np.pi * r
    small = np.abs(u) < 1e-4
    out = np.empty_like(r)
    us = u[small]
    out[small] = 2 * np.pi * (-us / 3 + us ** 3 / 30)
    ub = u[~small]
    out[~small] = 2 * np.pi * (ub * np.cos(ub) - np.sin(ub)) / ub ** 2
    return out


def cluster_y2(cls, r):
    """Two-point cluster function Y2(r) of unfolded levels, r >= 0.

    GUE: (sin(pi r)/(pi r))^2.
    GSE: (sin(2 pi r)/(2 pi r))^2
         - d/dr[sin(2 pi r)/(2 pi r)] * Int_0^r sin(2 pi x)/(2 pi x) dx,
      the integral being Si(2 pi r)/(2 pi).
    """
    cls = EnsembleClass.coerce(cls)
    scalar = np.isscalar(r)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    if cls is EnsembleClass.GUE:
        y = np.sinc(r) ** 2
    else:
        si, _ = sici(2 * np.pi * r)
        y = np.sinc(2 * r) ** 2 - _dsinc2(r) * si / (2 * np.pi)
    return float(y[0]) if scalar else y


def form_b(cls, tau):
    """Form-factor complement b(tau) = 1 - K(tau).

    GUE: 1 - |tau| on |tau| <= 1, zero beyond.
    GSE: 1 - |tau|/2 + (|tau|/4) ln|1 - |tau|| on |tau| < 2, zero beyond;
         logarithmically singular at |tau| = 1 (raises there).
    """
    cls = EnsembleClass.coerce(cls)
    t = abs(float(tau))
    if cls is EnsembleClass.GUE:
        return 1.0 - t if t <= 1.0 else 0.0
    if t >= 2.0:
        return 0.0
    if t == 1.0:
        raise ValueError("GSE b(tau) has a logarithmic singularity at |tau| = 1; "
                         "offset the evaluation point")
    return 1.0 - t / 2 + (t / 4) * math.log(abs(1.0 - t))


def form_factor(cls, tau):
    """Spectral form factor K(tau) = 1 - b(tau)."""
    return 1.0 - form_b(cls, tau)


# ---------------------------------------------------------------------------
# complete-spectrum number variance and rigidity
# ---------------------------------------------------------------------------

_QUAD_OPTS = dict(epsabs=1e-9, epsrel=1e-9, limit=400)

# beyond this window length the adaptive quadrature would chase hundreds of
# oscillations; the universal log asymptotics are more accurate there
_ASYMPTOTIC_L = 50.0
_EULER = float(np.euler_gamma)


def sigma2_complete(cls, L):
    """Number variance Sigma^2(L) = L - 2 Int_0^L (L - r) Y2(r) dr.

    Adaptive quadrature (1e-9 absolute) for L <= 50, the standard log
    asymptotics beyond.
    """
    cls = EnsembleClass.coerce(cls)
    L = float(L)
    if L <= 0:
        raise ValueError("L must be > 0")
    if L > _ASYMPTOTIC_L:
        if cls is EnsembleClass.GUE:
            return (math.log(2 * np.pi * L) + _EULER + 1) / np.pi ** 2
        return ((math.log(4 * np.pi * L) + _EULER + 1 + np.pi ** 2 / 8)
                / (2 * np.pi ** 2))
    val, _ = integrate.quad(lambda r: (L - r) * cluster_y2(cls, r), 0.0, L,
                            **_QUAD_OPTS)
    return L - 2.0 * val


def delta3_complete(cls, L):
    """Spectral rigidity
    Delta_3(L) = L/15 - (1/(15 L^4)) Int_0^L (L-r)^3 (2L^2 - 9rL - 3r^2) Y2(r) dr.

    Adaptive quadrature (1e-9 absolute) for L <= 50, the standard log
    asymptotics beyond.
    """
    cls = EnsembleClass.coerce(cls)
    L = float(L)
    if L <= 0:
        raise ValueError("L must be > 0")
    if L > _ASYMPTOTIC_L:
        if cls is EnsembleClass.GUE:
            return (math.log(2 * np.pi * L) + _EULER - 1.25) / (2 * np.pi ** 2)
        return ((math.log(4 * np.pi * L) + _EULER - 1.25 + np.pi ** 2 / 8)
                / (4 * np.pi ** 2))
    val, _ = integrate.quad(
        lambda r: (L - r) ** 3 * (2 * L * L - 9 * r * L - 3 * r * r)
        * cluster_y2(cls, r),
        0.0, L, **_QUAD_OPTS)
    return L / 15.0 - val / (15.0 * L ** 4)


@lru_cache(maxsize=None)
def _sigma2_cached(cls_tag, L):
    return sigma2_complete(EnsembleClass(cls_tag), L)


# ---------------------------------------------------------------------------
# incomplete spectra
# ---------------------------------------------------------------------------

# Frozen spacing-model fits for the order-1 and order-2 spacing densities,
# obtained from pooled histograms of 500 independent spectra of dimension 500
# per class (tools/calibrate_spacing_fits.py, seed 20240501); order 0 is the
# closed-form repulsion law of the class. gamma and chi follow from the unit
# area and mean constraints, so only the shape mu is stored.
_DEFAULT_FIT_MU = {
    ("GUE", 1): 7.1884,
    ("GUE", 2): 14.7311,
    ("GSE", 1): 13.6994,
    ("GSE", 2): 27.5207,
}


@lru_cache(maxsize=None)
def _default_fit(cls_tag, order):
    if order == 0:
        return surmise_fit(EnsembleClass(cls_tag), 0)
    mu = _DEFAULT_FIT_MU[(cls_tag, order)]
    g, c = constrained_gamma_chi(mu, order + 1.0)
    return SpacingFit(order=order, gamma=g, mu=mu, chi=c)


@dataclass(frozen=True)
class MissingLevelParams:
    """Inputs of the incomplete-spectrum spacing density.

    The first k_gauss terms use order-n spacing models; orders k_gauss..m_max
    use Gaussians centered at n+1 with variance V^2(n) = Sigma^2(n) - 1/6 of
    the same symmetry class.
    """

    ensemble: EnsembleClass
    phi: float
    k_gauss: int = 3
    m_max: int = 10
    spacing_fits: tuple = ()   # SpacingFit instances covering orders 0..k_gauss-1

    def __post_init__(self):
        if not 0 < self.phi <= 1:
            raise ValueError("phi must lie in (0, 1]")
        if self.k_gauss > self.m_max:
            raise ValueError("k_gauss must not exceed m_max")

    def fit_for(self, order):
        for f in self.spacing_fits:
            if f.order == order:
                return f
        raise ValueError(f"no spacing fit supplied for order {order}")


def default_missing_params(cls, phi, k_gauss=3, m_max=10):
    """MissingLevelParams with the frozen calibration fits for the class."""
    cls = EnsembleClass.coerce(cls)
    fits = tuple(_default_fit(cls.value, n) for n in range(k_gauss))
    return MissingLevelParams(ensemble=cls, phi=phi, k_gauss=k_gauss,
                              m_max=m_max, spacing_fits=fits)


def missing_variance(cls, order):
    """Gaussian variance V^2(n) = Sigma^2(L = n) - 1/6 used for orders >= 3."""
    cls = EnsembleClass.coerce(cls)
    v2 = _sigma2_cached(cls.value, float(order)) - 1.0 / 6.0
    if v2 <= 0:
        raise ValueError(f"V^2({order}) is not positive; order too small")
    return v2


def p_missing(params, s):
    """Nearest-neighbor spacing density of a sequence with observed fraction phi.

    p(s) = sum_{n=0}^{K-1} (1-phi)^n P(n; s/phi)
         + sum_{n=K}^{M} (1-phi)^n N(s/phi; n+1, V^2(n))
    with N a Gaussian density. Unit area and unit mean up to the truncated
    (1-phi)^{M+1} tail.
    """
    cls = params.ensemble
    phi = params.phi
    scalar = np.isscalar(s)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < 0):
        raise ValueError("s must be >= 0")
    u = s / phi
    out = np.zeros_like(u)
    q = 1.0 - phi
    for n in range(params.k_gauss):
        if q == 0.0 and n > 0:
            break
        fit = params.fit_for(n)
        out += q ** n * spacing_model(u, fit.gamma, fit.mu, fit.chi)
    if q > 0.0:
        for n in range(params.k_gauss, params.m_max + 1):
            v2 = missing_variance(cls, n)
            out += (q ** n / math.sqrt(2 * math.pi * v2)
                    * np.exp(-((u - n - 1) ** 2) / (2 * v2)))
    return float(out[0]) if scalar else out


def sigma2_missing(cls, phi, L):
    """Number variance with observed fraction phi:
    sigma^2(L) = (1 - phi) L + phi^2 Sigma^2(L / phi)."""
    if not 0 < phi <= 1:
        raise ValueError("phi must lie in (0, 1]")
    L = float(L)
    if L <= 0:
        raise ValueError("L must be > 0")
    return (1.0 - phi) * L + phi * phi * sigma2_complete(cls, L / phi)


def delta3_missing(cls, phi, L):
    """Rigidity with observed fraction phi:
    delta_3(L) = (1 - phi) L / 15 + phi^2 Delta_3(L / phi)."""
    if not 0 < phi <= 1:
        raise ValueError("phi must lie in (0, 1]")
    L = float(L)
    if L <= 0:
        raise ValueError("L must be > 0")
    return (1.0 - phi) * L / 15.0 + phi * phi * delta3_complete(cls, L / phi)


def power_missing(cls, phi, tau_tilde):
    """Displacement power spectrum at scaled frequency tau_tilde = tau / N:

    s(t) = (phi/4 pi^2) [ (K(phi t) - 1)/t^2 + (K(phi (1-t)) - 1)/(1-t)^2 ]
           + 1/(4 sin^2(pi t)) - phi^2/12,   0 < t < 1.
    """
    if not 0 < phi <= 1:
        raise ValueError("phi must lie in (0, 1]")
    t = float(tau_tilde)
    if t <= 0.0 or t >= 1.0:
        raise ValueError("tau_tilde must lie strictly inside (0, 1)")
    cls = EnsembleClass.coerce(cls)
    term = (form_factor(cls, phi * t) - 1.0) / t ** 2
    term += (form_factor(cls, phi * (1.0 - t)) - 1.0) / (1.0 - t) ** 2
    return (phi / (4 * np.pi ** 2) * term
            + 1.0 / (4 * np.sin(np.pi * t) ** 2)
            - phi * phi / 12.0)


# ---------------------------------------------------------------------------
# observed-fraction estimation
# ---------------------------------------------------------------------------

_PHI_LO, _PHI_HI = 0.3, 1.0
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def _theory_values(cls, phi, measure, x, params_factory):
    if measure == "power":
        return np.array([power_missing(cls, phi, t) for t in x])
    if measure == "sigma2":
        return np.array([sigma2_missing(cls, phi, L) for L in x])
    if measure == "pspacing":
        return p_missing(params_factory(phi), x)
    raise ValueError(f"unknown measure {measure!r}")


def estimate_phi(data, cls, measure, params_factory=None):
    """Weighted one-parameter fit of the observed fraction phi in (0.3, 1].

    data: CurveWithErrors-like with x, y, err. measure is one of
    'power' (x = tau_tilde <= 1/2), 'sigma2' (x = L <= 3) or 'pspacing'
    (x = spacing grid). Returns (phi_hat, std_error); the error comes from
    the curvature of the weighted squared-residual loss at the minimum.

    Power-spectrum points carry multiplicative noise whose scatter estimate
    correlates with the observed value, so weighting them by the measured
    errors biases phi upward; the power loss therefore uses model-relative
    residuals (y/model - 1) instead.
    """
    cls = EnsembleClass.coerce(cls)
    x = np.asarray(data.x, dtype=float)
    y = np.asarray(data.y, dtype=float)
    err = np.asarray(data.err, dtype=float)
    if measure == "power":
        if np.any(x <= 0) or np.any(x > 0.5 + 1e-12):
            raise ValueError("power-spectrum fit needs 0 < tau_tilde <= 1/2")
    elif measure == "sigma2":
        if np.any(x <= 0) or np.any(x > 3.0 + 1e-12):
            raise ValueError("number-variance fit is restricted to L <= 3")
    elif measure == "pspacing":
        if np.any(x < 0):
            raise ValueError("spacing grid must be non-negative")
    else:
        raise ValueError(f"unknown measure {measure!r}")
    if params_factory is None:
        params_factory = lambda phi: default_missing_params(cls, phi)

    weighted = np.all(err > 0)
    w = 1.0 / err ** 2 if weighted else np.ones_like(y)

    if measure == "power":
        def loss(phi):
            model = _theory_values(cls, phi, measure, x, params_factory)
            return float(np.sum((y / model - 1.0) ** 2))
        weighted = False
    else:
        def loss(phi):
            model = _theory_values(cls, phi, measure, x, params_factory)
            return float(np.sum(w * (y - model) ** 2))

    # golden-section minimization on [lo, hi] to 1e-4 in phi
    a, b = _PHI_LO, _PHI_HI
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = loss(c), loss(d)
    while b - a > 1e-4:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = loss(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = loss(d)
    phi_hat = 0.5 * (a + b)
    loss_min = loss(phi_hat)

    # flat-loss guard: compare against the spread over the search range
    probe = [loss(p) for p in (0.35, 0.5, 0.65, 0.8, 0.95)]
    spread = max(probe) - min(min(probe), loss_min)
    if spread <= 1e-12 * max(1.0, abs(loss_min)):
        raise EstimationFailure("loss is flat in phi; data carry no "
                                "missing-fraction information")
    if phi_hat <= _PHI_LO + 2e-4:
        raise EstimationFailure(
            f"phi estimate pinned at the lower search bound ({phi_hat:.4f}); "
            "data are not described by the missing-level model")

    # curvature-based standard error
    h = 5e-4
    p0 = min(max(phi_hat, _PHI_LO + h), _PHI_HI - h)
    curv = (loss(p0 + h) - 2 * loss(p0) + loss(p0 - h)) / h ** 2
    if curv <= 0:
        raise EstimationFailure("non-positive loss curvature at the minimum")
    if weighted:
        se = math.sqrt(2.0 / curv)
    else:
        dof = max(len(y) - 1, 1)
        se = math.sqrt(2.0 * max(loss_min, 0.0) / dof / curv)
    return phi_hat, se
