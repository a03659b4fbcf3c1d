"""Gaussian random-matrix sampling and spacing-model fitting.

GUE matrices are complex Hermitian with off-diagonal entry variance 1/2 per
real component; GSE matrices of dimension parameter N are realized as
2N x 2N self-adjoint matrices with quaternionic block structure
[[A, B], [-conj(B), conj(A)]] (A Hermitian, B antisymmetric), whose spectrum
consists of N exactly twofold degenerate levels. With this normalization the
eigenvalue density is a semicircle of radius 2 sqrt(matrix dimension) and
unfolding uses its closed-form integrated density. The central 50% of each
unfolded spectrum is returned to avoid edge-density bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import gamma as gamma_fn

from .errors import FitFailure, NumericError
from .spectra import UNIT_UNFOLDED, LevelSequence, SpectralEnsemble
from .theory import (EnsembleClass, SpacingFit, constrained_gamma_chi,
                     model_area_mean, spacing_model)

__all__ = [
    "RandomMatrixSpec",
    "sample_matrix",
    "sample_spectrum",
    "spectrum_ensemble",
    "fit_spacing_model",
]

# fraction of the unfolded spectrum kept around the band center
TRIM_FRACTION = 0.5

# Kramers pairs must be degenerate to this fraction of the mean spacing
KRAMERS_PAIR_TOL = 1e-8


@dataclass(frozen=True)
class RandomMatrixSpec:
    """Ensemble request: symmetry class, number of distinct levels per
    matrix (GSE matrices are 2*dim dimensional), member count, and seed."""

    ensemble: EnsembleClass
    dim: int
    count: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "ensemble",
                           EnsembleClass.coerce(self.ensemble))
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.count < 1:
            raise ValueError("count must be >= 1")


def _gue_matrix(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


def _gse_matrix(rng, n):
    """2n x 2n self-adjoint quaternion-real matrix."""
    a = _gue_matrix(rng, n)
    c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = (c - c.T) / 2
    return np.block([[a, b], [-b.conj(), a.conj()]])


def sample_matrix(spec, member):
    """The matrix fully determined by (spec.seed, member)."""
    if not 0 <= member < spec.count:
        raise ValueError("member index out of range")
    rng = np.random.default_rng([spec.seed, member])
    if spec.ensemble is EnsembleClass.GUE:
        return _gue_matrix(rng, spec.dim)
    return _gse_matrix(rng, spec.dim)


def semicircle_cdf(x, radius):
    """Integrated semicircle eigenvalue density, normalized to [0, 1]."""
    x = np.clip(np.asarray(x, dtype=float), -radius, radius)
    u = x / radius
    return 0.5 + (u * np.sqrt(1.0 - u * u) + np.arcsin(u)) / np.pi


def _dedup_kramers(eigs, context):
    """Collapse adjacent twofold-degenerate pairs to their midpoints."""
    if eigs.size % 2:
        raise NumericError(f"odd eigenvalue count in {context}")
    mean_spacing = (eigs[-1] - eigs[0]) / (eigs.size - 1)
    pairs = eigs.reshape(-1, 2)
    gaps = pairs[:, 1] - pairs[:, 0]
    if np.max(gaps) > KRAMERS_PAIR_TOL * mean_spacing:
        raise NumericError(
            f"Kramers pair split {np.max(gaps):.3e} exceeds tolerance in "
            f"{context}")
    return pairs.mean(axis=1)


def sample_spectrum(spec, member):
    """Unfolded central-band level sequence of one ensemble member.

    GSE spectra are deduplicated to one level per Kramers doublet before
    unfolding. Returns the central TRIM_FRACTION of the unfolded levels.
    """
    h = sample_matrix(spec, member)
    context = f"{spec.ensemble.value} dim={spec.dim} seed={spec.seed} member={member}"
    try:
        eigs = np.linalg.eigvalsh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolve failed for {context}: {exc}") from exc
    radius = 2.0 * np.sqrt(h.shape[0])
    if spec.ensemble is EnsembleClass.GSE:
        eigs = _dedup_kramers(eigs, context)
    n_distinct = spec.dim
    lo = int(round(n_distinct * (0.5 - TRIM_FRACTION / 2)))
    hi = int(round(n_distinct * (0.5 + TRIM_FRACTION / 2)))
    central = eigs[lo:hi]
    unfolded = n_distinct * semicircle_cdf(central, radius)
    return LevelSequence(values=unfolded, unit=UNIT_UNFOLDED,
                         provenance=context)


def spectrum_ensemble(spec, label="", map_fn=map):
    """All members of the requested ensemble as a SpectralEnsemble.

    map_fn allows a parallel map; members are keyed by index so the result
    does not depend on evaluation order.
    """
    members = tuple(map_fn(lambda m: sample_spectrum(spec, m),
                           range(spec.count)))
    return SpectralEnsemble(members=members,
                            label=label or f"{spec.ensemble.value} dim={spec.dim}")


# ---------------------------------------------------------------------------
# spacing-model fit
# ---------------------------------------------------------------------------

def _moment_initial_guess(x, y, bin_width):
    total = np.sum(y)
    mean = np.sum(x * y) / total
    msq = np.sum(x * x * y) / total
    var = max(msq - mean * mean, 1e-6)
    chi0 = 1.0 / (4.0 * var)
    mu0 = max(2.0 * chi0 * msq - 1.0, 0.5)
    area = np.sum(y) * bin_width
    gamma0 = area * 2 * chi0 ** ((mu0 + 1) / 2) / gamma_fn((mu0 + 1) / 2)
    return gamma0, mu0, chi0


def fit_spacing_model(hist, order, constrain=True):
    """Fit gamma s^mu exp(-chi s^2) to an order-n spacing histogram.

    Poisson-weighted least squares over (gamma, mu, chi); with
    constrain=True (the default) (gamma, chi) are then re-projected onto
    exact unit area and mean order+1 and the shape mu is refit under those
    constraints. Raises FitFailure (carrying the best iterate) if the
    optimizer does not converge.
    """
    if order < 0:
        raise ValueError("spacing order must be >= 0")
    x = np.asarray(hist.x, dtype=float)
    y = np.asarray(hist.y, dtype=float)
    if x.size < 5:
        raise ValueError("histogram has too few bins to fit")
    bin_width = hist.meta.get("bin_width", float(np.median(np.diff(x))))
    area = float(np.sum(y) * bin_width)
    if constrain and abs(area - 1.0) > 0.1:
        raise ValueError(f"histogram area {area:.3f} is not normalized")

    wsqrt = 1.0 / np.sqrt(np.maximum(y, 1e-3 * np.max(y)))

    def residuals(p):
        return wsqrt * (spacing_model(x, *np.exp(p)) - y)

    p0 = np.log(_moment_initial_guess(x, y, bin_width))
    res = optimize.least_squares(residuals, p0, max_nfev=600)
    gamma_r, mu_r, chi_r = np.exp(res.x)
    raw = (float(gamma_r), float(mu_r), float(chi_r))
    if not res.success:
        raise FitFailure(f"spacing-model fit did not converge: {res.message}",
                         best=raw)

    if not constrain:
        rms = float(np.sqrt(np.mean(res.fun ** 2)))
        return SpacingFit(order=order, gamma=raw[0], mu=raw[1], chi=raw[2],
                          residual=rms, raw_params=raw, constrained=False)

    mean_target = order + 1.0

    def loss_mu(mu):
        g, c = constrained_gamma_chi(mu, mean_target)
        r = wsqrt * (spacing_model(x, g, mu, c) - y)
        return float(np.sum(r * r))

    bracket = (max(mu_r / 4, 0.05), min(max(mu_r * 4, 1.0), 400.0))
    res_mu = optimize.minimize_scalar(loss_mu, bounds=bracket,
                                      method="bounded",
                                      options={"xatol": 1e-8})
    if not res_mu.success:
        raise FitFailure("constrained shape refit did not converge", best=raw)
    mu = float(res_mu.x)
    g, c = constrained_gamma_chi(mu, mean_target)
    rms = float(np.sqrt(res_mu.fun / x.size))
    return SpacingFit(order=order, gamma=float(g), mu=mu, chi=float(c),
                      residual=rms, raw_params=raw)


def pooled_spacing_fit(ens, order, bin_width=0.05, s_max=None, constrain=True):
    """Histogram the order-n spacings of an unfolded ensemble and fit them."""
    from .spectra import spacing_histogram
    if s_max is None:
        s_max = order + 4.0
    pdf, _ = spacing_histogram(ens, order=order, bin_width=bin_width,
                               s_max=s_max)
    return fit_spacing_model(pdf, order, constrain=constrain)
