"""Level sequences and their fluctuation-statistics estimators.

A LevelSequence is an ordered set of levels tagged with a unit (wavenumber,
frequency, or unfolded). Unfolded sequences have unit mean spacing; all
estimators operate on ensembles of unfolded sequences and return curves with
per-point standard errors taken from member-to-member scatter.

Estimator conventions (also see README):
  * the first and last 5% of each member are discarded before any statistic
    is accumulated, to suppress finite-sequence edge effects;
  * Sigma^2 and Delta_3 use overlapping windows with stride 0.25 mean
    spacings; error bars ignore window-overlap correlations;
  * the power spectrum uses the level displacements delta_q = e_{q+1} - e_1
    - q with q counted from 0, so delta_0 = 0 identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as C_LIGHT

__all__ = [
    "UNIT_WAVENUMBER",
    "UNIT_FREQUENCY",
    "UNIT_UNFOLDED",
    "LevelSequence",
    "SpectralEnsemble",
    "CurveWithErrors",
    "unfold_constant_density",
    "decimate",
    "decimate_systematic",
    "spacing_histogram",
    "number_variance",
    "spectral_rigidity",
    "power_spectrum_estimator",
]

UNIT_WAVENUMBER = "wavenumber"
UNIT_FREQUENCY = "frequency"
UNIT_UNFOLDED = "unfolded"
_UNITS = (UNIT_WAVENUMBER, UNIT_FREQUENCY, UNIT_UNFOLDED)

# mean-spacing sanity tolerance for sequences claiming to be unfolded;
# short sequences are exempt (the sample mean spacing is too noisy to be a
# meaningful unit check below a few dozen levels)
_UNFOLDED_TOL = 0.05
_UNFOLDED_CHECK_MIN = 32


@dataclass(frozen=True)
class LevelSequence:
    """Strictly increasing levels plus unit and completeness metadata.

    phi is the observed fraction of levels (None or 1.0 for complete
    sequences). A complete unfolded sequence must have sample mean spacing
    within 5% of unity; thinned sequences (phi < 1) are rescaled so their
    mean spacing is 1 in expectation, and the sample value is left to
    fluctuate.
    """

    values: np.ndarray
    unit: str
    phi: float | None = None
    provenance: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a level sequence needs at least two levels")
        if not np.all(np.isfinite(v)):
            raise ValueError("levels must be finite")
        if np.any(np.diff(v) <= 0):
            raise ValueError("levels must be strictly increasing "
                             "(deduplicate degenerate pairs first)")
        if self.unit not in _UNITS:
            raise ValueError(f"unknown unit {self.unit!r}")
        if self.phi is not None and not 0 < self.phi <= 1:
            raise ValueError("phi must lie in (0, 1]")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if (self.unit == UNIT_UNFOLDED and len(self) >= _UNFOLDED_CHECK_MIN
                and (self.phi is None or self.phi == 1.0)):
            ms = self.mean_spacing()
            if abs(ms - 1.0) > _UNFOLDED_TOL:
                raise ValueError(
                    f"unfolded sequence has mean spacing {ms:.4f}, "
                    f"more than 5% away from 1")

    def __len__(self):
        return self.values.size

    def mean_spacing(self):
        return float((self.values[-1] - self.values[0]) / (len(self) - 1))


@dataclass(frozen=True)
class SpectralEnsemble:
    """A non-empty collection of level sequences sharing one unit."""

    members: tuple
    label: str = ""

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("ensemble must contain at least one member")
        units = {m.unit for m in members}
        if len(units) != 1:
            raise ValueError(f"mixed units in ensemble: {sorted(units)}")
        object.__setattr__(self, "members", members)

    @property
    def unit(self):
        return self.members[0].unit

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class CurveWithErrors:
    """Grid curve with per-point standard errors (zero for theory curves)."""

    x: np.ndarray
    y: np.ndarray
    err: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        err = np.asarray(self.err, dtype=float)
        if not (x.shape == y.shape == err.shape) or x.ndim != 1:
            raise ValueError("x, y, err must be 1-d arrays of equal length")
        if x.size and np.any(np.diff(x) <= 0):
            raise ValueError("x grid must be strictly increasing")
        for name, a in (("x", x), ("y", y), ("err", err)):
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)


# ---------------------------------------------------------------------------
# unfolding and decimation
# ---------------------------------------------------------------------------

def unfold_constant_density(seq, total_optical_length):
    """Unfold by the constant mean density of a network of total optical
    length L: eps = 2 nu L / c for frequencies, eps = k L / pi for
    wavenumbers. For sequences deduplicated by Kramers pairing pass L/2.
    """
    if total_optical_length <= 0:
        raise ValueError("total optical length must be positive")
    if seq.unit == UNIT_FREQUENCY:
        eps = 2.0 * seq.values * total_optical_length / C_LIGHT
    elif seq.unit == UNIT_WAVENUMBER:
        eps = seq.values * total_optical_length / np.pi
    else:
        raise ValueError("sequence is already unfolded")
    return LevelSequence(values=eps, unit=UNIT_UNFOLDED, phi=seq.phi,
                         provenance=seq.provenance)


def _compose_phi(old, phi):
    return phi if old is None else old * phi


def decimate(seq, phi, seed, fixed_count=False):
    """Randomly thin an unfolded sequence, observing each level with
    probability phi, then rescale survivors by phi so the thinned sequence
    keeps unit mean spacing in expectation.

    fixed_count=True instead keeps exactly round(phi * N) levels drawn
    uniformly without replacement (no count fluctuation).
    Deterministic for a fixed seed.
    """
    if not 0 < phi <= 1:
        raise ValueError("phi must lie in (0, 1]")
    if seq.unit != UNIT_UNFOLDED:
        raise ValueError("decimate expects an unfolded sequence")
    rng = np.random.default_rng(seed)
    n = len(seq)
    if fixed_count:
        m = int(round(phi * n))
        idx = np.sort(rng.choice(n, size=m, replace=False))
        kept = seq.values[idx]
    else:
        kept = seq.values[rng.random(n) < phi]
    if kept.size < 2:
        raise ValueError("decimation left fewer than two levels")
    return LevelSequence(values=kept * phi, unit=UNIT_UNFOLDED,
                         phi=_compose_phi(seq.phi, phi),
                         provenance=seq.provenance)


def decimate_systematic(seq, remove_indices):
    """Remove the listed level indices (the same physical modes from every
    member of a parametric ensemble, typically), rescaling survivors by the
    kept fraction so the mean spacing stays 1 in expectation.
    """
    n = len(seq)
    idx = np.asarray(remove_indices, dtype=int)
    if idx.size:
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError("remove_indices out of range")
        if np.unique(idx).size != idx.size:
            raise ValueError("remove_indices must be unique")
    kept = np.delete(seq.values, idx)
    if kept.size < 2:
        raise ValueError("systematic removal left fewer than two levels")
    phi = kept.size / n
    return LevelSequence(values=kept * phi, unit=seq.unit,
                         phi=_compose_phi(seq.phi, phi),
                         provenance=seq.provenance)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _trimmed(values, trim):
    m = int(trim * values.size)
    return values[m:values.size - m] if m else values


def _member_errors(rows):
    """Mean and standard error across the member axis (axis 0)."""
    rows = np.asarray(rows, dtype=float)
    mean = rows.mean(axis=0)
    if rows.shape[0] > 1:
        err = rows.std(axis=0, ddof=1) / np.sqrt(rows.shape[0])
    else:
        err = np.zeros_like(mean)
    return mean, err


def _require_unfolded(ens):
    if ens.unit != UNIT_UNFOLDED:
        raise ValueError("estimator expects an unfolded ensemble")


def spacing_histogram(ens, order=0, bin_width=0.1, s_max=5.0, trim=0.05):
    """Density histogram of order-n spacings s_i = e_{i+n+1} - e_i pooled
    over members, plus the binning-free cumulative I(s) on the bin edges.

    Returns (pdf, cdf) as CurveWithErrors; pdf.x are bin centers, cdf.x the
    bin edges. Errors are member-to-member standard errors.
    """
    _require_unfolded(ens)
    if order < 0:
        raise ValueError("spacing order must be >= 0")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if s_max <= bin_width:
        raise ValueError("s_max must exceed bin_width")
    nbins = int(np.ceil(s_max / bin_width - 1e-9))
    edges = bin_width * np.arange(nbins + 1)

    member_pdfs, member_cdfs, all_sp, total = [], [], [], 0
    for m in ens.members:
        v = _trimmed(m.values, trim)
        if v.size < order + 2:
            raise ValueError("member too short for the requested spacing order")
        sp = v[order + 1:] - v[:v.size - order - 1]
        counts, _ = np.histogram(sp, bins=edges)
        member_pdfs.append(counts / (sp.size * bin_width))
        member_cdfs.append(np.searchsorted(np.sort(sp), edges, side="right")
                           / sp.size)
        all_sp.append(sp)
        total += sp.size

    pooled = np.concatenate(all_sp)
    counts, _ = np.histogram(pooled, bins=edges)
    pdf_y = counts / (total * bin_width)
    _, pdf_err = _member_errors(member_pdfs)
    cdf_y = np.searchsorted(np.sort(pooled), edges, side="right") / total
    _, cdf_err = _member_errors(member_cdfs)

    centers = 0.5 * (edges[:-1] + edges[1:])
    pdf = CurveWithErrors(centers, pdf_y, pdf_err,
                          meta={"order": order, "bin_width": bin_width})
    cdf = CurveWithErrors(edges, cdf_y, cdf_err, meta={"order": order})
    return pdf, cdf


# Rigidity windows advance by an irrational fraction of the mean spacing and
# start one spacing past the first level: a stride commensurate with the unit
# mean spacing phase-locks to rigid (nearly lattice-like) spectra and biases
# the small-L statistics by several standard errors.
_RIGIDITY_STRIDE = 0.25 * (np.sqrt(5.0) - 1.0) / 2.0


def _window_starts(lo, hi, L, stride):
    n = int(np.floor((hi - L - lo) / stride)) + 1
    if n < 2:
        raise ValueError(f"window length {L} leaves fewer than two windows")
    return lo + stride * np.arange(n)


def _check_window_lengths(ens, L_grid, trim):
    L_grid = np.asarray(L_grid, dtype=float)
    if np.any(L_grid <= 0):
        raise ValueError("window lengths must be positive")
    for m in ens.members:
        v = _trimmed(m.values, trim)
        span = v[-1] - v[0]
        if np.any(L_grid >= 0.5 * span):
            raise ValueError("window length must stay below half the "
                             "member span")
    return L_grid


def _count_deviation_integral(v, L):
    """Exact (1/range) \\int (N([a, a+L)) - L)^2 da over a in [v0, v_end - L].

    The window count is piecewise constant in the start position a, jumping
    +1 at a = x_i - L (level enters at the right edge) and -1 at a = x_i
    (level leaves at the left edge); the integral is summed segment-wise.
    Averaging over the position continuum avoids the phase locking that a
    fixed window stride suffers on rigid (nearly lattice-like) spectra. The
    range keeps one mean spacing clear of the first and last level so that
    no level is pinned to a range endpoint (which would starve it of its
    fair share of window positions and bias the mean count).
    """
    a0, a1 = v[0] + 1.0, v[-1] - L - 1.0
    if a1 <= a0:
        raise ValueError(f"window length {L} leaves no start positions")
    downs = v[(v > a0) & (v < a1)]           # level leaves at window start
    ups = v[(v > a0 + L) & (v < a1 + L)] - L  # level enters at window end
    events = np.concatenate((downs, ups))
    deltas = np.concatenate((-np.ones(downs.size), np.ones(ups.size)))
    order = np.argsort(events, kind="stable")
    t = np.concatenate(([a0], events[order], [a1]))
    c0 = (np.searchsorted(v, a0 + L, side="right")
          - np.searchsorted(v, a0, side="right"))
    counts = c0 + np.concatenate(([0.0], np.cumsum(deltas[order])))
    seg = np.diff(t)
    return float(np.sum((counts - L) ** 2 * seg) / (a1 - a0))


def number_variance(ens, L_grid, trim=0.05):
    """Mean squared deviation of the window level count from its ensemble
    expectation <N(L)> = L, averaged over the continuum of window positions
    per member and then over members.

    Centering on L rather than on each member's own mean count keeps the
    estimator unbiased for thinned sequences, whose member-level count
    fluctuations are part of the statistic.
    """
    _require_unfolded(ens)
    L_grid = _check_window_lengths(ens, L_grid, trim)
    rows = []
    for m in ens.members:
        v = _trimmed(m.values, trim)
        rows.append([_count_deviation_integral(v, L) for L in L_grid])
    y, err = _member_errors(rows)
    return CurveWithErrors(L_grid, y, err, meta={"statistic": "sigma2"})


def spectral_rigidity(ens, L_grid, trim=0.05, stride=_RIGIDITY_STRIDE):
    """Dyson-Mehta rigidity: per window of length L, the mean-square
    residual of the best-fit line to the level staircase, averaged over
    overlapping windows (incommensurate stride, see _RIGIDITY_STRIDE) and
    members.
    """
    _require_unfolded(ens)
    L_grid = _check_window_lengths(ens, L_grid, trim)
    rows = []
    for m in ens.members:
        v = _trimmed(m.values, trim).copy()
        v -= v[0]
        s1 = np.concatenate(([0.0], np.cumsum(v)))
        s2 = np.concatenate(([0.0], np.cumsum(v * v)))
        sg = np.concatenate(([0.0], np.cumsum(np.arange(v.size) * v)))
        row = []
        for L in L_grid:
            starts = _window_starts(v[0] + 1.0, v[-1] - 1.0, L, stride)
            i0 = np.searchsorted(v, starts, side="left")
            i1 = np.searchsorted(v, starts + L, side="left")
            k = (i1 - i0).astype(float)
            t1 = s1[i1] - s1[i0]                      # sum of levels in window
            t2 = s2[i1] - s2[i0]
            tg = sg[i1] - sg[i0]                      # sum of (global index)*level
            sx = t1 - k * starts                      # sum of (level - start)
            sxx = t2 - 2 * starts * t1 + k * starts ** 2
            # staircase integrals over the window
            sjx = tg - (i0 - 1) * t1 - starts * k * (k + 1) / 2
            I1 = k * L - sx
            I2 = 0.5 * (k * L * L - sxx)
            I3 = k * k * L - (2 * sjx - sx)
            bb = (12 * I2 - 6 * I1 * L) / L ** 3
            aa = (I1 - bb * L * L / 2) / L
            resid = (I3 - 2 * aa * I1 - 2 * bb * I2
                     + aa * aa * L + aa * bb * L * L + bb * bb * L ** 3 / 3)
            row.append(np.mean(np.maximum(resid, 0.0)) / L)
        rows.append(row)
    y, err = _member_errors(rows)
    return CurveWithErrors(L_grid, y, err, meta={"statistic": "delta3"})


def power_spectrum_estimator(ens, trim=0.05, centered=False):
    """Ensemble-averaged power spectrum of the level displacements
    delta_q = e_{q+1} - e_1 - q (q = 0..N-1):

        S(tau) = < | N^{-1/2} sum_q delta_q exp(-2 pi i tau q / N) |^2 >

    for integer tau = 1..floor(N/2), returned on the scaled grid
    tau_tilde = tau / N. All members must share one length; pre-truncate
    explicitly if they do not. Sequences shorter than ~8 levels give a
    formally defined but statistically meaningless spectrum.

    centered=True subtracts each member's own mean spacing instead of the
    nominal unit spacing (delta_q = sum_{i<=q} (s_i - <s>)), removing the
    member-level linear drift. The analytic missing-level curve
    (theory.power_missing) describes this centered statistic; the default
    follows the displacement definition above literally.
    """
    _require_unfolded(ens)
    lengths = {len(m) for m in ens.members}
    if len(lengths) != 1:
        raise ValueError("members have mixed lengths; truncate to a common "
                         "length before calling the power-spectrum estimator")
    rows = []
    n = None
    for m in ens.members:
        v = _trimmed(m.values, trim)
        n = v.size
        if centered:
            spacings = np.diff(v)
            delta = np.concatenate(([0.0],
                                    np.cumsum(spacings - spacings.mean())))
        else:
            delta = v - v[0] - np.arange(n)
        f = np.fft.fft(delta)
        rows.append(np.abs(f[1:n // 2 + 1]) ** 2 / n)
    y, err = _member_errors(rows)
    tau_tilde = np.arange(1, n // 2 + 1) / n
    return CurveWithErrors(tau_tilde, y, err,
                           meta={"statistic": "power", "n_levels": n,
                                 "centered": centered})


def truncate_members(ens, n_levels=None):
    """Cut every member down to its first n_levels levels (default: the
    shortest member length). Explicit companion of the power-spectrum
    estimator's equal-length requirement.
    """
    n = min(len(m) for m in ens.members) if n_levels is None else int(n_levels)
    if n < 2:
        raise ValueError("truncation length must be at least 2")
    members = tuple(
        replace(m, values=m.values[:n]) for m in ens.members)
    return SpectralEnsemble(members=members, label=ens.label)
