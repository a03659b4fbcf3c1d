"""Metric-graph spectra via the directed-bond scattering matrix.

A graph of B bonds defines a 2B x 2B unitary S(k) = D(k) T, with D the
diagonal propagation matrix exp(i(k L_d + Phi_d)) over directed bonds and T
the vertex transition matrix built from per-vertex scattering matrices
(Neumann: sigma_ab = 2/v - delta_ab; three-port circulator: a cyclic
permutation). Eigenwavenumbers solve det[1 - S(k)] = 0.

Root finding exploits unitarity: the eigenphases of S move upward
monotonically in k with total speed 2 sum(L), so

    N(k) = [sum of wrapped eigenphases at anchor + 2 L_tot (k - anchor)
            - sum of wrapped eigenphases at k] / (2 pi)

is an exact integer-valued counting function. Roots (with multiplicity,
including exact Kramers doublets of the symplectic construction) are located
by bisection on N and polished on the smallest eigenphase.

A symplectic-symmetry graph is built from a circulator-bearing subgraph and
its time reverse, coupled crosswise by two equal-length bonds carrying
directed phases +/- pi/2 (total relative phase pi between the two paths).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError
from .spectra import UNIT_WAVENUMBER, LevelSequence

log = logging.getLogger(__name__)

__all__ = [
    "Vertex",
    "Bond",
    "GraphSpec",
    "SecularEvaluation",
    "bond_scattering_matrix",
    "secular_evaluation",
    "secular_roots",
    "find_eigenvalues",
    "build_gse_double",
    "sweep_lengths",
    "interval_graph",
    "ring_graph",
    "cubic_gue_subgraph",
    "standard_gse_graph",
]

NEUMANN = "neumann"
CIRCULATOR = "circulator"

# rational-ratio screen for randomly generated bond lengths
_RATIO_TOL = 1e-12
_RATIO_MAX_PQ = 10

# Kramers doublets merge below this fraction of the Weyl mean spacing
KRAMERS_MERGE_TOL = 1e-6


@dataclass(frozen=True)
class Vertex:
    """Graph vertex: Neumann junction or three-port circulator.

    For circulators, `ports` lists the three neighbor ids in stored port
    order and orientation +1 (cyclic) routes port a -> port a+1 mod 3;
    orientation -1 is the transpose routing.
    """

    id: int
    kind: str = NEUMANN
    orientation: int = 0
    ports: tuple = ()

    def __post_init__(self):
        if self.kind not in (NEUMANN, CIRCULATOR):
            raise ValueError(f"unknown vertex kind {self.kind!r}")
        if self.kind == CIRCULATOR:
            if self.orientation not in (-1, 1):
                raise ValueError("circulator orientation must be +1 or -1")
            if len(self.ports) != 3:
                raise ValueError("circulator needs exactly three ports")


@dataclass(frozen=True)
class Bond:
    """Undirected bond with optical length and two directed phases [rad]."""

    i: int
    j: int
    length: float
    phase_ij: float = 0.0
    phase_ji: float = 0.0

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("self-loops are not supported; insert a vertex")
        if self.length <= 0:
            raise ValueError("bond length must be positive")


def _ratio_screen(lengths):
    """Reject length pairs whose ratio is near a small rational p/q."""
    lengths = np.asarray(lengths, dtype=float)
    for a in range(len(lengths)):
        for b in range(a + 1, len(lengths)):
            r = lengths[a] / lengths[b]
            for q in range(1, _RATIO_MAX_PQ + 1):
                p = round(r * q)
                if p >= 1 and abs(r - p / q) < _RATIO_TOL and p <= _RATIO_MAX_PQ:
                    return a, b, p, q
    return None


@dataclass(frozen=True)
class GraphSpec:
    """Immutable metric graph: vertices, bonds, connectivity implied.

    validate_lengths applies the rational-ratio incommensurability screen;
    disable it for mirrored constructions whose symmetry requires exactly
    equal length pairs.
    """

    vertices: tuple
    bonds: tuple
    validate_lengths: bool = True

    def __post_init__(self):
        vertices = tuple(self.vertices)
        bonds = tuple(self.bonds)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "bonds", bonds)
        ids = [v.id for v in vertices]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate vertex ids")
        vmap = {v.id: v for v in vertices}
        seen = set()
        nbrs = {v.id: [] for v in vertices}
        for b in bonds:
            if b.i not in vmap or b.j not in vmap:
                raise ValueError(f"bond ({b.i},{b.j}) references unknown vertex")
            key = frozenset((b.i, b.j))
            if key in seen:
                raise ValueError(f"duplicate bond between {b.i} and {b.j}; "
                                 "split parallel bonds with a vertex")
            seen.add(key)
            nbrs[b.i].append(b.j)
            nbrs[b.j].append(b.i)
        if not bonds:
            raise ValueError("graph needs at least one bond")
        # connectivity
        stack, visited = [vertices[0].id], set()
        while stack:
            v = stack.pop()
            if v in visited:
                continue
            visited.add(v)
            stack.extend(nbrs[v])
        if visited != set(ids):
            raise ValueError("graph is not connected")
        for v in vertices:
            if v.kind == CIRCULATOR:
                if len(nbrs[v.id]) != 3:
                    raise ValueError(f"circulator vertex {v.id} must have "
                                     "valency 3")
                if set(v.ports) != set(nbrs[v.id]):
                    raise ValueError(f"circulator vertex {v.id} ports do not "
                                     "match its neighbors")
        if self.validate_lengths:
            hit = _ratio_screen([b.length for b in bonds])
            if hit is not None:
                a, b_, p, q = hit
                raise ValueError(
                    f"bond lengths {a} and {b_} have near-rational ratio "
                    f"{p}/{q}; draw incommensurable lengths")
        object.__setattr__(self, "_nbrs",
                           {k: tuple(v) for k, v in nbrs.items()})

    @property
    def total_length(self):
        return float(sum(b.length for b in self.bonds))

    def neighbors(self, vid):
        return self._nbrs[vid]

    def weyl_count(self, k_min, k_max):
        """Expected number of secular roots (with multiplicity) in a band."""
        return self.total_length * (k_max - k_min) / np.pi


@dataclass(frozen=True)
class SecularEvaluation:
    """det[1 - S(k)] at one wavenumber plus the unitarity defect of S."""

    k: float
    zeta: complex
    unitarity_defect: float


# ---------------------------------------------------------------------------
# scattering matrix
# ---------------------------------------------------------------------------

def _directed_index(g):
    """Directed bond (u, v) -> row index; bond b gives 2b:(i->j), 2b+1:(j->i)."""
    idx = {}
    for n, b in enumerate(g.bonds):
        idx[(b.i, b.j)] = 2 * n
        idx[(b.j, b.i)] = 2 * n + 1
    return idx


def _vertex_sigma(g, v):
    nbrs = g.neighbors(v.id)
    if v.kind == NEUMANN:
        val = len(nbrs)
        return 2.0 / val * np.ones((val, val)) - np.eye(val), nbrs
    perm = np.zeros((3, 3))
    for a in range(3):
        perm[(a + 1) % 3, a] = 1.0
    sigma = perm if v.orientation > 0 else perm.T
    return sigma, v.ports


def bond_scattering_matrix(g, k):
    """The 2B x 2B directed-bond scattering matrix S(k) = D(k) T."""
    if k <= 0:
        raise ValueError("k must be positive")
    idx = _directed_index(g)
    nd = len(idx)
    phases = np.empty(nd)
    for b in g.bonds:
        phases[idx[(b.i, b.j)]] = k * b.length + b.phase_ij
        phases[idx[(b.j, b.i)]] = k * b.length + b.phase_ji
    d = np.exp(1j * phases)
    s = np.zeros((nd, nd), dtype=complex)
    for v in g.vertices:
        sigma, order = _vertex_sigma(g, v)
        for ai, a in enumerate(order):        # incoming from vertex a
            col = idx[(a, v.id)]
            for bi, b in enumerate(order):    # outgoing toward vertex b
                row = idx[(v.id, b)]
                if sigma[bi, ai] != 0.0:
                    s[row, col] = d[row] * sigma[bi, ai]
    return s


def secular_evaluation(g, k):
    """zeta(k) = det[1 - S(k)] with a unitarity audit of S."""
    s = bond_scattering_matrix(g, k)
    defect = float(np.max(np.abs(s @ s.conj().T - np.eye(s.shape[0]))))
    if defect > 1e-10:
        raise NumericError(f"scattering matrix unitarity defect {defect:.2e} "
                           f"at k={k}")
    zeta = complex(np.linalg.det(np.eye(s.shape[0]) - s))
    return SecularEvaluation(k=float(k), zeta=zeta, unitarity_defect=defect)


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def _eigenphases(g, k, cache):
    """Wrapped eigenphase angles of S(k) in (-pi, pi]."""
    if k not in cache:
        cache[k] = np.angle(np.linalg.eigvals(bond_scattering_matrix(g, k)))
    return cache[k]


def _phase_sum(g, k, cache):
    return float(np.sum(np.mod(_eigenphases(g, k, cache), 2 * np.pi)))


def _polish_root(g, a, b, mult, cache):
    """Secant step on the mean of the `mult` smallest eigenphases."""
    def eta(k):
        ang = _eigenphases(g, k, cache)
        sel = np.argsort(np.abs(ang))[:mult]
        return float(np.mean(ang[sel]))

    ea, eb = eta(a), eta(b)
    if eb == ea:
        return 0.5 * (a + b)
    k = a - ea * (b - a) / (eb - ea)
    return min(max(k, a), b)


def secular_roots(g, k_min, k_max, rel_tol=1e-12):
    """All roots of det[1 - S(k)] in (k_min, k_max], with multiplicity.

    Scans at the step pi / (8 L_tot) (an eighth of the Weyl mean spacing),
    counts crossings with the exact eigenphase-winding function, isolates
    each jump by bisection to rel_tol in k, and polishes on the smallest
    eigenphase distance to zero. Degenerate doublets appear twice.
    """
    if not 0 < k_min < k_max:
        raise ValueError("need 0 < k_min < k_max")
    ltot = g.total_length
    cache = {}
    p0 = _phase_sum(g, k_min, cache)

    def count(k):
        return int(round((p0 + 2 * ltot * (k - k_min) - _phase_sum(g, k, cache))
                         / (2 * np.pi)))

    roots = []

    def isolate(a, b, na, nb):
        if nb == na:
            return
        if b - a < rel_tol * max(1.0, abs(b)):
            k = _polish_root(g, a, b, nb - na, cache)
            roots.extend([k] * (nb - na))
            return
        m = 0.5 * (a + b)
        nm = count(m)
        isolate(a, m, na, nm)
        isolate(m, b, nm, nb)

    step = np.pi / (8 * ltot)
    grid = np.arange(k_min, k_max, step)
    grid = np.append(grid, k_max)
    counts = [0]
    for k in grid[1:]:
        counts.append(count(k))
    for (a, b, na, nb) in zip(grid[:-1], grid[1:], counts[:-1], counts[1:]):
        isolate(a, b, na, nb)
    return np.sort(np.asarray(roots))


def _merge_kramers(roots, tol):
    merged = []
    i = 0
    while i < len(roots):
        if i + 1 < len(roots) and roots[i + 1] - roots[i] < tol:
            merged.append(0.5 * (roots[i] + roots[i + 1]))
            i += 2
        else:
            merged.append(roots[i])
            i += 1
    return np.asarray(merged)


def find_eigenvalues(g, k_min, k_max, dedup_kramers=False):
    """Eigenwavenumbers of the graph in (k_min, k_max] as a LevelSequence.

    With dedup_kramers, exactly degenerate root pairs (gap below 1e-6 of the
    Weyl mean spacing) are merged to single levels. The root count is
    audited against Weyl's expectation; a deviation beyond 2 is logged as a
    completeness warning (non-fatal) with the largest gap locations.
    """
    raw = secular_roots(g, k_min, k_max)
    expected = g.weyl_count(k_min, k_max)
    deviation = len(raw) - expected
    if abs(deviation) > 2:
        gaps = np.diff(raw)
        worst = raw[np.argsort(gaps)[-3:]] if gaps.size >= 3 else raw
        log.warning(
            "root count %d deviates from Weyl expectation %.2f by %.2f; "
            "largest gaps near k=%s", len(raw), expected, deviation,
            np.array2string(np.sort(worst), precision=6))
    mean_spacing = np.pi / g.total_length
    values = raw
    if dedup_kramers:
        values = _merge_kramers(raw, KRAMERS_MERGE_TOL * mean_spacing)
    provenance = (f"graph-secular Ltot={g.total_length:.9g} "
                  f"band=({k_min:.9g},{k_max:.9g}) weyl={expected:.3f} "
                  f"raw={len(raw)} dedup={bool(dedup_kramers)}")
    return LevelSequence(values=values, unit=UNIT_WAVENUMBER,
                         provenance=provenance)


# ---------------------------------------------------------------------------
# symplectic doubling and parametric sweeps
# ---------------------------------------------------------------------------

def build_gse_double(sub, coupling_pairs, coupling_length):
    """Couple a circulator-bearing subgraph to its time reverse.

    The mirror copy (vertex n -> n + offset, offset = max subgraph id) has
    every circulator orientation reversed and every directed bond phase
    negated. Two coupling bonds of equal length join coupling_pairs =
    ((a, b), (c, d)) as a -> mirror(b) with directed phases (+pi/2, -pi/2)
    and c -> mirror(d) with (-pi/2, +pi/2), so the two connecting paths
    differ by a total phase of pi. Exact twofold (Kramers) degeneracy of
    every eigenvalue requires the crosswise choice ((a, b), (b, a)).
    """
    if coupling_length <= 0:
        raise ValueError("coupling length must be positive")
    if not any(v.kind == CIRCULATOR for v in sub.vertices):
        raise ValueError("subgraph has no circulator; there is no "
                         "antiunitary symmetry to invert")
    (a, b), (c, d) = coupling_pairs
    offset = max(v.id for v in sub.vertices)
    vmap = {v.id: v for v in sub.vertices}
    for vid in (a, b, c, d):
        if vid not in vmap:
            raise ValueError(f"coupling vertex {vid} not in subgraph")
        if vmap[vid].kind != NEUMANN:
            raise ValueError(f"coupling vertex {vid} must be a Neumann "
                             "junction with spare valency")

    vertices = list(sub.vertices)
    for v in sub.vertices:
        if v.kind == CIRCULATOR:
            vertices.append(Vertex(id=v.id + offset, kind=CIRCULATOR,
                                   orientation=-v.orientation,
                                   ports=tuple(p + offset for p in v.ports)))
        else:
            vertices.append(Vertex(id=v.id + offset))
    bonds = list(sub.bonds)
    for bond in sub.bonds:
        bonds.append(Bond(i=bond.i + offset, j=bond.j + offset,
                          length=bond.length,
                          phase_ij=-bond.phase_ij, phase_ji=-bond.phase_ji))
    half_pi = np.pi / 2
    bonds.append(Bond(i=a, j=b + offset, length=coupling_length,
                      phase_ij=+half_pi, phase_ji=-half_pi))
    bonds.append(Bond(i=c, j=d + offset, length=coupling_length,
                      phase_ij=-half_pi, phase_ji=+half_pi))
    return GraphSpec(vertices=tuple(vertices), bonds=tuple(bonds),
                     validate_lengths=False)


def sweep_lengths(g, plus_pair, minus_pair, delta_l, n_steps):
    """Parametric realizations: step m lengthens both plus_pair bonds by
    m * delta_l and shortens both minus_pair bonds by the same amount, so
    the total optical length is invariant. Returns max(1, n_steps) graphs,
    the first being g itself. Use mirrored bond pairs to preserve the
    symplectic symmetry of a doubled graph.
    """
    ids = tuple(plus_pair) + tuple(minus_pair)
    if len(set(ids)) != 4:
        raise ValueError("plus and minus bond pairs must be four distinct bonds")
    for bid in ids:
        if not 0 <= bid < len(g.bonds):
            raise ValueError(f"bond index {bid} out of range")
    out = []
    for m in range(max(1, int(n_steps))):
        bonds = list(g.bonds)
        for bid in plus_pair:
            bonds[bid] = replace(bonds[bid], length=bonds[bid].length
                                 + m * delta_l)
        for bid in minus_pair:
            new_len = bonds[bid].length - m * delta_l
            if new_len <= 0:
                raise ValueError(f"bond {bid} length becomes non-positive "
                                 f"at sweep step {m}")
            bonds[bid] = replace(bonds[bid], length=new_len)
        out.append(GraphSpec(vertices=g.vertices, bonds=tuple(bonds),
                             validate_lengths=False))
    return out


# ---------------------------------------------------------------------------
# stock graphs
# ---------------------------------------------------------------------------

def interval_graph(length=1.0):
    """Single bond with two Neumann endpoints; spectrum k = n pi / length."""
    return GraphSpec(vertices=(Vertex(1), Vertex(2)),
                     bonds=(Bond(1, 2, length),))


def ring_graph(circumference=1.0, splits=(0.311, 0.422, 0.267)):
    """A loop realized as three valency-2 Neumann vertices (transparent),
    spectrum k = 2 pi n / circumference, each level twofold degenerate."""
    f = np.asarray(splits, dtype=float)
    f = f / f.sum() * circumference
    return GraphSpec(vertices=(Vertex(1), Vertex(2), Vertex(3)),
                     bonds=(Bond(1, 2, f[0]), Bond(2, 3, f[1]),
                            Bond(3, 1, f[2])),
                     validate_lengths=False)


# 8-vertex cubic-style layout: all interior vertices valency 3, vertices 1
# and 8 keep a spare port for coupling bonds
_SUBGRAPH_EDGES = ((1, 2), (1, 3), (2, 3), (2, 4), (3, 5), (4, 6), (5, 6),
                   (6, 7), (7, 8), (4, 7), (5, 8))


def cubic_gue_subgraph(seed, orientation=1, circulators=(2, 5, 6)):
    """Random-length 8-vertex subgraph with circulators breaking time
    reversal at the given valency-3 vertices.

    Bond lengths are drawn uniformly from [0.2, 1.0] m and re-drawn until
    the rational-ratio screen passes. The default of three circulators
    gives this small layout gap statistics close to the broken-time-
    reversal universal ones; a single circulator leaves visibly
    intermediate statistics.
    """
    rng = np.random.default_rng(seed)
    for _ in range(100):
        lengths = 0.2 + 0.8 * rng.random(len(_SUBGRAPH_EDGES))
        if _ratio_screen(lengths) is None:
            break
    nbrs = {v: [] for v in range(1, 9)}
    for i, j in _SUBGRAPH_EDGES:
        nbrs[i].append(j)
        nbrs[j].append(i)
    vertices = []
    for vid in range(1, 9):
        if vid in circulators:
            if len(nbrs[vid]) != 3:
                raise ValueError(f"vertex {vid} has valency "
                                 f"{len(nbrs[vid])}, circulators need 3")
            vertices.append(Vertex(vid, kind=CIRCULATOR,
                                   orientation=orientation,
                                   ports=tuple(nbrs[vid])))
        else:
            vertices.append(Vertex(vid))
    bonds = tuple(Bond(i, j, L) for (i, j), L in zip(_SUBGRAPH_EDGES, lengths))
    return GraphSpec(vertices=tuple(vertices), bonds=bonds)


def standard_gse_graph(seed, total_length=6.68, circulators=(2, 5, 6)):
    """Doubled 16-vertex symplectic graph scaled to a total optical length.

    Crosswise coupling (1 -> mirror 8, 8 -> mirror 1) with +/- pi/2 phases;
    every eigenvalue is an exact Kramers doublet.
    """
    rng = np.random.default_rng(seed)
    sub = cubic_gue_subgraph(seed, circulators=circulators)
    for _ in range(100):
        coupling = 0.2 + 0.8 * rng.random()
        if _ratio_screen([b.length for b in sub.bonds] + [coupling]) is None:
            break
    g = build_gse_double(sub, ((1, 8), (8, 1)), coupling)
    scale = total_length / g.total_length
    bonds = tuple(replace(b, length=b.length * scale) for b in g.bonds)
    return GraphSpec(vertices=g.vertices, bonds=bonds, validate_lengths=False)
