"""Curves in a domain: Kobayashi-Royden length, the integrated-form distance
by curve minimization, epsilon-geodesic construction with certificates,
concatenation, and arclength reparametrization.

Paths are piecewise linear.  Length brackets come from composite quadrature
of pointwise metric brackets; the conservative side combines the midpoint and
trapezoid sums so the reported upper is not undercut by quadrature bias on
curvature-signed stretches.  Epsilon-geodesic certificates compare the
certified length upper bound against the certified distance upper bound, so
they remain sound even where the true distance is not exactly computable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import brackets as br
from . import geometry as geo
from . import kernels as ker
from . import metric as mt
from . import oracles as orc
from .brackets import Bracket
from .metric import DEFAULT_CFG, ComputationError, EstimatorConfig


class GeodesicSearchError(RuntimeError):
    """No path certified within the node budget."""


@dataclass(frozen=True)
class Path:
    """Piecewise-linear curve: nodes (N, n) at strictly increasing params."""

    nodes: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        if self.nodes.ndim != 2 or self.nodes.shape[0] < 2:
            raise ValueError("a path needs at least two nodes")
        if np.any(np.diff(self.params) <= 0):
            raise ValueError("params must be strictly increasing")

    @property
    def start(self):
        return self.nodes[0]

    @property
    def end(self):
        return self.nodes[-1]

    def euclidean_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)))


def make_path(nodes, params=None) -> Path:
    nodes = np.atleast_2d(np.asarray(nodes, dtype=complex))
    if params is None:
        params = np.linspace(0.0, 1.0, nodes.shape[0])
    return Path(nodes, np.asarray(params, dtype=float))


def segment_path(z, w, n_nodes: int) -> Path:
    z = np.asarray(z, dtype=complex).reshape(-1)
    w = np.asarray(w, dtype=complex).reshape(-1)
    ts = np.linspace(0.0, 1.0, n_nodes)
    return Path(z[None, :] + ts[:, None] * (w - z)[None, :], ts)


@dataclass(frozen=True)
class GeodesicCertificate:
    """A path with a certified near-geodesic length bound."""

    domain: geo.Domain
    path: Path
    length: float          # certified KR-length upper bound
    distance_upper: float  # certified distance upper bound for the endpoints
    epsilon: float
    cfg: EstimatorConfig

    def __post_init__(self):
        if self.length > self.distance_upper + self.epsilon + 1e-9:
            raise ValueError("certificate violated: length exceeds bound")


# ---------------------------------------------------------------------------
# pointwise metric bounds along curves
# ---------------------------------------------------------------------------

def _kappa_bounds(dom, x, v, tight: bool) -> tuple[float, float]:
    """Cheap certified (lower, upper) for kappa(x; v) at a quadrature point."""
    exact = orc.kappa_oracle(dom, x, v)
    if exact is not None:
        return exact, exact
    lo = max(val for val, _ in orc.metric_lower_bounds(dom, x, v))
    if tight:
        up = orc.inclusion_metric_upper(dom, x, v)
    else:
        up = float(np.linalg.norm(v)) / geo.boundary_distance(dom, x)
    return lo, max(lo, up)


def _segment_quadrature(dom, a, b, dt, quad_sub, tight):
    """(lower, upper) KR length of one linear segment.

    Midpoint and trapezoid composite sums bracket the integral wherever the
    integrand's curvature keeps one sign on a sub-interval; the conservative
    combination hands the larger to the upper bound.
    """
    v = (b - a) / dt
    delta = min(geo.boundary_distance(dom, a), geo.boundary_distance(dom, b))
    q = quad_sub * 2 if delta < 0.05 else quad_sub
    fr_mid = (np.arange(q) + 0.5) / q
    fr_end = np.arange(q + 1) / q
    lows_m, ups_m = [], []
    for f in fr_mid:
        lo, up = _kappa_bounds(dom, a + f * (b - a), v, tight)
        lows_m.append(lo)
        ups_m.append(up)
    lows_e, ups_e = [], []
    for f in fr_end:
        x = a + f * (b - a)
        if not geo.contains(dom, x):
            raise geo.MembershipError("path escapes the domain at a quadrature point")
        lo, up = _kappa_bounds(dom, x, v, tight)
        lows_e.append(lo)
        ups_e.append(up)
    h = dt / q
    mid_lo = h * float(np.sum(lows_m))
    mid_up = h * float(np.sum(ups_m))
    trap_lo = h * (float(np.sum(lows_e)) - 0.5 * (lows_e[0] + lows_e[-1]))
    trap_up = h * (float(np.sum(ups_e)) - 0.5 * (ups_e[0] + ups_e[-1]))
    return min(mid_lo, trap_lo), max(mid_up, trap_up)


def kr_length(dom: geo.Domain, path: Path, cfg: EstimatorConfig = DEFAULT_CFG,
              tight: bool = False) -> Bracket:
    """Bracket for the Kobayashi-Royden length of a path."""
    lo_sum, up_sum = 0.0, 0.0
    for i in range(path.nodes.shape[0] - 1):
        a, b = path.nodes[i], path.nodes[i + 1]
        dt = path.params[i + 1] - path.params[i]
        if np.allclose(a, b):
            continue
        lo, up = _segment_quadrature(dom, a, b, dt, cfg.quad_sub, tight)
        lo_sum += lo
        up_sum += up
    return Bracket(lo_sum, up_sum, "curve", "curve")


def _fast_segment_upper(dom, a, b, quad_sub):
    """Midpoint upper sum for one segment; inf when the segment escapes."""
    if np.allclose(a, b):
        return 0.0
    v = b - a
    fr = (np.arange(quad_sub) + 0.5) / quad_sub
    pts = a[None, :] + fr[:, None] * v[None, :]
    if np.any(ker.rho_batch(pts, dom.table) >= 0):
        return math.inf
    total = 0.0
    for f in fr:
        x = a + f * v
        exact = orc.kappa_oracle(dom, x, v)
        if exact is None:
            exact = float(np.linalg.norm(v)) / geo.boundary_distance(dom, x)
        total += exact
    return total / quad_sub


# ---------------------------------------------------------------------------
# curve-minimized distance
# ---------------------------------------------------------------------------

def _path_inside(dom, nodes, checks=3):
    fr = (np.arange(checks) + 0.5) / checks
    for i in range(nodes.shape[0] - 1):
        pts = nodes[i][None, :] + fr[:, None] * (nodes[i + 1] - nodes[i])[None, :]
        if np.any(ker.rho_batch(pts, dom.table) >= 0):
            return False
    return bool(np.all(ker.rho_batch(nodes, dom.table) < 0))


def _descend_nodes(dom, nodes, cfg, sweeps=25):
    """Damped pattern search on interior nodes minimizing the fast upper sum."""
    nodes = nodes.copy()
    n_nodes, n = nodes.shape
    seg = np.array([_fast_segment_upper(dom, nodes[i], nodes[i + 1], cfg.quad_sub)
                    for i in range(n_nodes - 1)])
    dirs = []
    for j in range(n):
        for d in (1.0, -1.0, 1j, -1j):
            e = np.zeros(n, dtype=complex)
            e[j] = d
            dirs.append(e)
    h = 0.25 * float(np.max(np.linalg.norm(np.diff(nodes, axis=0), axis=1)))
    for _ in range(sweeps):
        improved = False
        for i in range(1, n_nodes - 1):
            base_cost = seg[i - 1] + seg[i]
            for e in dirs:
                cand = nodes[i] + h * e
                if geo.defining_function(dom, cand) >= 0:
                    continue
                s1 = _fast_segment_upper(dom, nodes[i - 1], cand, cfg.quad_sub)
                s2 = _fast_segment_upper(dom, cand, nodes[i + 1], cfg.quad_sub)
                if s1 + s2 < base_cost - 1e-12:
                    nodes[i] = cand
                    seg[i - 1], seg[i] = s1, s2
                    base_cost = s1 + s2
                    improved = True
        if not improved:
            h *= 0.5
            if h < 1e-6:
                break
    return nodes


def _candidate_paths(dom, z, w, n_nodes, cfg, disc=None, alpha=None):
    fr = np.linspace(0.0, 1.0, n_nodes)
    cands = []
    g = orc.geodesic_oracle(dom, z, w, fr)
    if g is not None:
        cands.append(g)
    cands.append(z[None, :] + fr[:, None] * (w - z)[None, :])
    ig = orc.inclusion_geodesic(dom, z, w, fr)
    if ig is not None:
        cands.append(ig)
    if disc is not None and alpha:
        cands.append(disc(fr * alpha))
    out = []
    for nodes in cands:
        nodes = nodes.copy()
        nodes[0], nodes[-1] = z, w
        if _path_inside(dom, nodes):
            out.append(nodes)
    # detours rescue pairs whose straight segment leaves the domain
    if not out:
        for bump in _detour_bumps(dom, z, w):
            mid = 0.5 * (z + w) + bump
            half = (n_nodes + 1) // 2
            nodes = np.vstack([
                z[None, :] + np.linspace(0, 1, half)[:, None] * (mid - z)[None, :],
                mid[None, :] + np.linspace(0, 1, half)[1:, None] * (w - mid)[None, :],
            ])
            if _path_inside(dom, nodes):
                out.append(nodes)
                break
    return out


def _detour_bumps(dom, z, w):
    scale = max(float(np.linalg.norm(w - z)), 1.0)
    bumps = []
    for j in range(dom.dim):
        for s in (0.5j, -0.5j, 0.5, -0.5):
            e = np.zeros(dom.dim, dtype=complex)
            e[j] = s * scale
            bumps.append(e)
    return bumps


def kobayashi_distance(dom: geo.Domain, z, w,
                       cfg: EstimatorConfig = DEFAULT_CFG) -> Bracket:
    """Bracket for the Kobayashi distance k(z, w).

    Upper bound: the best of the exact oracle (where the kind has one), the
    Lempert disc estimate run in both directions, inscribed-ball inclusion,
    and a curve-minimized KR length.  Lower bound: closed forms, holomorphic
    maps to the disc, superdomain inclusion.
    """
    z = geo.as_point(z, dom)
    w = geo.as_point(w, dom)
    for q in (z, w):
        if not geo.contains(dom, q):
            raise geo.MembershipError("endpoint outside the domain")
    if np.allclose(z, w):
        return Bracket(0.0, 0.0, "oracle", "oracle")
    if orc.vanishing_metric(dom):
        return br.exact(0.0)

    if "oracle" in cfg.upper_methods:
        exact = orc.distance_oracle(dom, z, w)
        if exact is not None:
            return br.exact(exact)

    lowers = orc.distance_lower_bounds(dom, z, w)
    lowers.append((mt.caratheodory_lower(dom, z, w), "half-space"))

    uppers = []
    disc = alpha = None
    if "disc" in cfg.upper_methods:
        directions = [(z, w)] + ([(w, z)] if cfg.symmetric else [])
        for a, b in directions:
            try:
                lb, dsc, al = mt.lempert_detail(
                    dom, a, b, cfg.with_(upper_methods=("disc",)))
            except ComputationError:
                continue
            if lb.method_upper == "disc-optimization":
                uppers.append((lb.upper, "disc-optimization"))
                if disc is None:
                    disc, alpha = dsc, al
    if "inclusion" in cfg.upper_methods:
        inc = orc.inclusion_distance_upper(dom, z, w)
        if inc is not None:
            uppers.append((inc, "inclusion"))
    if "curve" in cfg.upper_methods:
        best = None
        for nodes in _candidate_paths(dom, z, w, cfg.path_nodes, cfg, disc, alpha):
            nodes = _descend_nodes(dom, nodes, cfg)
            length = kr_length(dom, make_path(nodes), cfg)
            if best is None or length.upper < best:
                best = length.upper
        if best is not None and math.isfinite(best):
            uppers.append((best, "curve"))
    if not uppers:
        raise ComputationError(
            "no distance upper bound found; the points may lie in "
            "different components")
    return br.from_bounds(lowers, uppers)


# ---------------------------------------------------------------------------
# epsilon-geodesics
# ---------------------------------------------------------------------------

def find_epsilon_geodesic(dom: geo.Domain, z, w, eps: float,
                          cfg: EstimatorConfig = DEFAULT_CFG) -> GeodesicCertificate:
    """A path whose certified KR length is within eps of the certified
    distance upper bound; fails loudly after node-doubling up to 257 nodes."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    z = geo.as_point(z, dom)
    w = geo.as_point(w, dom)
    if np.allclose(z, w):
        path = make_path(np.vstack([z, z]), [0.0, 1.0])
        return GeodesicCertificate(dom, path, 0.0, 0.0, eps, cfg)

    kb = kobayashi_distance(dom, z, w, cfg)
    k_up = kb.upper
    tight = orc.kappa_oracle(dom, z, w - z) is None
    disc = alpha = None
    if "disc" in cfg.upper_methods and not orc.has_distance_oracle(dom):
        try:
            _, disc, alpha = mt.lempert_detail(dom, z, w,
                                               cfg.with_(upper_methods=("disc",)))
        except ComputationError:
            pass

    n_nodes = cfg.path_nodes
    best_nodes = None
    while n_nodes <= 257:
        for attempt in range(2):
            cands = _candidate_paths(dom, z, w, n_nodes, cfg, disc, alpha)
            if best_nodes is not None:
                cands.insert(0, _refine_nodes(best_nodes, n_nodes))
            for nodes in cands:
                if attempt == 1:
                    nodes = _descend_nodes(dom, nodes, cfg)
                if not _path_inside(dom, nodes):
                    continue
                length = kr_length(dom, make_path(nodes), cfg, tight=tight)
                if length.upper <= k_up + eps:
                    return GeodesicCertificate(dom, make_path(nodes),
                                               length.upper, k_up, eps, cfg)
                if best_nodes is None:
                    best_nodes = nodes
        n_nodes = 2 * n_nodes - 1
    raise GeodesicSearchError(
        f"no {eps}-geodesic certificate within 257 nodes for {dom}")


def _refine_nodes(nodes, n_nodes):
    """Resample a node polyline on a finer uniform grid."""
    m = nodes.shape[0]
    ts = np.linspace(0.0, 1.0, m)
    tq = np.linspace(0.0, 1.0, n_nodes)
    cols = [np.interp(tq, ts, nodes[:, j].real) + 1j * np.interp(tq, ts, nodes[:, j].imag)
            for j in range(nodes.shape[1])]
    return np.stack(cols, axis=1)


def concatenate(cert_a: GeodesicCertificate, cert_b: GeodesicCertificate,
                o) -> GeodesicCertificate:
    """Join two certificates sharing the waypoint o; the joined path is an
    epsilon'-geodesic with epsilon' read off the measured length excess."""
    o = np.asarray(o, dtype=complex).reshape(-1)
    if np.linalg.norm(cert_a.path.end - o) > 1e-12 or \
       np.linalg.norm(cert_b.path.start - o) > 1e-12:
        raise ValueError("certificates do not share the waypoint")
    dom = cert_a.domain
    nodes = np.vstack([cert_a.path.nodes, cert_b.path.nodes[1:]])
    pa, pb = cert_a.path.params, cert_b.path.params
    params = np.concatenate([pa, pa[-1] + (pb[1:] - pb[0])])
    length = cert_a.length + cert_b.length
    k_up = kobayashi_distance(dom, cert_a.path.start, cert_b.path.end,
                              cert_a.cfg).upper
    eps_prime = max(length - k_up, 0.0)
    return GeodesicCertificate(dom, Path(nodes, params), length, k_up,
                               eps_prime + 1e-12, cert_a.cfg)


def reparametrize_arclength(dom: geo.Domain, path: Path,
                            cfg: EstimatorConfig = DEFAULT_CFG) -> Path:
    """Same trace, params rescaled so each segment has unit KR speed."""
    lengths = []
    for i in range(path.nodes.shape[0] - 1):
        a, b = path.nodes[i], path.nodes[i + 1]
        dt = path.params[i + 1] - path.params[i]
        if np.allclose(a, b):
            lengths.append(0.0)
            continue
        _, up = _segment_quadrature(dom, a, b, dt, cfg.quad_sub, tight=False)
        lengths.append(up)
    total = float(np.sum(lengths))
    if total <= 0:
        raise ValueError("cannot reparametrize a zero-length path")
    # drop exactly-stationary nodes so params stay strictly increasing
    keep = [0]
    cum = [0.0]
    acc = 0.0
    for i, ln in enumerate(lengths):
        acc += ln
        if ln > 0:
            keep.append(i + 1)
            cum.append(acc)
    return Path(path.nodes[keep], np.asarray(cum))


def path_distance_to_point(dom: geo.Domain, path: Path, o,
                           cfg: EstimatorConfig = DEFAULT_CFG) -> Bracket:
    """Bracket for min over the path of k(., o).

    Nodes are sampled; the lower bound subtracts each segment's certified
    length so the in-between minimum cannot undercut it (triangle inequality),
    making the node-sampling slack explicit and rigorous.
    """
    o = geo.as_point(o, dom)
    node_brs = [kobayashi_distance(dom, x, o, cfg) for x in path.nodes]
    upper = min(b.upper for b in node_brs)
    lower = min(b.lower for b in node_brs)
    for i in range(path.nodes.shape[0] - 1):
        a, b = path.nodes[i], path.nodes[i + 1]
        if np.allclose(a, b):
            continue
        dt = path.params[i + 1] - path.params[i]
        _, seg_up = _segment_quadrature(dom, a, b, dt, cfg.quad_sub, tight=False)
        floor = min(node_brs[i].lower, node_brs[i + 1].lower) - seg_up
        lower = min(lower, floor)
    return Bracket(max(lower, 0.0), upper,
                   "curve", min(node_brs, key=lambda b: b.upper).method_upper)