"""Gromov products and boundary-point classifiers as finite convergence scans.

The limit conditions defining v-points, w-points, k-points, local
hyperbolicity and well-behaved near-geodesics become dyadic scans over
boundary-approach sequences, with explicit three-way verdicts.  Quantities
that should diverge are measured through certified lower bounds and
quantities that should stay bounded through certified upper bounds, so a
passing verdict is never claimed from the optimistic side of a bracket.

Verdict rules (fixed thresholds):
  diverging    lower bounds strictly increase over the last 4 rows and the
               final lower bound reaches 3.0;
  bounded      upper bounds of the last 4 rows stay within a band of 0.5;
  inconclusive everything else.
Each scan also reports a task-specific pass flag (e.g. positivity scans pass
when the last lower bounds clear 0.05) and the least-squares slope of the
lower bounds against the row index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import brackets as br
from . import geometry as geo
from . import oracles as orc
from .brackets import Bracket
from .metric import DEFAULT_CFG, EstimatorConfig, lempert, lempert_tilde_to_set
from .paths import find_epsilon_geodesic, kobayashi_distance, path_distance_to_point

DIVERGE_LEVEL = 3.0
BAND_WIDTH = 0.5
POSITIVE_FLOOR = 0.05
_WINDOW = 4


@dataclass(frozen=True)
class GromovSample:
    z: np.ndarray
    w: np.ndarray
    o: np.ndarray
    k_zo: Bracket
    k_wo: Bracket
    k_zw: Bracket
    value: Bracket


@dataclass(frozen=True)
class ScanRow:
    n: int
    t: float
    bracket: Bracket
    note: str = ""


@dataclass(frozen=True)
class ScanReport:
    label: str
    rows: tuple
    verdict: str          # diverging | bounded | inconclusive
    trend_slope: float
    passed: bool
    criterion: str

    def valid_rows(self):
        return [r for r in self.rows if not r.note]


def gromov_product(dom: geo.Domain, z, w, o,
                   cfg: EstimatorConfig = DEFAULT_CFG) -> GromovSample:
    """Bracketed Gromov product (z|w)_o = (k(z,o) + k(w,o) - k(z,w)) / 2."""
    z = geo.as_point(z, dom)
    w = geo.as_point(w, dom)
    o = geo.as_point(o, dom)
    k_zo = kobayashi_distance(dom, z, o, cfg)
    k_wo = kobayashi_distance(dom, w, o, cfg)
    k_zw = kobayashi_distance(dom, z, w, cfg)
    value = br.scale(br.sub(br.add(k_zo, k_wo), k_zw), 0.5)
    return GromovSample(z, w, o, k_zo, k_wo, k_zw, value)


# ---------------------------------------------------------------------------
# verdict machinery
# ---------------------------------------------------------------------------

def _trend_slope(rows):
    pts = [(r.n, r.bracket.lower) for r in rows]
    if len(pts) < 2:
        return 0.0
    xs = np.array([p[0] for p in pts], dtype=float)
    ys = np.array([p[1] for p in pts], dtype=float)
    xs -= xs.mean()
    denom = float(np.sum(xs * xs))
    return float(np.sum(xs * (ys - ys.mean())) / denom) if denom > 0 else 0.0


def _classify(rows, mode):
    """(verdict, passed) from the last rows of a scan."""
    if len(rows) < _WINDOW:
        return "inconclusive", False
    tail = rows[-_WINDOW:]
    lows = [r.bracket.lower for r in tail]
    ups = [r.bracket.upper for r in tail]
    increasing = all(lows[i + 1] > lows[i] for i in range(_WINDOW - 1))
    diverging = increasing and lows[-1] >= DIVERGE_LEVEL
    banded = max(ups) - min(ups) <= BAND_WIDTH

    if mode == "diverge-up":
        if diverging:
            return "diverging", True
        if banded:
            return "bounded", False
        return "inconclusive", False
    if mode == "bounded-below":
        nondecreasing = all(lows[i + 1] >= lows[i] - 1e-12 for i in range(_WINDOW - 1))
        if diverging:
            return "diverging", True  # diverging upward is bounded below
        if max(lows) - min(lows) <= BAND_WIDTH or nondecreasing:
            return "bounded", True
        return "inconclusive", False
    if mode == "positive":
        if diverging:
            return "diverging", True
        if banded:
            return "bounded", min(lows) >= POSITIVE_FLOOR
        return "inconclusive", min(lows) >= POSITIVE_FLOOR
    raise ValueError(f"unknown scan mode {mode!r}")


def _report(label, rows, mode, criterion):
    valid = [r for r in rows if not r.note]
    verdict, passed = _classify(valid, mode)
    return ScanReport(label, tuple(rows), verdict, _trend_slope(valid),
                      passed, criterion)


# ---------------------------------------------------------------------------
# approach sequences and o-grids
# ---------------------------------------------------------------------------

def _approach(dom, p, n_steps, split=None, t0=0.5):
    """Boundary approach sequence; falls back to a radial probe direction
    when the anchor has no normal (puncture, corners)."""
    try:
        return geo.make_sequence(dom, p, n_steps, split=split, t0=t0)
    except geo.NonSmoothBoundaryError:
        p_arr = np.asarray(p, dtype=complex).reshape(-1)
        for anchor in _deep_anchors(dom):
            d = anchor - p_arr
            nd = np.linalg.norm(d)
            if nd < 1e-12:
                continue
            try:
                return geo.make_sequence(dom, p, n_steps, split=split,
                                         direction=d / nd, t0=t0)
            except geo.MembershipError:
                continue
        raise


def _deep_anchors(dom: geo.Domain):
    n = dom.dim
    anchors = []
    if dom.kind == "half-plane":
        anchors = [np.array([1.0 + 0j])]
    elif dom.kind == "punctured-plane":
        anchors = [np.array([1.0 + 0j]), np.array([-1.0 + 0j])]
    elif dom.kind == "lens":
        anchors = [np.array([0.7 + 0j])]
    elif dom.kind == "intersection":
        nb = dom.params[0]
        inner = nb.center + (0.5 * nb.radius if nb.shape == "ball" else 0.1) * \
            _approach_dir(dom, nb.center)
        anchors = [inner]
    zero = np.zeros(n, dtype=complex)
    if geo.contains(dom, zero):
        anchors.append(zero)
    for j in range(n):
        for s in (0.5, -0.5):
            e = np.zeros(n, dtype=complex)
            e[j] = s
            if geo.contains(dom, e):
                anchors.append(e)
    return [a for a in anchors if geo.contains(dom, a)]


def _approach_dir(dom, p):
    try:
        return geo.inner_normal(dom.parts[0] if dom.kind == "intersection" else dom,
                                p)
    except (geo.NonSmoothBoundaryError, geo.MembershipError):
        p_arr = np.asarray(p, dtype=complex).reshape(-1)
        d = -p_arr
        nd = np.linalg.norm(d)
        return d / nd if nd > 0 else np.ones(dom.dim, dtype=complex)


def _antipodal(dom: geo.Domain, p):
    """Default second anchor for two-ended scans: the reflected point."""
    q = -np.asarray(p, dtype=complex).reshape(-1)
    if abs(geo.defining_function(dom, q)) <= 1e-9:
        return q
    raise ValueError("no default antipodal boundary point; pass q explicitly")


def _o_grid(dom: geo.Domain, nbhd: geo.Neighbourhood, count):
    """Base points across Omega \\ U: a shell just outside U plus deep spread."""
    out = []
    p = nbhd.center
    if nbhd.shape == "ball":
        shell = count // 2
        if dom.dim == 1:
            dirs = [np.array([np.exp(2j * np.pi * k / (2 * shell))])
                    for k in range(2 * shell)]
        else:
            dirs = []
            for j in range(dom.dim):
                for ph in (1.0, -1.0, 1j, -1j):
                    e = np.zeros(dom.dim, dtype=complex)
                    e[j] = ph
                    dirs.append(e)
            diag = np.ones(dom.dim, dtype=complex) / math.sqrt(dom.dim)
            dirs += [diag, -diag, 1j * diag, -1j * diag]
        for u in dirs:
            cand = p + 1.05 * nbhd.radius * u
            if geo.contains(dom, cand) and not nbhd.contains(cand):
                out.append(cand)
            if len(out) >= shell:
                break
    for anchor in _deep_anchors(dom):
        if len(out) >= count:
            break
        if not nbhd.contains(anchor) and \
                all(np.linalg.norm(anchor - q) > 1e-9 for q in out):
            out.append(anchor)
    if not out:
        raise ValueError("empty base-point grid: neighbourhood covers the domain")
    return out


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

def w_point_scan(dom: geo.Domain, p, nbhd: geo.Neighbourhood,
                 cfg: EstimatorConfig = DEFAULT_CFG) -> ScanReport:
    """Gromov product of pairs approaching p, minimized over base points
    outside the neighbourhood; a w-point makes the minimum diverge."""
    seq = _approach(dom, p, cfg.scan_steps, split=(0.25, -0.25))
    grid = _o_grid(dom, nbhd, cfg.o_grid)
    rows = []
    for n in range(len(seq)):
        z, w = seq.pair(n)
        vals = [gromov_product(dom, z, w, o, cfg).value for o in grid]
        rows.append(ScanRow(n + 1, seq.offsets[n], br.minimum(vals)))
    return _report(f"w-point scan at {geo._fmt_pt(p)} of {dom}", rows,
                   "diverge-up", "inf over escape grid of (z_n|w_n)_o diverges")


def weak_w_scan(dom: geo.Domain, p, o=None,
                cfg: EstimatorConfig = DEFAULT_CFG) -> ScanReport:
    """Gromov product at a fixed base point; the weak variant of the w scan."""
    seq = _approach(dom, p, cfg.scan_steps, split=(0.25, -0.25))
    if o is None:
        o = _deep_anchors(dom)[0]
    rows = []
    for n in range(len(seq)):
        z, w = seq.pair(n)
        rows.append(ScanRow(n + 1, seq.offsets[n],
                            gromov_product(dom, z, w, o, cfg).value))
    return _report(f"weak w scan at {geo._fmt_pt(p)} of {dom}", rows,
                   "diverge-up", "(z_n|w_n)_o diverges for fixed o")


def v_point_scan(dom: geo.Domain, p, q=None, o=None,
                 cfg: EstimatorConfig = DEFAULT_CFG) -> ScanReport:
    """k(z_n, w_n) - k(z_n, o) stays bounded below as z_n -> p, w_n -> q."""
    p_arr = np.asarray(p, dtype=complex).reshape(-1)
    q = _antipodal(dom, p) if q is None else np.asarray(q, dtype=complex).reshape(-1)
    if np.linalg.norm(q - p_arr) < 1e-9:
        raise ValueError("q must differ from p")
    if o is None:
        o = _deep_anchors(dom)[0]
    seq_p = _approach(dom, p, cfg.scan_steps)
    seq_q = _approach(dom, q, cfg.scan_steps)
    rows = []
    degenerate = True
    for n in range(len(seq_p)):
        z, w = seq_p.point(n), seq_q.point(n)
        k_zw = kobayashi_distance(dom, z, w, cfg)
        k_zo = kobayashi_distance(dom, z, o, cfg)
        degenerate = degenerate and k_zw.upper <= 1e-12
        rows.append(ScanRow(n + 1, seq_p.offsets[n], br.sub(k_zw, k_zo)))
    rep = _report(f"v-point scan at {geo._fmt_pt(p)} of {dom}", rows,
                  "bounded-below", "k(z_n,w_n) - k(z_n,o) bounded below")
    if degenerate:
        # the condition holds vacuously when the distance vanishes
        # identically; refuse to classify such a point as a v-point
        return ScanReport(rep.label, rep.rows, "inconclusive", rep.trend_slope,
                          False, rep.criterion + " (vacuous: vanishing distance)")
    return rep


def gromov_property_scan(dom: geo.Domain, p, q=None, o=None,
                         cfg: EstimatorConfig = DEFAULT_CFG) -> ScanReport:
    """(z_n|w_n)_o stays bounded for pairs approaching distinct p and q."""
    p_arr = np.asarray(p, dtype=complex).reshape(-1)
    q = _antipodal(dom, p) if q is None else np.asarray(q, dtype=complex).reshape(-1)
    if np.linalg.norm(q - p_arr) < 1e-9:
        raise ValueError("q must differ from p")
    if o is None:
        o = _deep_anchors(dom)[0]
    seq_p = _approach(dom, p, cfg.scan_steps)
    seq_q = _approach(dom, q, cfg.scan_steps)
    rows = []
    for n in range(len(seq_p)):
        s = gromov_product(dom, seq_p.point(n), seq_q.point(n), o, cfg)
        rows.append(ScanRow(n + 1, seq_p.offsets[n], s.value))
    rep = _report(f"Gromov property scan at {geo._fmt_pt(p)} of {dom}", rows,
                  "diverge-up", "(z_n|w_n)_o stays bounded for q != p")
    # bounded is the passing outcome here
    return ScanReport(rep.label, rep.rows, rep.verdict, rep.trend_slope,
                      rep.verdict == "bounded", rep.criterion)


def k_point_scan(dom: geo.Domain, p, nbhd: geo.Neighbourhood,
                 cfg: EstimatorConfig = DEFAULT_CFG) -> ScanReport:
    """k(z_n, escape set) - log(1/delta(z_n))/2 stays bounded below."""
    seq = _approach(dom, p, cfg.scan_steps)
    rows = []
    for n in range(len(seq)):
        z = seq.point(n)
        t = seq.offsets[n]
        if not nbhd.contains(z):
            rows.append(ScanRow(n + 1, t, Bracket(0.0, 0.0), note="outside U"))
            continue
        lt = lempert_tilde_to_set(dom, z, nbhd, cfg)
        k_set = br.tanh_inv(Bracket(lt.lower, min(lt.upper, 1.0 - 1e-16),
                                    lt.method_lower, lt.method_upper))
        shift = 0.5 * math.log(1.0 / geo.boundary_distance(dom, z))
        rows.append(ScanRow(n + 1, t, Bracket(k_set.lower - shift,
                                              k_set.upper - shift,
                                              k_set.method_lower,
                                              k_set.method_upper)))
    return _report(f"k-point scan at {geo._fmt_pt(p)} of {dom}", rows,
                   "bounded-below",
                   "k(z_n, escape set) - log(1/delta)/2 bounded below")


def hyperbolicity_at_scan(dom: geo.Domain, p,
                          cfg: EstimatorConfig = DEFAULT_CFG) -> ScanReport:
    """Local hyperbolicity at p.

    Bounded domains satisfy it outright; the scan still measures
    k(near-shells, escape shell) as evidence.  Unbounded kinds measure the
    Lempert bracket between points approaching p and points escaping to
    infinity and pass on a positive floor.
    """
    if dom.bounded:
        nbhd = geo.ball_neighbourhood(p, 0.5)
        seq = _approach(dom, p, cfg.scan_steps)
        grid = _o_grid(dom, nbhd, cfg.o_grid)
        rows = []
        for n in range(len(seq)):
            z = seq.point(n)
            vals = [kobayashi_distance(dom, z, o, cfg) for o in grid]
            rows.append(ScanRow(n + 1, seq.offsets[n], br.minimum(vals)))
        rep = _report(f"hyperbolicity at {geo._fmt_pt(p)} of {dom}", rows,
                      "positive", "bounded domain: k(z_n, escape shell) > 0")
        return ScanReport(rep.label, rep.rows, rep.verdict, rep.trend_slope,
                          True, rep.criterion + " (bounded: holds outright)")
    seq = _approach(dom, p, cfg.scan_steps)
    far_dir = _deep_anchors(dom)[0]
    far_dir = far_dir / np.linalg.norm(far_dir)
    rows = []
    for n in range(len(seq)):
        z = seq.point(n)
        w = far_dir * (2.0 ** (n + 1))
        rows.append(ScanRow(n + 1, seq.offsets[n], lempert(dom, z, w, cfg)))
    return _report(f"hyperbolicity at {geo._fmt_pt(p)} of {dom}", rows,
                   "positive", "liminf of l(z_n, w_n), w_n -> infinity, positive")


def hyperbolicity_near_scan(dom: geo.Domain, p, radius: float = 0.25,
                            cfg: EstimatorConfig = DEFAULT_CFG) -> ScanReport:
    """Distinct pairs near p must have positive distance lower bounds."""
    seq = _approach(dom, p, cfg.scan_steps, split=(0.25, -0.25),
                    t0=min(0.5, radius))
    rows = []
    for n in range(len(seq)):
        z, w = seq.pair(n)
        rows.append(ScanRow(n + 1, seq.offsets[n],
                            kobayashi_distance(dom, z, w, cfg)))
    return _report(f"hyperbolicity near {geo._fmt_pt(p)} of {dom}", rows,
                   "positive", "k(z,w) > 0 for distinct pairs near p")


def well_behaved_scan(dom: geo.Domain, p, eps: float = 0.05, o=None,
                      cfg: EstimatorConfig = DEFAULT_CFG) -> ScanReport:
    """Near-geodesics between pairs approaching p escape every compact set:
    their distance to a fixed interior point must diverge."""
    if o is None:
        o = _deep_anchors(dom)[0]
    seq = _approach(dom, p, cfg.scan_steps, split=(0.25, -0.25))
    rows = []
    for n in range(len(seq)):
        z, w = seq.pair(n)
        cert = find_epsilon_geodesic(dom, z, w, eps, cfg)
        rows.append(ScanRow(n + 1, seq.offsets[n],
                            path_distance_to_point(dom, cert.path, o, cfg)))
    return _report(f"well-behaved geodesics at {geo._fmt_pt(p)} of {dom}", rows,
                   "diverge-up", "k(geodesic trace, o) diverges")


def dini_bound(dom: geo.Domain, z, w) -> float:
    """Logarithmic distance upper bound at Dini-smooth boundary points:
    log(1 + 2 ||z - w|| / sqrt(delta(z) delta(w)))."""
    z = geo.as_point(z, dom)
    w = geo.as_point(w, dom)
    dz = geo.boundary_distance(dom, z)
    dw = geo.boundary_distance(dom, w)
    sep = float(np.linalg.norm(z - w))
    return math.log(1.0 + 2.0 * sep / math.sqrt(dz * dw))
