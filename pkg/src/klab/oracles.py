"""Closed-form oracles for the model domains plus inclusion machinery.

Exact formulas exist for the disc, Euclidean balls, polydiscs, the half
plane, the lens (via its lune uniformization), products of such kinds, and
the punctured plane (vanishing metric).  They serve three roles:

* gold-standard values for estimator acceptance,
* certified lower bounds through superdomain inclusion (``Omega subset G``
  implies ``k_G <= k_Omega``),
* certified upper bounds through inscribed subdomains (``B subset Omega``
  implies ``k_Omega <= k_B``), with osculating inscribed balls giving upper
  bounds that stay tight near smooth boundary points.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry as geo
from .conformal import (LuneMap, ball_automorphism, ball_distance,
                        ball_geodesic, ball_metric, cayley, cayley_deriv,
                        cayley_inv, disc_geodesic, mobius, poincare,
                        poincare_metric)

_LENS = LuneMap(geo.LENS_OUTER_CENTER, geo.LENS_OUTER_RADIUS,
                geo.LENS_INNER_CENTER, geo.LENS_INNER_RADIUS)


def lens_map() -> LuneMap:
    """The lune uniformization of the canonical lens."""
    return _LENS


# intersection tables sometimes collapse to kinds with closed forms: a single
# effective ball (all other constraints subsumed) or a planar two-disc lens
_lune_cache: dict = {}


def _single_ball_reduction(dom: geo.Domain):
    """(center, radius) when one full-span ball constraint implies the rest."""
    t = dom.table
    balls = []
    for i in range(t.nrows):
        if t.ctype[i] != geo.C_BALL or t.span[i, 0] != 0 or t.span[i, 1] != dom.dim:
            return None
        balls.append((t.center[i], float(t.radius[i])))
    c0, r0 = min(balls, key=lambda b: b[1])
    for c, r in balls:
        if float(np.linalg.norm(c0 - c)) + r0 > r + 1e-12:
            return None
    return c0, r0


def _planar_lune(dom: geo.Domain):
    """LuneMap for a planar intersection of exactly two crossing discs."""
    if dom.dim != 1:
        return None
    t = dom.table
    if t.nrows != 2 or np.any(t.ctype != geo.C_BALL):
        return None
    key = (complex(t.center[0, 0]), float(t.radius[0]),
           complex(t.center[1, 0]), float(t.radius[1]))
    if key not in _lune_cache:
        try:
            _lune_cache[key] = LuneMap(*key)
        except ValueError:
            _lune_cache[key] = None
    return _lune_cache[key]


def _intersection_closed_form(dom: geo.Domain):
    """('ball', c, r) | ('lune', map) | None for an intersection domain."""
    ball_red = _single_ball_reduction(dom)
    if ball_red is not None:
        return ("ball", ball_red[0], ball_red[1])
    lune = _planar_lune(dom)
    if lune is not None:
        return ("lune", lune)
    return None


def vanishing_metric(dom: geo.Domain) -> bool:
    """True when the invariant metric of the kind is identically zero."""
    if dom.kind == "punctured-plane":
        return True
    if dom.kind == "product":
        return all(vanishing_metric(p) for p in dom.parts)
    return False


# ---------------------------------------------------------------------------
# scaled disc / ball helpers
# ---------------------------------------------------------------------------

def disc_distance_cr(c: complex, r: float, z: complex, w: complex) -> float:
    return poincare((z - c) / r, (w - c) / r)


def disc_metric_cr(c: complex, r: float, z: complex, v: complex) -> float:
    return poincare_metric((z - c) / r, v / r)


def ball_distance_cr(c, r, z, w) -> float:
    c = np.asarray(c, dtype=complex)
    return ball_distance((np.asarray(z, dtype=complex) - c) / r,
                         (np.asarray(w, dtype=complex) - c) / r)


def ball_metric_cr(c, r, z, v) -> float:
    c = np.asarray(c, dtype=complex)
    return ball_metric((np.asarray(z, dtype=complex) - c) / r,
                       np.asarray(v, dtype=complex) / r)


def ball_geodesic_cr(c, r, z, w, fractions) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    pts = ball_geodesic((np.asarray(z, dtype=complex) - c) / r,
                        (np.asarray(w, dtype=complex) - c) / r, fractions)
    return pts * r + c


# ---------------------------------------------------------------------------
# exact oracles per kind
# ---------------------------------------------------------------------------

def kappa_oracle(dom: geo.Domain, z, v):
    """Exact Kobayashi-Royden metric value, or None for kinds without one."""
    z = geo.as_point(z, dom)
    v = geo.as_tangent(v, dom)
    return _kappa(dom, z, v)


def _kappa(dom, z, v):
    k = dom.kind
    if k == "unit-disc":
        return poincare_metric(z[0], v[0])
    if k == "euclidean-ball":
        return ball_metric(z, v)
    if k == "polydisc":
        return max(poincare_metric(z[j], v[j]) for j in range(dom.dim))
    if k == "half-plane":
        return abs(v[0]) / (2.0 * z[0].real)
    if k == "lens":
        return _LENS.metric(z[0], v[0])
    if k == "punctured-plane":
        return 0.0
    if k == "product":
        d1 = dom.parts[0].dim
        k1 = _kappa(dom.parts[0], z[:d1], v[:d1])
        k2 = _kappa(dom.parts[1], z[d1:], v[d1:])
        if k1 is None or k2 is None:
            return None
        return max(k1, k2)
    if k == "intersection":
        red = _intersection_closed_form(dom)
        if red is None:
            return None
        if red[0] == "ball":
            return ball_metric_cr(red[1], red[2], z, v)
        return red[1].metric(z[0], v[0])
    return None


def distance_oracle(dom: geo.Domain, z, w):
    """Exact Kobayashi distance, or None for kinds without a closed form."""
    z = geo.as_point(z, dom)
    w = geo.as_point(w, dom)
    return _dist(dom, z, w)


def _dist(dom, z, w):
    k = dom.kind
    if k == "unit-disc":
        return poincare(z[0], w[0])
    if k == "euclidean-ball":
        return ball_distance(z, w)
    if k == "polydisc":
        return max(poincare(z[j], w[j]) for j in range(dom.dim))
    if k == "half-plane":
        return poincare(cayley(z[0]), cayley(w[0]))
    if k == "lens":
        return _LENS.distance(z[0], w[0])
    if k == "punctured-plane":
        return 0.0
    if k == "product":
        d1 = dom.parts[0].dim
        k1 = _dist(dom.parts[0], z[:d1], w[:d1])
        k2 = _dist(dom.parts[1], z[d1:], w[d1:])
        if k1 is None or k2 is None:
            return None
        return max(k1, k2)
    if k == "intersection":
        red = _intersection_closed_form(dom)
        if red is None:
            return None
        if red[0] == "ball":
            return ball_distance_cr(red[1], red[2], z, w)
        return red[1].distance(z[0], w[0])
    return None


def lempert_tilde_oracle(dom: geo.Domain, z, w):
    """Exact Lempert function value (tanh of the distance on oracle kinds)."""
    d = distance_oracle(dom, z, w)
    if d is None:
        return None
    return math.tanh(d)


_ORACLE_KINDS = {"unit-disc", "euclidean-ball", "polydisc", "half-plane",
                 "lens", "punctured-plane"}


def has_distance_oracle(dom: geo.Domain) -> bool:
    if dom.kind in _ORACLE_KINDS:
        return True
    if dom.kind == "product":
        return all(has_distance_oracle(p) for p in dom.parts)
    if dom.kind == "intersection":
        return _intersection_closed_form(dom) is not None
    return False


def geodesic_oracle(dom: geo.Domain, z, w, fractions):
    """Distance-realizing curve samples for oracle kinds, rows = points."""
    z = geo.as_point(z, dom)
    w = geo.as_point(w, dom)
    fr = np.asarray(fractions, dtype=float)
    return _geo(dom, z, w, fr)


def _geo(dom, z, w, fr):
    k = dom.kind
    if k == "unit-disc":
        return disc_geodesic(z[0], w[0], fr)[:, None]
    if k == "euclidean-ball":
        return ball_geodesic(z, w, fr)
    if k == "polydisc":
        cols = [disc_geodesic(z[j], w[j], fr) for j in range(dom.dim)]
        return np.stack(cols, axis=1)
    if k == "half-plane":
        pts = disc_geodesic(cayley(z[0]), cayley(w[0]), fr)
        return np.array([cayley_inv(p) for p in pts])[:, None]
    if k == "lens":
        return _LENS.geodesic(z[0], w[0], fr)[:, None]
    if k == "product":
        d1 = dom.parts[0].dim
        g1 = _geo(dom.parts[0], z[:d1], w[:d1], fr)
        g2 = _geo(dom.parts[1], z[d1:], w[d1:], fr)
        if g1 is None or g2 is None:
            return None
        return np.hstack([g1, g2])
    if k == "intersection":
        red = _intersection_closed_form(dom)
        if red is None:
            return None
        if red[0] == "ball":
            return ball_geodesic_cr(red[1], red[2], z, w, fr)
        return red[1].geodesic(z[0], w[0], fr)[:, None]
    return None


# ---------------------------------------------------------------------------
# superdomain (lower-bound) inclusions
# ---------------------------------------------------------------------------

def distance_lower_bounds(dom: geo.Domain, z, w):
    """(value, tag) certified lower bounds for k from superdomain oracles."""
    z = geo.as_point(z, dom)
    w = geo.as_point(w, dom)
    out = [(0.0, "vacuous")]
    exact = _dist(dom, z, w)
    if exact is not None:
        out.append((exact, "oracle"))
        return out
    for sup in _enclosing(dom):
        val = _sup_dist(sup, z, w)
        if val is not None:
            out.append((val, "inclusion"))
    return out


def metric_lower_bounds(dom: geo.Domain, z, v):
    """(value, tag) certified lower bounds for kappa from superdomains."""
    z = geo.as_point(z, dom)
    v = geo.as_tangent(v, dom)
    out = [(0.0, "vacuous")]
    exact = _kappa(dom, z, v)
    if exact is not None:
        out.append((exact, "oracle"))
        return out
    for sup in _enclosing(dom):
        val = _sup_kappa(sup, z, v)
        if val is not None:
            out.append((val, "inclusion"))
    return out


def _enclosing(dom: geo.Domain):
    """Oracle-capable superdomains of a kind without its own closed form.

    Returned entries are either Domain instances or ('ball', c, r) /
    ('polydisc', centers, radii) descriptors; _dist/_kappa understand both.
    """
    k = dom.kind
    if k == "intersection":
        parent = dom.parts[0]
        if has_distance_oracle(parent):
            return [parent]
        return _enclosing(parent)
    if k == "ellipsoid":
        axes = np.asarray(dom.params[0], dtype=float)
        n = dom.dim
        sups = [("ball", np.zeros(n, dtype=complex), float(np.max(axes)))]
        if n > 1:
            sups.append(("polydisc", np.zeros(n, dtype=complex), axes))
        return sups
    return []


def _sup_dist(sup, z, w):
    if isinstance(sup, tuple):
        if sup[0] == "ball":
            return ball_distance_cr(sup[1], sup[2], z, w)
        c, radii = sup[1], sup[2]
        return max(poincare((z[j] - c[j]) / radii[j], (w[j] - c[j]) / radii[j])
                   for j in range(len(radii)))
    return _dist(sup, z, w)


def _sup_kappa(sup, z, v):
    if isinstance(sup, tuple):
        if sup[0] == "ball":
            return ball_metric_cr(sup[1], sup[2], z, v)
        c, radii = sup[1], sup[2]
        return max(poincare_metric((z[j] - c[j]) / radii[j], v[j] / radii[j])
                   for j in range(len(radii)))
    return _kappa(sup, z, v)


# ---------------------------------------------------------------------------
# inscribed balls (upper-bound inclusions)
# ---------------------------------------------------------------------------

def nearest_boundary_point(dom: geo.Domain, z) -> np.ndarray:
    """A boundary point realizing (or nearly realizing) delta(z)."""
    z = geo.as_point(z, dom)
    t = dom.table
    dists = [geo._row_distance(t, i, z) for i in range(t.nrows)]
    i = int(np.argmin(dists))
    a, b = t.span[i]
    ct = t.ctype[i]
    y = z.copy()
    if ct == geo.C_BALL:
        d = z[a:b] - t.center[i, a:b]
        nrm = np.linalg.norm(d)
        if nrm < 1e-300:
            d = np.zeros(b - a, dtype=complex)
            d[0] = 1.0
            nrm = 1.0
        y[a:b] = t.center[i, a:b] + t.radius[i] * d / nrm
        return y
    if ct == geo.C_HALFSPACE:
        rho = geo._row_rho(t, i, z)
        y[a:b] = z[a:b] - rho * t.aux[i, a:b]
        return y
    if ct == geo.C_PUNCTURE:
        y[a] = 0.0
        return y
    # ellipsoid: damped projected descent on the boundary parametrization
    axes = t.aux[i, a:b].real
    x = np.concatenate([z[a:b].real, z[a:b].imag])
    ax2 = np.concatenate([axes, axes])
    u = x.copy()
    if np.linalg.norm(u) < 1e-14:
        u = np.zeros_like(x)
        u[0] = 1.0

    def proj(uu):
        g = np.sqrt(np.sum((uu / ax2) ** 2))
        return uu / g

    best = proj(u)
    bd = np.linalg.norm(x - best)
    step = 0.5
    for _ in range(200):
        h = 1e-6
        grad = np.zeros_like(u)
        for kk in range(u.size):
            up = u.copy(); up[kk] += h
            um = u.copy(); um[kk] -= h
            grad[kk] = (np.linalg.norm(x - proj(up)) -
                        np.linalg.norm(x - proj(um))) / (2 * h)
        gn = np.linalg.norm(grad)
        if gn < 1e-12 or step < 1e-10:
            break
        cand = u - step * grad / gn
        cd = np.linalg.norm(x - proj(cand))
        if cd < bd - 1e-15:
            u, best, bd = cand, proj(cand), cd
        else:
            step *= 0.5
    m = b - a
    y[a:b] = best[:m] + 1j * best[m:]
    return y


def inscribed_balls(dom: geo.Domain, pts, levels: int = 10):
    """Inscribed balls B(c, r) of dom containing all of ``pts``.

    Candidates: the maximal ball at the points' midpoint, plus an osculating
    chain of centers marching inward along the normal from the boundary point
    nearest the midpoint.  Every returned ball satisfies r <= delta(c), hence
    is genuinely contained in the domain.
    """
    pts = [geo.as_point(p, dom) for p in pts]
    mid = np.mean(pts, axis=0)
    if not geo.contains(dom, mid):
        mid = pts[0]
    out = []

    def consider(c):
        if not geo.contains(dom, c):
            return
        r = geo.boundary_distance(dom, c) * (1.0 - 1e-12)
        if r <= 0:
            return
        if all(np.linalg.norm(p - c) < r for p in pts):
            out.append((c, r))

    consider(mid)
    for p in pts:
        consider(p)
    try:
        b = nearest_boundary_point(dom, mid)
    except geo.MembershipError:
        return out
    nu = mid - b
    nrm = np.linalg.norm(nu)
    if nrm < 1e-300:
        return out
    nu = nu / nrm
    d0 = geo.boundary_distance(dom, mid)
    for j in range(1, levels + 1):
        consider(b + (d0 * 2.0 ** j) * nu)
    return out


def inclusion_distance_upper(dom: geo.Domain, z, w):
    """Certified upper bound for k via inscribed balls, or None."""
    balls = inscribed_balls(dom, [z, w])
    if not balls:
        return None
    return min(ball_distance_cr(c, r, z, w) for c, r in balls)


def inclusion_metric_upper(dom: geo.Domain, z, v):
    """Certified upper bound for kappa via inscribed balls around z."""
    z = geo.as_point(z, dom)
    v = geo.as_tangent(v, dom)
    balls = inscribed_balls(dom, [z])
    vals = [ball_metric_cr(c, r, z, v) for c, r in balls]
    delta = geo.boundary_distance(dom, z)
    vals.append(float(np.linalg.norm(v)) / delta)
    return min(vals)


def inclusion_geodesic(dom: geo.Domain, z, w, fractions):
    """Geodesic of the best inscribed ball through z and w, or None."""
    balls = inscribed_balls(dom, [z, w])
    if not balls:
        return None
    c, r = min(balls, key=lambda cr: ball_distance_cr(cr[0], cr[1], z, w))
    return ball_geodesic_cr(c, r, z, w, fractions)
