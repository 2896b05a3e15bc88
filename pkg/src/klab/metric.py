"""Pointwise invariant-metric estimators.

The Kobayashi-Royden metric and the Lempert function are estimated from
above by optimizing polynomial analytic discs under an exact containment
penalty, and from below by closed forms, holomorphic projections to the unit
disc, and superdomain inclusions.  Every operation returns a two-sided
Bracket; lower bounds never come from the optimizer.

Disc search: a derivative-free simplex method (see klab.kernels) over the
coefficient vector, with deterministic multistarts.  Start candidates include
Taylor truncations of transported extremal discs on kinds with automorphism
or uniformizer structure, shrunk radially until the containment certificate
holds; on intersections the transport happens inside an inscribed ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import brackets as br
from . import geometry as geo
from . import kernels as ker
from . import oracles as orc
from .brackets import Bracket
from .conformal import (ball_automorphism, cayley, cayley_inv, herm, mobius,
                        poincare, poincare_metric)


class ComputationError(RuntimeError):
    """No certified disc candidate could be produced."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs for the disc optimizer and downstream estimators.

    JSON cfg block keys: degree, margin, boundary_samples, multistarts,
    max_evals, seed (additional fields below keep their defaults unless
    overridden explicitly).
    """

    degree: int = 8
    margin: float = 1e-6
    boundary_samples: int = 64
    multistarts: int = 8
    max_evals: int = 5000
    seed: int = 0xC0B1
    cert_samples: int = 512
    ftol: float = 1e-9
    penalty: float = 1e6
    upper_methods: tuple = ("oracle", "inclusion", "disc", "curve")
    path_nodes: int = 33
    quad_sub: int = 4
    set_targets: int = 64
    symmetric: bool = True
    scan_steps: int = 11
    o_grid: int = 16

    def with_(self, **kw) -> "EstimatorConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree, "margin": self.margin,
            "boundary_samples": self.boundary_samples,
            "multistarts": self.multistarts, "max_evals": self.max_evals,
            "seed": self.seed, "cert_samples": self.cert_samples,
            "ftol": self.ftol, "penalty": self.penalty,
            "upper_methods": list(self.upper_methods),
            "path_nodes": self.path_nodes, "quad_sub": self.quad_sub,
            "set_targets": self.set_targets, "symmetric": self.symmetric,
            "scan_steps": self.scan_steps, "o_grid": self.o_grid,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        kw = dict(d)
        if "upper_methods" in kw:
            kw["upper_methods"] = tuple(kw["upper_methods"])
        return cls(**kw)


DEFAULT_CFG = EstimatorConfig()


@dataclass(frozen=True)
class AnalyticDisc:
    """Polynomial disc phi(zeta) = base + sum_j coeffs[j] zeta^(j+1)."""

    base: np.ndarray          # (n,)
    coeffs: np.ndarray        # (d, n)
    margin: float

    def __call__(self, zetas) -> np.ndarray:
        zetas = np.atleast_1d(np.asarray(zetas, dtype=complex))
        d = self.coeffs.shape[0]
        zp = zetas[:, None] ** np.arange(1, d + 1)[None, :]
        return self.base[None, :] + zp @ self.coeffs

    def derivative_at_zero(self) -> np.ndarray:
        return self.coeffs[0]

    def sup_defining(self, dom: geo.Domain, samples: int) -> float:
        zetas = np.exp(2j * np.pi * np.arange(samples) / samples)
        return float(np.max(ker.rho_batch(self(zetas), dom.table)))

    def certified(self, dom: geo.Domain, samples: int) -> bool:
        return self.sup_defining(dom, samples) <= -self.margin


# ---------------------------------------------------------------------------
# Taylor transport machinery for informed starts
# ---------------------------------------------------------------------------

_FFT_SAMPLES = 512


def _taylor(fn, degree: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Constant term and c_1..c_degree of an analytic map Delta -> C^n."""
    k = np.arange(_FFT_SAMPLES)
    zetas = np.exp(2j * np.pi * k / _FFT_SAMPLES)
    vals = np.asarray(fn(zetas), dtype=complex)   # (S, n)
    coef = np.fft.fft(vals, axis=0) / _FFT_SAMPLES  # coef[j] = c_j (analytic)
    return coef[0], coef[1:degree + 1]


def _planar_map(dom: geo.Domain):
    """(f, finv) uniformizer onto the unit disc for planar conformal kinds."""
    if dom.kind == "unit-disc":
        return (lambda s: s), (lambda s: s)
    if dom.kind == "half-plane":
        return cayley, cayley_inv
    if dom.kind == "lens":
        lm = orc.lens_map()
        return (lambda s: np.vectorize(lm.map)(s)), (lambda s: np.vectorize(lm.inverse)(s))
    return None


def _transport_disc_map(dom: geo.Domain, z: np.ndarray, w_or_v: np.ndarray,
                        mode: int):
    """Analytic map tracing the model extremal disc, or None.

    mode KR: phi(0) = z with phi'(0) a positive multiple of v.
    mode Lempert: phi(0) = z, phi(alpha) = w at alpha = reach (returned).
    """
    kind = dom.kind
    if kind in ("unit-disc", "half-plane", "lens"):
        maps = _planar_map(dom)
        f, finv = maps
        a = complex(f(np.array([z[0]]))[0]) if kind == "lens" else complex(f(z[0]))
        if mode == ker.MODE_KR:
            h = 1e-6
            dfi = (np.vectorize(finv)(a + h) - np.vectorize(finv)(a - h)) / (2 * h)
            theta = np.angle(w_or_v[0]) - np.angle(complex(dfi))

            def fn(zetas):
                return np.asarray(np.vectorize(finv)(
                    mobius(a, -np.exp(1j * theta) * zetas)))[:, None]
            return fn, None
        b = complex(f(np.array([w_or_v[0]]))[0]) if kind == "lens" else complex(f(w_or_v[0]))
        u = mobius(a, b)
        alpha = abs(u)
        if alpha < 1e-14:
            return None
        uhat = u / alpha

        def fn(zetas):
            return np.asarray(np.vectorize(finv)(mobius(a, zetas * uhat)))[:, None]
        return fn, alpha

    if kind == "euclidean-ball":
        if mode == ker.MODE_KR:
            h = 1e-6
            d = (ball_automorphism(z, z + h * w_or_v) -
                 ball_automorphism(z, z - h * w_or_v)) / (2 * h)
            nd = np.linalg.norm(d)
            if nd < 1e-300:
                return None
            uhat = d / nd

            def fn(zetas):
                return np.array([ball_automorphism(z, t * uhat) for t in zetas])
            return fn, None
        u = ball_automorphism(z, w_or_v)
        alpha = float(np.linalg.norm(u))
        if alpha < 1e-14:
            return None
        uhat = u / alpha

        def fn(zetas):
            return np.array([ball_automorphism(z, t * uhat) for t in zetas])
        return fn, alpha

    if kind == "polydisc":
        n = dom.dim
        if mode == ker.MODE_KR:
            rates = np.array([abs(w_or_v[j]) / (1 - abs(z[j]) ** 2)
                              for j in range(n)])
            top = np.max(rates)
            if top < 1e-300:
                return None
            rho = rates / top
            phases = np.array([w_or_v[j] / abs(w_or_v[j]) if abs(w_or_v[j]) > 0
                               else 1.0 for j in range(n)])

            def fn(zetas):
                cols = [mobius(z[j], -phases[j] * rho[j] * zetas) for j in range(n)]
                return np.stack(cols, axis=1)
            return fn, None
        u = np.array([mobius(z[j], w_or_v[j]) for j in range(n)])
        alpha = float(np.max(np.abs(u)))
        if alpha < 1e-14:
            return None
        chat = u / alpha

        def fn(zetas):
            cols = [mobius(z[j], zetas * chat[j]) for j in range(n)]
            return np.stack(cols, axis=1)
        return fn, alpha

    if kind == "product":
        d1 = dom.parts[0].dim
        if mode == ker.MODE_KR:
            k1 = orc.kappa_oracle(dom.parts[0], z[:d1], w_or_v[:d1]) \
                if np.any(w_or_v[:d1] != 0) else 0.0
            k2 = orc.kappa_oracle(dom.parts[1], z[d1:], w_or_v[d1:]) \
                if np.any(w_or_v[d1:] != 0) else 0.0
            if k1 is None or k2 is None:
                return None
            top = max(k1, k2)
            if top < 1e-300:
                return None
            pieces = []
            for part, zz, vv, kk in ((dom.parts[0], z[:d1], w_or_v[:d1], k1),
                                     (dom.parts[1], z[d1:], w_or_v[d1:], k2)):
                if kk < 1e-300:
                    pieces.append(lambda zetas, zz=zz: np.tile(zz, (zetas.size, 1)))
                    continue
                sub = _transport_disc_map(part, zz, vv, ker.MODE_KR)
                if sub is None:
                    return None
                rate = kk / top
                pieces.append(lambda zetas, f=sub[0], r=rate: f(zetas * r))

            def fn(zetas):
                return np.hstack([p(zetas) for p in pieces])
            return fn, None
        subs = []
        reaches = []
        for part, zz, ww in ((dom.parts[0], z[:d1], w_or_v[:d1]),
                             (dom.parts[1], z[d1:], w_or_v[d1:])):
            if np.allclose(zz, ww):
                subs.append((lambda zetas, zz=zz: np.tile(zz, (zetas.size, 1)), 0.0))
                reaches.append(0.0)
                continue
            sub = _transport_disc_map(part, zz, ww, ker.MODE_LEMPERT)
            if sub is None:
                return None
            subs.append(sub)
            reaches.append(sub[1])
        alpha = max(reaches)
        if alpha < 1e-14:
            return None
        pieces = []
        for (f, reach) in subs:
            rate = (reach / alpha) if reach > 0 else 0.0
            if reach == 0.0:
                pieces.append(f)
            else:
                pieces.append(lambda zetas, f=f, r=rate: f(zetas * r))

        def fn(zetas):
            return np.hstack([p(zetas) for p in pieces])
        return fn, alpha

    if kind == "intersection" or kind == "ellipsoid":
        # transport inside the best inscribed ball
        if mode == ker.MODE_KR:
            balls = orc.inscribed_balls(dom, [z])
            if not balls:
                return None
            c, r = max(balls, key=lambda cr: cr[1])
            zz = (z - c) / r
            h = 1e-6
            d = (ball_automorphism(zz, zz + h * w_or_v) -
                 ball_automorphism(zz, zz - h * w_or_v)) / (2 * h)
            nd = np.linalg.norm(d)
            if nd < 1e-300:
                return None
            uhat = d / nd

            def fn(zetas):
                return np.array([c + r * ball_automorphism(zz, t * uhat)
                                 for t in zetas])
            return fn, None
        balls = orc.inscribed_balls(dom, [z, w_or_v])
        if not balls:
            return None
        c, r = min(balls, key=lambda cr: orc.ball_distance_cr(
            cr[0], cr[1], z, w_or_v))
        zz, ww = (z - c) / r, (w_or_v - c) / r
        u = ball_automorphism(zz, ww)
        alpha = float(np.linalg.norm(u))
        if alpha < 1e-14:
            return None
        uhat = u / alpha

        def fn(zetas):
            return np.array([c + r * ball_automorphism(zz, t * uhat)
                             for t in zetas])
        return fn, alpha
    return None


def _sup_rho(dom, base, coeffs, samples):
    zetas = np.exp(2j * np.pi * np.arange(samples) / samples)
    d = coeffs.shape[0]
    zp = zetas[:, None] ** np.arange(1, d + 1)[None, :]
    pts = base[None, :] + zp @ coeffs
    return float(np.max(ker.rho_batch(pts, dom.table)))


def _scaled(coeffs, lam):
    d = coeffs.shape[0]
    return coeffs * (lam ** np.arange(1, d + 1))[:, None]


def _shrink_to_certified(dom, base, coeffs, margin, samples=256):
    """Largest lambda in (0, 1] with the lambda-scaled disc certified."""
    def ok(lam):
        return _sup_rho(dom, base, _scaled(coeffs, lam), samples) <= -2.0 * margin

    if ok(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(40):
        lam = 0.5 * (lo + hi)
        if ok(lam):
            lo = lam
        else:
            hi = lam
    return lo


def _eliminated_coeffs(free_coeffs, base, target, alpha):
    """Impose phi(alpha) = target on the first coefficient."""
    d = free_coeffs.shape[0]
    coeffs = free_coeffs.copy()
    apow = alpha ** np.arange(1, d)
    coeffs[0] = (target - base) / alpha - np.sum(coeffs[1:] * apow[:, None],
                                                 axis=0)
    return coeffs


def _certify_or_shrink(mode, xb, dom, base, auxv, cfg):
    """Radially shrink an optimizer candidate until the 512-sample
    certificate holds; returns (value, coeffs) or None.

    The simplex search enforces containment only at the optimization samples,
    so near-extremal candidates can bulge slightly outside between samples;
    scaling coefficients c_j by lambda^j restores containment at a relative
    value cost of order (1 - lambda).
    """
    n, d = dom.dim, cfg.degree
    coeffs = _unpack_coeffs(mode, xb, base, auxv, n, d)

    if mode == ker.MODE_KR:
        s = abs(xb[0])
        if s <= 0:
            return None

        def build(lam):
            return _scaled(coeffs, lam)

        def value(lam):
            return 1.0 / (s * lam)
    else:
        alpha = float(xb[0])
        if not (1e-8 <= alpha < 1.0):
            return None
        free = coeffs.copy()

        def build(lam):
            a2 = alpha / lam
            if a2 >= 1.0 - 1e-12:
                return None
            return _eliminated_coeffs(_scaled(free, lam), base, auxv, a2)

        def value(lam):
            return math.atanh(min(alpha / lam, 1.0 - 1e-16))

    def certified(lam):
        built = build(lam)
        if built is None:
            return None
        if _sup_rho(dom, base, built, cfg.cert_samples) <= -cfg.margin:
            return built
        return False

    built = certified(1.0)
    if built is not None and built is not False:
        return value(1.0), built
    lo, hi = None, 1.0
    lam = 1.0
    for k in range(1, 14):
        lam = 1.0 - 2.0 ** (-14 + k)
        c = certified(lam)
        if c is not None and c is not False:
            lo = lam
            break
    if lo is None:
        return None
    # refine upward toward the rejection point
    best_lam, best_coeffs = lo, certified(lo)
    lo_l, hi_l = lo, hi
    for _ in range(20):
        mid = 0.5 * (lo_l + hi_l)
        c = certified(mid)
        if c is not None and c is not False:
            best_lam, best_coeffs = mid, c
            lo_l = mid
        else:
            hi_l = mid
    return value(best_lam), best_coeffs


def _direction_disc_radius(dom, z, u_hat, cap=None):
    """Largest r with the affine disc z + r * closed-disc * u_hat inside."""
    zetas = np.exp(2j * np.pi * np.arange(128) / 128)

    def ok(r):
        pts = z[None, :] + (r * zetas)[:, None] * u_hat[None, :]
        return float(np.max(ker.rho_batch(pts, dom.table))) < 0.0

    hi = geo.boundary_distance(dom, z)
    if cap is None:
        cap = hi * 1e6 + 1e3
    while ok(hi * 2.0) and hi * 2.0 < cap:
        hi *= 2.0
    lo = 0.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# multistart disc optimization
# ---------------------------------------------------------------------------

def _pack_x(mode, lead, coeffs, n, degree):
    x = np.zeros(1 + 2 * n * (degree - 1))
    x[0] = lead
    tail = coeffs[1:].reshape(-1)
    x[1::2] = tail.real
    x[2::2] = tail.imag
    return x


def _unpack_coeffs(mode, x, base, auxv, n, degree):
    coeffs = np.zeros((degree, n), dtype=complex)
    if degree > 1:
        tail = x[1:].reshape(degree - 1, n, 2)
        coeffs[1:] = tail[..., 0] + 1j * tail[..., 1]
    if mode == ker.MODE_KR:
        coeffs[0] = x[0] * auxv
    else:
        alpha = x[0]
        apow = alpha ** np.arange(1, degree)
        coeffs[0] = (auxv - base) / alpha - np.sum(coeffs[1:] * apow[:, None],
                                                   axis=0)
    return coeffs


def _kr_starts(dom, z, v, cfg):
    """Start parameter vectors for the KR objective (x[0] = derivative scale)."""
    n, d = dom.dim, cfg.degree
    starts = []
    vnorm = float(np.linalg.norm(v))

    # inclusion disc along v
    rdir = _direction_disc_radius(dom, z, v / vnorm)
    s0 = rdir * (1.0 - 4.0 * cfg.margin) / vnorm
    starts.append(_pack_x(ker.MODE_KR, s0, np.zeros((d, n), dtype=complex), n, d))

    tr = _transport_disc_map(dom, z, v, ker.MODE_KR)
    if tr is not None:
        c0, coeffs = _taylor(tr[0], d, n)
        lam = _shrink_to_certified(dom, z, coeffs, cfg.margin)
        if lam > 0:
            cl = coeffs * (lam ** np.arange(1, d + 1))[:, None]
            s = float(np.real(herm(cl[0], v)) / vnorm**2)
            if s > 0:
                x = _pack_x(ker.MODE_KR, s, cl, n, d)
                starts.insert(0, x)
    return starts


def _lempert_starts(dom, z, w, cfg):
    """Start vectors for the Lempert objective (x[0] = interpolation radius)."""
    n, d = dom.dim, cfg.degree
    starts = []

    tr = _transport_disc_map(dom, z, w, ker.MODE_LEMPERT)
    if tr is not None:
        fn, alpha = tr
        c0, coeffs = _taylor(fn, d, n)
        # pick the largest shrink whose c1-eliminated disc stays certified:
        # the truncation misses w slightly, and the elimination folds that
        # error back into c_1
        lam = 1.0
        for _ in range(120):
            a2 = alpha / lam
            if a2 < 1.0 - 1e-9:
                full = _eliminated_coeffs(_scaled(coeffs, lam), z, w, a2)
                if _sup_rho(dom, z, full, 256) <= -2.0 * cfg.margin:
                    starts.append(_pack_x(ker.MODE_LEMPERT, a2, full, n, d))
                    break
            lam *= 0.995

    sep = float(np.linalg.norm(w - z))
    if sep > 0:
        rdir = _direction_disc_radius(dom, z, (w - z) / sep)
        alpha0 = sep / (rdir * (1.0 - 4.0 * cfg.margin))
        if alpha0 < 1.0 - 1e-9:
            starts.append(_pack_x(ker.MODE_LEMPERT, alpha0,
                                  np.zeros((d, n), dtype=complex), n, d))
    return starts


def _run_multistart(mode, dom, base, auxv, starts, cfg):
    """Deterministic multistart simplex search; best certified candidate."""
    n, d = dom.dim, cfg.degree
    if not starts:
        return None
    zpow = ker.boundary_powers(cfg.boundary_samples, d)
    dim = 1 + 2 * n * (d - 1)

    seeds = []
    for i, x0 in enumerate(starts[:cfg.multistarts]):
        seeds.append((i, x0))
    rng_idx = len(seeds)
    base_start = starts[0]
    scale = max(abs(base_start[0]), 1e-3)
    while len(seeds) < cfg.multistarts:
        rng = np.random.default_rng([cfg.seed, rng_idx])
        perturb = base_start + rng.normal(0.0, 0.08 * scale, size=dim)
        if mode == ker.MODE_LEMPERT:
            perturb[0] = min(max(perturb[0], 1e-6), 1.0 - 1e-8)
        seeds.append((rng_idx, perturb))
        rng_idx += 1

    best = None
    for idx, x0 in seeds:
        steps = np.maximum(0.03 * np.abs(x0), 0.01 * scale)
        xb, fb, nev = ker.nm_minimize(mode, x0, steps, cfg.max_evals, cfg.ftol,
                                      base, auxv, zpow, dom.table,
                                      2.0 * cfg.margin, cfg.penalty)
        cert = _certify_or_shrink(mode, xb, dom, base, auxv, cfg)
        if cert is None:
            # the raw start may still certify even when the polish does not
            cert = _certify_or_shrink(mode, x0, dom, base, auxv, cfg)
        if cert is None:
            continue
        value, coeffs = cert
        if best is None or value < best[0] - 1e-15:
            best = (value, idx, coeffs)
    if best is None:
        return None
    return best[0], best[2]


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def kr_metric(dom: geo.Domain, z, v, cfg: EstimatorConfig = DEFAULT_CFG) -> Bracket:
    """Bracket for the Kobayashi-Royden metric kappa(z; v)."""
    z = geo.as_point(z, dom)
    v = geo.as_tangent(v, dom)
    if not geo.contains(dom, z):
        raise geo.MembershipError("base point outside the domain")
    if np.linalg.norm(v) == 0.0:
        return Bracket(0.0, 0.0, "oracle", "oracle")
    if orc.vanishing_metric(dom):
        return br.exact(0.0)

    if "oracle" in cfg.upper_methods:
        exact = orc.kappa_oracle(dom, z, v)
        if exact is not None:
            return br.exact(exact)

    lowers = orc.metric_lower_bounds(dom, z, v)
    lowers.append((caratheodory_metric_lower(dom, z, v), "half-space"))

    uppers = []
    if "inclusion" in cfg.upper_methods:
        uppers.append((orc.inclusion_metric_upper(dom, z, v), "inclusion"))
    if "disc" in cfg.upper_methods:
        res = _run_multistart(ker.MODE_KR, dom, z, v, _kr_starts(dom, z, v, cfg), cfg)
        if res is not None:
            uppers.append((res[0], "disc-optimization"))
    if not uppers:
        uppers.append((orc.inclusion_metric_upper(dom, z, v), "inclusion"))
    return br.from_bounds(lowers, uppers)


def kr_metric_estimated(dom: geo.Domain, z, v,
                        cfg: EstimatorConfig = DEFAULT_CFG) -> Bracket:
    """kr_metric with the disc optimizer forced as the upper bound source."""
    z = geo.as_point(z, dom)
    v = geo.as_tangent(v, dom)
    if np.linalg.norm(v) == 0.0:
        return Bracket(0.0, 0.0, "oracle", "oracle")
    lowers = orc.metric_lower_bounds(dom, z, v)
    lowers.append((caratheodory_metric_lower(dom, z, v), "half-space"))
    res = _run_multistart(ker.MODE_KR, dom, z, v, _kr_starts(dom, z, v, cfg), cfg)
    if res is None:
        raise ComputationError("no certified disc for the metric estimate")
    return br.from_bounds(lowers, [(res[0], "disc-optimization")])


def lempert(dom: geo.Domain, z, w, cfg: EstimatorConfig = DEFAULT_CFG) -> Bracket:
    """Bracket for the Lempert function l(z, w) = atanh l~(z, w)."""
    bracket, _disc, _alpha = lempert_detail(dom, z, w, cfg)
    return bracket


def lempert_detail(dom: geo.Domain, z, w, cfg: EstimatorConfig = DEFAULT_CFG):
    """Lempert bracket plus the winning disc (None when not from a disc)."""
    z = geo.as_point(z, dom)
    w = geo.as_point(w, dom)
    for q in (z, w):
        if not geo.contains(dom, q):
            raise geo.MembershipError("endpoint outside the domain")
    if np.allclose(z, w):
        return Bracket(0.0, 0.0, "oracle", "oracle"), None, 0.0
    if orc.vanishing_metric(dom):
        return br.exact(0.0), None, 0.0

    if "oracle" in cfg.upper_methods:
        # on model kinds the distance oracle is also the Lempert value
        exact = orc.distance_oracle(dom, z, w)
        if exact is not None:
            return br.exact(exact), None, math.tanh(exact)

    lowers = orc.distance_lower_bounds(dom, z, w)
    lowers.append((caratheodory_lower(dom, z, w), "half-space"))

    uppers = []
    disc = None
    alpha = None
    if "disc" in cfg.upper_methods:
        res = _run_multistart(ker.MODE_LEMPERT, dom, z, w,
                              _lempert_starts(dom, z, w, cfg), cfg)
        if res is not None:
            value, coeffs = res
            alpha = math.tanh(value)
            disc = AnalyticDisc(z, coeffs, cfg.margin)
            uppers.append((value, "disc-optimization"))
    if "inclusion" in cfg.upper_methods or not uppers:
        inc = orc.inclusion_distance_upper(dom, z, w)
        if inc is not None:
            uppers.append((inc, "inclusion"))
    if not uppers:
        raise ComputationError(
            f"no admissible disc through the pair in {dom}; "
            "the points may lie in different components")
    return br.from_bounds(lowers, uppers), disc, alpha


def caratheodory_lower(dom: geo.Domain, z, w) -> float:
    """Lower bound for the Kobayashi distance from holomorphic maps to the disc.

    Family: planar uniformizers, ball automorphism slices, coordinate and
    factor projections, supporting half-space maps on convex kinds.  Returns
    0 (vacuous) when the family is empty.
    """
    z = geo.as_point(z, dom)
    w = geo.as_point(w, dom)
    if np.allclose(z, w):
        return 0.0
    return _carat(dom, z, w)


def _carat(dom, z, w):
    kind = dom.kind
    if kind in ("unit-disc", "half-plane", "lens", "euclidean-ball", "polydisc"):
        return orc.distance_oracle(dom, z, w)
    if kind == "product":
        d1 = dom.parts[0].dim
        return max(_carat(dom.parts[0], z[:d1], w[:d1]),
                   _carat(dom.parts[1], z[d1:], w[d1:]))
    if kind == "punctured-plane":
        return 0.0
    best = 0.0
    if kind == "ellipsoid":
        axes = np.asarray(dom.params[0], dtype=float)
        for j in range(dom.dim):
            best = max(best, poincare(z[j] / axes[j], w[j] / axes[j]))
    if _is_convex(dom):
        for y in _support_points(dom, z, w):
            try:
                nu = -geo.inner_normal(dom, y)
            except (geo.NonSmoothBoundaryError, geo.MembershipError):
                continue
            sz = herm(z - y, nu)
            sw = herm(w - y, nu)
            if sz.real >= 0 or sw.real >= 0:
                continue
            fz = (1.0 + sz) / (1.0 - sz)
            fw = (1.0 + sw) / (1.0 - sw)
            if abs(fz) < 1 and abs(fw) < 1:
                best = max(best, poincare(fz, fw))
    return best


def caratheodory_metric_lower(dom: geo.Domain, z, v) -> float:
    """Metric-scale analogue of caratheodory_lower (half-space family)."""
    z = geo.as_point(z, dom)
    v = geo.as_tangent(v, dom)
    best = 0.0
    kind = dom.kind
    if kind == "ellipsoid":
        axes = np.asarray(dom.params[0], dtype=float)
        for j in range(dom.dim):
            best = max(best, poincare_metric(z[j] / axes[j], v[j] / axes[j]))
    if _is_convex(dom):
        for y in _support_points(dom, z, z + v * 1e-3):
            try:
                nu = -geo.inner_normal(dom, y)
            except (geo.NonSmoothBoundaryError, geo.MembershipError):
                continue
            sz = herm(z - y, nu)
            sv = herm(v, nu)
            if sz.real >= 0:
                continue
            best = max(best, abs(sv) / (2.0 * abs(sz.real)))
    return best


def _is_convex(dom: geo.Domain) -> bool:
    return not np.any(dom.table.ctype == geo.C_PUNCTURE)


def _support_points(dom, z, w):
    """Candidate supporting boundary points for the half-space family."""
    pts = []
    for x in (z, w, 0.5 * (z + w)):
        if geo.contains(dom, x):
            pts.append(orc.nearest_boundary_point(dom, x))
    d = w - z
    nd = np.linalg.norm(d)
    if nd > 0:
        for x0, u in ((w, d / nd), (z, -d / nd)):
            if not geo.contains(dom, x0):
                continue
            hit = _ray_hit(dom, x0, u)
            if hit is not None:
                pts.append(hit)
    return pts


def _ray_hit(dom, x0, u):
    t_hi = 1.0
    for _ in range(60):
        if geo.defining_function(dom, x0 + t_hi * u) >= 0:
            break
        t_hi *= 2.0
    else:
        return None
    t_lo = 0.0
    for _ in range(60):
        mid = 0.5 * (t_lo + t_hi)
        if geo.defining_function(dom, x0 + mid * u) < 0:
            t_lo = mid
        else:
            t_hi = mid
    return x0 + t_hi * u


def oracle_distance(dom: geo.Domain, z, w):
    """Exact Kobayashi distance on oracle kinds; None elsewhere."""
    return orc.distance_oracle(dom, z, w)


def lempert_tilde_to_set(dom: geo.Domain, z, nbhd: geo.Neighbourhood,
                         cfg: EstimatorConfig = DEFAULT_CFG) -> Bracket:
    """Bracket for inf over the escape set Omega \\ (Omega ∩ U) of l~(z, .).

    Targets are sampled on the escape-set face of U inside the domain (plus a
    far batch).  The upper bound is certified (inf over a subset); the lower
    bound subtracts the observed sampling variation and is tagged heuristic.
    """
    z = geo.as_point(z, dom)
    if not geo.contains(dom, z):
        raise geo.MembershipError("base point outside the domain")
    if not nbhd.contains(z):
        raise ValueError("base point must lie inside the neighbourhood")
    targets = _escape_targets(dom, nbhd, cfg.set_targets)
    if not targets:
        raise ValueError("escape set is empty: the neighbourhood covers the domain")

    vals = []
    for s in targets:
        lt = orc.lempert_tilde_oracle(dom, z, s)
        if lt is None:
            b, _, _ = lempert_detail(dom, z, s, cfg)
            vals.append((math.tanh(b.lower), math.tanh(b.upper)))
        else:
            vals.append((lt, lt))
    lo_samples = np.array([a for a, _ in vals])
    up_samples = np.array([b for _, b in vals])
    upper = float(np.min(up_samples))
    spread = float(np.max(np.abs(np.diff(np.sort(lo_samples))))) if len(vals) > 1 else 0.0
    lower = max(0.0, float(np.min(lo_samples)) - spread)
    tag = "oracle" if all(a == b for a, b in vals) else "disc-optimization"
    return Bracket(lower, min(upper, 1.0), "heuristic", tag)


def _escape_targets(dom: geo.Domain, nbhd: geo.Neighbourhood, count: int):
    """Sample points of Omega just outside U: the face of U plus a far batch."""
    p = nbhd.center
    n = dom.dim
    out = []
    dirs = _unit_directions(n, max(8, count // 2))
    if nbhd.shape == "ball":
        for pad in (1.0 + 1e-9, 1.02, 1.1):
            for u in dirs:
                cand = p + pad * nbhd.radius * u
                if geo.contains(dom, cand) and not nbhd.contains(cand):
                    out.append(cand)
    else:
        for pad in (1e-6, 0.05, 0.2):
            base = p + (nbhd.offset + pad) * nbhd.normal
            for u in dirs:
                tang = u - herm(u, nbhd.normal) * nbhd.normal
                cand = base + 0.5 * tang
                if geo.contains(dom, cand) and not nbhd.contains(cand):
                    out.append(cand)
    for anchor in _far_anchors(dom):
        if geo.contains(dom, anchor) and not nbhd.contains(anchor):
            out.append(anchor)
    return out[: 4 * count]


def _unit_directions(n: int, count: int):
    """Deterministic spread of unit vectors in C^n."""
    if n == 1:
        return [np.array([np.exp(2j * np.pi * k / count)]) for k in range(count)]
    rng = np.random.default_rng(1234)
    dirs = []
    for j in range(n):
        for ph in (1.0, 1j, -1.0, -1j):
            e = np.zeros(n, dtype=complex)
            e[j] = ph
            dirs.append(e)
    while len(dirs) < count:
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        dirs.append(v / np.linalg.norm(v))
    return dirs[:count]


def _far_anchors(dom: geo.Domain):
    """A handful of deep interior points used as far escape samples."""
    n = dom.dim
    anchors = [np.zeros(n, dtype=complex)]
    if dom.kind == "half-plane":
        anchors = [np.array([1.0 + 0j]), np.array([4.0 + 0j])]
    if dom.kind == "punctured-plane":
        anchors = [np.array([1.0 + 0j]), np.array([-2.0 + 0j])]
    if dom.kind == "lens":
        anchors = [np.array([0.7 + 0j]), np.array([0.6 + 0.1j])]
    if dom.kind == "intersection":
        anchors = _far_anchors(dom.parts[0])
    for j in range(n):
        for s in (0.5, -0.5):
            e = np.zeros(n, dtype=complex)
            e[j] = s
            anchors.append(e)
    return [a for a in anchors if geo.contains(dom, a)]
