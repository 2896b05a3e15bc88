"""Conformal building blocks: Moebius maps, Cayley transform, ball
automorphisms and the lune uniformization of a two-circle lens.

These supply the closed-form machinery behind the model-domain oracles:
Poincare distance/metric on the disc, automorphism transport on the ball,
and the Moebius-then-power map that opens a circular lens onto a half-plane.
"""

from __future__ import annotations

import cmath
import math

import numpy as np


def mobius(a: complex, z):
    """Disc involution m_a(z) = (a - z)/(1 - conj(a) z); swaps 0 and a."""
    return (a - z) / (1.0 - np.conj(a) * z)


def poincare(a: complex, b: complex) -> float:
    """Hyperbolic (Poincare) distance on the unit disc, curvature -4 scale."""
    return math.atanh(abs(mobius(a, b)))


def poincare_metric(z: complex, v: complex) -> float:
    """Infinitesimal Poincare metric |v| / (1 - |z|^2)."""
    return abs(v) / (1.0 - abs(z) ** 2)


def disc_geodesic(a: complex, b: complex, fractions) -> np.ndarray:
    """Points of the hyperbolic geodesic from a to b.

    ``fractions`` in [0, 1] are proportions of hyperbolic arclength; the
    construction transports the radial segment through the involution m_a.
    """
    fr = np.asarray(fractions, dtype=float)
    u = mobius(a, b)
    r = abs(u)
    if r < 1e-300:
        return np.full(fr.shape, complex(a), dtype=complex)
    length = math.atanh(r)
    radii = np.tanh(fr * length)
    return mobius(a, radii * (u / r))


# ---------------------------------------------------------------------------
# Half-plane (Cayley)
# ---------------------------------------------------------------------------

def cayley(z):
    """Right half-plane {Re z > 0} -> unit disc."""
    return (z - 1.0) / (z + 1.0)


def cayley_deriv(z):
    return 2.0 / (z + 1.0) ** 2


def cayley_inv(w):
    return (1.0 + w) / (1.0 - w)


# ---------------------------------------------------------------------------
# Ball automorphisms
# ---------------------------------------------------------------------------

def herm(z, w):
    """Hermitian inner product <z, w> = sum z_j conj(w_j)."""
    return complex(np.sum(np.asarray(z) * np.conj(np.asarray(w))))


def ball_automorphism(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """The involutive automorphism phi_a of the unit ball (phi_a(0) = a)."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    na2 = float(np.sum(np.abs(a) ** 2))
    if na2 < 1e-30:
        return -z
    s = math.sqrt(max(0.0, 1.0 - na2))
    za = herm(z, a)
    pz = (za / na2) * a
    qz = z - pz
    return (a - pz - s * qz) / (1.0 - za)


def ball_distance(z, w) -> float:
    """Kobayashi distance on the unit ball: atanh ||phi_z(w)||."""
    u = ball_automorphism(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex))
    return math.atanh(min(float(np.linalg.norm(u)), 1.0 - 1e-16))


def ball_metric(z, v) -> float:
    """Kobayashi-Royden metric of the unit ball at z in direction v."""
    z = np.asarray(z, dtype=complex)
    v = np.asarray(v, dtype=complex)
    d2 = 1.0 - float(np.sum(np.abs(z) ** 2))
    num = float(np.sum(np.abs(v) ** 2)) * d2 + abs(herm(v, z)) ** 2
    return math.sqrt(num) / d2


def ball_geodesic(z, w, fractions) -> np.ndarray:
    """Hyperbolic geodesic from z to w in the unit ball (rows = points)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    fr = np.asarray(fractions, dtype=float)
    u = ball_automorphism(z, w)
    r = float(np.linalg.norm(u))
    if r < 1e-300:
        return np.tile(z, (fr.size, 1))
    length = math.atanh(min(r, 1.0 - 1e-16))
    radii = np.tanh(fr * length)
    uhat = u / r
    return np.array([ball_automorphism(z, t * uhat) for t in radii])


# ---------------------------------------------------------------------------
# Lune uniformization of a lens (intersection of two discs)
# ---------------------------------------------------------------------------

class LuneMap:
    """Biholomorphism of a two-circle lens onto the unit disc.

    The Moebius map sending the circle intersection points to 0 and infinity
    straightens both boundary arcs into rays; a power map opens the resulting
    sector onto the upper half-plane, followed by the standard map to the
    disc.  Works for any transversally intersecting circle pair.
    """

    def __init__(self, c1: complex, r1: float, c2: complex, r2: float):
        self.c1, self.r1 = complex(c1), float(r1)
        self.c2, self.r2 = complex(c2), float(r2)
        a, abar = self._corners()
        self.corner1, self.corner2 = a, abar

        # interior reference point: midpoint of the two arc midpoints
        arc1 = self._arc_point(self.c1, self.r1, self.c2, self.r2)
        arc2 = self._arc_point(self.c2, self.r2, self.c1, self.r1)
        z_int = 0.5 * (arc1 + arc2)
        if not self._inside(z_int):
            raise ValueError("degenerate lens: no interior reference point")

        t1 = self._t(arc1)
        t2 = self._t(arc2)
        tin = self._t(z_int)
        th1, th2, thi = cmath.phase(t1), cmath.phase(t2), cmath.phase(tin)
        d2 = self._wrap(th2 - th1)
        din = self._wrap(thi - th1)
        if d2 > 0 and 0 < din < d2:
            self.base, self.opening = th1, d2
        elif d2 < 0 and d2 < din < 0:
            self.base, self.opening = th2, -d2
        else:
            raise ValueError("could not orient the lens sector")
        self.power = math.pi / self.opening

    # -- elementary pieces ------------------------------------------------

    def _corners(self):
        c1, r1, c2, r2 = self.c1, self.r1, self.c2, self.r2
        d = c2 - c1
        dist = abs(d)
        if dist < 1e-14 or dist >= r1 + r2 or dist <= abs(r1 - r2):
            raise ValueError("circles must intersect transversally")
        x = (dist**2 + r1**2 - r2**2) / (2.0 * dist)
        h = math.sqrt(max(r1**2 - x**2, 0.0))
        e = d / dist
        mid = c1 + x * e
        off = 1j * e * h
        return mid + off, mid - off

    def _arc_point(self, c, r, oc, orr):
        # point of circle (c, r) inside the other disc, away from the corners
        d = oc - c
        e = d / abs(d)
        cand = c + r * e
        if abs(cand - oc) < orr:
            return cand
        cand = c - r * e
        if abs(cand - oc) < orr:
            return cand
        raise ValueError("circle arcs do not overlap")

    def _inside(self, z):
        return abs(z - self.c1) < self.r1 and abs(z - self.c2) < self.r2

    def _t(self, z):
        return (z - self.corner1) / (z - self.corner2)

    @staticmethod
    def _wrap(theta):
        return (theta + math.pi) % (2.0 * math.pi) - math.pi

    # -- the map, its derivative and inverse -------------------------------

    def map(self, z):
        u = self._t(z) * cmath.exp(-1j * self.base)
        g = u ** self.power
        return (g - 1j) / (g + 1j)

    def deriv(self, z):
        a, abar = self.corner1, self.corner2
        t = self._t(z)
        dt = (a - abar) / (z - abar) ** 2
        u = t * cmath.exp(-1j * self.base)
        du = dt * cmath.exp(-1j * self.base)
        g = u ** self.power
        dg = self.power * u ** (self.power - 1.0) * du
        return dg * 2j / (g + 1j) ** 2

    def inverse(self, w):
        g = 1j * (1.0 + w) / (1.0 - w)
        u = g ** (1.0 / self.power)
        s = u * cmath.exp(1j * self.base)
        return (self.corner1 - s * self.corner2) / (1.0 - s)

    # -- pulled-back hyperbolic quantities ---------------------------------

    def distance(self, z, w) -> float:
        return poincare(self.map(z), self.map(w))

    def metric(self, z, v) -> float:
        fz = self.map(z)
        return abs(self.deriv(z)) * abs(v) / (1.0 - abs(fz) ** 2)

    def geodesic(self, z, w, fractions) -> np.ndarray:
        pts = disc_geodesic(self.map(z), self.map(w), fractions)
        return np.array([self.inverse(p) for p in pts])
