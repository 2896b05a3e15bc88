"""Domain zoo and Euclidean boundary geometry.

Every domain is a finite conjunction of primitive constraints (balls over a
coordinate slice, real half-spaces, ellipsoids, a puncture).  The constraint
table is a flat array encoding shared with the numeric kernels, so membership
and defining-function values are computed identically in the optimizer and in
the high-level API.

For domains whose constraints are all convex the Euclidean boundary distance
of the intersection equals the minimum of the per-constraint distances; that
is exact for every shipped kind except the ellipsoid row, where the distance
is found by a damped projected iteration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Domain",
    "Neighbourhood",
    "BoundarySequence",
    "ConstraintTable",
    "DimensionError",
    "MembershipError",
    "NonSmoothBoundaryError",
    "unit_disc",
    "ball",
    "polydisc",
    "half_plane",
    "ellipsoid",
    "punctured_plane",
    "lens",
    "product",
    "intersect",
    "ball_neighbourhood",
    "halfspace_neighbourhood",
    "domain_from_json",
    "domain_to_json",
    "contains",
    "boundary_distance",
    "inner_normal",
    "make_sequence",
]

# Constraint row codes (shared with klab.kernels).
C_BALL = 0        # ||z[a:b] - c|| < r
C_HALFSPACE = 1   # Re <z[a:b] - c, nu> < 0
C_ELLIPSOID = 2   # sqrt(sum |z_j/axis_j|^2) < 1 on slice
C_PUNCTURE = 3    # z[a] != 0


class DimensionError(ValueError):
    """Point dimension does not match the domain."""


class MembershipError(ValueError):
    """A point required to lie in the domain (or on its boundary) does not."""


class NonSmoothBoundaryError(ValueError):
    """Boundary point has no well-defined normal (corner or puncture)."""


@dataclass(frozen=True)
class ConstraintTable:
    """Flat conjunction-of-constraints encoding of a domain."""

    ctype: np.ndarray   # int64 (m,)
    span: np.ndarray    # int64 (m, 2), coordinate slice [a, b)
    center: np.ndarray  # complex128 (m, n): center / half-space anchor
    aux: np.ndarray     # complex128 (m, n): half-space normal / ellipsoid axes
    radius: np.ndarray  # float64 (m,)

    @property
    def nrows(self) -> int:
        return int(self.ctype.shape[0])


def _build_table(rows, dim):
    m = len(rows)
    ctype = np.zeros(m, dtype=np.int64)
    span = np.zeros((m, 2), dtype=np.int64)
    center = np.zeros((m, dim), dtype=np.complex128)
    aux = np.zeros((m, dim), dtype=np.complex128)
    radius = np.zeros(m, dtype=np.float64)
    for i, (ct, a, b, c, x, r) in enumerate(rows):
        ctype[i] = ct
        span[i] = (a, b)
        if c is not None:
            center[i, a:b] = c
        if x is not None:
            aux[i, a:b] = x
        radius[i] = r
    for arr in (ctype, span, center, aux, radius):
        arr.setflags(write=False)
    return ConstraintTable(ctype, span, center, aux, radius)


@dataclass(frozen=True)
class Domain:
    """A domain in C^n from the closed-world zoo.

    ``kind`` selects the defining inequalities; ``params`` carries the
    kind-specific data; ``parts`` holds factor/parent domains for product and
    intersection kinds.  ``table`` is the compiled constraint encoding.
    """

    kind: str
    dim: int
    bounded: bool
    params: tuple = ()
    parts: tuple = ()
    table: ConstraintTable = field(compare=False, repr=False, default=None)

    def __str__(self):
        if self.kind == "product":
            return f"product({self.parts[0]}, {self.parts[1]})"
        if self.kind == "intersection":
            return f"intersection({self.parts[0]}, {self.params[0]})"
        if self.params:
            return f"{self.kind}{self.params}"
        return self.kind


@dataclass(frozen=True)
class Neighbourhood:
    """Neighbourhood of a boundary point: a Euclidean ball or a half-space."""

    center: np.ndarray          # boundary point p
    shape: str                  # 'ball' | 'halfspace'
    radius: float = 0.0         # ball radius
    normal: np.ndarray = None   # outward half-space normal (unit)
    offset: float = 0.0         # half-space: Re<z - p, normal> < offset

    def __str__(self):
        if self.shape == "ball":
            return f"ball(p={_fmt_pt(self.center)}, r={self.radius:g})"
        return f"halfspace(p={_fmt_pt(self.center)}, off={self.offset:g})"

    def contains(self, z) -> bool:
        z = np.asarray(z, dtype=np.complex128).reshape(-1)
        if self.shape == "ball":
            return float(np.linalg.norm(z - self.center)) < self.radius
        s = np.sum((z - self.center) * np.conj(self.normal))
        return float(s.real) < self.offset


def _fmt_pt(p):
    p = np.asarray(p).reshape(-1)
    if p.size == 1:
        return f"{p[0]:.4g}"
    return "(" + ", ".join(f"{c:.4g}" for c in p) + ")"


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def unit_disc() -> Domain:
    """The unit disc {|z| < 1} in C."""
    t = _build_table([(C_BALL, 0, 1, [0.0], None, 1.0)], 1)
    return Domain("unit-disc", 1, True, table=t)


def ball(n: int) -> Domain:
    """The Euclidean unit ball in C^n."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    t = _build_table([(C_BALL, 0, n, np.zeros(n), None, 1.0)], n)
    return Domain("euclidean-ball", n, True, (n,), table=t)


def polydisc(n: int) -> Domain:
    """The unit polydisc {max_j |z_j| < 1} in C^n."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    rows = [(C_BALL, j, j + 1, [0.0], None, 1.0) for j in range(n)]
    return Domain("polydisc", n, True, (n,), table=_build_table(rows, n))


def half_plane() -> Domain:
    """The right half-plane {Re z > 0} in C."""
    t = _build_table([(C_HALFSPACE, 0, 1, [0.0], [-1.0 + 0.0j], 0.0)], 1)
    return Domain("half-plane", 1, False, table=t)


def ellipsoid(axes) -> Domain:
    """The ellipsoid {sum |z_j / a_j|^2 < 1} with semi-axes a_j > 0."""
    axes = tuple(float(a) for a in axes)
    if any(a <= 0 for a in axes):
        raise ValueError("semi-axes must be positive")
    n = len(axes)
    t = _build_table([(C_ELLIPSOID, 0, n, None, np.array(axes, dtype=complex), 0.0)], n)
    return Domain("ellipsoid", n, True, (axes,), table=t)


def punctured_plane() -> Domain:
    """The punctured plane C \\ {0}."""
    t = _build_table([(C_PUNCTURE, 0, 1, None, None, 0.0)], 1)
    return Domain("punctured-plane", 1, False, table=t)


LENS_OUTER_CENTER = 0.0 + 0.0j
LENS_OUTER_RADIUS = 1.0
LENS_INNER_CENTER = 1.0 + 0.0j
LENS_INNER_RADIUS = 0.5


def lens() -> Domain:
    """The lens {|z| < 1} ∩ {|z - 1| < 1/2} in C (two-disc intersection)."""
    rows = [
        (C_BALL, 0, 1, [LENS_OUTER_CENTER], None, LENS_OUTER_RADIUS),
        (C_BALL, 0, 1, [LENS_INNER_CENTER], None, LENS_INNER_RADIUS),
    ]
    return Domain("lens", 1, True, table=_build_table(rows, 1))


def product(d1: Domain, d2: Domain) -> Domain:
    """The product domain d1 x d2 with coordinates concatenated."""
    n = d1.dim + d2.dim
    rows = []
    for part, off in ((d1, 0), (d2, d1.dim)):
        t = part.table
        for i in range(t.nrows):
            a, b = t.span[i]
            rows.append(
                (int(t.ctype[i]), int(a) + off, int(b) + off,
                 t.center[i, a:b], t.aux[i, a:b], float(t.radius[i]))
            )
    return Domain("product", n, d1.bounded and d2.bounded,
                  parts=(d1, d2), table=_build_table(rows, n))


def ball_neighbourhood(center, radius: float) -> Neighbourhood:
    if radius <= 0:
        raise ValueError("neighbourhood radius must be positive")
    c = np.asarray(center, dtype=np.complex128).reshape(-1)
    c.setflags(write=False)
    return Neighbourhood(center=c, shape="ball", radius=float(radius))


def halfspace_neighbourhood(center, normal, offset: float) -> Neighbourhood:
    c = np.asarray(center, dtype=np.complex128).reshape(-1)
    nu = np.asarray(normal, dtype=np.complex128).reshape(-1)
    nrm = np.linalg.norm(nu)
    if nrm == 0:
        raise ValueError("half-space normal must be nonzero")
    nu = nu / nrm
    c.setflags(write=False)
    nu.setflags(write=False)
    return Neighbourhood(center=c, shape="halfspace", normal=nu, offset=float(offset))


def intersect(dom: Domain, nbhd: Neighbourhood, check_center: bool = True) -> Domain:
    """Intersection of a domain with a neighbourhood of one of its boundary points."""
    p = np.asarray(nbhd.center, dtype=np.complex128).reshape(-1)
    if p.size != dom.dim:
        raise DimensionError(f"neighbourhood center has dim {p.size}, domain {dom.dim}")
    if check_center and abs(defining_function(dom, p)) > 1e-10:
        raise ValueError("neighbourhood center must lie on the domain boundary")
    t = dom.table
    rows = [
        (int(t.ctype[i]), int(t.span[i, 0]), int(t.span[i, 1]),
         t.center[i, t.span[i, 0]:t.span[i, 1]],
         t.aux[i, t.span[i, 0]:t.span[i, 1]], float(t.radius[i]))
        for i in range(t.nrows)
    ]
    if nbhd.shape == "ball":
        rows.append((C_BALL, 0, dom.dim, p, None, nbhd.radius))
        bounded = True
    else:
        anchor = p + nbhd.offset * nbhd.normal
        rows.append((C_HALFSPACE, 0, dom.dim, anchor, nbhd.normal, 0.0))
        bounded = dom.bounded
    return Domain("intersection", dom.dim, bounded,
                  params=(nbhd,), parts=(dom,), table=_build_table(rows, dom.dim))


# ---------------------------------------------------------------------------
# Point handling
# ---------------------------------------------------------------------------

def as_point(z, dom: Domain) -> np.ndarray:
    """Coerce scalars / sequences to a complex vector of the domain dimension."""
    arr = np.atleast_1d(np.asarray(z, dtype=np.complex128)).reshape(-1)
    if arr.size != dom.dim:
        raise DimensionError(f"point has dim {arr.size}, domain {dom.dim}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError("point coordinates must be finite")
    return arr


def as_tangent(v, dom: Domain) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=np.complex128)).reshape(-1)
    if arr.size != dom.dim:
        raise DimensionError(f"tangent has dim {arr.size}, domain {dom.dim}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError("tangent coordinates must be finite")
    return arr


# ---------------------------------------------------------------------------
# Defining function, membership, boundary distance
# ---------------------------------------------------------------------------

def _row_rho(t: ConstraintTable, i: int, z: np.ndarray) -> float:
    a, b = t.span[i]
    ct = t.ctype[i]
    if ct == C_BALL:
        return float(np.linalg.norm(z[a:b] - t.center[i, a:b])) - float(t.radius[i])
    if ct == C_HALFSPACE:
        s = np.sum((z[a:b] - t.center[i, a:b]) * np.conj(t.aux[i, a:b]))
        return float(s.real)
    if ct == C_ELLIPSOID:
        axes = t.aux[i, a:b].real
        return float(np.sqrt(np.sum(np.abs(z[a:b] / axes) ** 2))) - 1.0
    # puncture
    return -float(np.abs(z[a]))


def defining_function(dom: Domain, z) -> float:
    """Signed defining value rho(z): negative inside, zero on the boundary."""
    z = as_point(z, dom)
    t = dom.table
    return max(_row_rho(t, i, z) for i in range(t.nrows))


def contains(dom: Domain, z) -> bool:
    """Membership test: True iff z lies in the open domain."""
    return defining_function(dom, z) < 0.0


def _row_distance(t: ConstraintTable, i: int, z: np.ndarray) -> float:
    a, b = t.span[i]
    ct = t.ctype[i]
    if ct == C_BALL:
        return float(t.radius[i]) - float(np.linalg.norm(z[a:b] - t.center[i, a:b]))
    if ct == C_HALFSPACE:
        return -_row_rho(t, i, z)
    if ct == C_ELLIPSOID:
        return _ellipsoid_distance(t.aux[i, a:b].real, z[a:b])
    return float(np.abs(z[a]))


def _ellipsoid_distance(axes: np.ndarray, z: np.ndarray) -> float:
    """Distance from an interior point to the ellipsoid boundary.

    Damped projected-gradient iteration on the boundary parametrization
    y(u) = u / N(u) with N the ellipsoid gauge; 200-step cap, 1e-10 step
    tolerance.  Accurate to ~1e-8 for the shipped axis ratios.
    """
    x = np.concatenate([z.real, z.imag])
    ax2 = np.concatenate([axes, axes])

    def gauge(u):
        return np.sqrt(np.sum((u / ax2) ** 2))

    def proj(u):
        g = gauge(u)
        if g == 0.0:
            e = np.zeros_like(u)
            e[0] = ax2[0]
            return e
        return u / g

    def dist(u):
        return np.linalg.norm(x - proj(u))

    u = x.copy()
    if gauge(u) < 1e-14:
        return float(np.min(axes))
    best = dist(u)
    step = 0.5
    h = 1e-6
    for _ in range(200):
        grad = np.zeros_like(u)
        for k in range(u.size):
            up = u.copy()
            up[k] += h
            um = u.copy()
            um[k] -= h
            grad[k] = (dist(up) - dist(um)) / (2 * h)
        gn = np.linalg.norm(grad)
        if gn < 1e-12:
            break
        moved = False
        while step > 1e-10:
            cand = u - step * grad / gn
            d = dist(cand)
            if d < best - 1e-15:
                u, best = cand, d
                moved = True
                break
            step *= 0.5
        if not moved or step < 1e-10:
            break
    return float(best)


def boundary_distance(dom: Domain, z) -> float:
    """Euclidean distance delta(z) from an interior point to the boundary."""
    z = as_point(z, dom)
    if not contains(dom, z):
        raise MembershipError(f"point {_fmt_pt(z)} is not in {dom}")
    t = dom.table
    return min(_row_distance(t, i, z) for i in range(t.nrows))


# ---------------------------------------------------------------------------
# Normals and boundary-approach sequences
# ---------------------------------------------------------------------------

_BOUNDARY_TOL = 1e-10


def _active_rows(dom: Domain, p: np.ndarray):
    t = dom.table
    rows = []
    for i in range(t.nrows):
        if abs(_row_rho(t, i, p)) <= 1e-9:
            rows.append(i)
    return rows


def _row_inner_normal(t: ConstraintTable, i: int, p: np.ndarray, dim: int) -> np.ndarray:
    a, b = t.span[i]
    ct = t.ctype[i]
    nu = np.zeros(dim, dtype=np.complex128)
    if ct == C_BALL:
        d = p[a:b] - t.center[i, a:b]
        nrm = np.linalg.norm(d)
        if nrm == 0:
            raise NonSmoothBoundaryError("degenerate ball constraint")
        nu[a:b] = -d / nrm
        return nu
    if ct == C_HALFSPACE:
        nu[a:b] = -t.aux[i, a:b]
        return nu
    if ct == C_ELLIPSOID:
        axes = t.aux[i, a:b].real
        g = p[a:b] / axes**2
        nu[a:b] = -g / np.linalg.norm(g)
        return nu
    raise NonSmoothBoundaryError("puncture has no normal direction")


def inner_normal(dom: Domain, p) -> np.ndarray:
    """Inward unit normal at a smooth boundary point.

    Raises NonSmoothBoundaryError at corners (several active constraints with
    disagreeing normals) and at the puncture.
    """
    p = as_point(p, dom)
    if abs(defining_function(dom, p)) > _BOUNDARY_TOL:
        raise MembershipError(f"point {_fmt_pt(p)} is not on the boundary of {dom}")
    active = _active_rows(dom, p)
    if not active:
        raise MembershipError("no active constraint at the given point")
    t = dom.table
    normals = [_row_inner_normal(t, i, p, dom.dim) for i in active]
    for nu in normals[1:]:
        if np.linalg.norm(nu - normals[0]) > 1e-9:
            raise NonSmoothBoundaryError(
                f"{_fmt_pt(p)} lies on several boundary faces of {dom}"
            )
    return normals[0]


@dataclass(frozen=True)
class BoundarySequence:
    """A sequence of interior points approaching a boundary anchor.

    Points are z_n = p + t_n * direction (+ split_z * t_n * tangent) with the
    optional tangential split producing distinct pairs (z_n, w_n).
    """

    domain: Domain
    anchor: np.ndarray
    direction: np.ndarray
    offsets: tuple
    tangent: np.ndarray = None
    split: tuple = None   # (s_z, s_w) complex multipliers of t_n along tangent

    def __len__(self):
        return len(self.offsets)

    def point(self, n: int) -> np.ndarray:
        t = self.offsets[n]
        z = self.anchor + t * self.direction
        if self.split is not None:
            z = z + self.split[0] * t * self.tangent
        return z

    def pair(self, n: int):
        if self.split is None:
            z = self.point(n)
            return z, z
        t = self.offsets[n]
        base = self.anchor + t * self.direction
        return (base + self.split[0] * t * self.tangent,
                base + self.split[1] * t * self.tangent)


def make_sequence(dom: Domain, p, n_steps: int = 8, split=None,
                  direction=None, t0: float = 0.5) -> BoundarySequence:
    """Dyadic approach sequence t_n = t0 * 2^(1-n), n = 1..n_steps, toward p.

    ``direction`` defaults to the inner normal (the anchor must then be a
    smooth boundary point).  ``split = (s_z, s_w)`` adds tangential offsets
    s * t_n along i*direction, giving distinct pairs.
    """
    if n_steps < 1 or n_steps > 16:
        raise ValueError("n_steps must be in 1..16")
    p = as_point(p, dom)
    if direction is None:
        nu = inner_normal(dom, p)
    else:
        nu = as_tangent(direction, dom)
        nrm = np.linalg.norm(nu)
        if nrm == 0:
            raise ValueError("direction must be nonzero")
        nu = nu / nrm
    tangent = 1j * nu
    offsets = tuple(t0 * 2.0 ** (1 - n) for n in range(1, n_steps + 1))
    if split is not None:
        split = (complex(split[0]), complex(split[1]))
        if split[0] == split[1]:
            raise ValueError("split offsets must differ (z_n != w_n)")
    seq = BoundarySequence(dom, p, nu, offsets, tangent, split)
    for n in range(n_steps):
        z, w = seq.pair(n)
        for q in (z, w):
            if not contains(dom, q):
                raise MembershipError(
                    f"sequence point {_fmt_pt(q)} escapes {dom}; "
                    "reduce t0 or the split magnitude"
                )
    return seq


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def _complex_to_json(z):
    z = np.asarray(z, dtype=np.complex128).reshape(-1)
    return [[float(c.real), float(c.imag)] for c in z]


def _complex_from_json(obj):
    return np.array([complex(re, im) for re, im in obj], dtype=np.complex128)


def neighbourhood_to_json(nb: Neighbourhood) -> dict:
    out = {"center": _complex_to_json(nb.center), "shape": nb.shape}
    if nb.shape == "ball":
        out["radius"] = nb.radius
    else:
        out["normal"] = _complex_to_json(nb.normal)
        out["offset"] = nb.offset
    return out


def neighbourhood_from_json(obj: dict) -> Neighbourhood:
    center = _complex_from_json(obj["center"])
    if obj["shape"] == "ball":
        return ball_neighbourhood(center, obj["radius"])
    return halfspace_neighbourhood(center, _complex_from_json(obj["normal"]),
                                   obj.get("offset", 0.0))


def domain_to_json(dom: Domain) -> dict:
    """Serializable {kind, params} descriptor of a domain."""
    if dom.kind == "unit-disc":
        return {"kind": "unit-disc"}
    if dom.kind == "euclidean-ball":
        return {"kind": "euclidean-ball", "n": dom.dim}
    if dom.kind == "polydisc":
        return {"kind": "polydisc", "n": dom.dim}
    if dom.kind == "half-plane":
        return {"kind": "half-plane"}
    if dom.kind == "ellipsoid":
        return {"kind": "ellipsoid", "axes": list(dom.params[0])}
    if dom.kind == "punctured-plane":
        return {"kind": "punctured-plane"}
    if dom.kind == "lens":
        return {"kind": "lens"}
    if dom.kind == "product":
        return {"kind": "product",
                "factors": [domain_to_json(p) for p in dom.parts]}
    if dom.kind == "intersection":
        return {"kind": "intersection",
                "domain": domain_to_json(dom.parts[0]),
                "neighbourhood": neighbourhood_to_json(dom.params[0])}
    raise ValueError(f"unknown kind {dom.kind!r}")


def domain_from_json(obj) -> Domain:
    """Rebuild a domain from its {kind, params} descriptor (dict or JSON text)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj["kind"]
    if kind == "unit-disc":
        return unit_disc()
    if kind == "euclidean-ball":
        return ball(int(obj["n"]))
    if kind == "polydisc":
        return polydisc(int(obj["n"]))
    if kind == "half-plane":
        return half_plane()
    if kind == "ellipsoid":
        return ellipsoid(obj["axes"])
    if kind == "punctured-plane":
        return punctured_plane()
    if kind == "lens":
        return lens()
    if kind == "product":
        f1, f2 = obj["factors"]
        return product(domain_from_json(f1), domain_from_json(f2))
    if kind == "intersection":
        return intersect(domain_from_json(obj["domain"]),
                         neighbourhood_from_json(obj["neighbourhood"]))
    raise ValueError(f"unknown kind {kind!r}")
