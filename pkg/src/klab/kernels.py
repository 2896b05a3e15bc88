"""Hot numeric kernels: disc-containment penalty objectives and the
derivative-free simplex search that powers the analytic-disc estimators.

Two interchangeable backends are provided: numba ``@njit`` kernels (default
when numba imports) and pure-numpy twins.  Selection is per-process via the
``KLAB_BACKEND`` environment variable ('numba' or 'numpy'); the numpy path is
also the automatic fallback when numba is unavailable.  Both backends are
deterministic; see ``benchmarks/bench_kernels.py`` for a speed comparison.

Objective modes
---------------
KR (mode 0): parameters ``x = [s, Re c_2, Im c_2, ...]`` describe the disc
``phi(zeta) = z + s*v*zeta + sum_{j>=2} c_j zeta^j``; minimizing ``-|s|``
under the containment penalty maximizes the admissible derivative scale, so
the metric candidate is ``1/|s|``.

Lempert (mode 1): parameters ``x = [alpha, Re c_2, Im c_2, ...]`` with
``c_1`` eliminated so that ``phi(alpha) = w`` exactly; the objective is
``alpha`` plus the containment penalty.
"""

from __future__ import annotations

import os

import numpy as np

# constraint codes matching klab.geometry
C_BALL = 0
C_HALFSPACE = 1
C_ELLIPSOID = 2
C_PUNCTURE = 3

MODE_KR = 0
MODE_LEMPERT = 1

_ALPHA_MIN = 1e-8
_ALPHA_MAX = 1.0 - 1e-9
_BIG = 1e12

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via KLAB_BACKEND=numpy
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


def active_backend() -> str:
    """Backend selected by KLAB_BACKEND and numba availability."""
    choice = os.environ.get("KLAB_BACKEND", "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("KLAB_BACKEND=numba but numba is not importable")
        return "numba"
    return "numba" if NUMBA_AVAILABLE else "numpy"


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rho_point(z, ctype, span, center, aux, radius):
    rho = -1e300
    for i in range(ctype.shape[0]):
        a = span[i, 0]
        b = span[i, 1]
        ct = ctype[i]
        if ct == C_BALL:
            acc = 0.0
            for l in range(a, b):
                d = z[l] - center[i, l]
                acc += d.real * d.real + d.imag * d.imag
            val = np.sqrt(acc) - radius[i]
        elif ct == C_HALFSPACE:
            sr = 0.0
            for l in range(a, b):
                d = z[l] - center[i, l]
                nu = aux[i, l]
                sr += d.real * nu.real + d.imag * nu.imag
            val = sr
        elif ct == C_ELLIPSOID:
            acc = 0.0
            for l in range(a, b):
                ax = aux[i, l].real
                acc += (z[l].real / ax) ** 2 + (z[l].imag / ax) ** 2
            val = np.sqrt(acc) - 1.0
        else:
            val = -np.abs(z[a])
        if val > rho:
            rho = val
    return rho


@njit(cache=True)
def _objective(mode, x, base, auxv, zpow, ctype, span, center, aux, radius,
               margin, penalty):
    m_samples = zpow.shape[0]
    degree = zpow.shape[1]
    n = base.shape[0]

    coeffs = np.zeros((degree, n), dtype=np.complex128)
    if mode == MODE_KR:
        s = x[0]
        for l in range(n):
            coeffs[0, l] = s * auxv[l]
        idx = 1
        for j in range(1, degree):
            for l in range(n):
                coeffs[j, l] = complex(x[idx], x[idx + 1])
                idx += 2
        value = -abs(s)
    else:
        alpha = x[0]
        if alpha < _ALPHA_MIN or alpha > _ALPHA_MAX:
            return _BIG * (1.0 + abs(alpha))
        idx = 1
        for j in range(1, degree):
            for l in range(n):
                coeffs[j, l] = complex(x[idx], x[idx + 1])
                idx += 2
        # eliminate c_1 so that phi(alpha) = target (stored in auxv)
        for l in range(n):
            coeffs[0, l] = (auxv[l] - base[l]) / alpha
        ap = alpha
        for j in range(1, degree):
            for l in range(n):
                coeffs[0, l] -= coeffs[j, l] * ap
            ap *= alpha
        value = alpha

    pen = 0.0
    phi = np.empty(n, dtype=np.complex128)
    for k in range(m_samples):
        for l in range(n):
            phi[l] = base[l]
        for j in range(degree):
            zp = zpow[k, j]
            for l in range(n):
                phi[l] += coeffs[j, l] * zp
        rho = _rho_point(phi, ctype, span, center, aux, radius)
        viol = rho + margin
        if viol > 0.0:
            pen += viol
    return value + penalty * pen


@njit(cache=True)
def _nelder_mead(mode, x0, steps, max_evals, ftol, base, auxv, zpow,
                 ctype, span, center, aux, radius, margin, penalty):
    p = x0.shape[0]
    simplex = np.empty((p + 1, p), dtype=np.float64)
    fvals = np.empty(p + 1, dtype=np.float64)
    order = np.empty(p + 1, dtype=np.int64)

    best_x = x0.copy()
    best_f = _objective(mode, x0, base, auxv, zpow, ctype, span, center, aux,
                        radius, margin, penalty)
    nev = 1
    shrink_level = 1.0
    stalls = 0

    while nev < max_evals and stalls < 2:
        # (re)build simplex around the incumbent
        for j in range(p):
            simplex[0, j] = best_x[j]
        fvals[0] = best_f
        for i in range(p):
            for j in range(p):
                simplex[i + 1, j] = best_x[j]
            simplex[i + 1, i] += steps[i] * shrink_level
            fvals[i + 1] = _objective(mode, simplex[i + 1], base, auxv, zpow,
                                      ctype, span, center, aux, radius,
                                      margin, penalty)
            nev += 1
            if nev >= max_evals:
                break

        improved_round = False
        while nev < max_evals:
            # stable insertion sort of indices by objective value
            for i in range(p + 1):
                order[i] = i
            for i in range(1, p + 1):
                key = order[i]
                fk = fvals[key]
                j = i - 1
                while j >= 0 and fvals[order[j]] > fk:
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = key

            ib = order[0]
            iw = order[p]
            isw = order[p - 1]
            if fvals[iw] - fvals[ib] < ftol:
                break

            centroid = np.zeros(p, dtype=np.float64)
            for i in range(p + 1):
                if order[i] != iw:
                    for j in range(p):
                        centroid[j] += simplex[order[i], j]
            for j in range(p):
                centroid[j] /= p

            xr = np.empty(p, dtype=np.float64)
            for j in range(p):
                xr[j] = centroid[j] + (centroid[j] - simplex[iw, j])
            fr = _objective(mode, xr, base, auxv, zpow, ctype, span, center,
                            aux, radius, margin, penalty)
            nev += 1

            if fr < fvals[ib]:
                xe = np.empty(p, dtype=np.float64)
                for j in range(p):
                    xe[j] = centroid[j] + 2.0 * (centroid[j] - simplex[iw, j])
                fe = _objective(mode, xe, base, auxv, zpow, ctype, span,
                                center, aux, radius, margin, penalty)
                nev += 1
                if fe < fr:
                    for j in range(p):
                        simplex[iw, j] = xe[j]
                    fvals[iw] = fe
                else:
                    for j in range(p):
                        simplex[iw, j] = xr[j]
                    fvals[iw] = fr
            elif fr < fvals[isw]:
                for j in range(p):
                    simplex[iw, j] = xr[j]
                fvals[iw] = fr
            else:
                if fr < fvals[iw]:
                    xc = np.empty(p, dtype=np.float64)
                    for j in range(p):
                        xc[j] = centroid[j] + 0.5 * (centroid[j] - simplex[iw, j])
                else:
                    xc = np.empty(p, dtype=np.float64)
                    for j in range(p):
                        xc[j] = centroid[j] - 0.5 * (centroid[j] - simplex[iw, j])
                fc = _objective(mode, xc, base, auxv, zpow, ctype, span,
                                center, aux, radius, margin, penalty)
                nev += 1
                if fc < min(fr, fvals[iw]):
                    for j in range(p):
                        simplex[iw, j] = xc[j]
                    fvals[iw] = fc
                else:
                    # shrink toward the best vertex
                    for i in range(1, p + 1):
                        ii = order[i]
                        for j in range(p):
                            simplex[ii, j] = simplex[ib, j] + 0.5 * (
                                simplex[ii, j] - simplex[ib, j])
                        fvals[ii] = _objective(mode, simplex[ii], base, auxv,
                                               zpow, ctype, span, center, aux,
                                               radius, margin, penalty)
                        nev += 1
                        if nev >= max_evals:
                            break

        round_best = fvals[0]
        ibest = 0
        for i in range(1, p + 1):
            if fvals[i] < round_best:
                round_best = fvals[i]
                ibest = i
        if round_best < best_f - ftol:
            best_f = round_best
            for j in range(p):
                best_x[j] = simplex[ibest, j]
            improved_round = True
        elif round_best < best_f:
            best_f = round_best
            for j in range(p):
                best_x[j] = simplex[ibest, j]

        # coordinate-wise restart around the incumbent on stall
        shrink_level *= 0.3
        if not improved_round:
            stalls += 1
        else:
            stalls = 0

    return best_x, best_f, nev


# ---------------------------------------------------------------------------
# pure-numpy twins
# ---------------------------------------------------------------------------

def _rho_batch_numpy(pts, ctype, span, center, aux, radius):
    """Defining-function values for a batch of points (rows)."""
    m = pts.shape[0]
    rho = np.full(m, -1e300)
    for i in range(ctype.shape[0]):
        a, b = span[i]
        ct = ctype[i]
        block = pts[:, a:b]
        if ct == C_BALL:
            val = np.linalg.norm(block - center[i, a:b], axis=1) - radius[i]
        elif ct == C_HALFSPACE:
            val = np.sum((block - center[i, a:b]) * np.conj(aux[i, a:b]),
                         axis=1).real
        elif ct == C_ELLIPSOID:
            val = np.sqrt(np.sum(np.abs(block / aux[i, a:b].real) ** 2,
                                 axis=1)) - 1.0
        else:
            val = -np.abs(pts[:, a])
        rho = np.maximum(rho, val)
    return rho


def _coeffs_from_params(mode, x, base, auxv, degree, n):
    coeffs = np.zeros((degree, n), dtype=np.complex128)
    if degree > 1:
        tail = x[1:].reshape(degree - 1, n, 2)
        coeffs[1:] = tail[..., 0] + 1j * tail[..., 1]
    if mode == MODE_KR:
        coeffs[0] = x[0] * auxv
    else:
        alpha = x[0]
        apow = alpha ** np.arange(1, degree)
        coeffs[0] = (auxv - base) / alpha - np.sum(
            coeffs[1:] * apow[:, None], axis=0)
    return coeffs


def _objective_numpy(mode, x, base, auxv, zpow, ctype, span, center, aux,
                     radius, margin, penalty):
    degree = zpow.shape[1]
    n = base.shape[0]
    if mode == MODE_LEMPERT:
        alpha = x[0]
        if alpha < _ALPHA_MIN or alpha > _ALPHA_MAX:
            return _BIG * (1.0 + abs(alpha))
    coeffs = _coeffs_from_params(mode, x, base, auxv, degree, n)
    pts = base[None, :] + zpow @ coeffs
    rho = _rho_batch_numpy(pts, ctype, span, center, aux, radius)
    pen = np.sum(np.maximum(rho + margin, 0.0))
    value = -abs(x[0]) if mode == MODE_KR else x[0]
    return value + penalty * pen


def _nelder_mead_numpy(mode, x0, steps, max_evals, ftol, base, auxv, zpow,
                       ctype, span, center, aux, radius, margin, penalty):
    def f(x):
        return _objective_numpy(mode, x, base, auxv, zpow, ctype, span,
                                center, aux, radius, margin, penalty)

    p = x0.size
    best_x = x0.copy()
    best_f = f(x0)
    nev = 1
    shrink_level = 1.0
    stalls = 0

    while nev < max_evals and stalls < 2:
        simplex = np.tile(best_x, (p + 1, 1))
        fvals = np.empty(p + 1)
        fvals[0] = best_f
        for i in range(p):
            simplex[i + 1, i] += steps[i] * shrink_level
            fvals[i + 1] = f(simplex[i + 1])
            nev += 1
            if nev >= max_evals:
                break

        improved_round = False
        while nev < max_evals:
            order = np.argsort(fvals, kind="stable")
            ib, isw, iw = order[0], order[-2], order[-1]
            if fvals[iw] - fvals[ib] < ftol:
                break
            centroid = (np.sum(simplex, axis=0) - simplex[iw]) / p
            xr = centroid + (centroid - simplex[iw])
            fr = f(xr)
            nev += 1
            if fr < fvals[ib]:
                xe = centroid + 2.0 * (centroid - simplex[iw])
                fe = f(xe)
                nev += 1
                if fe < fr:
                    simplex[iw], fvals[iw] = xe, fe
                else:
                    simplex[iw], fvals[iw] = xr, fr
            elif fr < fvals[isw]:
                simplex[iw], fvals[iw] = xr, fr
            else:
                if fr < fvals[iw]:
                    xc = centroid + 0.5 * (centroid - simplex[iw])
                else:
                    xc = centroid - 0.5 * (centroid - simplex[iw])
                fc = f(xc)
                nev += 1
                if fc < min(fr, fvals[iw]):
                    simplex[iw], fvals[iw] = xc, fc
                else:
                    for i in order[1:]:
                        simplex[i] = simplex[ib] + 0.5 * (simplex[i] - simplex[ib])
                        fvals[i] = f(simplex[i])
                        nev += 1
                        if nev >= max_evals:
                            break

        ibest = int(np.argmin(fvals))
        if fvals[ibest] < best_f - ftol:
            best_f = fvals[ibest]
            best_x = simplex[ibest].copy()
            improved_round = True
        elif fvals[ibest] < best_f:
            best_f = fvals[ibest]
            best_x = simplex[ibest].copy()

        shrink_level *= 0.3
        stalls = 0 if improved_round else stalls + 1

    return best_x, best_f, nev


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def boundary_powers(m_samples: int, degree: int) -> np.ndarray:
    """Matrix zpow[k, j] = zeta_k^(j+1) at the M-th roots of unity."""
    zeta = np.exp(2j * np.pi * np.arange(m_samples) / m_samples)
    return zeta[:, None] ** np.arange(1, degree + 1)[None, :]


def nm_minimize(mode, x0, steps, max_evals, ftol, base, auxv, zpow, table,
                margin, penalty, backend=None):
    """Run the simplex search on one start; returns (x, f, evaluations)."""
    be = backend or active_backend()
    args = (int(mode), np.asarray(x0, dtype=np.float64),
            np.asarray(steps, dtype=np.float64), int(max_evals), float(ftol),
            np.ascontiguousarray(base, dtype=np.complex128),
            np.ascontiguousarray(auxv, dtype=np.complex128),
            np.ascontiguousarray(zpow, dtype=np.complex128),
            table.ctype, table.span, table.center, table.aux, table.radius,
            float(margin), float(penalty))
    if be == "numba":
        return _nelder_mead(*args)
    return _nelder_mead_numpy(*args)


def objective_value(mode, x, base, auxv, zpow, table, margin, penalty,
                    backend=None):
    be = backend or active_backend()
    args = (int(mode), np.asarray(x, dtype=np.float64),
            np.ascontiguousarray(base, dtype=np.complex128),
            np.ascontiguousarray(auxv, dtype=np.complex128),
            np.ascontiguousarray(zpow, dtype=np.complex128),
            table.ctype, table.span, table.center, table.aux, table.radius,
            float(margin), float(penalty))
    if be == "numba":
        return _objective(*args)
    return _objective_numpy(*args)


def rho_batch(pts, table) -> np.ndarray:
    """Defining-function values for a batch of points (always numpy)."""
    pts = np.ascontiguousarray(pts, dtype=np.complex128)
    return _rho_batch_numpy(pts, table.ctype, table.span, table.center,
                            table.aux, table.radius)
