"""Dense linear algebra on small matrices.

The SVD is a one-sided (Hestenes) Jacobi iteration with a round-robin pair
ordering, so each sweep rotates n/2 disjoint column pairs at once.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, InvalidInput

JACOBI_TOL = 1e-14
MAX_SWEEPS = 60
DEFAULT_RTOL = 1e-10


@dataclass(frozen=True)
class SvdFactors:
    u: np.ndarray  # rows x rows
    s: np.ndarray  # min(rows, cols), nonincreasing
    vt: np.ndarray  # cols x cols

    def reconstruct(self):
        m, n = self.u.shape[0], self.vt.shape[0]
        k = len(self.s)
        return (self.u[:, :k] * self.s) @ self.vt[:k, :n]


def as_matrix(a):
    a = np.array(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInput(f"expected a nonempty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    return a


def _round_robin(n):
    """Yield index arrays (p, q) of disjoint pairs covering all n(n-1)/2 pairs."""
    players = list(range(n)) if n % 2 == 0 else list(range(n)) + [-1]
    size = len(players)
    for _ in range(size - 1):
        p = np.array(players[: size // 2])
        q = np.array(players[size // 2 :][::-1])
        keep = (p >= 0) & (q >= 0)
        yield p[keep], q[keep]
        players = [players[0]] + [players[-1]] + players[1:-1]


def _jacobi_columns(a):
    """Orthogonalize the columns of a (m >= n). Returns (W, V) with a @ V = W."""
    w = a.copy()
    n = w.shape[1]
    v = np.eye(n)
    if n == 1:
        return w, v
    schedule = list(_round_robin(n))
    residual = np.inf
    for _ in range(MAX_SWEEPS):
        residual = 0.0
        rotated = False
        for p, q in schedule:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gam = np.einsum("ij,ij->j", wp, wq)
            scale = np.sqrt(alpha * beta)
            live = scale > 0
            rel = np.zeros_like(gam)
            rel[live] = np.abs(gam[live]) / scale[live]
            residual = max(residual, float(rel.max(initial=0.0)))
            act = rel > JACOBI_TOL
            if not act.any():
                continue
            rotated = True
            p, q = p[act], q[act]
            alpha, beta, gam = alpha[act], beta[act], gam[act]
            zeta = (beta - alpha) / (2.0 * gam)
            sign = np.where(zeta >= 0, 1.0, -1.0)
            t = sign / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            wp, wq = w[:, p], w[:, q]
            w[:, p] = c * wp - s * wq
            w[:, q] = s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            return w, v
    raise ConvergenceFailure(residual, MAX_SWEEPS)


def _complete_basis(cols, dim):
    """Extend orthonormal columns (dim x r) to an orthonormal dim x dim basis."""
    r = cols.shape[1]
    if r == dim:
        return cols
    q, _ = np.linalg.qr(np.hstack([cols, np.eye(dim)]))
    return np.hstack([cols, q[:, r:dim]])


def _svd_tall(a):
    m, n = a.shape
    w, v = _jacobi_columns(a)
    s = np.linalg.norm(w, axis=0)
    order = np.argsort(-s, kind="stable")
    s, w, v = s[order], w[:, order], v[:, order]
    tiny = s > (1e-300 if s[0] == 0 else 1e-30 * s[0])
    r = int(tiny.sum())
    u = _complete_basis(w[:, :r] / s[:r], m)
    s = np.where(tiny, s, 0.0)
    return u, s, v.T


def svd(a):
    """Full SVD: a = u @ diag(s) @ vt with square orthogonal u and vt."""
    a = as_matrix(a)
    m, n = a.shape
    if m >= n:
        u, s, vt = _svd_tall(a)
    else:
        ut, s, vtt = _svd_tall(a.T)
        u, vt = vtt.T, ut.T
    u = u.copy()
    vt = vt.copy()
    # largest-magnitude entry of each left vector made nonnegative
    for j in range(len(s)):
        col = u[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            u[:, j] = -col
            vt[j, :] = -vt[j, :]
    return SvdFactors(u=u, s=s, vt=vt)


def rank(factors, rtol=DEFAULT_RTOL):
    s = factors.s
    if len(s) == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def pseudoinverse(a, rtol=DEFAULT_RTOL):
    if rtol < 0:
        raise InvalidInput("rtol must be nonnegative")
    a = as_matrix(a)
    f = svd(a)
    r = rank(f, rtol)
    return (f.vt[:r].T / f.s[:r]) @ f.u[:, :r].T


def null_basis(a, rtol=DEFAULT_RTOL):
    """Orthonormal columns spanning the numerical null space of a."""
    if rtol < 0:
        raise InvalidInput("rtol must be nonnegative")
    a = as_matrix(a)
    f = svd(a)
    r = rank(f, rtol)
    return f.vt[r:].T.copy()


def spectral_norm(a):
    return float(svd(a).s[0])


def permutation_matrix(perm):
    """Matrix P with (P @ y)[i] = y[perm[i]]."""
    perm = np.asarray(perm, dtype=int)
    p = np.zeros((len(perm), len(perm)))
    p[np.arange(len(perm)), perm] = 1.0
    return p


def norm2(x):
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64)))
