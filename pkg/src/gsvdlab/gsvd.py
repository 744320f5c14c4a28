"""Coordinatewise gain-lifting construction of f = U Sigma v.

Conventions: f maps R^d_in -> R^d_out. ``perm[i]`` is the output coordinate
that sits at position i of the lifted space, so (Sigma v(x))[i] equals
f(x)[perm[i]], and the permutation U sends position i back to perm[i].

The lift is computed in its closed form
    v(x) = [f_perm(x) / sigma, sqrt(gamma(x)) * x],
which equals the normalized form ||x|| x_delta / ||x_delta|| with
x_delta = [f_perm / (sigma sqrt(gamma)), x]; ``lift_normalized`` evaluates
that second form so the two can be checked against each other.
"""
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .errors import DegenerateInput, EmptyGainSample, GainViolation, InvalidInput, InvalidSlack, OffManifoldDegenerate
from .numerics import permutation_matrix

DEFAULT_EPSILON = 0.1
ZERO_GAIN_SIGMA = 1.0


@dataclass(frozen=True)
class GsvdModel:
    d_in: int
    d_out: int
    epsilon: float
    perm: np.ndarray
    alpha: np.ndarray
    sigma: np.ndarray
    anchor: np.ndarray | None = None

    @property
    def l(self):
        return self.d_in + self.d_out

    @property
    def inverse_perm(self):
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.d_out)
        return inv

    @property
    def u(self):
        """The permutation matrix U (d_out x d_out)."""
        return permutation_matrix(self.perm).T

    @property
    def sigma_matrix(self):
        """Rectangular diagonal [diag(sigma) | 0] of shape d_out x l."""
        s = np.zeros((self.d_out, self.l))
        s[np.arange(self.d_out), np.arange(self.d_out)] = self.sigma
        return s

    @property
    def rho2(self):
        return float(np.sum((self.alpha[self.perm] / self.sigma) ** 2))

    def position_of(self, output_index):
        """Lifted position holding output coordinate ``output_index``."""
        return int(self.inverse_perm[output_index])

    def to_dict(self):
        d = {
            "d_in": self.d_in,
            "d_out": self.d_out,
            "epsilon": self.epsilon,
            "perm": [int(p) for p in self.perm],
            "alpha": [float(a) for a in self.alpha],
            "sigma": [float(s) for s in self.sigma],
        }
        if self.anchor is not None:
            d["anchor"] = [float(a) for a in self.anchor]
        return d

    @classmethod
    def from_dict(cls, d):
        anchor = d.get("anchor")
        return cls(
            d_in=int(d["d_in"]),
            d_out=int(d["d_out"]),
            epsilon=float(d["epsilon"]),
            perm=np.array(d["perm"], dtype=int),
            alpha=np.array(d["alpha"], dtype=np.float64),
            sigma=np.array(d["sigma"], dtype=np.float64),
            anchor=None if anchor is None else np.array(anchor, dtype=np.float64),
        )

    def save(self, path):
        jsonio.dump(self.to_dict(), path)

    @classmethod
    def load(cls, path):
        return cls.from_dict(jsonio.load(path))


@dataclass(frozen=True)
class LiftedPoint:
    z: np.ndarray
    d_out: int = field(default=0)

    @property
    def z_delta(self):
        """Output-aligned block (perm order)."""
        return self.z[: self.d_out]

    @property
    def z_x(self):
        """Input-aligned block."""
        return self.z[self.d_out :]

    def __array__(self, dtype=None, copy=None):
        return self.z if dtype is None else self.z.astype(dtype)


# -- gain estimation -----------------------------------------------------

@dataclass
class GainProfile:
    alpha: np.ndarray  # per output coordinate
    ratios: np.ndarray  # (n_retained, d_out) of |f_i(x)| / ||x||
    points: np.ndarray  # retained inputs (local coordinates of f)

    def top_seeds(self, k=3):
        """The k highest-ratio retained points for each output coordinate."""
        out = []
        for i in range(self.ratios.shape[1]):
            order = np.argsort(-self.ratios[:, i], kind="stable")[:k]
            out.append(self.points[order])
        return out


def gain_profile(f, data):
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[0] == 0:
        raise EmptyGainSample("gain dataset is empty")
    norms = np.linalg.norm(data, axis=1)
    keep = norms > 0
    if not keep.any():
        raise EmptyGainSample("every gain sample point has zero norm")
    pts, norms = data[keep], norms[keep]
    ys = f.evaluate_many(pts)
    ratios = np.abs(ys) / norms[:, None]
    return GainProfile(alpha=ratios.max(axis=0), ratios=ratios, points=pts)


def estimate_gains(f, data):
    """alpha_i = max over nonzero x in data of |f_i(x)| / ||x||_2."""
    return gain_profile(f, data).alpha


def _ratio(y, x, i):
    return abs(y[i]) / np.linalg.norm(x)


def _ascend_one(f, i, x, steps, lr, fd_eps, bounds):
    """Normalized-gradient ascent of |f_i(x)|/||x|| with backtracking."""
    x = np.array(x, dtype=np.float64)
    best = _ratio(f.evaluate(x), x, i)
    step = lr if lr is not None else 0.05 * np.linalg.norm(x)
    if step <= 0:
        return best
    d = f.d_in
    for _ in range(steps):
        h = fd_eps if fd_eps is not None else 1e-4 * (1.0 + np.linalg.norm(x))
        probes = np.concatenate([x + h * np.eye(d), x - h * np.eye(d)])
        ys = f.evaluate_many(probes)
        pn = np.linalg.norm(probes, axis=1)
        if np.any(pn == 0):
            break
        phi = np.abs(ys[:, i]) / pn
        grad = (phi[:d] - phi[d:]) / (2 * h)
        gn = np.linalg.norm(grad)
        if not np.isfinite(gn) or gn == 0:
            break
        cand = x + step * grad / gn
        if bounds is not None:
            cand = np.clip(cand, bounds[0], bounds[1])
        if np.linalg.norm(cand) == 0:
            step *= 0.5
            continue
        val = _ratio(f.evaluate(cand), cand, i)
        if val > best:
            x, best = cand, val
        else:
            step *= 0.5
            if step < 1e-14 * (1.0 + np.linalg.norm(x)):
                break
    return best


def gain_search(f, alpha0, seeds, steps=200, lr=None, fd_eps=None, bounds=None):
    """Refine gain estimates by ascending |f_i(x)|/||x|| from seed points.

    ``seeds`` is either one array of points shared by every coordinate or a
    sequence with one array per output coordinate. ``lr`` and ``fd_eps``
    default to 0.05 ||seed|| and 1e-4 (1 + ||x||). Every value returned is a
    ratio actually observed, so the result never exceeds the true gain and
    never drops below ``alpha0``.
    """
    alpha = np.array(alpha0, dtype=np.float64).copy()
    if isinstance(seeds, np.ndarray) and seeds.ndim == 2:
        per_coord = [seeds] * f.d_out
    else:
        per_coord = list(seeds)
    if len(per_coord) != f.d_out:
        raise InvalidInput("need one seed set per output coordinate")
    for i, pts in enumerate(per_coord):
        for x in np.atleast_2d(pts):
            if np.linalg.norm(x) == 0:
                continue
            try:
                val = _ascend_one(f, i, x, steps, lr, fd_eps, bounds)
            except (FloatingPointError, ValueError):
                continue
            if np.isfinite(val):
                alpha[i] = max(alpha[i], val)
    return alpha


# -- construction --------------------------------------------------------

def build(f, alpha, epsilon=DEFAULT_EPSILON):
    if not (0.0 < epsilon < 1.0):
        raise InvalidSlack(f"epsilon must lie in (0, 1), got {epsilon}")
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (f.d_out,):
        raise InvalidInput(f"alpha must have length {f.d_out}")
    if np.any(alpha < 0) or not np.any(alpha > 0) or not np.all(np.isfinite(alpha)):
        raise InvalidInput("alpha must be finite, nonnegative, with at least one positive entry")
    perm = np.argsort(-alpha, kind="stable")
    scale = np.sqrt(f.d_out / (1.0 - epsilon))
    ordered = alpha[perm]
    sigma = np.where(ordered > 0, ordered * scale, ZERO_GAIN_SIGMA)
    anchor = None if f.anchor is None else np.array(f.anchor)
    return GsvdModel(d_in=f.d_in, d_out=f.d_out, epsilon=float(epsilon), perm=perm,
                     alpha=alpha.copy(), sigma=sigma, anchor=anchor)


def construct(f, data, epsilon=DEFAULT_EPSILON, search=True, seeds_per_coord=3, steps=200,
              lr=None, fd_eps=None, bounds=None):
    """Estimate gains on data, optionally refine by gain search, then build.

    Returns (model, alpha_sampled, alpha_searched); alpha_searched is None
    when search is off.
    """
    prof = gain_profile(f, data)
    searched = None
    alpha = prof.alpha
    if search:
        searched = gain_search(f, prof.alpha, prof.top_seeds(seeds_per_coord), steps=steps,
                               lr=lr, fd_eps=fd_eps, bounds=bounds)
        alpha = searched
    return build(f, alpha, epsilon), prof.alpha, searched


# -- lift and inverse ----------------------------------------------------

def _gamma_rows(model, xs, ys):
    n2 = np.einsum("ij,ij->i", xs, xs)
    e = np.sum((ys[:, model.perm] / model.sigma) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 - e / n2


def _lift_rows(model, xs, ys):
    """Closed-form lift of many points; returns (Z, gamma). No validity check."""
    gam = _gamma_rows(model, xs, ys)
    zero = np.einsum("ij,ij->i", xs, xs) == 0
    z = np.zeros((len(xs), model.l))
    with np.errstate(invalid="ignore"):
        z[:, : model.d_out] = ys[:, model.perm] / model.sigma
        z[:, model.d_out :] = np.sqrt(np.maximum(gam, 0.0))[:, None] * xs
    z[zero] = 0.0
    gam = np.where(zero, 1.0, gam)
    return z, gam


def gamma(model, f, x):
    """Slack residual 1 - sum_j f_perm(j)(x)^2 / (sigma_j^2 ||x||^2).

    Negative values are returned, not raised: they mean the gains are too small at x.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.linalg.norm(x) == 0:
        raise DegenerateInput("gamma is undefined at x = 0")
    y = f.evaluate(x)
    return float(_gamma_rows(model, x[None], y[None])[0])


def lift(model, f, x):
    """Norm-preserving lift v(x) in R^(d_out + d_in). Costs one query unless x = 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d_in,):
        raise InvalidInput(f"expected input of shape ({model.d_in},)")
    if not np.any(x):
        return LiftedPoint(np.zeros(model.l), model.d_out)
    y = f.evaluate(x)
    return lift_from_output(model, x, y)


def lift_from_output(model, x, y):
    """Lift when f(x) is already known (no query)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.any(x):
        return LiftedPoint(np.zeros(model.l), model.d_out)
    z, gam = _lift_rows(model, x[None], np.asarray(y, dtype=np.float64)[None])
    if not gam[0] > 0:
        raise GainViolation(x, float(gam[0]))
    return LiftedPoint(z[0], model.d_out)


def lift_normalized(model, f, x):
    """The same lift via x_delta = [f/(sigma sqrt(gamma)), x], scaled to norm ||x||."""
    x = np.asarray(x, dtype=np.float64)
    if not np.any(x):
        return LiftedPoint(np.zeros(model.l), model.d_out)
    y = f.evaluate(x)
    g = float(_gamma_rows(model, x[None], y[None])[0])
    if not g > 0:
        raise GainViolation(x, g)
    delta = y[model.perm] / (model.sigma * np.sqrt(g))
    xd = np.concatenate([delta, x])
    return LiftedPoint(np.linalg.norm(x) * xd / np.linalg.norm(xd), model.d_out)


def lift_many(model, f, xs, strict=True):
    """Lift rows of xs with one batched query per nonzero row.

    Returns (Z, gamma). With strict=False, rows with gamma <= 0 are kept
    (their kernel block is zeroed) so callers can count violations.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    ys = np.zeros((len(xs), model.d_out))
    nz = np.einsum("ij,ij->i", xs, xs) > 0
    if nz.any():
        ys[nz] = f.evaluate_many(xs[nz])
    z, gam = _lift_rows(model, xs, ys)
    if strict:
        bad = np.flatnonzero(~(gam > 0))
        if len(bad):
            raise GainViolation(xs[bad[0]], float(gam[bad[0]]))
    return z, gam, ys


def _as_z(model, z):
    if isinstance(z, LiftedPoint):
        return z.z
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.l,):
        raise InvalidInput(f"lifted point must have length {model.l}")
    return z


def left_inverse(model, z):
    """v^{-L}(z) = ||z|| z_x / ||z_x||, with 0 -> 0."""
    z = _as_z(model, z)
    nz = np.linalg.norm(z)
    if nz == 0:
        return np.zeros(model.d_in)
    zx = z[model.d_out :]
    nx = np.linalg.norm(zx)
    if nx == 0:
        raise OffManifoldDegenerate("input-aligned block is zero for a nonzero lifted point")
    return nz * zx / nx


def left_inverse_many(model, zs):
    zs = np.atleast_2d(zs)
    nz = np.linalg.norm(zs, axis=1)
    zx = zs[:, model.d_out :]
    nx = np.linalg.norm(zx, axis=1)
    if np.any((nx == 0) & (nz > 0)):
        raise OffManifoldDegenerate("input-aligned block is zero for a nonzero lifted point")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (nz / nx)[:, None] * zx
    out[nz == 0] = 0.0
    return out


def apply_u_sigma(model, z):
    """U Sigma z for a lifted vector (or rows of lifted vectors)."""
    z = np.asarray(z.z if isinstance(z, LiftedPoint) else z, dtype=np.float64)
    head = z[..., : model.d_out] * model.sigma
    out = np.empty_like(head)
    out[..., model.perm] = head
    return out


def reconstruct(model, f, x):
    """U Sigma v(x); equals f(x) up to rounding."""
    return apply_u_sigma(model, lift(model, f, x))
