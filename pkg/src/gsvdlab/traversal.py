"""Row/null projections in the lifted space and pullbacks to input space."""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, OffManifoldDegenerate
from .gsvd import LiftedPoint, lift
from .numerics import DEFAULT_RTOL, null_basis, pseudoinverse


@dataclass(frozen=True)
class ProjectionPair:
    p_row: np.ndarray
    p_null: np.ndarray


def projections(sigma_mat):
    """P_row = pinv(Sigma) Sigma and P_null = I - P_row."""
    sigma_mat = np.asarray(sigma_mat, dtype=np.float64)
    p_row = pseudoinverse(sigma_mat) @ sigma_mat
    return ProjectionPair(p_row=p_row, p_null=np.eye(sigma_mat.shape[1]) - p_row)


def split_lifted(pair, z):
    z = np.asarray(z.z if isinstance(z, LiftedPoint) else z, dtype=np.float64)
    return pair.p_row @ z, pair.p_null @ z


def naive_decoder(z, d_out=None):
    """(||z|| / ||z_n||) z_n, where z_n is the trailing input-sized block.

    Only trustworthy on the image of the lift: changing the leading block
    rescales the output even though Sigma z does not change.
    """
    if isinstance(z, LiftedPoint):
        d_out, z = z.d_out, z.z
    if d_out is None:
        raise InvalidInput("d_out is required for a raw lifted vector")
    z = np.asarray(z, dtype=np.float64)
    nz = np.linalg.norm(z)
    zn = z[d_out:]
    if nz == 0:
        return np.zeros_like(zn)
    nn = np.linalg.norm(zn)
    if nn == 0:
        raise OffManifoldDegenerate("trailing block is zero; naive decoder undefined")
    return (nz / nn) * zn


def null_sample(net, class_idx, noise_scale=1.0, seed=0, scale_by_on_value=None, rtol=DEFAULT_RTOL):
    """Decode pinv(K) e_c + B eta with B an orthonormal null basis of K.

    Returns (image, code). ``scale_by_on_value`` replaces e_c with on_value * e_c.
    """
    c = net.num_classes
    if not 0 <= class_idx < c:
        raise InvalidInput(f"class index {class_idx} outside [0, {c})")
    e = np.zeros(c)
    e[class_idx] = 1.0 if scale_by_on_value is None else float(scale_by_on_value)
    k = net.head
    code = pseudoinverse(k, rtol) @ e
    b = null_basis(k, rtol)
    if noise_scale and b.shape[1]:
        eta = np.random.default_rng(seed).standard_normal(b.shape[1]) * noise_scale
        code = code + b @ eta
    return net.decode(code)[0], code


def interpolate(net, y1, y2, steps, rtol=DEFAULT_RTOL):
    """decoder(pinv(K) y_t) for y_t = (1-t) y1 + t y2 on a uniform grid of t in [0, 1]."""
    if steps < 2:
        raise InvalidInput("steps must be >= 2")
    y1 = np.asarray(y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    kp = pseudoinverse(net.head, rtol)
    ts = np.linspace(0.0, 1.0, steps)
    ys = [y1 if t == 0 else y2 if t == 1 else (1 - t) * y1 + t * y2 for t in ts]
    codes = np.array([kp @ y for y in ys])
    return list(net.decode(codes))


def membership_null_set(model, f, x, x_prime, tol):
    """True iff the row components of v(x') and v(x) agree within tol."""
    pair = projections(model.sigma_matrix)
    zr = pair.p_row @ lift(model, f, x).z
    zr2 = pair.p_row @ lift(model, f, x_prime).z
    return bool(np.linalg.norm(zr2 - zr) <= tol)


def to_pixels(images):
    """Clip to [0, 1] and quantize to 8-bit."""
    return np.rint(np.clip(np.asarray(images, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def pgm_bytes(image, shape):
    """Binary PGM (P5), maxval 255, row-major."""
    rows, cols = shape
    pix = to_pixels(np.asarray(image).reshape(rows, cols))
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + pix.tobytes()


def strip_bytes(images, shape):
    """Images concatenated left to right into one PGM."""
    rows, cols = shape
    tiles = [to_pixels(np.asarray(im).reshape(rows, cols)) for im in images]
    strip = np.concatenate(tiles, axis=1)
    return f"P5\n{strip.shape[1]} {rows}\n255\n".encode("ascii") + strip.tobytes()


def read_pgm(data):
    """Parse bytes produced by pgm_bytes/strip_bytes. Returns uint8 array."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise InvalidInput("not a binary PGM")
    cols, rows = map(int, parts[1].split())
    if int(parts[2]) != 255:
        raise InvalidInput("unsupported maxval")
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(rows, cols)
