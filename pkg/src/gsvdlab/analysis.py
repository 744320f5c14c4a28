"""Validation metrics for a constructed GSVD and bias observables of SVDNet heads."""
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .blackbox import BlackBox
from .data import Dataset
from .errors import DegenerateDataset, InvalidInput
from .gsvd import apply_u_sigma, left_inverse_many, lift_many
from .numerics import DEFAULT_RTOL


@dataclass
class ValidationReport:
    recon_mse: float
    left_inv_err: float
    norm_pres_err: float
    gain_recovery_sampled: float | None
    gain_recovery_searched: float | None
    gain_violations: int
    min_gamma: float
    wall_seconds: float

    def to_dict(self):
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}


def validate(model, f, holdout, true_gains=None, sampled_alpha=None, searched_alpha=None):
    """Held-out metrics of U Sigma v against f.

    Violating points (gamma <= 0) are counted and excluded from the
    left-inverse and norm metrics, whose lift is not defined there. Gain
    recovery is mean(alpha_hat / true_gains) over coordinates with positive
    truth; it is omitted when ``true_gains`` is None.
    """
    t0 = time.perf_counter()
    xs = holdout.x if isinstance(holdout, Dataset) else np.atleast_2d(np.asarray(holdout, dtype=np.float64))
    z, gam, ys = lift_many(model, f, xs, strict=False)
    nonzero = np.einsum("ij,ij->i", xs, xs) > 0
    ok = gam > 0
    viol = int(np.sum(nonzero & ~ok))
    min_gamma = float(gam[nonzero].min()) if nonzero.any() else math.inf

    recon = apply_u_sigma(model, z)
    recon_mse = float(np.mean(np.sum((ys - recon) ** 2, axis=1)))
    zv, xv = z[ok], xs[ok]
    inv = left_inverse_many(model, zv) if len(zv) else np.zeros((0, model.d_in))
    left_err = float(np.mean(np.linalg.norm(inv - xv, axis=1))) if len(xv) else math.nan
    norm_err = float(np.mean(np.abs(np.linalg.norm(zv, axis=1) - np.linalg.norm(xv, axis=1)))) if len(xv) else math.nan

    rec_s = rec_g = None
    if true_gains is not None:
        truth = np.asarray(true_gains, dtype=np.float64)
        live = truth > 0
        a_s = model.alpha if sampled_alpha is None else np.asarray(sampled_alpha)
        rec_s = float(np.mean(a_s[live] / truth[live]))
        if searched_alpha is not None:
            rec_g = float(np.mean(np.asarray(searched_alpha)[live] / truth[live]))
    return ValidationReport(recon_mse, left_err, norm_err, rec_s, rec_g, viol, min_gamma,
                            time.perf_counter() - t0)


def canonical_blackbox(net):
    """The SVDNet logits rotated into K's left singular basis, U^T K g(x).

    Coordinate i then has gain at most sigma_i(K); those singular values are
    returned as the ground-truth gains.
    """
    f = net.extract_head_svd()
    ut = f.u.T
    box = BlackBox(lambda x: ut @ net.logits(x[None])[0], net.d_in, net.num_classes,
                   batch_fn=lambda xs: net.logits(xs) @ ut.T, reentrant=True, name="svdnet-canonical")
    truth = np.zeros(net.num_classes)
    k = min(len(f.s), net.num_classes)
    truth[:k] = f.s[:k]
    return box, truth


# -- lifted energy ------------------------------------------------------

def lifted_energy(net, xs):
    """Per-sample (row, null, total) energies of z = V^T g(x)."""
    f = net.extract_head_svd()
    z = net.encode(xs) @ f.vt.T
    c = net.num_classes
    row = np.sum(z[:, :c] ** 2, axis=1)
    null = np.sum(z[:, c:] ** 2, axis=1)
    total = np.sum(z ** 2, axis=1)
    return row, null, total, z


def null_energy_fraction(net, samples):
    xs = samples.x if isinstance(samples, Dataset) else np.atleast_2d(samples)
    if len(xs) == 0:
        raise InvalidInput("need at least one sample")
    _, null, total, _ = lifted_energy(net, xs)
    live = total > 0
    frac = np.zeros_like(total)
    frac[live] = null[live] / total[live]
    return float(np.mean(frac))


def dominance(net, samples):
    """Mean share of row-space energy carried by the leading singular direction."""
    xs = samples.x if isinstance(samples, Dataset) else np.atleast_2d(samples)
    row, _, _, z = lifted_energy(net, xs)
    live = row > 0
    if not live.any():
        return 0.0
    return float(np.mean(z[live, 0] ** 2 / row[live]))


def sigma_ratio(net, rtol=DEFAULT_RTOL):
    s = net.extract_head_svd().s
    if len(s) < 2:
        raise InvalidInput("sigma ratio needs at least two classes")
    if s[1] <= rtol * s[0]:
        return math.inf
    return float(s[0] / s[1])


def undersample(data, target_class, ratio, seed=0):
    """Keep target_class whole; subsample every other class to ceil(ratio * count)."""
    if not 0 < ratio <= 1:
        raise InvalidInput("ratio must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    keep = []
    for c in range(data.num_classes):
        idx = np.flatnonzero(data.labels == c)
        if len(idx) == 0:
            raise DegenerateDataset(f"class {c} is empty")
        if c == target_class or ratio == 1:
            keep.append(idx)
        else:
            n = math.ceil(ratio * len(idx))
            keep.append(np.sort(rng.choice(idx, size=n, replace=False)))
    keep = np.sort(np.concatenate(keep))
    out = data.subset(keep, name=f"{data.name}-under{ratio:g}-t{target_class}")
    return out


@dataclass
class BiasReport:
    sigma_spectrum: list
    sigma_ratio: float
    null_energy_fraction_minority: float
    target_dominance: float
    sample_ratio: float

    def to_dict(self):
        return asdict(self)


def bias_report(net, holdout, target_class, sample_ratio):
    minority = holdout.subset(np.flatnonzero(holdout.labels != target_class))
    return BiasReport(
        sigma_spectrum=[float(s) for s in net.extract_head_svd().s],
        sigma_ratio=sigma_ratio(net),
        null_energy_fraction_minority=null_energy_fraction(net, minority),
        target_dominance=dominance(net, minority),
        sample_ratio=float(sample_ratio),
    )


def bias_sweep(train_data, holdout, target_class, ratios, train_cfg, net_cfg=None, seed=0):
    """Train one SVDNet per sampling ratio and report its head geometry."""
    from .svdnet import train

    reports = []
    for r in ratios:
        biased = undersample(train_data, target_class, r, seed=seed)
        net, _ = train(biased.x, biased.labels, train_cfg, net_cfg, num_classes=train_data.num_classes)
        reports.append(bias_report(net, holdout, target_class, r))
    return reports


def format_table(rows, title=None):
    """Aligned two-column text table from (name, value) pairs."""
    rows = [(str(k), _fmt(v)) for k, v in rows]
    w = max(len(k) for k, _ in rows)
    lines = [title] if title else []
    lines += [f"{k.ljust(w)}  {v}" for k, v in rows]
    return "\n".join(lines)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)
