"""Directional-search untargeted attack driven by a GSVD of a black box.

All points handed to these functions are in the caller's (global) input
coordinates. When the box is anchored, lifts are taken at x - anchor and
logits are shifted back by the cached anchor output, so class decisions are
always made on the original map.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDirection, InvalidInput
from .gsvd import apply_u_sigma, lift, lift_many


@dataclass(frozen=True)
class AttackConfig:
    step: float = 0.25
    budget: float = 20.0
    fd_eps: float = 1e-3
    clip: tuple = (0.0, 1.0)
    central: bool = False
    fixed_target: int | None = None  # output class; overrides the argmin-gap choice

    def __post_init__(self):
        if not (self.step > 0 and self.budget > 0 and self.fd_eps > 0):
            raise InvalidInput("step, budget and fd_eps must be positive")
        if self.step > self.budget:
            raise InvalidInput("step must not exceed budget")
        if self.clip is not None and not self.clip[0] < self.clip[1]:
            raise InvalidInput("clip bounds need lo < hi")


@dataclass
class AttackResult:
    success: bool
    eta: np.ndarray
    eta_norm: float
    target_idx: int  # output class
    source_idx: int  # output class
    queries: int
    probes: int
    radii: list = field(default_factory=list)
    reason: str | None = None
    wall_ms: float = 0.0

    def row(self, sample_id):
        return {
            "sample_id": sample_id,
            "source_idx": self.source_idx,
            "target_idx": self.target_idx,
            "success": int(self.success),
            "eta_norm": self.eta_norm,
            "probes": self.probes,
            "queries": self.queries,
            "wall_ms": self.wall_ms,
        }


@dataclass
class TargetChoice:
    i0: int  # lifted position of the current class
    i_star: int  # lifted position of the chosen rival
    gaps: np.ndarray  # per position; the i0 entry is nan
    source_class: int
    target_class: int
    z: np.ndarray  # v(x0)


def _global_logits(model, f, z):
    return f.global_output(apply_u_sigma(model, z))


def select_target(model, f, x0, fixed_target=None):
    """Lift x0 once, read the current class and the smallest lifted logit gap."""
    x0 = np.asarray(x0, dtype=np.float64)
    z = lift(model, f, f.to_local(x0)).z
    logits = _global_logits(model, f, z)
    u0 = int(np.argmax(logits))
    pos_logits = logits[model.perm]
    i0 = model.position_of(u0)
    gaps = pos_logits[i0] - pos_logits
    gaps[i0] = np.nan
    if fixed_target is not None:
        if fixed_target == u0:
            raise InvalidInput("fixed target equals the current class")
        i_star = model.position_of(fixed_target)
    else:
        masked = np.where(np.arange(model.d_out) == i0, np.inf, gaps)
        i_star = int(np.argmin(masked))
    return TargetChoice(i0=i0, i_star=i_star, gaps=gaps, source_class=u0,
                        target_class=int(model.perm[i_star]), z=z)


def direction(model, f, x0, i_star, i0, fd_eps=1e-3, base=None, central=False):
    """Unit vector along grad of sigma_{i*} v_{i*} - sigma_{i0} v_{i0} by finite differences.

    Forward differences cost d_in + 1 lifts (d_in if ``base`` = v(x0) is
    supplied); central differences cost 2 d_in.
    """
    h0 = f.to_local(np.asarray(x0, dtype=np.float64))
    d = model.d_in
    probes = fd_eps * np.eye(d)
    w = np.zeros(model.l)
    w[i_star] += model.sigma[i_star]
    w[i0] -= model.sigma[i0]
    if central:
        zs, _, _ = lift_many(model, f, np.concatenate([h0 + probes, h0 - probes]), strict=False)
        grad = (zs[:d] @ w - zs[d:] @ w) / (2 * fd_eps)
    else:
        if base is None:
            base = lift(model, f, h0).z
        zs, _, _ = lift_many(model, f, h0 + probes, strict=False)
        grad = (zs @ w - base @ w) / fd_eps
    # differences at the rounding level of the lifted logits carry no direction
    noise = 64 * np.finfo(float).eps * np.abs(zs).max(initial=0.0) * np.abs(w).sum() * np.sqrt(d) / fd_eps
    n = np.linalg.norm(grad)
    if not np.isfinite(n) or n <= noise:
        raise DegenerateDirection("finite-difference contrastive direction is zero")
    return grad / n


def _classify(f, x):
    return int(np.argmax(f.global_output(f.evaluate(f.to_local(x)))))


def line_probe(f, x0, dirn, cfg, source_class=None, target_class=-1):
    """Probe clip(x0 + r d) at r = step, 2 step, ... while r < budget.

    The first probe whose argmax differs from the source class wins.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    start = f.query_count
    t0 = time.perf_counter()
    if source_class is None:
        source_class = _classify(f, x0)
    radii = []
    k = 1
    while True:
        r = k * cfg.step
        if not r < cfg.budget:
            break
        radii.append(r)
        xp = x0 + r * dirn
        if cfg.clip is not None:
            xp = np.clip(xp, cfg.clip[0], cfg.clip[1])
        cls = _classify(f, xp)
        if cls != source_class:
            eta = xp - x0
            return AttackResult(True, eta, float(np.linalg.norm(eta)), target_class, source_class,
                                f.query_count - start, len(radii), radii,
                                wall_ms=1e3 * (time.perf_counter() - t0))
        k += 1
    return AttackResult(False, np.zeros_like(x0), 0.0, target_class, source_class, f.query_count - start,
                        len(radii), radii, reason="budget_exhausted",
                        wall_ms=1e3 * (time.perf_counter() - t0))


def run_attack(model, f, x0, cfg=None):
    """select_target -> direction -> line_probe, then one fresh re-check of any success."""
    cfg = cfg or AttackConfig()
    x0 = np.asarray(x0, dtype=np.float64)
    start = f.query_count
    t0 = time.perf_counter()
    choice = select_target(model, f, x0, cfg.fixed_target)
    try:
        dirn = direction(model, f, x0, choice.i_star, choice.i0, cfg.fd_eps,
                         base=choice.z, central=cfg.central)
    except DegenerateDirection:
        return AttackResult(False, np.zeros_like(x0), 0.0, choice.target_class, choice.source_class,
                            f.query_count - start, 0, [], reason="degenerate_direction",
                            wall_ms=1e3 * (time.perf_counter() - t0))
    res = line_probe(f, x0, dirn, cfg, source_class=choice.source_class,
                     target_class=choice.target_class)
    if res.success:
        if _classify(f, x0 + res.eta) == choice.source_class:
            res.success = False
            res.reason = "verification_failed"
    res.queries = f.query_count - start
    res.wall_ms = 1e3 * (time.perf_counter() - t0)
    return res


def summarize(results):
    """Aggregate success, perturbation and query figures over AttackResults."""
    n = len(results)
    wins = [r for r in results if r.success]
    return {
        "success_percent": 100.0 * len(wins) / n if n else 0.0,
        "avg_perturbation_norm": float(np.mean([r.eta_norm for r in wins])) if wins else None,
        "avg_queries_per_sample": float(np.mean([r.queries for r in results])) if n else 0.0,
        "samples": n,
    }
