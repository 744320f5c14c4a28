"""SVDNet: f(x) = K g(x) with a norm-preserving encoder and a learned decoder.

Everything is numpy with hand-written backprop. The encoder output u = g0(x)
goes through the norm wrapper g(x) = ||x|| u / ||u|| (zero when ||u|| <= tau),
then an optional scalar ``code_scale``. K is bias-free. The decoder maps the
code (times ``decoder_in_scale``) back to input space.
"""
import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import FormatError, InvalidInput, InvalidScale, TrainingDiverged
from .numerics import spectral_norm, svd

NORM_FLOOR = 1e-30
MAGIC = b"SVDNET1\n"

ACTIVATIONS = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "identity": (lambda h: h, lambda a: np.ones_like(a)),
}


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    on_value: float = 10.0
    off_value: float = 0.1
    sv_cutoff: float = 4.0
    loss_weights: tuple = (1.0, 1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        if not (self.on_value > self.off_value > 0):
            raise InvalidInput("need on_value > off_value > 0")
        if self.sv_cutoff <= 0:
            raise InvalidInput("sv_cutoff must be positive")
        if len(self.loss_weights) != 3:
            raise InvalidInput("loss_weights must have three entries")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise InvalidInput("bad epochs / batch_size / learning_rate")


@dataclass
class NetConfig:
    hidden: tuple = (256,)
    encode_dim: int | None = None  # default d_in + num_classes
    activation: str = "tanh"
    code_scale: float = 1.0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.activation not in ACTIVATIONS:
            raise InvalidInput(f"unknown activation {self.activation!r}")


def norm_wrap(x, u, tau=NORM_FLOOR):
    """||x|| u / ||u|| when ||u|| > tau, else the zero vector."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    nu = np.linalg.norm(u)
    if nu <= tau:
        return np.zeros_like(u)
    return np.linalg.norm(x) * (u / nu)


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SvdNet:
    def __init__(self, enc, head, dec, activation="tanh", code_scale=1.0, decoder_in_scale=1.0,
                 norm_floor=NORM_FLOOR):
        self.enc = [(np.array(w, dtype=np.float64), np.array(b, dtype=np.float64)) for w, b in enc]
        self.head = np.array(head, dtype=np.float64)
        self.dec = [(np.array(w, dtype=np.float64), np.array(b, dtype=np.float64)) for w, b in dec]
        self.activation = activation
        self.code_scale = float(code_scale)
        self.decoder_in_scale = float(decoder_in_scale)
        self.norm_floor = norm_floor
        if self.head.ndim != 2 or self.head.shape[1] != self.encode_dim:
            raise InvalidInput("head K must be num_classes x encode_dim")

    @classmethod
    def init(cls, d_in, num_classes, cfg=None, seed=0):
        cfg = cfg or NetConfig()
        e = cfg.encode_dim or d_in + num_classes
        rng = np.random.default_rng(seed)

        def stack(widths):
            return [(rng.standard_normal((o, i)) / np.sqrt(i), np.zeros(o))
                    for i, o in zip(widths[:-1], widths[1:])]

        enc = stack([d_in, *cfg.hidden, e])
        head = rng.standard_normal((num_classes, e)) / np.sqrt(e)
        dec = stack([e, *reversed(cfg.hidden), d_in])
        return cls(enc, head, dec, activation=cfg.activation, code_scale=cfg.code_scale)

    @property
    def d_in(self):
        return self.enc[0][0].shape[1]

    @property
    def encode_dim(self):
        return self.enc[-1][0].shape[0]

    @property
    def num_classes(self):
        return self.head.shape[0]

    def copy(self):
        return SvdNet([(w.copy(), b.copy()) for w, b in self.enc], self.head.copy(),
                      [(w.copy(), b.copy()) for w, b in self.dec], self.activation,
                      self.code_scale, self.decoder_in_scale, self.norm_floor)

    # -- parameters ------------------------------------------------------
    def params(self):
        out = []
        for w, b in self.enc:
            out += [w, b]
        out.append(self.head)
        for w, b in self.dec:
            out += [w, b]
        return out

    def param_names(self):
        names = []
        for k in range(len(self.enc)):
            names += [f"enc.W{k}", f"enc.b{k}"]
        names.append("K")
        for k in range(len(self.dec)):
            names += [f"dec.W{k}", f"dec.b{k}"]
        return names

    def n_params(self):
        return sum(p.size for p in self.params())

    # -- forward ---------------------------------------------------------
    def _mlp(self, layers, a):
        act, _ = ACTIVATIONS[self.activation]
        acts = [a]
        for k, (w, b) in enumerate(layers):
            h = a @ w.T + b
            a = act(h) if k < len(layers) - 1 else h
            acts.append(a)
        return acts

    def encode_raw(self, xs):
        """Pre-wrapper encoder output g0(x), rows."""
        return self._mlp(self.enc, np.atleast_2d(xs))[-1]

    def _wrap_rows(self, xs, u):
        nx = np.linalg.norm(xs, axis=1)
        nu = np.linalg.norm(u, axis=1)
        live = nu > self.norm_floor
        scale = np.zeros_like(nu)
        scale[live] = nx[live] / nu[live]
        return scale[:, None] * u, live, nx, nu

    def encode(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        wrapped, _, _, _ = self._wrap_rows(xs, self.encode_raw(xs))
        return self.code_scale * wrapped

    def decode(self, codes):
        codes = np.atleast_2d(np.asarray(codes, dtype=np.float64))
        return self._mlp(self.dec, self.decoder_in_scale * codes)[-1]

    def logits(self, xs):
        return self.encode(xs) @ self.head.T

    def forward(self, x):
        """(code, logits, recon) for a single input or rows of inputs."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        code = self.encode(x)
        logits = code @ self.head.T
        recon = self.decode(code)
        if single:
            return code[0], logits[0], recon[0]
        return code, logits, recon

    def predict(self, xs):
        return np.argmax(self.logits(xs), axis=1)

    def unwrapped_logits(self, xs):
        """K (code_scale g0(x)): the affine/activation chain without the norm wrapper."""
        return self.code_scale * self.encode_raw(xs) @ self.head.T

    # -- loss and gradients ---------------------------------------------
    def targets(self, labels, cfg):
        t = np.full((len(labels), self.num_classes), cfg.off_value)
        t[np.arange(len(labels)), labels] = cfg.on_value
        return t

    def loss_and_grads(self, xs, labels, cfg, need_grads=True):
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        labels = np.asarray(labels, dtype=int)
        n = len(xs)
        w1, w2, w3 = cfg.loss_weights
        _, dact = ACTIVATIONS[self.activation]

        enc_acts = self._mlp(self.enc, xs)
        u = enc_acts[-1]
        wrapped, live, nx, nu = self._wrap_rows(xs, u)
        code = self.code_scale * wrapped
        logits = code @ self.head.T
        dec_in = self.decoder_in_scale * code
        dec_acts = self._mlp(self.dec, dec_in)
        recon = dec_acts[-1]

        t = self.targets(labels, cfg)
        pred = float(np.mean((logits - t) ** 2))
        bij = float(np.mean((recon - xs) ** 2))
        f = svd(self.head)
        excess = np.maximum(f.s - cfg.sv_cutoff, 0.0)
        reg = float(np.sum(excess ** 2))
        total = w1 * pred + w2 * bij + w3 * reg
        parts = (pred, bij, reg)
        if not need_grads:
            return total, parts, None

        dlogits = w1 * 2.0 * (logits - t) / logits.size
        k = len(f.s)
        d_head = dlogits.T @ code + w3 * (f.u[:, :k] * (2.0 * excess)) @ f.vt[:k]
        dcode = dlogits @ self.head

        drecon = w2 * 2.0 * (recon - xs) / recon.size
        dec_grads, ddec_in = self._backprop(self.dec, dec_acts, drecon, dact)
        dcode = dcode + self.decoder_in_scale * ddec_in

        # norm wrapper: d/du of ||x|| u/||u|| applied to the upstream grad
        dwrapped = self.code_scale * dcode
        du = np.zeros_like(u)
        uh = u[live] / nu[live][:, None]
        proj = np.einsum("ij,ij->i", uh, dwrapped[live])
        du[live] = (nx[live] / nu[live])[:, None] * (dwrapped[live] - proj[:, None] * uh)
        enc_grads, _ = self._backprop(self.enc, enc_acts, du, dact)

        grads = []
        for gw, gb in enc_grads:
            grads += [gw, gb]
        grads.append(d_head)
        for gw, gb in dec_grads:
            grads += [gw, gb]
        return total, parts, grads

    def _backprop(self, layers, acts, dout, dact):
        grads = [None] * len(layers)
        d = dout
        for k in range(len(layers) - 1, -1, -1):
            w, _ = layers[k]
            if k < len(layers) - 1:
                d = d * dact(acts[k + 1])
            grads[k] = (d.T @ acts[k], d.sum(axis=0))
            d = d @ w
        return grads, d

    def loss(self, xs, labels, cfg):
        total, parts, _ = self.loss_and_grads(xs, labels, cfg, need_grads=False)
        return total, parts

    # -- structure -------------------------------------------------------
    def extract_head_svd(self):
        return svd(self.head)

    def rescale_latent(self, c):
        """The S = cI reparameterization: code * c, K / c, decoder input / c."""
        if not c > 0:
            raise InvalidScale(f"scale must be positive, got {c}")
        net = self.copy()
        net.code_scale = self.code_scale * c
        net.head = self.head / c
        net.decoder_in_scale = self.decoder_in_scale / c
        return net

    def lipschitz_upper_bound(self):
        """Product bound for the chain x -> K code_scale g0(x).

        Activations are 1-Lipschitz. The norm wrapper is not covered by the
        product rule and is left out.
        """
        bound = abs(self.code_scale) * spectral_norm(self.head)
        for w, _ in self.enc:
            bound *= spectral_norm(w)
        return float(bound)

    # -- blackbox view ---------------------------------------------------
    def as_blackbox(self, name="svdnet"):
        from .blackbox import BlackBox

        return BlackBox(lambda x: self.logits(x[None])[0], self.d_in, self.num_classes,
                        batch_fn=self.logits, reentrant=True, name=name)

    # -- checkpoint ------------------------------------------------------
    def header(self, extra=None):
        h = {
            "format": "SVDNET1",
            "activation": self.activation,
            "code_scale": self.code_scale,
            "decoder_in_scale": self.decoder_in_scale,
            "norm_floor": self.norm_floor,
            "enc_shapes": [list(w.shape) for w, _ in self.enc],
            "head_shape": list(self.head.shape),
            "dec_shapes": [list(w.shape) for w, _ in self.dec],
        }
        if extra:
            h.update(extra)
        return h

    def save(self, path, extra=None):
        head = json.dumps(self.header(extra), sort_keys=True).encode("utf-8")
        blob = np.concatenate([p.ravel() for p in self.params()]).astype("<f8").tobytes()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(head)))
            fh.write(head)
            fh.write(blob)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        if not raw.startswith(MAGIC):
            raise FormatError("not an SVDNET1 checkpoint")
        off = len(MAGIC)
        (hlen,) = struct.unpack_from("<Q", raw, off)
        off += 8
        header = json.loads(raw[off : off + hlen].decode("utf-8"))
        off += hlen
        flat = np.frombuffer(raw[off:], dtype="<f8").astype(np.float64)

        pos = 0

        def take(shape):
            nonlocal pos
            size = int(np.prod(shape))
            if pos + size > len(flat):
                raise FormatError("checkpoint weight blob is truncated")
            out = flat[pos : pos + size].reshape(shape).copy()
            pos += size
            return out

        enc = [(take(s), take((s[0],))) for s in header["enc_shapes"]]
        head = take(header["head_shape"])
        dec = [(take(s), take((s[0],))) for s in header["dec_shapes"]]
        if pos != len(flat):
            raise FormatError("checkpoint weight blob has trailing data")
        net = cls(enc, head, dec, activation=header["activation"], code_scale=header["code_scale"],
                  decoder_in_scale=header["decoder_in_scale"], norm_floor=header["norm_floor"])
        return net, header

    def fingerprint(self):
        h = hashlib.sha256()
        for p in self.params():
            h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass
class TrainHistory:
    initial_parts: tuple
    final_parts: tuple
    epoch_totals: list


def train(xs, labels, cfg=None, net_cfg=None, num_classes=None, net=None):
    """Joint Adam training of encoder, head and decoder. Returns (net, history)."""
    cfg = cfg or TrainConfig()
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    labels = np.asarray(labels, dtype=int)
    if len(xs) == 0 or len(xs) != len(labels):
        raise InvalidInput("need a nonempty labeled dataset")
    c = num_classes or int(labels.max()) + 1
    if net is None:
        net = SvdNet.init(xs.shape[1], c, net_cfg, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)
    opt = Adam(lr=cfg.learning_rate)
    _, initial, _ = net.loss_and_grads(xs, labels, cfg, need_grads=False)
    totals = []
    params = net.params()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(xs))
        acc = 0.0
        for start in range(0, len(xs), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            total, _, grads = net.loss_and_grads(xs[idx], labels[idx], cfg)
            if not np.isfinite(total) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            opt.step(params, grads)
            acc += total * len(idx)
        totals.append(acc / len(xs))
    _, final, _ = net.loss_and_grads(xs, labels, cfg, need_grads=False)
    return net, TrainHistory(tuple(initial), tuple(final), totals)


def config_dict(cfg):
    d = asdict(cfg)
    if "loss_weights" in d:
        d["loss_weights"] = list(d["loss_weights"])
    if "hidden" in d:
        d["hidden"] = list(d["hidden"])
    return d
