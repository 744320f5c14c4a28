"""Run orchestration behind the CLI subcommands.

Stages read earlier artifacts from the output directory when present and
otherwise recompute them; everything is seeded, so both routes agree.
"""
import csv
import io
import os
import platform
from dataclasses import dataclass

import numpy as np

from . import __version__, jsonio
from .analysis import bias_sweep, canonical_blackbox, format_table, validate
from .attack import AttackConfig, run_attack, summarize
from .config import dump_config
from .data import Dataset, read_idx, synth_blobs
from .errors import DegenerateDataset
from .gsvd import GsvdModel, construct
from .svdnet import NetConfig, SvdNet, TrainConfig, config_dict, train
from .traversal import interpolate, null_sample, strip_bytes


@dataclass
class Splits:
    train: Dataset
    construct: Dataset
    holdout: Dataset


class Run:
    def __init__(self, cfg):
        self.cfg = cfg
        self.out = cfg.out
        os.makedirs(self.out, exist_ok=True)
        self._splits = None
        self._net = None

    def path(self, name):
        return os.path.join(self.out, name)

    # -- data --------------------------------------------------------
    def dataset(self):
        d = self.cfg.dataset
        if d.kind == "blobs":
            return synth_blobs(d.classes, d.per_class, d.dim, d.separation, seed=self.cfg.seed)
        data = read_idx(d.images, d.labels)
        if d.limit:
            data = data.subset(np.arange(min(d.limit, len(data))))
        return data

    def splits(self):
        if self._splits is None:
            data = self.dataset()
            s = self.cfg.split
            need = s.train + s.construct + s.holdout
            if len(data) < need:
                raise DegenerateDataset(f"dataset has {len(data)} rows, splits need {need}")
            order = np.random.default_rng(self.cfg.seed).permutation(len(data))
            a, b = s.train, s.train + s.construct
            self._splits = Splits(data.subset(order[:a], "train"), data.subset(order[a:b], "construct"),
                                  data.subset(order[b:need], "holdout"))
        return self._splits

    def image_shape(self):
        data = self.splits().train
        return data.image_shape or (1, data.d_in)

    # -- configs -----------------------------------------------------
    def train_config(self):
        t = self.cfg.train
        return TrainConfig(epochs=t.epochs, batch_size=t.batch_size, learning_rate=t.learning_rate,
                           on_value=t.on_value, off_value=t.off_value, sv_cutoff=t.sv_cutoff,
                           loss_weights=tuple(t.loss_weights), seed=self.cfg.seed)

    def net_config(self):
        n = self.cfg.net
        return NetConfig(hidden=tuple(n.hidden), encode_dim=n.encode_dim, activation=n.activation,
                         code_scale=n.code_scale)

    def attack_config(self):
        a = self.cfg.attack
        return AttackConfig(step=a.step, budget=a.budget, fd_eps=a.fd_eps,
                            clip=None if a.clip is None else tuple(a.clip), central=a.central,
                            fixed_target=a.fixed_target)

    def _t(self, seconds):
        return seconds if self.cfg.timing else 0.0

    # -- stamps ------------------------------------------------------
    def stamp(self, subcommand):
        dump_config(self.cfg, self.path("config.json"))
        jsonio.dump({
            "subcommand": subcommand,
            "config_sha256": self.cfg.digest(),
            "seed": self.cfg.seed,
            "versions": {"gsvdlab": __version__, "numpy": np.__version__,
                         "python": platform.python_version()},
        }, self.path(f"stamp_{subcommand}.json"))

    # -- stages ------------------------------------------------------
    def train_svdnet(self):
        sp = self.splits()
        tcfg = self.train_config()
        net, hist = train(sp.train.x, sp.train.labels, tcfg, self.net_config(),
                          num_classes=max(sp.train.num_classes, sp.holdout.num_classes))
        net.save(self.path("svdnet.ckpt"), extra={"seed": self.cfg.seed, "train": config_dict(tcfg),
                                                  "net": config_dict(self.net_config())})
        metrics = {
            "initial_parts": list(hist.initial_parts),
            "final_parts": list(hist.final_parts),
            "train_accuracy": float(np.mean(net.predict(sp.train.x) == sp.train.labels)),
            "holdout_accuracy": float(np.mean(net.predict(sp.holdout.x) == sp.holdout.labels)),
            "head_sigma": [float(s) for s in net.extract_head_svd().s],
            "lipschitz_upper_bound": net.lipschitz_upper_bound(),
        }
        jsonio.dump(metrics, self.path("train_metrics.json"))
        self._net = net
        return net, metrics

    def net(self):
        if self._net is None:
            if os.path.exists(self.path("svdnet.ckpt")):
                self._net, _ = SvdNet.load(self.path("svdnet.ckpt"))
            else:
                self.train_svdnet()
        return self._net

    def blackbox(self, anchor=None):
        """The map under study, plus ground-truth gains when canonical."""
        net = self.net()
        truth = None
        if self.cfg.construction.canonical:
            box, truth = canonical_blackbox(net)
        else:
            box = net.as_blackbox()
        if anchor is not None:
            box = box.anchored(anchor)
        return box, truth

    def choose_anchor(self):
        mode = self.cfg.construction.anchor
        if mode == "none":
            return None
        mean = self.splits().construct.x.mean(axis=0)
        if mode == "mean":
            return mean
        box, _ = self.blackbox()
        return mean if np.any(box.evaluate(np.zeros(box.d_in)) != 0) else None

    def build_gsvd(self):
        c = self.cfg.construction
        box, truth = self.blackbox(self.choose_anchor())
        pts = box.to_local(self.splits().construct.x)
        q0 = box.query_count
        model, a_s, a_g = construct(box, pts, epsilon=c.epsilon, search=c.gain_search,
                                    seeds_per_coord=c.seeds_per_coord, steps=c.steps, lr=c.lr, fd_eps=c.fd_eps)
        model.save(self.path("gsvd.json"))
        gains = {"alpha_sampled": list(a_s), "construction_queries": box.query_count - q0}
        if a_g is not None:
            gains["alpha_searched"] = list(a_g)
        if truth is not None:
            gains["true_gains"] = list(truth)
        jsonio.dump(gains, self.path("gains.json"))
        return model, box

    def model(self):
        if not os.path.exists(self.path("gsvd.json")):
            return self.build_gsvd()
        model = GsvdModel.load(self.path("gsvd.json"))
        box, _ = self.blackbox(model.anchor)
        return model, box

    def validate(self, on="holdout"):
        model, box = self.model()
        sp = self.splits()
        data = sp.construct if on == "construct" else sp.holdout
        _, truth = self.blackbox()
        gains = jsonio.load(self.path("gains.json")) if os.path.exists(self.path("gains.json")) else {}
        report = validate(model, box, box.to_local(data.x), true_gains=truth,
                          sampled_alpha=gains.get("alpha_sampled"), searched_alpha=gains.get("alpha_searched"))
        report.wall_seconds = self._t(report.wall_seconds)
        d = report.to_dict()
        d["evaluated_on"] = on
        jsonio.dump(d, self.path("validation.json"))
        with open(self.path("validation.txt"), "w") as fh:
            fh.write(format_table(list(d.items()), "GSVD validation") + "\n")
        return report

    def attack(self):
        model, box = self.model()
        sp = self.splits()
        net = self.net()
        acfg = self.attack_config()
        pred = net.predict(sp.holdout.x)
        idx = np.flatnonzero(pred == sp.holdout.labels)[: self.cfg.attack.samples]
        results = []
        for i in idx:
            r = run_attack(model, box, sp.holdout.x[i], acfg)
            r.wall_ms = self._t(r.wall_ms)
            results.append(r)
        buf = io.StringIO()
        cols = ["sample_id", "source_idx", "target_idx", "success", "eta_norm", "probes", "queries", "wall_ms"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for i, r in zip(idx, results):
            row = r.row(int(i))
            row["eta_norm"] = format(row["eta_norm"], ".17g")
            row["wall_ms"] = format(row["wall_ms"], ".6f")
            w.writerow(row)
        with open(self.path("attack.csv"), "w") as fh:
            fh.write(buf.getvalue())
        summary = summarize(results)
        jsonio.dump(summary, self.path("attack_summary.json"))
        return results, summary

    def bias_sweep(self):
        sp = self.splits()
        b = self.cfg.bias
        reports = bias_sweep(sp.train, sp.holdout, b.target_class, b.ratios, self.train_config(),
                             self.net_config(), seed=self.cfg.seed)
        series = [r.to_dict() for r in reports]
        jsonio.dump({"target_class": b.target_class, "series": series}, self.path("bias.json"))
        lines = ["sample_ratio,sigma_ratio,null_energy_fraction_minority,target_dominance"]
        for r in reports:
            lines.append(",".join(format(v, ".17g") for v in
                                  (r.sample_ratio, r.sigma_ratio, r.null_energy_fraction_minority, r.target_dominance)))
        with open(self.path("bias.csv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        return reports

    def traverse(self):
        net = self.net()
        t = self.cfg.traverse
        shape = self.image_shape()
        scale = self.cfg.train.on_value if t.scale_by_on_value else None
        samples = [null_sample(net, t.class_idx, t.noise_scale, seed=self.cfg.seed + k, scale_by_on_value=scale)
                   for k in range(t.samples)]
        c = net.num_classes
        y1 = np.eye(c)[t.y1_class]
        y2 = np.eye(c)[t.y2_class]
        if scale is not None:
            y1, y2 = scale * y1, scale * y2
        interp = interpolate(net, y1, y2, t.steps)
        with open(self.path("null_samples.pgm"), "wb") as fh:
            fh.write(strip_bytes([im for im, _ in samples], shape))
        with open(self.path("interpolation.pgm"), "wb") as fh:
            fh.write(strip_bytes(interp, shape))
        manifest = {
            "image_shape": list(shape),
            "null_samples": {"file": "null_samples.pgm", "count": t.samples, "class_idx": t.class_idx,
                             "noise_scale": t.noise_scale,
                             "logit_residual_max": max(float(np.linalg.norm(net.head @ code - (net.head @ samples[0][1])))
                                                       for _, code in samples)},
            "interpolation": {"file": "interpolation.pgm", "count": t.steps, "y1_class": t.y1_class,
                              "y2_class": t.y2_class},
        }
        jsonio.dump(manifest, self.path("traverse_manifest.json"))
        return manifest
