"""Training and evaluation of relational perceiver runs."""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .decoder import TaskSpec, task_loss
from .features import TextEmbedder
from .metrics import HIGHER_IS_BETTER, METRIC_NAMES, evaluate
from .model import build_model
from .optim import AdamW
from .sampling import SeedQuery, sample_context
from .store import load_graph

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("run_id", "task_id", "metric_name", "value", "epoch", "wall_ms")


class NoTasks(ValueError):
    pass


class SplitLeakage(AssertionError):
    pass


@dataclass
class Split:
    nodes: np.ndarray
    times: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return len(self.nodes)

    def subset(self, idx):
        return Split(self.nodes[idx], self.times[idx], self.targets[idx])


@dataclass
class TaskData:
    spec: TaskSpec
    train: Split
    val: Split
    test: Split
    train_end: float
    val_end: float
    target_shift: float = 0.0
    target_scale: float = 1.0


def load_tasks(path, graph, embedder, names=None):
    """Parse a task manifest and split each task's examples by seed time."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    root = os.path.dirname(os.path.abspath(path))
    tasks = []
    for section in parser.sections():
        kind, _, task_id = section.partition(" ")
        if kind != "task":
            continue
        task_id = task_id.strip()
        if names and task_id not in names:
            continue
        body = parser[section]
        labels = [l.strip() for l in body.get("labels", "").split("|") if l.strip()]
        spec = TaskSpec.create(task_id, body["kind"], body["description"], labels, embedder).validate()
        nodes, times, targets = [], [], []
        with open(os.path.join(root, body["file"]), encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                nodes.append(graph.node_id(body["target_table"], row[body["entity_column"]]))
                times.append(float(row[body["time_column"]]))
                targets.append(row[body["target_column"]])
        nodes = np.asarray(nodes, dtype=np.int64)
        times = np.asarray(times, dtype=np.float64)
        dtype = np.float64 if spec.kind == "regression" else np.int64
        targets = np.asarray([float(t) for t in targets]).astype(dtype)
        t1, t2 = float(body["train_end"]), float(body["val_end"])
        tr, va, te = times < t1, (times >= t1) & (times < t2), times >= t2
        full = Split(nodes, times, targets)
        data = TaskData(spec, full.subset(tr), full.subset(va), full.subset(te), t1, t2)
        if spec.kind == "regression" and len(data.train):
            data.target_shift = float(np.median(data.train.targets))
            data.target_scale = float(np.mean(np.abs(data.train.targets - data.target_shift))) or 1.0
        tasks.append(data)
    if names:
        missing = set(names) - {t.spec.task_id for t in tasks}
        if missing:
            raise NoTasks(f"tasks not in manifest: {sorted(missing)}")
    if not tasks:
        raise NoTasks(path)
    return tasks


def audit_split(task):
    """Raise if any training seed time reaches the training boundary."""
    if len(task.train) and task.train.times.max() >= task.train_end:
        raise SplitLeakage(f"{task.spec.task_id}: training seed time >= {task.train_end}")
    if len(task.val) and (task.val.times.min() < task.train_end or task.val.times.max() >= task.val_end):
        raise SplitLeakage(f"{task.spec.task_id}: validation seeds outside [t1, t2)")
    if len(task.test) and task.test.times.min() < task.val_end:
        raise SplitLeakage(f"{task.spec.task_id}: test seed before t2")


class ContextCache:
    """Memoized deterministic sampling per (seed node, seed time)."""

    def __init__(self, graph, sampler, temporal=True, rng=None):
        self.graph = graph
        self.sampler = sampler
        self.temporal = temporal
        self.rng = rng
        self._memo = {}

    def get(self, nodes, times):
        out = []
        for n, t in zip(nodes.tolist(), times.tolist()):
            if self.sampler.stochastic and self.temporal:
                out.append(sample_context(self.graph, SeedQuery(n, t), self.sampler, self.rng))
                continue
            key = (n, t)
            ctx = self._memo.get(key)
            if ctx is None:
                ctx = sample_context(self.graph, SeedQuery(n, t), self.sampler, temporal=self.temporal)
                self._memo[key] = ctx
            out.append(ctx)
        return out


def mix_batches(sizes, batch_size, rng):
    """Interleave per-task shuffled batches proportionally to task size.

    Returns a list of ``(task_index, example_indices)``.
    """
    items = []
    for ti, n in enumerate(sizes):
        perm = rng.permutation(n)
        chunks = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
        for j, c in enumerate(chunks):
            items.append(((j + 0.5) / len(chunks), ti, c))
    items.sort(key=lambda x: (x[0], x[1]))
    return [(ti, c) for _, ti, c in items]


def _forward(model, cache, task, split, idx):
    contexts = cache.get(split.nodes[idx], split.times[idx])
    return model(contexts, split.times[idx], task.spec)


def _targets(task, split, idx):
    y = split.targets[idx]
    if task.spec.kind == "regression":
        return (y - task.target_shift) / task.target_scale
    return y


def predict(model, cache, task, split, batch_size=1024):
    """Decoder outputs for a split in evaluation mode: logits or de-normalized values."""
    was = model.training
    model.eval()
    outs = []
    with T.no_grad():
        for i in range(0, len(split), batch_size):
            idx = np.arange(i, min(i + batch_size, len(split)))
            outs.append(_forward(model, cache, task, split, idx).outputs)
    model.train(was)
    if not outs:
        return np.zeros((0,))
    out = np.concatenate(outs, axis=0)
    if task.spec.kind == "regression":
        out = out * task.target_scale + task.target_shift
    return out


def evaluate_split(model, cache, task, split, batch_size=1024):
    return evaluate(predict(model, cache, task, split, batch_size), split.targets, task.spec.kind)


def mean_loss(model, cache, task, split, batch_size=1024):
    """Mean training objective over a split in evaluation mode."""
    was = model.training
    model.eval()
    total = 0.0
    with T.no_grad():
        for i in range(0, len(split), batch_size):
            idx = np.arange(i, min(i + batch_size, len(split)))
            pred = _forward(model, cache, task, split, idx)
            total += float(task_loss(pred, _targets(task, split, idx), task.spec).data) * len(idx)
    model.train(was)
    return total / max(len(split), 1)


def _score(metric, value):
    return value if HIGHER_IS_BETTER[metric] else -value


def _fmt(v):
    return repr(float(v))


def default_run_id(cfg):
    text = cfg.replace(run_id="", out="").to_text()
    return hashlib.sha1(text.encode()).hexdigest()[:10]


@dataclass
class RunResult:
    run_id: str
    checkpoint: str
    metrics_csv: str
    history: list
    test: dict
    val: dict
    best_epoch: int
    wall_s: float
    model: object = field(default=None, repr=False)
    tasks: list = field(default=None, repr=False)


class Session:
    """Everything one run needs, built from its configuration."""

    def __init__(self, cfg, graph=None):
        self.cfg = cfg
        self.graph = graph if graph is not None else load_graph(
            os.path.join(cfg.data, "schema.ini"), cfg.combine)
        self.embedder = TextEmbedder(cfg.hidden_dim, seed=0)
        self.tasks = load_tasks(os.path.join(cfg.data, "tasks.ini"), self.graph, self.embedder,
                                cfg.task_list or None)
        if cfg.mode == "single_task" and len(self.tasks) > 1:
            raise ValueError("single_task mode needs exactly one task; pass tasks=<id>")
        for t in self.tasks:
            audit_split(t)
        self.model = build_model(self.graph, cfg.feature_config(), cfg.model_config(), cfg.seed)
        self.model.register_tasks([t.spec for t in self.tasks])
        self.rng = np.random.default_rng(cfg.seed + 1)
        self.cache = ContextCache(self.graph, cfg.sampler_config(), not cfg.no_temporal_sampler,
                                  np.random.default_rng(cfg.seed + 2))
        self.eval_cache = ContextCache(self.graph, cfg.sampler_config().__class__(
            **{**cfg.sampler_config().__dict__, "stochastic": False}), not cfg.no_temporal_sampler)


def train(cfg, graph=None, save=True, progress=None):
    """Train per ``cfg``; keep the best-validation parameters; report test metrics."""
    t_start = time.perf_counter()
    sess = Session(cfg, graph)
    model, tasks = sess.model, sess.tasks
    run_id = cfg.run_id or default_run_id(cfg)
    sizes = [len(t.train) for t in tasks]
    if not any(sizes):
        raise NoTasks("no training examples")
    steps_per_epoch = sum(-(-n // cfg.batch_size) for n in sizes)
    params = model.named_parameters()
    opt = AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay, warmup_steps=cfg.warmup_steps,
                total_steps=cfg.epochs * steps_per_epoch)
    rows = []
    history = []

    def wall():
        return 0 if cfg.deterministic else int((time.perf_counter() - t_start) * 1000)

    best = (-np.inf, -1, None, None)
    model.train()
    for epoch in range(cfg.epochs):
        losses = {t.spec.task_id: [] for t in tasks}
        for ti, idx in mix_batches(sizes, cfg.batch_size, sess.rng):
            task = tasks[ti]
            pred = _forward(model, sess.cache, task, task.train, idx)
            loss = task_loss(pred, _targets(task, task.train, idx), task.spec)
            opt.zero_grad()
            T.backward(loss)
            opt.step()
            losses[task.spec.task_id].append(float(loss.data))
        entry = {"epoch": epoch, "train_loss": {}, "val": {}}
        scores = []
        for task in tasks:
            tid = task.spec.task_id
            tl = float(np.mean(losses[tid])) if losses[tid] else float("nan")
            entry["train_loss"][tid] = tl
            rows.append((run_id, tid, "train_loss", _fmt(tl), epoch, wall()))
            if len(task.val):
                metric = METRIC_NAMES[task.spec.kind]
                v = evaluate_split(model, sess.eval_cache, task, task.val, cfg.eval_batch_size)
                entry["val"][tid] = v
                scores.append(_score(metric, v))
                rows.append((run_id, tid, f"val_{metric}", _fmt(v), epoch, wall()))
        history.append(entry)
        score = float(np.mean(scores)) if scores else -float(np.mean(list(entry["train_loss"].values())))
        if progress:
            progress(entry)
        if score > best[0]:
            best = (score, epoch, model.state_dict(),
                    ({k: v.copy() for k, v in opt.state.m.items()},
                     {k: v.copy() for k, v in opt.state.v.items()}, opt.state.step))
    _, best_epoch, state, opt_snapshot = best
    model.load_state_dict(state)
    test = {}
    val = {}
    for task in tasks:
        tid = task.spec.task_id
        metric = METRIC_NAMES[task.spec.kind]
        if len(task.val):
            val[tid] = evaluate_split(model, sess.eval_cache, task, task.val, cfg.eval_batch_size)
        if len(task.test):
            test[tid] = evaluate_split(model, sess.eval_cache, task, task.test, cfg.eval_batch_size)
            rows.append((run_id, tid, f"test_{metric}", _fmt(test[tid]), best_epoch, wall()))
    wall_s = 0.0 if cfg.deterministic else time.perf_counter() - t_start
    ckpt_path = metrics_path = ""
    if save:
        os.makedirs(cfg.out, exist_ok=True)
        ckpt_path = os.path.join(cfg.out, f"{run_id}.ckpt")
        metrics_path = os.path.join(cfg.out, f"{run_id}.metrics.csv")
        write_metrics(metrics_path, rows)
        blobs = {f"param/{k}": v for k, v in state.items()}
        m, v, step = opt_snapshot
        blobs.update({f"adam_m/{k}": a for k, a in m.items()})
        blobs.update({f"adam_v/{k}": a for k, a in v.items()})
        header = {
            "run_id": run_id, "config": cfg.replace(out="").to_text(), "epoch": best_epoch,
            "optimizer_step": step,
            "history": history, "test": test, "val": val, "wall_s": wall_s,
            "tasks": {t.spec.task_id: {"kind": t.spec.kind, "shift": t.target_shift,
                                       "scale": t.target_scale} for t in tasks},
        }
        save_checkpoint(ckpt_path, blobs, header)
    return RunResult(run_id, ckpt_path, metrics_path, history, test, val, best_epoch, wall_s,
                     model, tasks)


def write_metrics(path, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    w.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def restore(checkpoint_path, data=None, graph=None):
    """Rebuild the session of a checkpoint and load its best parameters."""
    blobs, header = load_checkpoint(checkpoint_path)
    overrides = {"data": data} if data else {}
    cfg = RunConfig.from_text(header["config"], **overrides)
    sess = Session(cfg, graph)
    state = {k[len("param/"):]: v for k, v in blobs.items() if k.startswith("param/")}
    sess.model.load_state_dict(state)
    for t in sess.tasks:
        info = header["tasks"].get(t.spec.task_id, {})
        t.target_shift = info.get("shift", t.target_shift)
        t.target_scale = info.get("scale", t.target_scale)
    return sess, header


def evaluate_checkpoint(checkpoint_path, split="test", data=None, graph=None):
    sess, header = restore(checkpoint_path, data, graph)
    out = {}
    for task in sess.tasks:
        part = getattr(task, split)
        if len(part):
            out[task.spec.task_id] = evaluate_split(sess.model, sess.eval_cache, task, part,
                                                    sess.cfg.eval_batch_size)
    return out
