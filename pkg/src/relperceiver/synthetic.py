"""Synthetic relational databases with planted, rule-computable labels.

Schema (five tables, three foreign keys)::

    users(user_id, signup_time, age, region)
    items(item_id, listed_time, category, price, title)
    events(event_id, user_id -> users, item_id -> items, event_time, amount, channel)
    sources(source_id, created_time, kind)
    signals(signal_id, source_id -> sources, signal_time, level)

Users are split into premium-leaning and basic-leaning buyers, and into
spend levels.  Signals follow a two-state regime process that no user is
connected to, so any label tied to it is visible only by temporal
proximity.  Each task label is a closed-form function of the graph and the
seed time (see :func:`label_rule`); the generator writes it next to the
tables together with temporal train/val/test boundaries.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .sampling import SamplerConfig, SeedQuery, sample_structural, sample_temporal
from .store import load_graph

BASE_TIME = 1_600_000_000
DAY = 86400
CATEGORIES = ("premium", "basic", "outlet", "seasonal")
REGIONS = ("north", "south", "east", "west")
CHANNELS = ("web", "app", "store")

TASKS = {
    "premium": dict(
        kind="binary",
        description="predict whether the customer mostly buys premium items",
        labels=("customer mostly buys ordinary items", "customer mostly buys premium items")),
    "spender": dict(
        kind="binary",
        description="predict whether the customer spends a large amount per purchase",
        labels=("customer spends small amounts", "customer spends large amounts")),
    "regime": dict(
        kind="binary",
        description="predict whether the customer will be active in the current market",
        labels=("customer will stay quiet", "customer will become active")),
    "mixed": dict(
        kind="binary",
        description="predict whether the customer will upgrade given habits and market mood",
        labels=("customer keeps the current plan", "customer upgrades the plan")),
    "favorite_category": dict(
        kind="multiclass",
        description="predict the item category the customer buys most",
        labels=tuple(f"customer prefers {c} products" for c in CATEGORIES)),
    "category_rank": dict(
        kind="ranking",
        description="rank item categories by how often the customer buys them",
        labels=tuple(f"{c} category ranked first" for c in CATEGORIES)),
    "recent_spend": dict(
        kind="regression",
        description="estimate the average purchase amount of the customer",
        labels=()),
}

DEFAULT_TASKS = {
    "structural": ("premium",),
    "temporal_nonlocal": ("regime",),
    "mixed": ("mixed",),
}


@dataclass
class SyntheticSpec:
    signal: str = "structural"
    n_users: int = 400
    n_items: int = 60
    n_sources: int = 4
    events_per_user: float = 12.0
    n_signals: int = 1500
    horizon_days: float = 360.0
    regime_dwell_days: float = 8.0
    noise: float = 0.0
    tasks: tuple = ()
    examples_per_task: int = 2400
    task_sizes: dict = field(default_factory=dict)
    hops: int = 2
    neighbors_per_hop: int = 10
    edges_per_type: int = 10
    structural_weight: float = 0.8
    train_fraction: float = 0.7
    val_fraction: float = 0.15

    def __post_init__(self):
        if self.signal not in DEFAULT_TASKS:
            raise ValueError(f"signal must be one of {sorted(DEFAULT_TASKS)}")
        self.tasks = tuple(self.tasks) or DEFAULT_TASKS[self.signal]
        for t in self.tasks:
            if t not in TASKS:
                raise ValueError(f"unknown task {t!r}")

    @property
    def sampler(self):
        return SamplerConfig(hops=self.hops, neighbors_per_hop=self.neighbors_per_hop,
                             edges_per_type=self.edges_per_type)


MANIFEST = """\
[table users]
file = users.csv
pkey = user_id
time_column = signup_time
columns = signup_time:timestamp, age:numerical, region:categorical

[table items]
file = items.csv
pkey = item_id
time_column = listed_time
columns = listed_time:timestamp, category:categorical, price:numerical, title:text

[table events]
file = events.csv
pkey = event_id
time_column = event_time
columns = user_id:categorical, item_id:categorical, event_time:timestamp, amount:numerical, channel:categorical

[table sources]
file = sources.csv
pkey = source_id
time_column = created_time
columns = created_time:timestamp, kind:categorical

[table signals]
file = signals.csv
pkey = signal_id
time_column = signal_time
columns = source_id:categorical, signal_time:timestamp, level:numerical

[relations]
events.user_id -> users
events.item_id -> items
signals.source_id -> sources
"""


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    return repr(round(float(x), 6))


def _tables(spec, rng):
    horizon = spec.horizon_days * DAY
    t_end = BASE_TIME + horizon
    users, items, events, sources, signals = [], [], [], [], []
    premium_pref = rng.random(spec.n_users) < 0.5
    spend = rng.normal(0.0, 0.6, size=spec.n_users)
    signup = BASE_TIME + rng.uniform(0.0, 0.5 * horizon, size=spec.n_users)
    age = rng.normal(40.0, 12.0, size=spec.n_users)
    for u in range(spec.n_users):
        users.append((f"u{u}", int(signup[u]), _fmt(age[u]), REGIONS[rng.integers(len(REGIONS))]))
    cat = np.array([CATEGORIES[i % len(CATEGORIES)] for i in range(spec.n_items)])
    rng.shuffle(cat)
    for i in range(spec.n_items):
        price = rng.lognormal(3.0 + (cat[i] == "premium"), 0.3)
        title = f"{cat[i]} item {rng.choice(['classic', 'modern', 'deluxe', 'simple'])}"
        items.append((f"i{i}", int(BASE_TIME - 30 * DAY), cat[i], _fmt(price), title))
    premium_items = np.flatnonzero(cat == "premium")
    other_items = np.flatnonzero(cat != "premium")
    ev = []
    for u in range(spec.n_users):
        n = rng.poisson(spec.events_per_user)
        times = np.sort(rng.uniform(signup[u], t_end, size=n))
        p = 0.85 if premium_pref[u] else 0.15
        for t in times:
            pool = premium_items if rng.random() < p else other_items
            item = pool[rng.integers(len(pool))]
            amount = math.exp(3.0 + spend[u] + rng.normal(0.0, 0.3))
            ev.append((t, u, item, amount, CHANNELS[rng.integers(len(CHANNELS))]))
    ev.sort(key=lambda r: r[0])
    for e, (t, u, item, amount, ch) in enumerate(ev):
        events.append((f"e{e}", f"u{u}", f"i{item}", int(t), _fmt(amount), ch))
    for s in range(spec.n_sources):
        sources.append((f"s{s}", int(BASE_TIME - DAY), ["news", "index", "survey"][s % 3]))
    # two-state regime switching as a Poisson process
    switches = [BASE_TIME - 10 * DAY]
    while switches[-1] < t_end:
        switches.append(switches[-1] + rng.exponential(spec.regime_dwell_days * DAY))
    state0 = 1.0 if rng.random() < 0.5 else -1.0
    sig_t = np.sort(rng.uniform(BASE_TIME, t_end, size=spec.n_signals))
    seg = np.searchsorted(switches, sig_t, side="right") - 1
    regime = np.where(seg % 2 == 0, state0, -state0)
    level = regime + rng.normal(0.0, 0.5, size=spec.n_signals)
    for s in range(spec.n_signals):
        signals.append((f"g{s}", f"s{rng.integers(spec.n_sources)}", int(sig_t[s]), _fmt(level[s])))
    return {
        "users": (("user_id", "signup_time", "age", "region"), users),
        "items": (("item_id", "listed_time", "category", "price", "title"), items),
        "events": (("event_id", "user_id", "item_id", "event_time", "amount", "channel"), events),
        "sources": (("source_id", "created_time", "kind"), sources),
        "signals": (("signal_id", "source_id", "signal_time", "level"), signals),
    }


class RuleContext:
    """Graph-derived lookups shared by all label rules of a dataset."""

    def __init__(self, graph, spec):
        self.graph = graph
        self.spec = spec
        self.sampler = spec.sampler
        a = graph.attributes
        self.item_cat = np.asarray(a["items"]["category"], dtype=object)
        self.amount = np.asarray(a["events"]["amount"], dtype=np.float64)
        self.amount_threshold = float(np.median(self.amount)) if self.amount.size else 0.0
        self.level = np.asarray(a["signals"]["level"], dtype=np.float64)
        ages = np.asarray(a["users"]["age"], dtype=np.float64)
        self.age_z = (ages - ages.mean()) / (ages.std() or 1.0)
        off = graph.node_offsets
        self.items_off = int(off[graph.node_types.index("items")])
        self.events_off = int(off[graph.node_types.index("events")])
        self.signals_off = int(off[graph.node_types.index("signals")])
        self.users_off = int(off[graph.node_types.index("users")])
        self.signal_rel = graph.relations.index(("signals", "source_id", "sources"))

    def neighborhood(self, node, t):
        nodes, hops = sample_structural(self.graph, SeedQuery(node, t), self.sampler)
        types = self.graph.node_type[nodes]
        ev = nodes[(hops == 1) & (types == self.graph.node_types.index("events"))]
        it = nodes[(hops == 2) & (types == self.graph.node_types.index("items"))]
        return ev, it

    def recent_signal_levels(self, node, t):
        _, edges = sample_temporal(self.graph, SeedQuery(node, t), self.sampler)
        edges = edges[self.graph.edge_rel[edges] == self.signal_rel]
        sig = self.graph.edge_src[edges]
        return self.level[sig - self.signals_off]


def label_rule(task, ctx, user_node, t):
    """Closed-form label of ``task`` for a user at seed time ``t``.

    premium: more than half of the distinct items reached at hop 2 are premium.
    spender: mean amount of hop-1 events exceeds the dataset median amount.
    regime: mean level of the ``edges_per_type`` latest signals plus
        ``structural_weight`` times the user's standardized age is positive.
    mixed: 4 * (premium fraction - 0.5) plus the mean recent signal level is positive.
    favorite_category / category_rank: most frequent category among hop-2
        items, ties to the earlier category.
    recent_spend: mean amount of hop-1 events.
    Returns None when the rule is undefined (no purchase history).
    """
    ev, it = ctx.neighborhood(user_node, t)
    name = task
    if name in ("premium", "mixed", "favorite_category", "category_rank"):
        if it.size == 0:
            return None
        cats = ctx.item_cat[it - ctx.items_off]
        frac = float(np.mean(cats == "premium"))
        if name == "premium":
            return int(frac > 0.5)
        if name == "mixed":
            lv = ctx.recent_signal_levels(user_node, t)
            return int(4.0 * (frac - 0.5) + (lv.mean() if lv.size else 0.0) > 0)
        counts = [int(np.sum(cats == c)) for c in CATEGORIES]
        return int(np.argmax(counts))
    if name in ("spender", "recent_spend"):
        if ev.size == 0:
            return None
        m = float(ctx.amount[ev - ctx.events_off].mean())
        return int(m > ctx.amount_threshold) if name == "spender" else m
    if name == "regime":
        lv = ctx.recent_signal_levels(user_node, t)
        if lv.size == 0:
            return None
        z = ctx.age_z[user_node - ctx.users_off]
        return int(lv.mean() + ctx.spec.structural_weight * z > 0)
    raise ValueError(task)


def _noisy(label, kind, noise, rng, n_labels):
    if noise <= 0:
        return label
    if kind == "regression":
        return label * float(np.exp(rng.normal(0.0, noise)))
    if rng.random() < noise:
        if kind == "binary":
            return 1 - label
        return int(rng.integers(n_labels))
    return label


def generate_dataset(spec, seed, out_dir):
    """Write tables, ``schema.ini``, ``tasks.ini``, task label files and ``spec.json``."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    tables = _tables(spec, rng)
    for name, (header, rows) in tables.items():
        _write_csv(os.path.join(out_dir, f"{name}.csv"), header, rows)
    with open(os.path.join(out_dir, "schema.ini"), "w", encoding="utf-8") as fh:
        fh.write(MANIFEST)
    graph = load_graph(os.path.join(out_dir, "schema.ini"))
    ctx = RuleContext(graph, spec)
    horizon = spec.horizon_days * DAY
    t_lo = BASE_TIME + 0.1 * horizon
    t_hi = BASE_TIME + horizon
    t1 = int(t_lo + spec.train_fraction * (t_hi - t_lo))
    t2 = int(t_lo + (spec.train_fraction + spec.val_fraction) * (t_hi - t_lo))
    signup = graph.node_time[ctx.users_off:ctx.users_off + spec.n_users]
    sections = []
    for task in spec.tasks:
        info = TASKS[task]
        n_target = spec.task_sizes.get(task, spec.examples_per_task)
        rows = []
        attempts = 0
        while len(rows) < n_target and attempts < 20 * n_target:
            attempts += 1
            u = int(rng.integers(spec.n_users))
            t = int(rng.uniform(max(signup[u], t_lo), t_hi))
            label = label_rule(task, ctx, ctx.users_off + u, t)
            if label is None:
                continue
            label = _noisy(label, info["kind"], spec.noise, rng, len(info["labels"]))
            rows.append((f"u{u}", t, _fmt(label) if info["kind"] == "regression" else label))
        rows.sort(key=lambda r: (r[1], r[0]))
        fname = f"task_{task}.csv"
        _write_csv(os.path.join(out_dir, fname), ("user_id", "seed_time", "label"), rows)
        labels = " | ".join(info["labels"])
        sections.append(
            f"[task {task}]\nkind = {info['kind']}\ndescription = {info['description']}\n"
            f"labels = {labels}\ntarget_table = users\nentity_column = user_id\n"
            f"time_column = seed_time\ntarget_column = label\nfile = {fname}\n"
            f"train_end = {t1}\nval_end = {t2}\n")
    with open(os.path.join(out_dir, "tasks.ini"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(sections))
    with open(os.path.join(out_dir, "spec.json"), "w", encoding="utf-8") as fh:
        json.dump({"seed": seed, **asdict(spec)}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def audit_nonlocal(graph, spec, seeds):
    """Fraction of label-determining signal nodes outside each seed's
    ``hops``-hop neighborhood (unrestricted BFS, ignoring time and caps)."""
    ctx = RuleContext(graph, spec)
    from collections import deque
    adj = [[] for _ in range(graph.num_nodes)]
    for s, d in zip(graph.edge_src.tolist(), graph.edge_dst.tolist()):
        adj[s].append(d)
        adj[d].append(s)
    outside = total = 0
    for node, t in seeds:
        dist = {node: 0}
        q = deque([node])
        while q:
            x = q.popleft()
            if dist[x] == spec.hops:
                continue
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    q.append(y)
        _, edges = sample_temporal(graph, SeedQuery(node, t), spec.sampler)
        edges = edges[graph.edge_rel[edges] == ctx.signal_rel]
        for sig in graph.edge_src[edges].tolist():
            total += 1
            outside += sig not in dist
    return outside / total if total else 1.0
