"""Relational tables to heterogeneous temporal graphs.

A schema manifest is an INI-style text document::

    [table users]
    file = users.csv
    pkey = user_id
    time_column = signup_time
    columns = signup_time:timestamp, age:numerical, region:categorical

    [table events]
    file = events.csv
    pkey = event_id
    time_column = event_time
    columns = user_id:categorical, event_time:timestamp, amount:numerical

    [relations]
    events.user_id -> users

Foreign-key columns are listed under ``columns`` like any other column and
are excluded from node attributes.  Cells are parsed per modality:
numerical as float64, categorical as string, text as string, timestamp as
RFC 3339 or integer epoch seconds.  An empty cell is null.
"""
from __future__ import annotations

import configparser
import csv
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

MODALITIES = ("numerical", "categorical", "text", "timestamp")


class SchemaError(ValueError):
    pass


class ParseError(SchemaError):
    pass


class MissingTable(SchemaError):
    pass


class MissingColumn(SchemaError):
    pass


class DuplicateColumn(SchemaError):
    pass


class DanglingForeignKey(ValueError):
    def __init__(self, table, row, column, value):
        super().__init__(f"{table} row {row}: {column}={value!r} matches no primary key")
        self.table, self.row, self.column, self.value = table, row, column, value


@dataclass(frozen=True)
class TableDef:
    name: str
    pkey_column: str
    columns: tuple  # ((name, modality), ...), excludes the primary key
    timestamp_column: str | None = None
    file: str | None = None

    def modality(self, column):
        for name, mod in self.columns:
            if name == column:
                return mod
        raise MissingColumn(f"{self.name}.{column}")

    @property
    def column_names(self):
        return [c for c, _ in self.columns]


@dataclass(frozen=True)
class RelationalSchema:
    tables: tuple
    relations: tuple  # ((source_table, fkey_column, target_table), ...)
    root: str = "."

    def __post_init__(self):
        names = [t.name for t in self.tables]
        if len(set(names)) != len(names):
            raise DuplicateColumn(f"duplicate table names in {names}")
        for t in self.tables:
            cols = [t.pkey_column] + t.column_names
            if len(set(cols)) != len(cols):
                raise DuplicateColumn(f"duplicate column in table {t.name}")
            ts = [c for c, m in t.columns if m == "timestamp"]
            if len(ts) > 1:
                raise ParseError(f"table {t.name} has more than one timestamp column: {ts}")
            if t.timestamp_column is not None and t.timestamp_column not in ts:
                raise MissingColumn(f"{t.name}.{t.timestamp_column} is not a timestamp column")
        by_name = {t.name: t for t in self.tables}
        for src, col, dst in self.relations:
            if src not in by_name:
                raise MissingTable(src)
            if dst not in by_name:
                raise MissingTable(dst)
            if not by_name[dst].pkey_column:
                raise MissingColumn(f"{dst} has no primary key")
            if col not in by_name[src].column_names:
                raise MissingColumn(f"{src}.{col}")

    def table(self, name):
        for t in self.tables:
            if t.name == name:
                return t
        raise MissingTable(name)

    def fkey_columns(self, table):
        return [c for s, c, _ in self.relations if s == table]

    def attribute_columns(self, table):
        """Columns that become node attributes: not a key, not the time column."""
        t = self.table(table)
        keys = set(self.fkey_columns(table))
        return [(c, m) for c, m in t.columns if c not in keys and c != t.timestamp_column]


def _split_list(value):
    return [v.strip() for v in value.replace("\n", ",").split(",") if v.strip()]


def parse_manifest(text, root="."):
    parser = configparser.ConfigParser(allow_no_value=True, delimiters=("=",),
                                       interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc
    tables = []
    relations = []
    for section in parser.sections():
        body = parser[section]
        if section == "relations":
            for line in body:
                if "->" not in line:
                    raise ParseError(f"bad relation line {line!r}")
                lhs, dst = (s.strip() for s in line.split("->", 1))
                if "." not in lhs:
                    raise ParseError(f"relation source must be table.column: {line!r}")
                src, col = lhs.split(".", 1)
                relations.append((src.strip(), col.strip(), dst))
            continue
        kind, _, name = section.partition(" ")
        if kind != "table" or not name.strip():
            raise ParseError(f"unknown section [{section}]")
        name = name.strip()
        if "pkey" not in body:
            raise ParseError(f"table {name} lacks pkey")
        columns = []
        for item in _split_list(body.get("columns", "") or ""):
            col, sep, mod = item.partition(":")
            if not sep or mod.strip() not in MODALITIES:
                raise ParseError(f"column {item!r} in {name} needs a modality in {MODALITIES}")
            columns.append((col.strip(), mod.strip()))
        names = [c for c, _ in columns] + [body["pkey"]]
        if len(set(names)) != len(names):
            raise DuplicateColumn(f"duplicate column in table {name}")
        time_col = body.get("time_column") or None
        ts = [c for c, m in columns if m == "timestamp"]
        if len(ts) > 1:
            raise ParseError(f"table {name} has more than one timestamp column: {ts}")
        if time_col is None and ts:
            time_col = ts[0]
        tables.append(TableDef(name, body["pkey"], tuple(columns), time_col, body.get("file")))
    return RelationalSchema(tuple(tables), tuple(relations), root=str(root))


def load_schema(path_or_text):
    """Parse a manifest file (or manifest text) and check referenced files exist."""
    if os.path.exists(str(path_or_text)):
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
        root = os.path.dirname(os.path.abspath(path_or_text))
        schema = parse_manifest(text, root)
        for t in schema.tables:
            if t.file and not os.path.exists(os.path.join(root, t.file)):
                raise MissingTable(f"{t.name}: file {t.file} not found")
        return schema
    return parse_manifest(path_or_text)


def parse_timestamp(cell):
    cell = cell.strip()
    if not cell:
        return math.nan
    try:
        return float(int(cell))
    except ValueError:
        pass
    text = cell.replace("Z", "+00:00").replace("z", "+00:00")
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ParseError(f"bad timestamp {cell!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def parse_cell(cell, modality):
    """Typed value for a CSV cell; ``None`` (or NaN for numbers/times) when empty."""
    if modality == "numerical":
        return float(cell) if cell.strip() else math.nan
    if modality == "timestamp":
        return parse_timestamp(cell)
    return cell if cell != "" else None


def read_tables(schema):
    """Read every table's CSV into ``{table: {column: list_of_raw_strings}}``."""
    out = {}
    for t in schema.tables:
        path = os.path.join(schema.root, t.file)
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            expected = [t.pkey_column] + t.column_names
            missing = [c for c in expected if c not in header]
            if missing:
                raise MissingColumn(f"{t.name}: header lacks {missing}")
            cols = {c: [] for c in header}
            for row in reader:
                for c, v in zip(header, row):
                    cols[c].append(v)
        out[t.name] = {c: cols[c] for c in expected}
    return out


@dataclass(frozen=True)
class NodeRecord:
    node_id: int
    type: str
    raw_attributes: dict
    timestamp: float | None


@dataclass(frozen=True)
class EdgeRecord:
    edge_id: int
    relation_type: tuple
    source: int
    target: int
    timestamp: float | None


def _opt(x):
    return None if math.isnan(x) else float(x)


@dataclass(eq=False)
class HeteroGraph:
    """Immutable typed temporal graph.

    Nodes carry global contiguous ids: tables in schema order, rows in file
    order.  Edges are stored per relation type; ``edge_id`` is dense within a
    relation type, and the global edge index is ``edge_offsets[r] + edge_id``.
    Missing timestamps are NaN.
    """

    schema: RelationalSchema
    node_types: tuple
    node_offsets: np.ndarray
    node_time: np.ndarray
    node_type: np.ndarray
    relations: tuple
    edge_offsets: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_time: np.ndarray
    edge_rel: np.ndarray
    attributes: dict = field(default_factory=dict)  # type -> {column: list}
    pkeys: dict = field(default_factory=dict)  # type -> list of raw pkey strings
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def num_nodes(self):
        return int(self.node_time.shape[0])

    @property
    def num_edges(self):
        return int(self.edge_src.shape[0])

    def num_nodes_of(self, ntype):
        i = self.node_types.index(ntype)
        return int(self.node_offsets[i + 1] - self.node_offsets[i])

    def num_edges_of(self, relation):
        r = self.relations.index(tuple(relation))
        return int(self.edge_offsets[r + 1] - self.edge_offsets[r])

    def type_of(self, node_id):
        return self.node_types[int(self.node_type[node_id])]

    def local_index(self, node_id):
        return int(node_id - self.node_offsets[self.node_type[node_id]])

    def node_id(self, ntype, pkey):
        lookup = self._cache.get(("pkey", ntype))
        if lookup is None:
            off = int(self.node_offsets[self.node_types.index(ntype)])
            lookup = {k: off + i for i, k in enumerate(self.pkeys[ntype])}
            self._cache[("pkey", ntype)] = lookup
        return lookup[str(pkey)]

    def node(self, node_id):
        if not 0 <= node_id < self.num_nodes:
            raise KeyError(node_id)
        ntype = self.type_of(node_id)
        li = self.local_index(node_id)
        attrs = {c: vals[li] for c, vals in self.attributes.get(ntype, {}).items()}
        return NodeRecord(int(node_id), ntype, attrs, _opt(self.node_time[node_id]))

    def edge(self, global_index):
        r = int(self.edge_rel[global_index])
        return EdgeRecord(int(global_index - self.edge_offsets[r]), self.relations[r],
                          int(self.edge_src[global_index]), int(self.edge_dst[global_index]),
                          _opt(self.edge_time[global_index]))

    def nodes(self, ntype):
        i = self.node_types.index(ntype)
        return [self.node(n) for n in range(int(self.node_offsets[i]), int(self.node_offsets[i + 1]))]

    def edges(self, relation):
        r = self.relations.index(tuple(relation))
        return [self.edge(e) for e in range(int(self.edge_offsets[r]), int(self.edge_offsets[r + 1]))]

    def with_edge_time(self, edge_time):
        return HeteroGraph(self.schema, self.node_types, self.node_offsets, self.node_time,
                           self.node_type, self.relations, self.edge_offsets, self.edge_src,
                           self.edge_dst, np.asarray(edge_time, dtype=np.float64),
                           self.edge_rel, self.attributes, self.pkeys)

    def cached(self, key, factory):
        """Per-graph memo for derived read-only indexes."""
        if key not in self._cache:
            self._cache[key] = factory(self)
        return self._cache[key]

    @classmethod
    def from_arrays(cls, node_counts, node_time, relations, edges, edge_time=None,
                    attributes=None):
        """Build a graph directly (tests, synthetic use).

        ``node_counts`` maps type -> count (ordered); ``relations`` is a list of
        ``(src_type, name, dst_type)``; ``edges`` maps relation -> list of
        ``(src_local, dst_local)``; ``edge_time`` optionally maps relation ->
        list of times (NaN for none).
        """
        types = tuple(node_counts)
        offsets = np.concatenate([[0], np.cumsum([node_counts[t] for t in types])]).astype(np.int64)
        ntype = np.repeat(np.arange(len(types)), [node_counts[t] for t in types]).astype(np.int64)
        tables = tuple(TableDef(t, "id", ()) for t in types)
        rels = tuple(tuple(r) for r in relations)
        tables = tuple(
            TableDef(t.name, t.pkey_column,
                     tuple((c, "categorical") for s, c, _ in rels if s == t.name))
            for t in tables)
        schema = RelationalSchema(tables, rels)
        src, dst, et, er, eoff = [], [], [], [], [0]
        for r, rel in enumerate(rels):
            pairs = edges.get(rel, [])
            so = offsets[types.index(rel[0])]
            do = offsets[types.index(rel[2])]
            src += [so + a for a, _ in pairs]
            dst += [do + b for _, b in pairs]
            times = (edge_time or {}).get(rel)
            et += list(times) if times is not None else [math.nan] * len(pairs)
            er += [r] * len(pairs)
            eoff.append(eoff[-1] + len(pairs))
        pkeys = {t: [str(i) for i in range(node_counts[t])] for t in types}
        return cls(schema, types, offsets, np.asarray(node_time, dtype=np.float64), ntype, rels,
                   np.asarray(eoff, dtype=np.int64), np.asarray(src, dtype=np.int64),
                   np.asarray(dst, dtype=np.int64), np.asarray(et, dtype=np.float64),
                   np.asarray(er, dtype=np.int64), attributes or {}, pkeys)


def build_graph(schema, tables=None):
    """One node per row, one edge per non-null foreign-key value.

    ``tables`` maps table -> column -> list of raw CSV strings; read from the
    manifest's files when omitted.
    """
    if tables is None:
        tables = read_tables(schema)
    types = tuple(t.name for t in schema.tables)
    counts = []
    pkeys = {}
    for t in schema.tables:
        if t.name not in tables:
            raise MissingTable(t.name)
        col = tables[t.name].get(t.pkey_column)
        if col is None:
            raise MissingColumn(f"{t.name}.{t.pkey_column}")
        pkeys[t.name] = [str(v) for v in col]
        counts.append(len(col))
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    node_type = np.repeat(np.arange(len(types)), counts).astype(np.int64)
    node_time = np.full(int(offsets[-1]), np.nan)
    attributes = {}
    for i, t in enumerate(schema.tables):
        data = tables[t.name]
        if t.timestamp_column is not None:
            node_time[offsets[i]:offsets[i + 1]] = [parse_timestamp(v) for v in data[t.timestamp_column]]
        attributes[t.name] = {
            c: [parse_cell(v, m) for v in data[c]] for c, m in schema.attribute_columns(t.name)
        }
    lookups = {}
    for i, name in enumerate(types):
        lk = {}
        for j, k in enumerate(pkeys[name]):
            lk.setdefault(k, int(offsets[i]) + j)
        lookups[name] = lk
    src, dst, rel, eoff = [], [], [], [0]
    for r, (s, col, d) in enumerate(schema.relations):
        so = int(offsets[types.index(s)])
        lk = lookups[d]
        for row, v in enumerate(tables[s][col]):
            if v == "":
                continue
            if v not in lk:
                raise DanglingForeignKey(s, row, col, v)
            src.append(so + row)
            dst.append(lk[v])
            rel.append(r)
        eoff.append(len(src))
    n_edges = len(src)
    return HeteroGraph(schema, types, offsets, node_time, node_type, tuple(schema.relations),
                       np.asarray(eoff, dtype=np.int64), np.asarray(src, dtype=np.int64),
                       np.asarray(dst, dtype=np.int64), np.full(n_edges, np.nan),
                       np.asarray(rel, dtype=np.int64), attributes, pkeys)


def assign_edge_timestamps(graph, combine="max"):
    """Fill missing edge timestamps from the endpoint node timestamps.

    Existing edge timestamps are kept.  An edge with an untimestamped endpoint
    stays untimestamped.
    """
    if combine not in ("max", "mean"):
        raise ValueError(f"combine must be 'max' or 'mean', got {combine!r}")
    ts = graph.node_time[graph.edge_src]
    td = graph.node_time[graph.edge_dst]
    derived = np.maximum(ts, td) if combine == "max" else 0.5 * (ts + td)
    et = np.where(np.isnan(graph.edge_time), derived, graph.edge_time)
    return graph.with_edge_time(et)


def load_graph(manifest_path, combine="max"):
    schema = load_schema(manifest_path)
    return assign_edge_timestamps(build_graph(schema), combine)
