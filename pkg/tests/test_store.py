import math
import os

import numpy as np
import pytest

from relperceiver.store import (DanglingForeignKey, DuplicateColumn, HeteroGraph, MissingColumn,
                                MissingTable, ParseError, assign_edge_timestamps, build_graph,
                                load_graph, load_schema, parse_manifest, parse_timestamp)

MANIFEST = """\
[table users]
file = users.csv
pkey = user_id
time_column = signup
columns = signup:timestamp, age:numerical, region:categorical

[table items]
file = items.csv
pkey = item_id
columns = title:text

[table events]
file = events.csv
pkey = event_id
time_column = t
columns = user_id:categorical, item_id:categorical, t:timestamp, amount:numerical

[relations]
events.user_id -> users
events.item_id -> items
"""


def write_db(root, events=None):
    files = {
        "users.csv": "user_id,signup,age,region\nu1,100,30,north\nu2,2020-01-01T00:00:00Z,,south\n",
        "items.csv": "item_id,title\ni1,red lamp\ni2,\n",
        "events.csv": events or ("event_id,user_id,item_id,t,amount\n"
                                 "e1,u1,i1,200,3.5\ne2,u2,i2,150,\ne3,u1,,300,1\n"),
    }
    for name, text in files.items():
        with open(os.path.join(root, name), "w") as fh:
            fh.write(text)
    with open(os.path.join(root, "schema.ini"), "w") as fh:
        fh.write(MANIFEST)
    return os.path.join(root, "schema.ini")


def test_node_ids_follow_table_then_row_order(tmp_path):
    g = load_graph(write_db(tmp_path))
    assert g.node_types == ("users", "items", "events")
    assert list(g.node_offsets) == [0, 2, 4, 7]
    assert g.node_id("events", "e1") == 4
    assert g.node_id("users", "u2") == 1


def test_one_edge_per_non_null_fkey(tmp_path):
    g = load_graph(write_db(tmp_path))
    # e3 has no item: 3 user edges + 2 item edges
    assert g.num_edges == 5
    assert list(g.edge_offsets) == [0, 3, 5]
    e = g.edge(3)
    assert e.relation_type == ("events", "item_id", "items")
    assert (e.source, e.target) == (4, 2)
    assert e.edge_id == 0


def test_edge_time_is_max_of_endpoints(tmp_path):
    g = load_graph(write_db(tmp_path))
    # e1(200) -> u1(100) ; items untimestamped -> edge untimestamped
    assert g.edge(0).timestamp == 200.0
    assert g.edge(3).timestamp is None


def test_edge_time_mean_and_preset_kept():
    g = HeteroGraph.from_arrays({"a": 2, "b": 1}, [10.0, 30.0, 20.0], [("a", "fk", "b")],
                                {("a", "fk", "b"): [(0, 0), (1, 0)]},
                                {("a", "fk", "b"): [math.nan, 5.0]})
    m = assign_edge_timestamps(g, "mean")
    assert m.edge_time.tolist() == [15.0, 5.0]
    assert assign_edge_timestamps(g, "max").edge_time.tolist() == [20.0, 5.0]
    with pytest.raises(ValueError):
        assign_edge_timestamps(g, "min")


def test_attributes_exclude_keys_and_time(tmp_path):
    g = load_graph(write_db(tmp_path))
    assert set(g.attributes["events"]) == {"amount"}
    assert set(g.attributes["users"]) == {"age", "region"}
    assert math.isnan(g.attributes["users"]["age"][1])
    assert g.attributes["items"]["title"] == ["red lamp", None]
    node = g.node(4)
    assert node.type == "events" and node.timestamp == 200.0


def test_timestamps():
    assert parse_timestamp("86400") == 86400.0
    assert parse_timestamp("1970-01-02T00:00:00Z") == 86400.0
    assert parse_timestamp("1970-01-02T01:00:00+01:00") == 86400.0
    assert math.isnan(parse_timestamp(""))
    with pytest.raises(ParseError):
        parse_timestamp("yesterday")


def test_dangling_fkey(tmp_path):
    path = write_db(tmp_path, "event_id,user_id,item_id,t,amount\ne1,u9,i1,200,1\n")
    with pytest.raises(DanglingForeignKey) as exc:
        load_graph(path)
    assert exc.value.value == "u9" and exc.value.row == 0


@pytest.mark.parametrize("text,err", [
    ("[table a]\npkey = id\ncolumns = x:numerical, x:text\n", DuplicateColumn),
    ("[table a]\npkey = id\ncolumns = t1:timestamp, t2:timestamp\n", ParseError),
    ("[table a]\npkey = id\ncolumns = x:vector\n", ParseError),
    ("[table a]\npkey = id\ncolumns = x:numerical\n[relations]\na.x -> b\n", MissingTable),
    ("[table a]\npkey = id\n[relations]\na.x -> a\n", MissingColumn),
    ("[table a]\ncolumns = x:numerical\n", ParseError),
    ("[stuff]\nx = 1\n", ParseError),
])
def test_schema_errors(text, err):
    with pytest.raises(err):
        parse_manifest(text)


def test_missing_file(tmp_path):
    with open(tmp_path / "schema.ini", "w") as fh:
        fh.write("[table a]\nfile = nowhere.csv\npkey = id\n")
    with pytest.raises(MissingTable):
        load_schema(str(tmp_path / "schema.ini"))


def test_header_missing_column(tmp_path):
    path = write_db(tmp_path, "event_id,user_id,item_id,t\ne1,u1,i1,200\n")
    with pytest.raises(MissingColumn):
        build_graph(load_schema(path))


def test_from_arrays_round_trip():
    g = HeteroGraph.from_arrays({"a": 3}, [1.0, 2.0, np.nan], [("a", "fk", "a")],
                                {("a", "fk", "a"): [(0, 1), (2, 0)]})
    g = assign_edge_timestamps(g)
    assert g.edge_time[0] == 2.0 and np.isnan(g.edge_time[1])
    assert [e.edge_id for e in g.edges(("a", "fk", "a"))] == [0, 1]
