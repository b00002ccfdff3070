import os

import numpy as np
import pytest

from relperceiver.synthetic import SyntheticSpec, generate_dataset

SMALL_TASKS = ("premium", "spender", "favorite_category", "category_rank", "recent_spend", "regime")


def small_spec(**kw):
    base = dict(n_users=40, n_items=16, n_signals=200, events_per_user=6, examples_per_task=160,
                tasks=SMALL_TASKS)
    base.update(kw)
    return SyntheticSpec(**base)


@pytest.fixture(scope="session")
def small_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    return generate_dataset(small_spec(), 0, str(out))


@pytest.fixture(scope="session")
def small_graph(small_data):
    from relperceiver.store import load_graph
    return load_graph(os.path.join(small_data, "schema.ini"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
