import numpy as np

from gradcheck import gradient_error, random_setup


def test_full_model_gradients(small_graph, small_data):
    rng = np.random.default_rng(11)
    for _ in range(5):
        model, spec, ctx, times, y, _ = random_setup(small_graph, small_data, rng)
        err, n = gradient_error(model, spec, ctx, times, y, rng)
        assert err < 1e-5 and n > 50
