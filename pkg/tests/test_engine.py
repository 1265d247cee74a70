import numpy as np
import pytest

from urnsa import make_experiment, make_generator, simulate
from urnsa.engine import run_batch

FRIEDMAN = np.array([[2.0, 1.0], [1.0, 2.0]])
UNBALANCED = np.array([[1.0, 2.0], [3.0, 4.0]])


def experiments():
    m = np.array([[0.0, 0.5], [0.5, 0.0]])
    specs = [
        make_generator("fixed", FRIEDMAN),
        make_generator("iid_scaled", UNBALANCED, noise="exponential"),
        make_generator("iid_scaled", UNBALANCED, noise="pareto", alpha=1.5),
        make_generator("cesaro_spike", FRIEDMAN, m_spike=m, noise="exponential"),
        make_generator("markov_mod", UNBALANCED, m_set=[m, 2 * m], noise="exponential"),
    ]
    return [make_experiment([1.0, 2.0], spec) for spec in specs]


@pytest.mark.parametrize("exp", experiments(), ids=lambda e: e.generator.kind + "-" + e.generator.noise)
def test_batch_matches_scalar_bit_for_bit(exp):
    cps = (1, 700, 2500)
    batch = run_batch(exp, replicates=3, seed=77, n_max=2500, checkpoints=cps)
    for rep in range(3):
        traj = simulate(exp, 2500, checkpoints=cps, seed=77, replicate=rep)
        for slot, state in enumerate(traj.states):
            np.testing.assert_array_equal(batch.cp_c[rep, slot], state.c)
            assert batch.cp_s[rep, slot] == state.s
            np.testing.assert_array_equal(batch.cp_n[rep, slot], state.draws)


def test_batch_random_h_matches_scalar():
    spec = make_generator("iid_scaled", FRIEDMAN, noise="exponential")
    h_set = [FRIEDMAN, UNBALANCED, np.array([[0.5, 1.0], [2.0, 0.5]])]
    exp = make_experiment([1.0, 1.0], spec, h_set=h_set)
    batch = run_batch(exp, replicates=6, seed=5, n_max=400, checkpoints=(400,))
    seen = set()
    for rep in range(6):
        traj = simulate(exp, 400, checkpoints=(400,), seed=5, replicate=rep)
        np.testing.assert_array_equal(batch.h[rep], traj.h)
        np.testing.assert_array_equal(batch.cp_c[rep, 0], traj.states[-1].c)
        seen.add(int(batch.h_index[rep]))
    assert len(seen) > 1  # the finite H-law actually mixes


def test_recorded_streams_match_scalar_audit():
    m = np.array([[0.0, 0.5], [0.5, 0.0]])
    spec = make_generator("cesaro_spike", FRIEDMAN, m_spike=m, noise="exponential")
    exp = make_experiment([1.0, 1.0], spec)
    chunks = {"s": [], "d": [], "xi": [], "ymd": [], "x": []}

    def consume(base, data):
        for key, val in data.items():
            chunks[key].append(val.copy())
        return True

    run_batch(
        exp, replicates=2, seed=13, n_max=600,
        record=("s", "x", "d", "xi", "ymd"), consumer=consume,
    )
    got = {key: np.concatenate(vals, axis=1) for key, vals in chunks.items()}

    for rep in range(2):
        traj = simulate(exp, 600, checkpoints=(600,), seed=13, replicate=rep, record_steps=True)
        for g, rec in enumerate(traj.records):
            assert got["s"][rep, g] == rec.s_next
            np.testing.assert_array_equal(got["x"][rep, g], rec.x_prev)
            x, hg = rec.x_prev, rec.h_gen
            xh = x @ hg
            d = rec.r[rec.color] - x * rec.y - xh + x * xh.sum()
            np.testing.assert_allclose(got["d"][rep, g], d, atol=1e-12)
            xdel = x @ (hg - FRIEDMAN)
            xi = xdel - x * xdel.sum()
            np.testing.assert_allclose(got["xi"][rep, g], xi, atol=1e-12)
            y_mean = float(x @ hg.sum(axis=1))
            np.testing.assert_allclose(got["ymd"][rep, g], rec.y - y_mean, atol=1e-12)


def test_window_extremes_match_scalar_path():
    spec = make_generator("iid_scaled", UNBALANCED, noise="exponential")
    exp = make_experiment([1.0, 1.0], spec)
    lo = np.array([10, 200], dtype=np.int64)
    hi = np.array([150, 999], dtype=np.int64)
    batch = run_batch(exp, replicates=2, seed=3, n_max=1000, windows=(lo, hi))
    for rep in range(2):
        traj = simulate(exp, 1000, checkpoints=tuple(range(1, 1001)), seed=3, replicate=rep)
        s_path = np.array([st.s for st in traj.states])  # s_path[g] = S_{g+1}
        ratio = s_path / (np.arange(1000) + 1.0)
        for w in range(2):
            window = ratio[lo[w] : hi[w] + 1]
            assert batch.win_min[rep, w] == window.min()
            assert batch.win_max[rep, w] == window.max()


def test_consumer_can_stop_open_ended_run():
    spec = make_generator("fixed", FRIEDMAN)
    exp = make_experiment([1.0, 1.0], spec)
    seen = []

    def consume(base, data):
        seen.append(data["s"].shape[1])
        return len(seen) < 3

    run_batch(exp, replicates=1, seed=0, n_max=None, record=("s",), consumer=consume)
    assert len(seen) == 3


def test_open_ended_run_raises_at_cap():
    from urnsa import NeedsMoreDataError

    spec = make_generator("fixed", FRIEDMAN)
    exp = make_experiment([1.0, 1.0], spec)
    with pytest.raises(NeedsMoreDataError):
        run_batch(
            exp, replicates=1, seed=0, n_max=None, record=("s",),
            consumer=lambda base, data: True, max_steps=100_000,
        )


def test_k1_urn_runs():
    spec = make_generator("fixed", np.array([[2.0]]))
    exp = make_experiment([1.0], spec)
    batch = run_batch(exp, replicates=2, seed=1, n_max=50, checkpoints=(50,))
    np.testing.assert_array_equal(batch.cp_s[:, 0], [101.0, 101.0])
    np.testing.assert_array_equal(batch.cp_n[:, 0, 0], [50, 50])
