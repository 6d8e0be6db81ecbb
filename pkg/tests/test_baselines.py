import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exactsim.baselines import (
    SimMatrix, enumerate_first_meetings, extract_row_csv, load_simmatrix, mc_single_source,
    pair_chain_diag_oracle, parsim_single_source, power_method, save_simmatrix,
)
from exactsim.core import read_scores_csv
from exactsim.errors import GraphFormatError, RefusalError
from exactsim.generators import erdos_renyi_digraph, random_small_digraph
from exactsim.walks import RandomSource

from conftest import C, graph_from_mask


def test_power_two_cycle(two_cycle):
    assert np.array_equal(power_method(two_cycle, 3, C).S, np.eye(2))


def test_power_fork(fork):
    S = power_method(fork, 2, C).S
    assert S[0, 1] == pytest.approx(0.6, abs=1e-15)
    assert S[0, 2] == 0 and S[1, 2] == 0


def test_power_k3(k3):
    sm = power_method(k3, 60, C)
    off = sm.S[~np.eye(3, dtype=bool)]
    assert np.all(np.abs(off - 3 / 11) <= 1e-12)


def test_power_node_cap(k3):
    with pytest.raises(RefusalError):
        power_method(k3, 5, C, node_cap=2)


masks = st.integers(2, 8).flatmap(
    lambda n: st.lists(st.lists(st.booleans(), min_size=n, max_size=n), min_size=n, max_size=n)
)


@given(masks)
def test_power_residuals_symmetry_unit_diag(mask):
    g = graph_from_mask(mask)
    S = np.eye(g.n)
    pt = g.reverse_transition.toarray()
    for t in range(1, 15):
        nxt = np.maximum(C * pt @ S @ pt.T, np.eye(g.n))
        np.fill_diagonal(nxt, 1.0)
        S = nxt
        sm = power_method(g, t, C)
        assert np.allclose(sm.S, S, atol=1e-14)
        assert np.allclose(sm.S, sm.S.T, atol=1e-15)
        assert np.all(np.diag(sm.S) == 1.0)
    for t, r in enumerate(power_method(g, 30, C).residuals):
        assert r <= C**t + 1e-15


def test_simmatrix_round_trip(tmp_path, k3):
    sm = power_method(k3, 30, C)
    p = tmp_path / "s.bin"
    save_simmatrix(sm, p)
    assert p.read_bytes()[:8] == b"XSIMMAT1"
    assert np.array_equal(load_simmatrix(p).S, sm.S)
    extract_row_csv(p, 1, tmp_path / "row.csv")
    assert np.array_equal(read_scores_csv(tmp_path / "row.csv"), sm.S[1])
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(GraphFormatError):
        load_simmatrix(p)


def test_oracle_examples(fork, two_cycle, k3):
    assert pair_chain_diag_oracle(fork, 2, C) == 1.0
    assert pair_chain_diag_oracle(two_cycle, 0, C) == pytest.approx(0.4, abs=1e-15)
    assert pair_chain_diag_oracle(k3, 0, C) == pytest.approx(34 / 55, abs=1e-14)


def test_oracle_cap(k3):
    with pytest.raises(RefusalError):
        pair_chain_diag_oracle(k3, 0, C, node_cap=2)


small = st.integers(2, 6).flatmap(
    lambda n: st.tuples(
        st.lists(st.lists(st.booleans(), min_size=n, max_size=n), min_size=n, max_size=n),
        st.integers(0, n - 1),
    )
)


@given(small)
def test_oracle_matches_enumeration(gk):
    mask, k = gk
    g = graph_from_mask(mask)
    brute = enumerate_first_meetings(g, k, C, 4)
    met = sum(sum(level.values()) for level in brute)
    assert 1 - pair_chain_diag_oracle(g, k, C, max_steps=4) == pytest.approx(met, abs=1e-10)
    d = pair_chain_diag_oracle(g, k, C)
    assert 1 - C - 1e-12 <= d <= 1 + 1e-12


def test_mc_examples(fork, two_cycle):
    s = mc_single_source(fork, 0, 20, 100_000, RandomSource(0), C)
    assert s[0] == 1.0
    assert s[1] == pytest.approx(0.6, abs=0.006)
    assert mc_single_source(two_cycle, 0, 20, 100_000, RandomSource(0), C)[1] == 0.0


def test_mc_converges():
    g = erdos_renyi_digraph(40, 3, 5)
    truth = power_method(g, 60, C).S
    errs = {r: [] for r in (100, 10_000)}
    for i in range(0, 40, 8):
        for r in errs:
            est = mc_single_source(g, i, 20, r, RandomSource(i), C)
            errs[r].append(np.abs(est - truth[i]).max())
    assert np.median(errs[10_000]) < np.median(errs[100])


def test_mc_rejects_zero_walks(k3):
    with pytest.raises(ValueError):
        mc_single_source(k3, 0, 5, 0, RandomSource(0), C)


def test_parsim_examples(two_cycle, k3, isolated):
    assert parsim_single_source(two_cycle, 0, 30, C)[1] == 0.0
    s = parsim_single_source(k3, 0, 60, C)
    assert np.all(np.abs(s[1:] - 3 / 11) > 0.05)
    assert np.array_equal(parsim_single_source(isolated, 0, 20, C), [1.0, 0.0, 0.0])


def test_parsim_deterministic():
    g = random_small_digraph(15, 1, p=0.2)
    assert np.array_equal(parsim_single_source(g, 2, 25, C), parsim_single_source(g, 2, 25, C))
