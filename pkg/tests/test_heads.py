import itertools
import math

import numpy as np
import pytest

from samasa.autodiff import Tensor, backward
from samasa.heads import (
    DependencyHead,
    LabelScorer,
    PairScorer,
    TokenTagHead,
    compound_type_loss,
    dep_arc_heatmap,
    pair_score_heatmap,
    vote_decode,
)
from samasa.optim import ParameterStore
from gradcheck import check_gradients

D = 6  # token-state dim for these tests


def make_store(dtype=np.float64, seed=0):
    return ParameterStore(seed=seed, dtype=dtype)


def states(n_plus_1, dim=D, seed=1):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n_plus_1, dim))


# -- pair scorer ---------------------------------------------------------------


def scorer_with_params(store, mlp_dim=4):
    scorer = PairScorer(in_dim=D, mlp_dim=mlp_dim)
    scorer.init_params(store)
    return scorer


def test_pair_scores_zero_parameters():
    store = make_store()
    scorer = scorer_with_params(store)
    store["pair.u"].data[:] = 0.0
    store["pair.q"].data[:] = 0.0
    s = scorer.score_matrix(store, Tensor(states(4), dtype=np.float64))
    np.testing.assert_allclose(s.data, 0.0, atol=1e-12)


def test_pair_score_hand_forced_arithmetic():
    # bilinear of orthogonal unit vectors vanishes; row bias q.z_i remains
    z_i = np.array([1.0, 0.0])
    z_j = np.array([0.0, 1.0])
    u = np.eye(2)
    q = np.array([3.0, 0.0])
    score = z_i @ u @ z_j + q @ z_i
    assert score == 3.0


def test_pair_score_matrix_vs_scalar_loop_oracle():
    store = make_store()
    scorer = scorer_with_params(store, mlp_dim=4)
    h = states(4, seed=7)
    s = scorer.score_matrix(store, Tensor(h, dtype=np.float64)).data

    # oracle: recompute z through the same parameters, then scalar loops
    w = store["pair.mlp.0.w"].data
    b = store["pair.mlp.0.b"].data
    z = np.tanh(h @ w + b)
    u = store["pair.u"].data
    q = store["pair.q"].data[:, 0]
    expected = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            acc = 0.0
            for a in range(4):
                for c in range(4):
                    acc += z[i, a] * u[a, c] * z[j, c]
            expected[i, j] = acc + sum(q[a] * z[i, a] for a in range(4))
    np.testing.assert_allclose(s, expected, atol=1e-10)


# -- label scorer ----------------------------------------------------------------


def label_scorer_with_params(store, num_types=4, mlp_dim=4):
    scorer = LabelScorer(in_dim=D, mlp_dim=mlp_dim, num_types=num_types)
    scorer.init_params(store)
    return scorer


def test_label_scores_all_zero_parameters_uniform():
    store = make_store()
    scorer = label_scorer_with_params(store)
    for name in ("label.u", "label.q", "label.b"):
        store[name].data[:] = 0.0
    r = scorer.label_scores(store, Tensor(states(4), dtype=np.float64)).data
    np.testing.assert_allclose(r, 0.0, atol=1e-12)
    probs = np.exp(r) / np.exp(r).sum(axis=1, keepdims=True)
    np.testing.assert_allclose(probs, 0.25, atol=1e-12)


def test_label_scores_bias_only_prefers_biased_type():
    store = make_store()
    scorer = label_scorer_with_params(store, num_types=2)
    store["label.u"].data[:] = 0.0
    store["label.q"].data[:] = 0.0
    store["label.b"].data[:] = [0.0, 5.0]
    r = scorer.label_scores(store, Tensor(states(3), dtype=np.float64)).data
    assert (r.argmax(axis=1) == 1).all()


def test_label_scores_vs_scalar_loop_oracle():
    store = make_store()
    num_types, mlp_dim, n = 3, 4, 3
    scorer = label_scorer_with_params(store, num_types=num_types, mlp_dim=mlp_dim)
    h = states(n + 1, seed=11)
    r = scorer.label_scores(store, Tensor(h, dtype=np.float64)).data

    w = store["label.mlp.0.w"].data
    bm = store["label.mlp.0.b"].data
    z = np.tanh(h @ w + bm)
    u = store["label.u"].data
    q = store["label.q"].data[:, :, 0]
    b = store["label.b"].data
    expected = np.zeros((n, num_types))
    for i in range(n):
        for k in range(num_types):
            acc = 0.0
            for a in range(mlp_dim):
                for c in range(mlp_dim):
                    acc += z[i, a] * u[k, a, c] * z[n, c]
            stacked = list(z[i]) + list(z[n])
            acc += sum(q[k, t] * stacked[t] for t in range(2 * mlp_dim))
            expected[i, k] = acc + b[k]
    np.testing.assert_allclose(r, expected, atol=1e-10)


# -- compound-type loss -----------------------------------------------------------


def test_loss_single_pair_single_candidate_row_mode():
    # n=1, K=2, zero scores, row normalization: the only legal attachment
    # candidate gets probability 1, so only the uniform label term remains
    s = Tensor(np.zeros((2, 2)), dtype=np.float64)
    r = Tensor(np.zeros((1, 2)), dtype=np.float64)
    loss = compound_type_loss(s, r, gold_label=0, attachment_norm="row")
    assert loss.item() == pytest.approx(math.log(2), abs=1e-9)


def test_loss_single_pair_binary_mode_analytic():
    # sigma(0) = 1/2 for the attachment plus uniform over 2 labels
    s = Tensor(np.zeros((2, 2)), dtype=np.float64)
    r = Tensor(np.zeros((1, 2)), dtype=np.float64)
    loss = compound_type_loss(s, r, gold_label=1, attachment_norm="binary")
    assert loss.item() == pytest.approx(2 * math.log(2), abs=1e-9)


def test_loss_vanishes_in_confident_limit():
    n = 3
    s = np.zeros((n + 1, n + 1))
    s[:, n] = 50.0  # sigma -> 1
    r = np.zeros((n, 2))
    r[:, 1] = 50.0  # p(gold) -> 1
    loss = compound_type_loss(Tensor(s, dtype=np.float64), Tensor(r, dtype=np.float64),
                              gold_label=1, attachment_norm="binary")
    assert loss.item() == pytest.approx(0.0, abs=1e-6)
    assert loss.item() > 0.0  # strictly positive until probability exactly 1


def test_loss_vs_direct_recomputation_both_modes():
    rng = np.random.default_rng(23)
    n, num_types = 3, 4
    s = rng.normal(size=(n + 1, n + 1))
    r = rng.normal(size=(n, num_types))
    gold = 2

    # independent summed-log-softmax recomputation in plain numpy
    def logsumexp(v):
        m = v.max()
        return m + np.log(np.exp(v - m).sum())

    label_term = -sum(r[i, gold] - logsumexp(r[i]) for i in range(n))
    binary_term = sum(np.log1p(np.exp(-s[i, n])) for i in range(n))
    expected_binary = binary_term + label_term
    row_term = 0.0
    for i in range(n):
        row = np.delete(s[i, : n + 1], i)  # drop self
        row_term += -(s[i, n] - logsumexp(row))
    expected_row = row_term + label_term

    got_binary = compound_type_loss(Tensor(s, dtype=np.float64), Tensor(r, dtype=np.float64),
                                    gold, "binary").item()
    got_row = compound_type_loss(Tensor(s, dtype=np.float64), Tensor(r, dtype=np.float64),
                                 gold, "row").item()
    assert got_binary == pytest.approx(expected_binary, abs=1e-10)
    assert got_row == pytest.approx(expected_row, abs=1e-10)


def test_loss_invalid_label_rejected():
    s = Tensor(np.zeros((2, 2)))
    r = Tensor(np.zeros((1, 2)))
    with pytest.raises(IndexError, match="gold label"):
        compound_type_loss(s, r, gold_label=2)


def test_loss_gradients_vs_finite_differences():
    rng = np.random.default_rng(31)
    n, num_types = 3, 4
    s0 = rng.normal(size=(n + 1, n + 1))
    r0 = rng.normal(size=(n, num_types))
    for mode in ("binary", "row"):
        check_gradients(lambda ts: compound_type_loss(ts[0], ts[1], 1, mode), [s0, r0])


# -- vote decoding -----------------------------------------------------------------


def oracle_vote(r):
    """Brute-force plurality + tiebreak enumeration, independent of vote_decode."""
    r = np.asarray(r, dtype=np.float64)
    n, num_types = r.shape
    votes = [max(range(num_types), key=lambda k: (r[i, k], -k)) for i in range(n)]
    counts = [votes.count(k) for k in range(num_types)]
    top = max(counts)
    tied = [k for k in range(num_types) if counts[k] == top]
    if len(tied) == 1:
        return tied[0], np.array(counts) / n
    def summed_logp(k):
        cells = []
        for i in range(n):
            m = r[i].max()
            cells.append(r[i, k] - (m + np.log(np.exp(r[i] - m).sum())))
        return math.fsum(cells)
    best = max(summed_logp(k) for k in tied)
    winner = min(k for k in tied if summed_logp(k) == best)
    return winner, np.array(counts) / n


def test_vote_single_pair():
    r = np.array([[0.1, 0.9, 0.0]])
    label, conf = vote_decode(r)
    assert label == 1
    np.testing.assert_allclose(conf, [0, 1, 0])


def test_vote_majority():
    r = np.array([[0.0, 5.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 3.0]])
    label, conf = vote_decode(r)
    assert label == 1
    assert conf[1] == pytest.approx(2 / 3)


def test_vote_exhaustive_all_configurations():
    # Every vote assignment for n <= 5, K <= 4. Winning scores use power-of-two
    # offsets so distinct vote subsets have well-separated summed scores and the
    # tie-break comparison is never decided by float rounding noise.
    mismatches = 0
    for num_types in range(2, 5):
        for n in range(1, 6):
            for assignment in itertools.product(range(num_types), repeat=n):
                r = np.full((n, num_types), -1.0)
                for i, v in enumerate(assignment):
                    r[i, v] = 1.0 + 2.0 ** (-i)
                got = vote_decode(r)
                want = oracle_vote(r)
                if got[0] != want[0] or not np.allclose(got[1], want[1]):
                    mismatches += 1
    assert mismatches == 0


def test_vote_tie_broken_by_summed_logp_then_id():
    # two votes each; type 2 has higher mass overall
    r = np.array([
        [5.0, 0.0, 4.9],
        [5.0, 0.0, 4.9],
        [0.0, 0.0, 6.0],
        [6.0, 0.0, 0.0],
    ])
    label, conf = vote_decode(r)
    want, _ = oracle_vote(r)
    assert label == want
    # exact tie in summed scores -> lowest id
    r2 = np.array([[1.0, 0.0], [0.0, 1.0]])
    label2, _ = vote_decode(r2)
    assert label2 == 0


def test_vote_shift_invariance():
    rng = np.random.default_rng(2)
    r = rng.normal(size=(4, 3))
    base = vote_decode(r)
    shifted = r + rng.normal(size=(4, 1))  # constant per row
    got = vote_decode(shifted)
    assert got[0] == base[0]
    np.testing.assert_allclose(got[1], base[1])


# -- token taggers -------------------------------------------------------------------


def test_tag_head_uniform_logits_loss():
    store = make_store()
    head = TokenTagHead("morph", in_dim=D, num_tags=10)
    head.init_params(store)
    logits = Tensor(np.zeros((1, 10)), dtype=np.float64)
    assert head.loss(logits, [3]).item() == pytest.approx(math.log(10), abs=1e-9)


def test_tag_head_loss_vs_direct_recomputation():
    store = make_store()
    head = TokenTagHead("morph", in_dim=D, num_tags=5)
    head.init_params(store)
    h = states(4, seed=13)[:3]
    logits = head.logits(store, Tensor(h, dtype=np.float64))
    tags = [0, 4, 2]
    got = head.loss(logits, tags).item()

    raw = h @ store["morph.w"].data + store["morph.b"].data
    expected = 0.0
    for i, t in enumerate(tags):
        m = raw[i].max()
        expected += -(raw[i, t] - (m + np.log(np.exp(raw[i] - m).sum())))
    expected /= len(tags)
    assert got == pytest.approx(expected, abs=1e-10)


def test_tag_head_gradients():
    h0 = states(3, seed=17)
    w0 = np.random.default_rng(5).normal(size=(D, 4))
    b0 = np.zeros(4)

    def build(ts):
        from samasa.autodiff import cross_entropy, matmul
        return cross_entropy(matmul(ts[0], ts[1]) + ts[2], [1, 3, 0])

    check_gradients(build, [h0, w0, b0])


# -- dependency head ------------------------------------------------------------------


def dep_with_params(store, num_rels=3, mlp_dim=4):
    head = DependencyHead(in_dim=D, mlp_dim=mlp_dim, num_rels=num_rels)
    head.init_params(store)
    return head


def test_dep_single_token_root_forced():
    store = make_store()
    head = dep_with_params(store)
    out = head.forward(store, Tensor(states(2), dtype=np.float64))
    assert out.arc_scores.shape == (1, 2)
    heads, rels = head.decode(store, out)
    assert heads == [0]  # self masked, root is the only legal head
    gold_loss = head.loss(store, out, [0], [1])
    assert np.isfinite(gold_loss.item())


def test_dep_self_attachment_never_predicted():
    store = make_store()
    head = dep_with_params(store)
    n = 4
    out = head.forward(store, Tensor(states(n + 1), dtype=np.float64))
    heads, _ = head.decode(store, out)
    for i, h in enumerate(heads):
        assert h != i + 1
    # masked cells carry the sentinel
    arc = out.arc_scores.data
    for i in range(n):
        assert arc[i, i + 1] < -1e8


def test_dep_loss_vs_scalar_recomputation():
    store = make_store()
    head = dep_with_params(store, num_rels=3, mlp_dim=4)
    n = 3
    h = states(n + 1, seed=19)
    out = head.forward(store, Tensor(h, dtype=np.float64))
    gold_heads = [2, 0, 1]
    gold_rels = [0, 2, 1]
    got = head.loss(store, out, gold_heads, gold_rels).item()

    arc = out.arc_scores.data
    rel = head.rel_logits_at(store, out, gold_heads).data

    def ce_rows(scores, targets):
        total = 0.0
        for row, t in zip(scores, targets):
            m = row.max()
            total += -(row[t] - (m + np.log(np.exp(row - m).sum())))
        return total / len(targets)

    expected = ce_rows(arc, gold_heads) + ce_rows(rel, gold_rels)
    assert got == pytest.approx(expected, abs=1e-10)


def test_dep_greedy_decode_dominant_column():
    store = make_store()
    head = dep_with_params(store)
    n = 3
    out = head.forward(store, Tensor(states(n + 1), dtype=np.float64))
    forced = np.full((n, n + 1), -5.0)
    forced[:, 2] = 5.0
    forced[1, 2] = -1e9  # token 1's self column
    forced[1, 0] = 6.0
    out.arc_scores = Tensor(forced, dtype=np.float64)
    heads, _ = head.decode(store, out)
    assert heads == [2, 0, 2]
    brute = [int(np.argmax(forced[i])) for i in range(n)]
    assert heads == brute


def test_dep_greedy_decode_random_vs_brute_force():
    store = make_store()
    head = dep_with_params(store, num_rels=4)
    rng = np.random.default_rng(41)
    for _ in range(10):
        n = int(rng.integers(1, 6))
        out = head.forward(store, Tensor(rng.normal(size=(n + 1, D)), dtype=np.float64))
        heads, rels = head.decode(store, out)
        arc = out.arc_scores.data
        assert heads == [int(np.argmax(arc[i])) for i in range(n)]
        rel_scores = head.rel_logits_at(store, out, heads).data
        assert rels == [int(np.argmax(rel_scores[i])) for i in range(n)]


def test_dep_gradients_vs_finite_differences():
    store = make_store()
    head = dep_with_params(store, num_rels=2, mlp_dim=3)
    h0 = states(4, seed=29)

    def build(ts):
        out = head.forward(store, ts[0])
        return head.loss(store, out, [0, 3, 1], [1, 0, 1])

    check_gradients(build, [h0])


# -- heatmaps ---------------------------------------------------------------------------


def test_pair_heatmap_uniform_scores():
    hm = pair_score_heatmap(np.zeros((4, 4)))
    np.testing.assert_allclose(hm, 0.25, atol=1e-12)


def test_pair_heatmap_degenerate_two_by_two():
    hm = pair_score_heatmap(np.zeros((2, 2)))
    assert hm.shape == (2, 2)
    np.testing.assert_allclose(hm.sum(axis=1), 1.0, atol=1e-12)


def test_heatmaps_vs_direct_recomputation():
    rng = np.random.default_rng(9)
    s = rng.normal(size=(5, 5))
    hm = pair_score_heatmap(s)
    for i in range(5):
        expected = np.exp(s[i] - s[i].max())
        expected /= expected.sum()
        np.testing.assert_allclose(hm[i], expected, atol=1e-12)

    arc = rng.normal(size=(4, 5))
    dep_hm = dep_arc_heatmap(arc)
    np.testing.assert_allclose(dep_hm.sum(axis=1), 1.0, atol=1e-12)
