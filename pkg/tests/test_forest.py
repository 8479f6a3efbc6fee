import numpy as np
import pytest

from charf.forest import (
    FitParams,
    ForestModel,
    Tree,
    draw_tree_randomness,
    fit,
    gini_multi,
    predict,
    predict_counts,
)
from charf.genotype import one_hot_encode

from conftest import random_matrix


def reference_tree(X, Y, params, seed):
    """Slow recursive builder consuming the same random draws as the fast one."""
    col_sum = X.sum(axis=0)
    active = np.flatnonzero((col_sum > 0) & (col_sum < X.shape[0]))
    n_cand = params.resolve_features(active.size)
    rows, perms = draw_tree_randomness(X.shape[0], active, params.bootstrap, np.random.default_rng([params.seed, seed]))
    n_labels = Y.shape[1]
    nodes = []
    attempts = [0]

    def hist(rs):
        h = [[0, 0, 0] for _ in range(n_labels)]
        for r in rs:
            for l in range(n_labels):
                h[l][Y[r, l]] += 1
        return h

    def grow(rs, depth):
        node = len(nodes)
        h = hist(rs)
        nodes.append({"feature": -1, "left": -1, "right": -1, "value": h, "depth": depth})
        pure = all(sum(1 for c in lab if c) <= 1 for lab in h)
        stop = pure or len(rs) < params.min_samples_split
        stop = stop or (params.max_depth is not None and depth >= params.max_depth) or n_cand == 0
        if stop:
            return node
        perm = perms[attempts[0]]
        attempts[0] += 1
        best, best_score = -1, float("inf")
        for start in range(0, len(perm), n_cand):
            for f in sorted(perm[start:start + n_cand]):
                right = [r for r in rs if X[r, f]]
                left = [r for r in rs if not X[r, f]]
                if not right or not left:
                    continue
                hr, hl = hist(right), hist(left)
                sq_r = sum(c * c for lab in hr for c in lab)
                sq_l = sum(c * c for lab in hl for c in lab)
                score = -(sq_l / len(left) + sq_r / len(right))
                if score < best_score:
                    best, best_score = f, score
            if best >= 0:
                break
        if best < 0:
            return node
        nodes[node]["feature"] = int(best)
        nodes[node]["left"] = grow([r for r in rs if not X[r, best]], depth + 1)
        nodes[node]["right"] = grow([r for r in rs if X[r, best]], depth + 1)
        return node

    grow(list(rows), 0)
    return nodes


def brute_force_predict(model, X):
    out = np.zeros((X.shape[0], model.n_labels), dtype=int)
    for i in range(X.shape[0]):
        totals = [[0, 0, 0] for _ in range(model.n_labels)]
        for tree in model.trees:
            node = 0
            while tree.feature[node] >= 0:
                node = tree.right[node] if X[i, tree.feature[node]] else tree.left[node]
            for l in range(model.n_labels):
                for c in range(3):
                    totals[l][c] += int(tree.value[node][l][c])
        for l in range(model.n_labels):
            best = 0
            for c in (1, 2):
                if totals[l][c] > totals[l][best]:
                    best = c
            out[i, l] = best
    return out


def leaf_tree(hist):
    hist = np.asarray(hist, dtype=np.int64)[None]
    return Tree(
        feature=np.array([-1]), left=np.array([-1]), right=np.array([-1]), value=hist, depth=np.array([0])
    )


class TestGini:
    def test_pure(self):
        assert gini_multi([[4, 0, 0]]) == 0.0

    def test_half(self):
        assert gini_multi([[2, 2, 0]]) == pytest.approx(0.5)

    def test_uniform(self):
        assert gini_multi([[1, 1, 1]]) == pytest.approx(2 / 3)

    def test_mean_over_labels(self):
        assert gini_multi([[4, 0, 0], [2, 2, 0]]) == pytest.approx(0.25)

    def test_zero_histogram(self):
        with pytest.raises(ValueError):
            gini_multi([[0, 0, 0]])


class TestFit:
    def test_constant_targets_single_leaf(self, rng):
        X = one_hot_encode(random_matrix(rng, 30, 4, f=0.2))
        Y = np.tile([2, 0, 1], (30, 1))
        model = fit(X, Y, FitParams(seed=3))
        assert all(t.n_nodes == 1 for t in model.trees)
        other = one_hot_encode(random_matrix(rng, 5, 4, f=0.2))
        assert (predict(model, other) == [2, 0, 1]).all()

    def test_perfect_encoding_reconstructs(self, rng):
        Y = random_matrix(rng, 100, 6).values
        model = fit(one_hot_encode(Y), Y, FitParams(bootstrap=False, seed=1))
        assert (predict(model, one_hot_encode(Y)) == Y).mean() == 1.0

    def test_deterministic(self, rng):
        X = one_hot_encode(random_matrix(rng, 60, 8, f=0.1))
        Y = random_matrix(rng, 60, 3).values
        a = fit(X, Y, FitParams(seed=11))
        b = fit(X, Y, FitParams(seed=11))
        assert all(s.same_structure(t) for s, t in zip(a.trees, b.trees))
        c = fit(X, Y, FitParams(seed=12))
        assert not all(s.same_structure(t) for s, t in zip(a.trees, c.trees))

    @pytest.mark.parametrize(
        "params",
        [
            FitParams(n_trees=3, seed=5),
            FitParams(n_trees=3, bootstrap=False, features_per_split=None, seed=2),
            FitParams(n_trees=3, max_depth=3, min_samples_split=6, features_per_split=2, seed=9),
        ],
    )
    def test_matches_reference_builder(self, rng, params):
        X = one_hot_encode(random_matrix(rng, 40, 7, f=0.15))
        Y = random_matrix(rng, 40, 3).values
        model = fit(X, Y, params)
        for t, tree in enumerate(model.trees):
            ref = reference_tree(X, Y, params, t)
            assert tree.feature.tolist() == [n["feature"] for n in ref]
            assert tree.left.tolist() == [n["left"] for n in ref]
            assert tree.right.tolist() == [n["right"] for n in ref]
            assert tree.value.tolist() == [n["value"] for n in ref]

    def test_leaf_histograms_count_rows(self, rng):
        X = one_hot_encode(random_matrix(rng, 50, 5, f=0.1))
        Y = random_matrix(rng, 50, 4).values
        model = fit(X, Y, FitParams(bootstrap=False, seed=0))
        for tree in model.trees:
            leaves = tree.apply(X)
            for leaf in np.unique(leaves):
                assert (tree.value[leaf].sum(axis=1) == (leaves == leaf).sum()).all()

    def test_max_depth(self, rng):
        X = one_hot_encode(random_matrix(rng, 80, 6))
        Y = random_matrix(rng, 80, 2).values
        model = fit(X, Y, FitParams(max_depth=2, seed=0))
        assert max(t.max_depth for t in model.trees) <= 2

    def test_row_permutation_invariance(self, rng):
        X = one_hot_encode(random_matrix(rng, 40, 6, f=0.1))
        Y = random_matrix(rng, 40, 2).values
        params = FitParams(bootstrap=False, features_per_split=None, seed=4)
        perm = rng.permutation(40)
        a = fit(X, Y, params)
        b = fit(X[perm], Y[perm], params)
        assert all(s.same_structure(t) for s, t in zip(a.trees, b.trees))

    def test_zero_column_never_matters(self, rng):
        X = one_hot_encode(random_matrix(rng, 60, 6, f=0.1))
        Y = random_matrix(rng, 60, 3).values
        X0 = np.hstack([X, np.zeros((60, 1), dtype=X.dtype)])
        a = fit(X, Y, FitParams(seed=8))
        b = fit(X0, Y, FitParams(seed=8))
        Xt = one_hot_encode(random_matrix(rng, 30, 6, f=0.2))
        Xt0 = np.hstack([Xt, np.zeros((30, 1), dtype=Xt.dtype)])
        assert np.array_equal(predict(a, Xt), predict(b, Xt0))
        assert all(X.shape[1] not in t.feature for t in b.trees)

    def test_errors(self):
        with pytest.raises(ValueError):
            fit(np.zeros((3, 2)), np.zeros((2, 1), dtype=int))
        with pytest.raises(ValueError):
            fit(np.zeros((0, 2)), np.zeros((0, 1), dtype=int))
        with pytest.raises(ValueError):
            fit(np.zeros((2, 2)), np.array([[0], [-1]]))
        with pytest.raises(ValueError):
            FitParams(n_trees=0)
        with pytest.raises(ValueError):
            FitParams(min_samples_split=1)


class TestPredict:
    def test_single_leaf(self):
        model = ForestModel([leaf_tree([[5, 0, 0], [5, 0, 0]])], input_width=3, n_labels=2)
        assert predict(model, np.zeros((4, 3))).tolist() == [[0, 0]] * 4

    def test_tie_goes_to_smaller_class(self):
        model = ForestModel([leaf_tree([[3, 0, 0]]), leaf_tree([[0, 3, 0]])], input_width=3, n_labels=1)
        assert predict_counts(model, np.zeros((1, 3))).tolist() == [[[3, 3, 0]]]
        assert predict(model, np.zeros((1, 3))).tolist() == [[0]]

    def test_matches_brute_force(self, rng):
        X = one_hot_encode(random_matrix(rng, 20, 5, f=0.2))
        Y = random_matrix(rng, 20, 4).values
        model = fit(X, Y, FitParams(n_trees=7, seed=21))
        Xt = one_hot_encode(random_matrix(rng, 20, 5, f=0.3))
        assert np.array_equal(predict(model, Xt), brute_force_predict(model, Xt))

    def test_width_mismatch(self, rng):
        X = one_hot_encode(random_matrix(rng, 10, 3))
        model = fit(X, random_matrix(rng, 10, 1).values)
        with pytest.raises(ValueError):
            predict(model, X[:, :-1])

    def test_outputs_are_classes(self, rng):
        X = one_hot_encode(random_matrix(rng, 30, 4, f=0.3))
        model = fit(X, random_matrix(rng, 30, 4).values)
        assert set(np.unique(predict(model, X))) <= {0, 1, 2}


def test_dump_lists_every_node(rng):
    X = one_hot_encode(random_matrix(rng, 15, 3))
    model = fit(X, random_matrix(rng, 15, 2).values, FitParams(n_trees=2))
    text = model.dump()
    assert text.startswith("forest n_trees=2")
    assert text.count("leaf") == sum(t.n_leaves for t in model.trees)
