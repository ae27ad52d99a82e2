import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.svm import SVC

from dwloa.errors import ClassError, NumericError
from dwloa.svm import dual_objective, kkt_violation, predict, train_svm, write_model

from oracles import svm_dual_exact


def random_problem(rng, n, rank=None):
    A = rng.normal(size=(n, rank or n))
    y = np.where(rng.random(n) < 0.5, 1, -1)
    y[0], y[-1] = 1, -1
    return A @ A.T, y


def test_two_points_identity():
    m = train_svm(np.eye(2), [1, -1], C=10)
    assert m.alpha == pytest.approx([1.0, 1.0], abs=1e-9)
    assert m.support.tolist() == [0, 1]
    assert np.array_equal(predict(m, np.eye(2)), [1, -1])
    assert m.dual_objective == pytest.approx(1.0)


def test_duplicate_example_same_decision():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 3))
    X[5] = X[2]
    y = np.array([1, -1, 1, -1, -1, 1])
    K = X @ X.T
    m = train_svm(K, y, C=1.0)
    f = m.decision_function(K)
    assert f[2] == pytest.approx(f[5], abs=1e-9)


def test_tiny_c_follows_majority():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(9, 2))
    y = np.array([1, 1, 1, 1, 1, 1, 1, -1, -1])
    K = X @ X.T
    m = train_svm(K, y, C=1e-6)
    assert np.all(m.alpha <= 1e-6 + 1e-15)
    assert np.all(predict(m, K) == 1)


def test_separable_training_accuracy():
    X = np.array([[2.0, 2.0], [3.0, 1.0], [2.5, 3.0], [-2.0, -1.0], [-1.0, -3.0], [-3.0, -2.0]])
    y = np.array([1, 1, 1, -1, -1, -1])
    K = X @ X.T
    m = train_svm(K, y, C=100.0)
    assert np.array_equal(predict(m, K), y)


def test_zero_cross_kernel_gives_bias_sign():
    rng = np.random.default_rng(2)
    K, y = random_problem(rng, 8)
    m = train_svm(K, y, C=1.0)
    expected = 1 if m.bias >= 0 else -1
    assert np.all(predict(m, np.zeros((3, 8))) == expected)


def test_zero_decision_maps_to_positive():
    m = train_svm(np.eye(2), [1, -1], C=10)
    # equal similarity to both training points gives a decision of bias = 0
    assert m.bias == pytest.approx(0.0, abs=1e-12)
    assert predict(m, np.array([[0.5, 0.5]])).tolist() == [1]


@pytest.mark.parametrize("seed", range(15))
def test_matches_exact_qp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    K, y = random_problem(rng, n, rank=int(rng.integers(1, n + 1)))
    C = float(10 ** rng.uniform(-2, 2))
    m = train_svm(K, y, C)
    best, _ = svm_dual_exact(K, y, C)
    assert m.dual_objective == pytest.approx(best, abs=1e-4)
    assert m.dual_objective == pytest.approx(dual_objective(K, y, m.alpha), abs=1e-9)
    assert kkt_violation(K, y, m.alpha, C) <= 1e-3


@pytest.mark.parametrize("seed", range(5))
def test_agrees_with_libsvm(seed):
    rng = np.random.default_rng(100 + seed)
    K, y = random_problem(rng, 40, rank=5)
    ours = train_svm(K, y, C=1.0, tol=1e-6)
    ref = SVC(C=1.0, kernel="precomputed", tol=1e-6).fit(K, y)
    coef = np.zeros(40)
    coef[ref.support_] = ref.dual_coef_[0]
    assert ours.dual_coef == pytest.approx(coef, abs=1e-4)
    assert ours.bias == pytest.approx(ref.intercept_[0], abs=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 25), st.sampled_from([0.01, 0.1, 1.0, 10.0, 100.0]))
def test_feasibility_and_monotone_dual(seed, n, C):
    rng = np.random.default_rng(seed)
    K, y = random_problem(rng, n, rank=max(1, n // 3))
    m = train_svm(K, y, C, record_objective=True)
    assert np.all(m.alpha >= 0) and np.all(m.alpha <= C)
    assert abs(y @ m.alpha) <= 1e-8 * C * n
    trace = np.array(m.objective_trace)
    assert np.all(np.diff(trace) >= -1e-9 * max(1.0, abs(trace).max()))
    assert kkt_violation(K, y, m.alpha, C) <= 1e-3


def test_permutation_invariant_accuracy():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 4))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=30) > 0, 1, -1)
    K = X @ X.T
    perm = rng.permutation(30)
    a = train_svm(K, y, 1.0, tol=1e-8)
    b = train_svm(K[np.ix_(perm, perm)], y[perm], 1.0, tol=1e-8)
    assert np.array_equal(predict(a, K)[perm], predict(b, K[np.ix_(perm, perm)]))
    assert a.dual_objective == pytest.approx(b.dual_objective, rel=1e-6)


def test_errors():
    with pytest.raises(ClassError):
        train_svm(np.eye(3), [1, 1, 1], 1.0)
    with pytest.raises(NumericError):
        train_svm(np.array([[1.0, np.inf], [np.inf, 1.0]]), [1, -1], 1.0)
    with pytest.raises(ValueError):
        train_svm(np.eye(2), [1, -1], 0.0)
    m = train_svm(np.eye(2), [1, -1], 1.0)
    with pytest.raises(ValueError):
        m.decision_function(np.zeros((2, 3)))


def test_write_model(tmp_path):
    m = train_svm(np.eye(2), [1, -1], 10.0, train_index=[4, 9])
    path = tmp_path / "model.csv"
    write_model(str(path), m)
    lines = path.read_text().splitlines()
    assert lines[1] == "index,dual_coef"
    assert [ln.split(",")[0] for ln in lines[2:]] == ["4", "9"]
