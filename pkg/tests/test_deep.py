import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradcheck import max_relative_error
from normda.dataset import SyntheticShiftConfig, generate_synthetic
from normda.deep import (
    AdamState,
    MlpSpec,
    TrainConfig,
    adam_step,
    backward,
    class_grads,
    cross_entropy,
    cross_entropy_grad,
    dann_batch_grads,
    forward,
    grl_backward,
    init_mlp,
    make_adda,
    make_dann,
    predict_composite,
    softmax,
    train_adda,
    train_dann,
    train_plain,
)
from normda.errors import ConfigError, DegenerateLabelsError, ShapeError
from normda.shallow import KernelSpec, mmd_sq


def params_equal(a, b):
    return all(np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1]) for x, y in zip(a, b))


def blobs(n_per=100, sep=3.0, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([
        rng.normal(size=(n_per, dim)) + np.r_[sep, np.zeros(dim - 1)],
        rng.normal(size=(n_per, dim)) - np.r_[sep, np.zeros(dim - 1)],
    ])
    y = np.array([0] * n_per + [1] * n_per)
    return X, y


# ---------------------------------------------------------------------------
# Forward


def test_identity_network_passthrough():
    spec = MlpSpec((3, 3), head="identity")
    params = [(np.eye(3), np.zeros(3))]
    X = np.random.default_rng(0).normal(size=(5, 3))
    out, _ = forward(spec, params, X)
    np.testing.assert_array_equal(out, X)


def test_softmax_symmetry_and_normalization():
    out = softmax(np.array([[0.0, 0.0]]))
    np.testing.assert_allclose(out, [[0.5, 0.5]])


def test_relu_activation_values():
    spec = MlpSpec((2, 2, 2), activation="relu", head="identity")
    params = [(np.eye(2), np.zeros(2)), (np.eye(2), np.zeros(2))]
    out, _ = forward(spec, params, np.array([[-1.0, 2.0]]))
    np.testing.assert_array_equal(out, [[0.0, 2.0]])  # relu applied between layers


@settings(max_examples=30, deadline=None)
@given(logits=arrays(np.float64, (4, 5), elements=st.floats(-15, 15)))
def test_softmax_rows_are_distributions(logits):
    # logit gaps beyond ~36 saturate float64 at exactly 1.0, so keep the
    # strict-openness check inside the representable regime
    probs = softmax(logits)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(probs > 0) and np.all(probs < 1)


def test_forward_shape_errors():
    spec = MlpSpec((3, 2))
    params = init_mlp(spec, 0).params
    with pytest.raises(ShapeError):
        forward(spec, params, np.ones((2, 4)))


def test_spec_validation():
    with pytest.raises(ConfigError):
        MlpSpec((4,))
    with pytest.raises(ConfigError):
        MlpSpec((4, 3, 3, 3, 3, 2))  # four hidden layers
    with pytest.raises(ConfigError):
        MlpSpec((4, 2), activation="tanh")


# ---------------------------------------------------------------------------
# Backward


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(1)
    spec = MlpSpec((4, 2, 3), activation="relu", head="softmax")
    mlp = init_mlp(spec, 2)
    X = rng.normal(size=(8, 4))
    y = rng.integers(0, 3, 8)

    probs, cache = forward(spec, mlp.params, X)
    grads, _ = backward(spec, mlp.params, cache, cross_entropy_grad(probs, y))

    def loss_fn(params):
        p, _ = forward(spec, params, X)
        return cross_entropy(p, y)

    err, checked = max_relative_error(mlp.params, grads, loss_fn)
    assert checked == 4 * 2 + 2 + 2 * 3 + 3
    assert err < 1e-4


def test_backward_zero_upstream_gives_zero_grads():
    spec = MlpSpec((3, 4, 2), head="identity")
    mlp = init_mlp(spec, 3)
    X = np.random.default_rng(2).normal(size=(5, 3))
    out, cache = forward(spec, mlp.params, X)
    grads, gin = backward(spec, mlp.params, cache, np.zeros_like(out))
    assert all(np.all(g[0] == 0) and np.all(g[1] == 0) for g in grads)
    assert np.all(gin == 0)


def test_backward_duplicated_row_doubles_summed_gradient():
    spec = MlpSpec((3, 4, 2), activation="sigmoid", head="identity")
    mlp = init_mlp(spec, 4)
    x = np.random.default_rng(3).normal(size=(1, 3))
    g = np.array([[1.0, -2.0]])

    _, cache1 = forward(spec, mlp.params, x)
    grads1, _ = backward(spec, mlp.params, cache1, g)
    _, cache2 = forward(spec, mlp.params, np.vstack([x, x]))
    grads2, _ = backward(spec, mlp.params, cache2, np.vstack([g, g]))
    for (w1, b1), (w2, b2) in zip(grads1, grads2):
        np.testing.assert_allclose(w2, 2 * w1, atol=1e-12)
        np.testing.assert_allclose(b2, 2 * b1, atol=1e-12)


# ---------------------------------------------------------------------------
# GRL


def test_grl_backward_values():
    g = np.array([[1.0, -2.0], [3.0, 0.5]])
    np.testing.assert_array_equal(grl_backward(g, 0.0), np.zeros_like(g))
    np.testing.assert_array_equal(grl_backward(g, 1.0), -g)


def test_grl_composite_objective_finite_difference():
    rng = np.random.default_rng(5)
    lam = 0.7
    model = make_dann(
        MlpSpec((4, 6), head="identity"), MlpSpec((6, 3)), MlpSpec((6, 2)), lam=lam, seed=6
    )
    Xs = rng.normal(size=(9, 4))
    ys = rng.integers(0, 3, 9)
    Xt = rng.normal(size=(7, 4))
    X_all = np.vstack([Xs, Xt])
    d_labels = np.array([0] * 9 + [1] * 7)

    egrads, _, _, _, _ = dann_batch_grads(model, Xs, ys, Xt)

    def composite(ext_params):
        feats, _ = forward(model.extractor.spec, ext_params, Xs)
        probs, _ = forward(model.predictor.spec, model.predictor.params, feats)
        class_loss = cross_entropy(probs, ys)
        feats_all, _ = forward(model.extractor.spec, ext_params, X_all)
        dprobs, _ = forward(model.domain_classifier.spec, model.domain_classifier.params, feats_all)
        return class_loss - lam * cross_entropy(dprobs, d_labels)

    err, _ = max_relative_error(model.extractor.params, egrads, composite)
    assert err < 1e-4


def test_dann_lambda_zero_matches_plain_gradients_bitwise():
    rng = np.random.default_rng(7)
    model = make_dann(
        MlpSpec((4, 6), head="identity"), MlpSpec((6, 3)), MlpSpec((6, 2)), lam=0.0, seed=8
    )
    Xs = rng.normal(size=(10, 4))
    ys = rng.integers(0, 3, 10)
    Xt = rng.normal(size=(6, 4))
    plain_e, plain_p, _ = class_grads(model.extractor, model.predictor, Xs, ys)
    dann_e, dann_p, dann_d, _, _ = dann_batch_grads(model, Xs, ys, Xt)
    assert params_equal(plain_e, dann_e)
    assert params_equal(plain_p, dann_p)
    # the domain head still receives its own training gradients
    assert any(np.any(g[0] != 0) for g in dann_d)


# ---------------------------------------------------------------------------
# Adam


def test_adam_first_step_magnitude():
    # bias correction makes m_hat/sqrt(v_hat) = sign(g), so the first step
    # is lr per coordinate (up to eps for the smallest gradients)
    params = [(np.zeros((2, 2)), np.zeros(2))]
    grads = [(np.array([[0.5, -3.0], [1e-3, 10.0]]), np.array([2.0, -2.0]))]
    new, _ = adam_step(params, grads, AdamState.zeros_like(params), lr=0.1)
    np.testing.assert_allclose(np.abs(new[0][0]), 0.1, rtol=1e-4)
    np.testing.assert_allclose(np.abs(new[0][1]), 0.1, rtol=1e-4)


def test_adam_zero_gradient_no_change():
    params = [(np.ones((2, 2)), np.ones(2))]
    grads = [(np.zeros((2, 2)), np.zeros(2))]
    new, _ = adam_step(params, grads, AdamState.zeros_like(params), lr=0.1)
    assert params_equal(params, new)


def test_adam_two_step_hand_trace():
    # constant gradient 1, lr 0.1: replay the moment recurrences by hand
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    p = 0.0
    m = v = 0.0
    expected = []
    for t in (1, 2):
        m = b1 * m + (1 - b1) * 1.0
        v = b2 * v + (1 - b2) * 1.0
        p -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        expected.append(p)

    params = [(np.array([[0.0]]), np.zeros(1))]
    grads = [(np.array([[1.0]]), np.zeros(1))]
    state = AdamState.zeros_like(params)
    params, state = adam_step(params, grads, state, lr)
    assert params[0][0][0, 0] == pytest.approx(expected[0], abs=1e-15)
    params, state = adam_step(params, grads, state, lr)
    assert params[0][0][0, 0] == pytest.approx(expected[1], abs=1e-15)
    assert expected[1] < expected[0] < 0.0


# ---------------------------------------------------------------------------
# Plain training


def test_train_plain_fits_separable_blobs():
    X, y = blobs(seed=10)
    cfg = TrainConfig(learning_rate=0.01, batch_size=32, max_epochs=200, patience=20, seed=0)
    model = train_plain(X, y, cfg, MlpSpec((2, 8), head="identity"), MlpSpec((8, 2)))
    acc = np.mean(predict_composite(model.extractor, model.predictor, X) == y)
    assert acc >= 0.99


def test_train_plain_lr_zero_returns_initial_snapshot():
    X, y = blobs(n_per=40, seed=11)
    cfg = TrainConfig(learning_rate=0.0, batch_size=16, max_epochs=300, patience=1, seed=5)
    ext_spec, pred_spec = MlpSpec((2, 4), head="identity"), MlpSpec((4, 2))
    model = train_plain(X, y, cfg, ext_spec, pred_spec)
    rng = np.random.default_rng(cfg.seed)
    init_ext = init_mlp(ext_spec, rng)
    init_pred = init_mlp(pred_spec, rng)
    assert params_equal(model.extractor.params, init_ext.params)
    assert params_equal(model.predictor.params, init_pred.params)


def test_train_plain_deterministic():
    X, y = blobs(n_per=50, seed=12)
    cfg = TrainConfig(learning_rate=0.01, batch_size=16, max_epochs=30, patience=10, seed=3)
    a = train_plain(X, y, cfg, MlpSpec((2, 6), head="identity"), MlpSpec((6, 2)))
    b = train_plain(X, y, cfg, MlpSpec((2, 6), head="identity"), MlpSpec((6, 2)))
    assert params_equal(a.extractor.params, b.extractor.params)
    assert params_equal(a.predictor.params, b.predictor.params)


def test_train_plain_single_class_rejected():
    X = np.random.default_rng(0).normal(size=(10, 2))
    cfg = TrainConfig(seed=0)
    with pytest.raises(DegenerateLabelsError):
        train_plain(X, np.zeros(10, dtype=int), cfg, MlpSpec((2, 4), head="identity"), MlpSpec((4, 2)))


# ---------------------------------------------------------------------------
# DANN


def test_dann_target_equals_source_confuses_domain_head():
    X, y = blobs(n_per=60, seed=13, dim=3)
    cfg = TrainConfig(learning_rate=0.01, batch_size=32, max_epochs=60, patience=20, seed=1)
    model = make_dann(MlpSpec((3, 8), head="identity"), MlpSpec((8, 2)), MlpSpec((8, 2)), lam=1.0, seed=1)
    trained = train_dann(X, y, X.copy(), cfg, model)
    feats, _ = forward(trained.extractor.spec, trained.extractor.params, X)
    dprobs, _ = forward(
        trained.domain_classifier.spec, trained.domain_classifier.params, np.vstack([feats, feats])
    )
    domain_acc = np.mean(np.argmax(dprobs, axis=1) == np.array([0] * len(X) + [1] * len(X)))
    assert 0.4 <= domain_acc <= 0.6


def test_dann_reduces_extractor_mmd_on_shifted_domains():
    ds = generate_synthetic(SyntheticShiftConfig(
        n_subjects=2, n_sessions=1, n_classes=2, samples_per_class_per_domain=100,
        dim=8, class_separation=4.0, domain_shift_scale=3.0, noise_std=1.0, seed=5,
    ))
    Xs, ys = ds.features[ds.subjects == 0], ds.labels[ds.subjects == 0]
    Xt = ds.features[ds.subjects == 1]
    k = KernelSpec("linear")
    raw = mmd_sq(Xs, Xt, k)
    cfg = TrainConfig(learning_rate=0.003, batch_size=32, max_epochs=60, patience=15, seed=2)
    model = make_dann(
        MlpSpec((8, 16, 2), activation="sigmoid", head="identity"),
        MlpSpec((2, 2)), MlpSpec((2, 2)), lam=1.0, seed=2,
    )
    trained = train_dann(Xs, ys, Xt, cfg, model)
    fs, _ = forward(trained.extractor.spec, trained.extractor.params, Xs)
    ft, _ = forward(trained.extractor.spec, trained.extractor.params, Xt)
    assert mmd_sq(fs, ft, k) < raw


def test_dann_deterministic():
    X, y = blobs(n_per=30, seed=14, dim=3)
    cfg = TrainConfig(learning_rate=0.01, batch_size=16, max_epochs=10, patience=5, seed=4)
    runs = []
    for _ in range(2):
        model = make_dann(MlpSpec((3, 4), head="identity"), MlpSpec((4, 2)), MlpSpec((4, 2)), seed=4)
        runs.append(train_dann(X, y, X + 1.0, cfg, model))
    assert params_equal(runs[0].extractor.params, runs[1].extractor.params)
    assert params_equal(runs[0].domain_classifier.params, runs[1].domain_classifier.params)


def test_dann_empty_target_rejected():
    X, y = blobs(n_per=10, seed=15)
    model = make_dann(MlpSpec((2, 4), head="identity"), MlpSpec((4, 2)), MlpSpec((4, 2)))
    with pytest.raises(ShapeError):
        train_dann(X, y, np.empty((0, 2)), TrainConfig(seed=0), model)


# ---------------------------------------------------------------------------
# ADDA


def adda_model(seed, dim=8):
    return make_adda(
        MlpSpec((dim, 8), head="identity"),
        MlpSpec((8, 2)),
        MlpSpec((8, 8, 2), activation="leaky_relu"),
        seed=seed,
    )


def test_adda_stage2_zero_epochs_copies_source_encoder():
    X, y = blobs(n_per=30, seed=16, dim=8)
    cfg = TrainConfig(learning_rate=0.01, batch_size=32, max_epochs=20, patience=5, seed=6)
    trained = train_adda(X, y, X.copy(), cfg, adda_model(6), stage2_epochs=0)
    assert params_equal(trained.source_encoder.params, trained.target_encoder.params)
    pred_s = predict_composite(trained.source_encoder, trained.classifier, X)
    pred_t = predict_composite(trained.target_encoder, trained.classifier, X)
    np.testing.assert_array_equal(pred_s, pred_t)


def test_adda_target_equals_source_discriminator_near_chance():
    ds = generate_synthetic(SyntheticShiftConfig(
        n_subjects=1, n_sessions=1, n_classes=2, samples_per_class_per_domain=100,
        dim=8, class_separation=4.0, seed=5,
    ))
    X, y = ds.features, ds.labels
    perm = np.random.default_rng(9).permutation(len(X))
    fit, held = perm[:160], perm[160:]
    cfg = TrainConfig(learning_rate=0.01, batch_size=32, max_epochs=40, patience=10, seed=1)
    trained = train_adda(X[fit], y[fit], X[fit].copy(), cfg, adda_model(1), stage2_epochs=30)
    fs, _ = forward(trained.source_encoder.spec, trained.source_encoder.params, X[held])
    ft, _ = forward(trained.target_encoder.spec, trained.target_encoder.params, X[held])
    dprobs, _ = forward(trained.discriminator.spec, trained.discriminator.params, np.vstack([fs, ft]))
    acc = np.mean(np.argmax(dprobs, axis=1) == np.array([0] * len(held) + [1] * len(held)))
    assert 0.4 <= acc <= 0.6


def test_adda_improves_target_accuracy_under_translation_shift():
    ds = generate_synthetic(SyntheticShiftConfig(
        n_subjects=2, n_sessions=1, n_classes=2, samples_per_class_per_domain=100,
        dim=8, class_separation=4.0, domain_shift_scale=10.0, noise_std=1.0, seed=5,
    ))
    Xs, ys = ds.features[ds.subjects == 0], ds.labels[ds.subjects == 0]
    Xt, yt = ds.features[ds.subjects == 1], ds.labels[ds.subjects == 1]
    cfg = TrainConfig(learning_rate=0.01, batch_size=32, max_epochs=80, patience=15, seed=1)
    trained = train_adda(Xs, ys, Xt, cfg, adda_model(1), stage2_epochs=240)
    acc_through_source = np.mean(predict_composite(trained.source_encoder, trained.classifier, Xt) == yt)
    acc_through_target = np.mean(predict_composite(trained.target_encoder, trained.classifier, Xt) == yt)
    assert acc_through_target > acc_through_source


def test_adda_discriminator_gradients_match_finite_differences():
    rng = np.random.default_rng(17)
    disc = init_mlp(MlpSpec((4, 6, 2), activation="leaky_relu"), 18)
    feats = rng.normal(size=(10, 4))
    labels = rng.integers(0, 2, 10)
    probs, cache = forward(disc.spec, disc.params, feats)
    grads, _ = backward(disc.spec, disc.params, cache, cross_entropy_grad(probs, labels))

    def loss_fn(params):
        p, _ = forward(disc.spec, params, feats)
        return cross_entropy(p, labels)

    err, _ = max_relative_error(disc.params, grads, loss_fn)
    assert err < 1e-4
