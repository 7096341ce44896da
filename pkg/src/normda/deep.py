"""Dense networks with hand-written reverse-mode gradients, Adam, and the
three training regimes: plain classifier, gradient-reversal adversarial
training, and two-stage adversarial encoder alignment.

Every model is a composition of small MLPs described by an MlpSpec and a
list of (weights, bias) pairs. Training is a pure function of
(data, config, seed): repeated runs produce bit-identical parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .dataset import stratified_indices
from .errors import ConfigError, DegenerateLabelsError, NumericError, ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

Params = list[tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class MlpSpec:
    """Layer sizes (input, hidden..., output), hidden activation, output head."""

    layer_sizes: tuple[int, ...]
    activation: str = "relu"
    leaky_slope: float = 0.01
    head: str = "softmax"  # softmax (classifier) or identity (feature extractor)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ConfigError("layer_sizes needs >= 2 entries, all >= 1")
        if len(sizes) - 2 > 3:
            raise ConfigError("at most 3 hidden layers are supported")
        if self.activation not in ("relu", "sigmoid", "leaky_relu"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.head not in ("softmax", "identity"):
            raise ConfigError(f"unknown head {self.head!r}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class Mlp:
    """A spec plus its parameters; params are treated as immutable."""

    spec: MlpSpec
    params: Params


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        # learning_rate 0 is allowed: it trains nothing but exercises the
        # early-stopping path deterministically.
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in (0, 1)")


def init_params(spec: MlpSpec, seed_or_rng) -> Params:
    """Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = (
        seed_or_rng
        if isinstance(seed_or_rng, np.random.Generator)
        else np.random.default_rng(seed_or_rng)
    )
    params: Params = []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-limit, limit, (fan_in, fan_out)), np.zeros(fan_out)))
    return params


def init_mlp(spec: MlpSpec, seed_or_rng) -> Mlp:
    return Mlp(spec, init_params(spec, seed_or_rng))


def copy_params(params: Params) -> Params:
    return [(w.copy(), b.copy()) for w, b in params]


def _activate(spec: MlpSpec, z: np.ndarray) -> np.ndarray:
    if spec.activation == "relu":
        return np.maximum(z, 0.0)
    if spec.activation == "sigmoid":
        return expit(z)
    return np.where(z > 0, z, spec.leaky_slope * z)


def _activate_grad(spec: MlpSpec, z: np.ndarray) -> np.ndarray:
    if spec.activation == "relu":
        return (z > 0).astype(np.float64)
    if spec.activation == "sigmoid":
        s = expit(z)
        return s * (1.0 - s)
    return np.where(z > 0, 1.0, spec.leaky_slope)


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # activation entering each layer
    pre: list[np.ndarray]  # pre-activation of each layer
    out: np.ndarray


def forward(spec: MlpSpec, params: Params, X: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Dense forward pass; a softmax head returns per-row probabilities."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.in_dim:
        raise ShapeError(f"input width {X.shape[-1]} != spec input size {spec.in_dim}")
    if len(params) != len(spec.layer_sizes) - 1:
        raise ShapeError("params do not match spec layer count")
    inputs, pre = [], []
    a = X
    last = len(params) - 1
    for l, (w, b) in enumerate(params):
        inputs.append(a)
        z = a @ w + b
        pre.append(z)
        a = _activate(spec, z) if l < last else z
    out = softmax(a) if spec.head == "softmax" else a
    if not np.all(np.isfinite(out)):
        raise NumericError("forward pass produced non-finite outputs")
    return out, ForwardCache(inputs, pre, out)


def backward(
    spec: MlpSpec, params: Params, cache: ForwardCache, grad_out: np.ndarray
) -> tuple[Params, np.ndarray]:
    """Reverse-mode gradients from grad_out (w.r.t. the final pre-head output).

    Returns (per-layer (dW, db) gradients, gradient w.r.t. the input batch).
    For a softmax head pass the logits gradient, e.g. from
    cross_entropy_grad.
    """
    if len(cache.pre) != len(params):
        raise ShapeError("cache does not match params")
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != cache.pre[-1].shape:
        raise ShapeError("grad_out shape does not match the forward output")
    grads: Params = [None] * len(params)  # type: ignore[list-item]
    for l in range(len(params) - 1, -1, -1):
        w, _ = params[l]
        grads[l] = (cache.inputs[l].T @ g, g.sum(axis=0))
        g = g @ w.T
        if l > 0:
            g = g * _activate_grad(spec, cache.pre[l - 1])
    return grads, g


def cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood of integer labels under probability rows."""
    p = np.clip(probs[np.arange(len(y)), y], 1e-12, None)
    return float(-np.mean(np.log(p)))


def cross_entropy_grad(probs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross-entropy w.r.t. the softmax logits."""
    g = probs.copy()
    g[np.arange(len(y)), y] -= 1.0
    return g / len(y)


def grl_backward(upstream: np.ndarray, lam: float) -> np.ndarray:
    """Gradient-reversal: identity forward, upstream scaled by -lam backward."""
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    return -lam * np.asarray(upstream)


@dataclass
class AdamState:
    m: Params
    v: Params
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Params) -> "AdamState":
        return cls(
            m=[(np.zeros_like(w), np.zeros_like(b)) for w, b in params],
            v=[(np.zeros_like(w), np.zeros_like(b)) for w, b in params],
        )


def adam_step(
    params: Params, grads: Params, state: AdamState, lr: float
) -> tuple[Params, AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    t = state.t + 1
    new_params: Params = []
    new_m: Params = []
    new_v: Params = []
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t
    for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(params, grads, state.m, state.v):
        pair_p, pair_m, pair_v = [], [], []
        for p, g, m, v in ((w, gw, mw, vw), (b, gb, mb, vb)):
            m_new = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
            v_new = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
            p_new = p - lr * (m_new / c1) / (np.sqrt(v_new / c2) + ADAM_EPS)
            if not np.all(np.isfinite(p_new)):
                raise NumericError("Adam update produced non-finite parameters")
            pair_p.append(p_new)
            pair_m.append(m_new)
            pair_v.append(v_new)
        new_params.append(tuple(pair_p))
        new_m.append(tuple(pair_m))
        new_v.append(tuple(pair_v))
    return new_params, AdamState(new_m, new_v, t)


# ---------------------------------------------------------------------------
# Composite models


@dataclass(frozen=True)
class PlainModel:
    """Feature extractor followed by a label predictor, no DA components."""

    extractor: Mlp
    predictor: Mlp


@dataclass(frozen=True)
class DannModel:
    """Extractor, label predictor and domain classifier joined by a GRL."""

    extractor: Mlp
    predictor: Mlp
    domain_classifier: Mlp
    lam: float = 1.0

    def __post_init__(self):
        width = self.extractor.spec.out_dim
        if self.predictor.spec.in_dim != width or self.domain_classifier.spec.in_dim != width:
            raise ShapeError("predictor and domain classifier must accept the extractor output")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")


@dataclass(frozen=True)
class AddaModel:
    """Source/target encoders, shared classifier, domain discriminator."""

    source_encoder: Mlp
    target_encoder: Mlp
    classifier: Mlp
    discriminator: Mlp

    def __post_init__(self):
        if self.source_encoder.spec != self.target_encoder.spec:
            raise ShapeError("source and target encoders must share a spec")
        width = self.source_encoder.spec.out_dim
        if self.classifier.spec.in_dim != width or self.discriminator.spec.in_dim != width:
            raise ShapeError("classifier and discriminator must accept the encoder output")


def make_dann(
    extractor: MlpSpec,
    predictor: MlpSpec,
    domain_classifier: MlpSpec,
    lam: float = 1.0,
    seed: int = 0,
) -> DannModel:
    rng = np.random.default_rng(seed)
    return DannModel(
        init_mlp(extractor, rng), init_mlp(predictor, rng), init_mlp(domain_classifier, rng), lam
    )


def make_adda(
    encoder: MlpSpec, classifier: MlpSpec, discriminator: MlpSpec, seed: int = 0
) -> AddaModel:
    rng = np.random.default_rng(seed)
    enc = init_mlp(encoder, rng)
    return AddaModel(
        enc,
        Mlp(encoder, copy_params(enc.params)),
        init_mlp(classifier, rng),
        init_mlp(discriminator, rng),
    )


def predict_composite(extractor: Mlp, head: Mlp, X: np.ndarray) -> np.ndarray:
    feats, _ = forward(extractor.spec, extractor.params, X)
    probs, _ = forward(head.spec, head.params, feats)
    return np.argmax(probs, axis=1)


def _accuracy(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(pred == y))


def class_grads(
    extractor: Mlp, predictor: Mlp, X: np.ndarray, y: np.ndarray
) -> tuple[Params, Params, float]:
    """Cross-entropy gradients through predictor(extractor(X))."""
    feats, ecache = forward(extractor.spec, extractor.params, X)
    probs, pcache = forward(predictor.spec, predictor.params, feats)
    loss = cross_entropy(probs, y)
    pgrads, gfeats = backward(predictor.spec, predictor.params, pcache, cross_entropy_grad(probs, y))
    egrads, _ = backward(extractor.spec, extractor.params, ecache, gfeats)
    return egrads, pgrads, loss


def dann_batch_grads(
    model: DannModel, Xs: np.ndarray, ys: np.ndarray, Xt: np.ndarray
) -> tuple[Params, Params, Params, float, float]:
    """Gradients for one adversarial batch.

    Classification loss flows through extractor and predictor on source
    rows; domain loss (source=0, target=1) flows through the domain
    classifier normally and into the extractor through the reversal layer,
    scaled by -lambda.
    """
    ext, pred, dom = model.extractor, model.predictor, model.domain_classifier

    egrads, pgrads, class_loss = class_grads(ext, pred, Xs, ys)

    X_all = np.vstack([Xs, Xt])
    d_labels = np.concatenate([np.zeros(len(Xs), dtype=np.int64), np.ones(len(Xt), dtype=np.int64)])
    feats, ecache = forward(ext.spec, ext.params, X_all)
    dprobs, dcache = forward(dom.spec, dom.params, feats)
    domain_loss = cross_entropy(dprobs, d_labels)
    dgrads, gfeats = backward(dom.spec, dom.params, dcache, cross_entropy_grad(dprobs, d_labels))
    if model.lam > 0:
        rev = grl_backward(gfeats, model.lam)
        erev, _ = backward(ext.spec, ext.params, ecache, rev)
        egrads = [(gw + rw, gb + rb) for (gw, gb), (rw, rb) in zip(egrads, erev)]
    return egrads, pgrads, dgrads, class_loss, domain_loss


def _epoch_batches(n: int, batch_size: int, rng) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def _val_split(y: np.ndarray, cfg: TrainConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    seed = int(rng.integers(2**32))
    return stratified_indices(y, cfg.val_fraction, seed)


def train_plain(
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    extractor_spec: MlpSpec,
    predictor_spec: MlpSpec,
) -> PlainModel:
    """Minimize cross-entropy with Adam and mini-batches; early-stops on
    validation accuracy and returns the best-validation snapshot."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len({int(v) for v in y}) < 2:
        raise DegenerateLabelsError("training needs at least 2 classes")
    rng = np.random.default_rng(cfg.seed)
    ext = init_mlp(extractor_spec, rng)
    pred = init_mlp(predictor_spec, rng)
    train_idx, val_idx = _val_split(y, cfg, rng)

    state = AdamState.zeros_like(ext.params + pred.params)
    n_ext = len(ext.params)
    best_acc, best = -1.0, (copy_params(ext.params), copy_params(pred.params))
    stale = 0
    for _ in range(cfg.max_epochs):
        for batch in _epoch_batches(train_idx.size, cfg.batch_size, rng):
            bi = train_idx[batch]
            egrads, pgrads, _ = class_grads(ext, pred, X[bi], y[bi])
            merged, state = adam_step(
                ext.params + pred.params, egrads + pgrads, state, cfg.learning_rate
            )
            ext = Mlp(ext.spec, merged[:n_ext])
            pred = Mlp(pred.spec, merged[n_ext:])
        acc = _accuracy(predict_composite(ext, pred, X[val_idx]), y[val_idx])
        if acc > best_acc:
            best_acc, best, stale = acc, (copy_params(ext.params), copy_params(pred.params)), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return PlainModel(Mlp(extractor_spec, best[0]), Mlp(predictor_spec, best[1]))


def train_dann(
    Xs: np.ndarray,
    ys: np.ndarray,
    Xt: np.ndarray,
    cfg: TrainConfig,
    model: DannModel,
) -> DannModel:
    """Adversarial training with a gradient-reversal layer.

    Per batch the classifier path minimizes source cross-entropy while the
    domain head learns to separate source from target; the extractor
    receives the domain gradient scaled by -lambda. Early stopping watches
    source-validation accuracy only (target labels are never read).
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    Xt = np.asarray(Xt, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.int64)
    if Xt.shape[0] == 0:
        raise ShapeError("target set must be nonempty")
    if len({int(v) for v in ys}) < 2:
        raise DegenerateLabelsError("source labels contain a single class")
    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = _val_split(ys, cfg, rng)

    ext, pred, dom = model.extractor, model.predictor, model.domain_classifier
    n_ext, n_pred = len(ext.params), len(pred.params)
    state = AdamState.zeros_like(ext.params + pred.params + dom.params)
    best_acc, stale = -1.0, 0
    best = (copy_params(ext.params), copy_params(pred.params), copy_params(dom.params))
    for _ in range(cfg.max_epochs):
        batches = _epoch_batches(train_idx.size, cfg.batch_size, rng)
        t_order = rng.permutation(Xt.shape[0])
        t_stream = np.resize(t_order, sum(b.size for b in batches))
        pos = 0
        for batch in batches:
            bi = train_idx[batch]
            ti = t_stream[pos : pos + batch.size]
            pos += batch.size
            model_now = DannModel(ext, pred, dom, model.lam)
            egrads, pgrads, dgrads, _, _ = dann_batch_grads(model_now, Xs[bi], ys[bi], Xt[ti])
            merged, state = adam_step(
                ext.params + pred.params + dom.params,
                egrads + pgrads + dgrads,
                state,
                cfg.learning_rate,
            )
            ext = Mlp(ext.spec, merged[:n_ext])
            pred = Mlp(pred.spec, merged[n_ext : n_ext + n_pred])
            dom = Mlp(dom.spec, merged[n_ext + n_pred :])
        acc = _accuracy(predict_composite(ext, pred, Xs[val_idx]), ys[val_idx])
        if acc > best_acc:
            best_acc, stale = acc, 0
            best = (copy_params(ext.params), copy_params(pred.params), copy_params(dom.params))
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return DannModel(
        Mlp(ext.spec, best[0]), Mlp(pred.spec, best[1]), Mlp(dom.spec, best[2]), model.lam
    )


def train_adda(
    Xs: np.ndarray,
    ys: np.ndarray,
    Xt: np.ndarray,
    cfg: TrainConfig,
    model: AddaModel,
    stage2_epochs: int | None = None,
    encoder_lr_scale: float = 0.1,
) -> AddaModel:
    """Two-stage adversarial encoder alignment.

    Stage 1 trains source encoder plus classifier on source cross-entropy
    with early stopping. Stage 2 freezes both, seeds the target encoder
    from the source encoder, then alternates discriminator updates
    (source encodings labeled 0, target 1) with target-encoder updates
    against inverted labels. Target rows are classified through
    classifier(target_encoder(x)).

    Two stabilizers keep the minimax from cycling at small scale: the
    encoder steps at `encoder_lr_scale` times the discriminator rate, and
    the returned (target encoder, discriminator) pair is the epoch-end
    snapshot whose discriminator accuracy sat closest to chance (ties keep
    the earliest epoch).
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    Xt = np.asarray(Xt, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.int64)
    if Xt.shape[0] == 0:
        raise ShapeError("target set must be nonempty")
    if stage2_epochs is None:
        stage2_epochs = cfg.max_epochs
    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = _val_split(ys, cfg, rng)
    if len({int(v) for v in ys}) < 2:
        raise DegenerateLabelsError("source labels contain a single class")

    # Stage 1: source encoder + classifier.
    enc, clf = model.source_encoder, model.classifier
    n_enc = len(enc.params)
    state = AdamState.zeros_like(enc.params + clf.params)
    best_acc, stale = -1.0, 0
    best = (copy_params(enc.params), copy_params(clf.params))
    for _ in range(cfg.max_epochs):
        for batch in _epoch_batches(train_idx.size, cfg.batch_size, rng):
            bi = train_idx[batch]
            egrads, cgrads, _ = class_grads(enc, clf, Xs[bi], ys[bi])
            merged, state = adam_step(
                enc.params + clf.params, egrads + cgrads, state, cfg.learning_rate
            )
            enc = Mlp(enc.spec, merged[:n_enc])
            clf = Mlp(clf.spec, merged[n_enc:])
        acc = _accuracy(predict_composite(enc, clf, Xs[val_idx]), ys[val_idx])
        if acc > best_acc:
            best_acc, stale = acc, 0
            best = (copy_params(enc.params), copy_params(clf.params))
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    source_enc = Mlp(enc.spec, best[0])
    clf = Mlp(clf.spec, best[1])

    # Stage 2: adversarial target-encoder alignment against frozen pieces.
    target_enc = Mlp(source_enc.spec, copy_params(source_enc.params))
    disc = model.discriminator
    disc_state = AdamState.zeros_like(disc.params)
    enc_state = AdamState.zeros_like(target_enc.params)
    src_feats_all = forward(source_enc.spec, source_enc.params, Xs)[0]
    domain_truth = np.concatenate(
        [np.zeros(Xs.shape[0], dtype=np.int64), np.ones(Xt.shape[0], dtype=np.int64)]
    )
    best_gap = np.inf
    best_pair = (copy_params(target_enc.params), copy_params(disc.params))
    for _ in range(stage2_epochs):
        s_batches = _epoch_batches(Xs.shape[0], cfg.batch_size, rng)
        t_order = rng.permutation(Xt.shape[0])
        t_stream = np.resize(t_order, sum(b.size for b in s_batches))
        pos = 0
        for s_batch in s_batches:
            ti = t_stream[pos : pos + s_batch.size]
            pos += s_batch.size
            # Discriminator step: source encodings 0, target encodings 1.
            real = src_feats_all[s_batch]
            fake, tcache = forward(target_enc.spec, target_enc.params, Xt[ti])
            feats = np.vstack([real, fake])
            d_labels = np.concatenate(
                [np.zeros(len(real), dtype=np.int64), np.ones(len(fake), dtype=np.int64)]
            )
            dprobs, dcache = forward(disc.spec, disc.params, feats)
            dgrads, _ = backward(
                disc.spec, disc.params, dcache, cross_entropy_grad(dprobs, d_labels)
            )
            new_d, disc_state = adam_step(disc.params, dgrads, disc_state, cfg.learning_rate)
            disc = Mlp(disc.spec, new_d)
            # Encoder step: fool the discriminator (inverted labels).
            fake, tcache = forward(target_enc.spec, target_enc.params, Xt[ti])
            dprobs, dcache = forward(disc.spec, disc.params, fake)
            inverted = np.zeros(len(fake), dtype=np.int64)
            _, gfeats = backward(
                disc.spec, disc.params, dcache, cross_entropy_grad(dprobs, inverted)
            )
            tgrads, _ = backward(target_enc.spec, target_enc.params, tcache, gfeats)
            new_t, enc_state = adam_step(
                target_enc.params, tgrads, enc_state, cfg.learning_rate * encoder_lr_scale
            )
            target_enc = Mlp(target_enc.spec, new_t)
        fake_all = forward(target_enc.spec, target_enc.params, Xt)[0]
        dprobs = forward(disc.spec, disc.params, np.vstack([src_feats_all, fake_all]))[0]
        gap = abs(_accuracy(np.argmax(dprobs, axis=1), domain_truth) - 0.5)
        if gap < best_gap:
            best_gap = gap
            best_pair = (copy_params(target_enc.params), copy_params(disc.params))

    return AddaModel(
        source_enc, Mlp(target_enc.spec, best_pair[0]), clf, Mlp(disc.spec, best_pair[1])
    )
