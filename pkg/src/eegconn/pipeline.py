"""Model assembly, cross-validated training, fusion, and metrics.

Seven classifier configurations are supported: three single-domain CNNs
(2-D over lagged-coefficient tensors, 2-D over band PDC tensors, 1-D over
topology feature matrices), three fusions of those domains (feature-level
concatenation, score-level second-stage softmax, decision-level majority
vote), and a linear SVM baseline.  Evaluation is stratified k-fold with a
held-out validation split inside each fold driving epoch selection.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .eeg_io import CohortManifest
from .errors import ShapeError, TrainingDivergedError, ValidationError
from .nn.layers import (
    AvgPool1d,
    AvgPool2d,
    Conv1d,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    MaxPool2d,
    ReLU,
    Softmax,
)
from .nn.network import MultiBranchNetwork, Network, cross_entropy
from .nn.optim import AdamState, adam_step
from .seeding import derive_rng, derive_seed
from .svm import LinearSvm, train_svm

DOMAINS = ("var", "pdc", "cn")

MODEL_KINDS = (
    "cnn2d_var",
    "cnn2d_pdc",
    "cnn1d_cn",
    "fusion_feature",
    "fusion_score",
    "fusion_decision",
    "svm_linear",
)

KIND_DOMAINS = {
    "cnn2d_var": ("var",),
    "cnn2d_pdc": ("pdc",),
    "cnn1d_cn": ("cn",),
    "fusion_feature": DOMAINS,
    "fusion_score": DOMAINS,
    "fusion_decision": DOMAINS,
}

METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "modified_accuracy")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture and training hyperparameters for one classifier kind."""

    kind: str
    channels: int = 16
    lags: int = 5
    n_bands: int = 5
    conv2d_filters: tuple[int, int] = (128, 64)
    conv2d_kernel: int = 3
    conv1d_filters: int = 8
    conv1d_kernel: int = 3
    pool1d_size: int = 2
    pool1d_stride: int = 2
    dense2d: int = 64
    dense1d: int = 32
    fusion_dense: int = 64
    dropout: float = 0.5
    pool2d: str = "none"  # "avg" or "max" reproduces the pooling ablation
    epochs: int = 500
    learning_rate: float = 1e-4
    lr_decay: float = 1e-6
    batch_size: int = 0  # 0 = full batch

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        if self.pool2d not in ("none", "avg", "max"):
            raise ValidationError(f"pool2d must be none/avg/max, got {self.pool2d!r}")

    @property
    def cn_length(self) -> int:
        return 2 * self.channels + 2

    def input_shape(self, domain: str) -> tuple[int, ...]:
        if domain == "var":
            return (self.channels, self.channels, self.lags)
        if domain == "pdc":
            return (self.channels, self.channels, self.n_bands)
        if domain == "cn":
            return (self.cn_length, self.n_bands)
        raise ValidationError(f"unknown feature domain {domain!r}")


def _shape_after(layers, shape):
    for layer in layers:
        shape = layer.output_shape(shape)
    return shape


def _conv_stack_2d(spec: ModelSpec, in_channels: int):
    f1, f2 = spec.conv2d_filters
    layers = [Conv2d(in_channels, f1, spec.conv2d_kernel), ReLU()]
    if spec.pool2d != "none":
        layers.append(AvgPool2d(2) if spec.pool2d == "avg" else MaxPool2d(2))
    layers += [Conv2d(f1, f2, spec.conv2d_kernel), ReLU()]
    if spec.pool2d != "none":
        layers.append(AvgPool2d(2) if spec.pool2d == "avg" else MaxPool2d(2))
    layers.append(Flatten())
    return layers


def _conv_stack_1d(spec: ModelSpec, in_channels: int):
    return [
        Conv1d(in_channels, spec.conv1d_filters, spec.conv1d_kernel),
        ReLU(),
        AvgPool1d(spec.pool1d_size, spec.pool1d_stride),
        Flatten(),
    ]


def _head(width_in: int, width_hidden: int, dropout: float):
    return [
        Dense(width_in, width_hidden),
        ReLU(),
        Dropout(dropout),
        Dense(width_hidden, 2),
        Softmax(),
    ]


def build_domain_network(domain: str, spec: ModelSpec, seed: int, name: str | None = None) -> Network:
    """The single-domain CNN for one feature set (uninitialized weights drawn here)."""
    shape = spec.input_shape(domain)
    if domain in ("var", "pdc"):
        stack = _conv_stack_2d(spec, shape[2])
        hidden = spec.dense2d
    else:
        stack = _conv_stack_1d(spec, shape[1])
        hidden = spec.dense1d
    flat = _shape_after(stack, shape)[0]
    net = Network(stack + _head(flat, hidden, spec.dropout), input_shape=shape,
                  seed=seed, name=name or f"cnn_{domain}")
    return net.initialize()


def build_feature_fusion(spec: ModelSpec, seed: int) -> MultiBranchNetwork:
    branches = []
    shapes = []
    for domain in DOMAINS:
        shape = spec.input_shape(domain)
        stack = _conv_stack_2d(spec, shape[2]) if domain != "cn" else _conv_stack_1d(spec, shape[1])
        branches.append(stack)
        shapes.append(shape)
    concat = sum(_shape_after(b, s)[0] for b, s in zip(branches, shapes))
    trunk = _head(concat, spec.fusion_dense, spec.dropout)
    net = MultiBranchNetwork(branches, trunk, input_shapes=shapes, seed=seed,
                             name="fusion_feature")
    return net.initialize()


def build_stage2(seed: int) -> Network:
    """Score-fusion head: the six member probabilities through one softmax layer."""
    net = Network([Dense(6, 2), Softmax()], input_shape=(6,), seed=seed, name="stage2")
    return net.initialize()


def build_model(spec: ModelSpec, seed: int = 0):
    """Construct the classifier for ``spec.kind`` with freshly drawn weights.

    Single-domain kinds give a :class:`Network`, feature fusion a
    :class:`MultiBranchNetwork`, score/decision fusion an
    :class:`EnsembleModel`, and the SVM kind an untrained parameter vector
    sized for the concatenated flattened features.
    """
    if spec.kind in ("cnn2d_var", "cnn2d_pdc", "cnn1d_cn"):
        return build_domain_network(KIND_DOMAINS[spec.kind][0], spec, seed)
    if spec.kind == "fusion_feature":
        return build_feature_fusion(spec, seed)
    if spec.kind in ("fusion_score", "fusion_decision"):
        members = {
            d: build_domain_network(d, spec, derive_seed(seed, "member", d))
            for d in DOMAINS
        }
        if spec.kind == "fusion_score":
            return EnsembleModel(mode="score", members=members,
                                 stage2=build_stage2(derive_seed(seed, "stage2")))
        return EnsembleModel(mode="decision", members=members)
    if spec.kind == "svm_linear":
        n, lags, nb, fl = spec.channels, spec.lags, spec.n_bands, spec.cn_length
        width = n * n * lags + n * n * nb + fl * nb
        return LinearSvm(weights=np.zeros(width), bias=0.0,
                         feat_mean=np.zeros(width), feat_scale=np.ones(width))
    raise ValidationError(f"unknown model kind {spec.kind!r}")


@dataclass
class EnsembleModel:
    """Three domain CNNs combined by score- or decision-level fusion."""

    mode: str  # "score" | "decision"
    members: dict[str, Network]
    stage2: Network | None = None

    def __post_init__(self):
        if self.mode not in ("score", "decision"):
            raise ValidationError(f"unknown fusion mode {self.mode!r}")
        if set(self.members) != set(DOMAINS):
            raise ValidationError(f"ensemble needs members {DOMAINS}, got {set(self.members)}")
        if self.mode == "score" and self.stage2 is None:
            raise ValidationError("score fusion requires a stage-2 network")

    def member_probs(self, inputs: dict[str, np.ndarray]) -> np.ndarray:
        """Stacked member probabilities, shape (B, 3, 2), domain order var/pdc/cn."""
        rows = [self.members[d].predict_proba(inputs[d]) for d in DOMAINS]
        return np.stack(rows, axis=1)

    def predict(self, inputs: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Class bits and probability rows in one member evaluation."""
        member = self.member_probs(inputs)
        if self.mode == "score":
            out = self.stage2.predict_proba(member.reshape(len(member), -1))
            return out.argmax(axis=1), out
        votes = member.argmax(axis=2)
        bits = np.array([majority_vote(row.tolist()) for row in votes])
        return bits, member.mean(axis=1)  # decision mode reports the mean score

    def predict_proba(self, inputs: dict[str, np.ndarray]) -> np.ndarray:
        return self.predict(inputs)[1]

    def predict_bits(self, inputs: dict[str, np.ndarray]) -> np.ndarray:
        return self.predict(inputs)[0]


def majority_vote(votes) -> object:
    """Modal label of exactly three votes (a binary tie is impossible)."""
    votes = list(votes)
    if len(votes) != 3:
        raise ValidationError(f"majority vote takes exactly 3 votes, got {len(votes)}")
    for v in votes:
        if votes.count(v) >= 2:
            return v
    return votes[0]  # three distinct votes cannot happen with binary labels


def score_fusion_forward(probs: np.ndarray, stage2: Network) -> np.ndarray:
    """Second-stage softmax over concatenated member probability rows."""
    probs = np.asarray(probs, dtype=float)
    squeeze = probs.ndim == 2
    if squeeze:
        probs = probs[None]
    if probs.shape[1:] != (3, 2):
        raise ShapeError(f"expected (B, 3, 2) member probabilities, got {probs.shape}")
    sums = probs.sum(axis=2)
    if np.abs(sums - 1.0).max() > 1e-6:
        raise ValidationError("member probability rows must sum to 1")
    out = stage2.predict_proba(probs.reshape(len(probs), 6))
    return out[0] if squeeze else out


# -- fold plans --------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: dict[str, int]
    seed: int

    def test_ids(self, fold: int, ordered_ids: list[str]) -> list[str]:
        return [s for s in ordered_ids if self.assignments[s] == fold]

    def rest_ids(self, fold: int, ordered_ids: list[str]) -> list[str]:
        return [s for s in ordered_ids if self.assignments[s] != fold]


def stratified_kfold(manifest: CohortManifest, k: int = 5, seed: int = 0) -> FoldPlan:
    """Seeded stratified partition: shuffle within class, deal round-robin."""
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    labels = manifest.labels()
    assignments: dict[str, int] = {}
    for cls in manifest.class_names:
        ids = [s for s in manifest.subject_ids() if labels[s] == cls]
        if len(ids) < k:
            raise ValidationError(f"class {cls!r} has {len(ids)} subjects, fewer than k={k}")
        rng = derive_rng(seed, "folds", cls)
        order = rng.permutation(len(ids))
        for pos, idx in enumerate(order):
            assignments[ids[idx]] = pos % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def stratified_split(ids: list[str], labels: dict[str, str], class_names: tuple[str, str],
                     val_fraction: float, seed: int) -> tuple[list[str], list[str]]:
    """Split ids into train/validation, stratified and seeded."""
    if not (0 < val_fraction < 1):
        raise ValidationError(f"val_fraction must be in (0, 1), got {val_fraction}")
    train: list[str] = []
    val: list[str] = []
    for cls in class_names:
        members = [s for s in ids if labels[s] == cls]
        if len(members) < 2:
            raise ValidationError(f"class {cls!r} needs >= 2 subjects to split, has {len(members)}")
        rng = derive_rng(seed, "valsplit", cls)
        order = rng.permutation(len(members))
        n_val = min(len(members) - 1, max(1, round(len(members) * val_fraction)))
        for pos, idx in enumerate(order):
            (val if pos < n_val else train).append(members[idx])
    return train, val


# -- metrics -----------------------------------------------------------------


def evaluate(predictions: list, labels: list, positive_class: str = "SZ") -> dict:
    """Accuracy, sensitivity, specificity, modified accuracy (percent) plus counts."""
    if len(predictions) != len(labels):
        raise ValidationError("predictions and labels differ in length")
    if not labels:
        raise ValidationError("cannot evaluate an empty set")
    tp = sum(1 for p, t in zip(predictions, labels) if t == positive_class and p == positive_class)
    fn = sum(1 for p, t in zip(predictions, labels) if t == positive_class and p != positive_class)
    tn = sum(1 for p, t in zip(predictions, labels) if t != positive_class and p != positive_class)
    fp = sum(1 for p, t in zip(predictions, labels) if t != positive_class and p == positive_class)
    sens = 100.0 * tp / (tp + fn) if (tp + fn) else 0.0
    spec = 100.0 * tn / (tn + fp) if (tn + fp) else 0.0
    return {
        "accuracy": 100.0 * (tp + tn) / len(labels),
        "sensitivity": sens,
        "specificity": spec,
        "modified_accuracy": (sens + spec) / 2.0,
        "tp": tp, "fn": fn, "tn": tn, "fp": fp,
    }


@dataclass
class MetricsReport:
    """Per-fold metric values with mean, standard deviation, pooled confusion."""

    per_fold: list[dict]
    mean: dict[str, float]
    sd: dict[str, float]
    confusion: dict[str, int]

    @classmethod
    def from_folds(cls, fold_metrics: list[dict]) -> "MetricsReport":
        if not fold_metrics:
            raise ValidationError("no fold metrics to aggregate")
        mean = {}
        sd = {}
        for name in METRIC_NAMES:
            vals = np.array([m[name] for m in fold_metrics])
            mean[name] = float(vals.mean())
            sd[name] = float(vals.std())
        confusion = {
            key: int(sum(m[key] for m in fold_metrics)) for key in ("tp", "fn", "tn", "fp")
        }
        return cls(per_fold=fold_metrics, mean=mean, sd=sd, confusion=confusion)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "confusion": self.confusion,
            "per_fold": [
                {k: m[k] for k in (*METRIC_NAMES, "tp", "fn", "tn", "fp")}
                for m in self.per_fold
            ],
        }


# -- input assembly ----------------------------------------------------------


def band_indices(band_filter: list[str] | None, band_names: tuple[str, ...]) -> list[int] | None:
    if not band_filter:
        return None
    idx = []
    for name in band_filter:
        if name not in band_names:
            raise ValidationError(f"unknown band {name!r} in band filter, have {band_names}")
        idx.append(band_names.index(name))
    return idx


def domain_matrix(features: dict[str, dict[str, np.ndarray]], sids: list[str],
                  domain: str, band_idx: list[int] | None = None) -> np.ndarray:
    """Stack one domain's per-subject features into a batch array."""
    rows = []
    for sid in sids:
        if sid not in features or domain not in features[sid]:
            raise ValidationError(f"missing {domain} features for subject {sid!r}")
        rows.append(features[sid][domain])
    x = np.stack(rows).astype(float)
    if band_idx is not None and domain in ("pdc", "cn"):
        x = x[..., band_idx]
    return x


def assemble_inputs(kind: str, features, sids: list[str], band_idx=None):
    """Model inputs for a batch of subjects, in the form each core consumes."""
    if kind in ("cnn2d_var", "cnn2d_pdc", "cnn1d_cn"):
        return domain_matrix(features, sids, KIND_DOMAINS[kind][0], band_idx)
    if kind == "fusion_feature":
        return [domain_matrix(features, sids, d, band_idx) for d in DOMAINS]
    if kind in ("fusion_score", "fusion_decision"):
        return {d: domain_matrix(features, sids, d, band_idx) for d in DOMAINS}
    raise ValidationError(f"no tensor inputs for kind {kind!r}")


def svm_matrix(features, sids: list[str], feature_set: str, band_idx=None) -> np.ndarray:
    """Flattened (and for 'all', concatenated) feature matrix for the SVM."""
    if feature_set == "all":
        parts = [domain_matrix(features, sids, d, band_idx).reshape(len(sids), -1)
                 for d in DOMAINS]
        return np.concatenate(parts, axis=1)
    if feature_set not in DOMAINS:
        raise ValidationError(f"unknown SVM feature set {feature_set!r}")
    return domain_matrix(features, sids, feature_set, band_idx).reshape(len(sids), -1)


# -- per-fold input standardization -------------------------------------------
#
# CNN inputs are z-scored per feature entry with statistics from the training
# subjects of the current fold only; the statistics travel with the trained
# model so held-out and future subjects see the identical affine map.


def compute_input_stats(features, train_ids: list[str],
                        band_idx=None) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    stats = {}
    for domain in DOMAINS:
        x = domain_matrix(features, train_ids, domain, band_idx)
        mean = x.mean(axis=0)
        sd = x.std(axis=0)
        sd = np.where(sd == 0.0, 1.0, sd)
        stats[domain] = (mean, sd)
    return stats


def apply_input_stats(x: np.ndarray, stat: tuple[np.ndarray, np.ndarray] | None) -> np.ndarray:
    if stat is None:
        return x
    mean, sd = stat
    return (x - mean) / sd


def standardized_inputs(kind: str, features, sids: list[str], band_idx=None,
                        stats: dict | None = None):
    """Assembled model inputs with the per-domain affine maps applied."""
    inputs = assemble_inputs(kind, features, sids, band_idx)
    if stats is None:
        return inputs
    if isinstance(inputs, dict):
        return {d: apply_input_stats(x, stats.get(d)) for d, x in inputs.items()}
    if isinstance(inputs, list):
        return [apply_input_stats(x, stats.get(d)) for d, x in zip(DOMAINS, inputs)]
    return apply_input_stats(inputs, stats.get(KIND_DOMAINS[kind][0]))


@dataclass
class FittedModel:
    """A trained core plus the input statistics it was trained with."""

    core: object
    stats: dict[str, tuple[np.ndarray, np.ndarray]] | None = None


def _subset(inputs, idx):
    if isinstance(inputs, list):
        return [a[idx] for a in inputs]
    return inputs[idx]


def _batch_count(inputs) -> int:
    return len(inputs[0]) if isinstance(inputs, list) else len(inputs)


# -- training ----------------------------------------------------------------


@dataclass
class TrainResult:
    curve: list[tuple[float, float]] = field(default_factory=list)  # (train, val) loss
    best_epoch: int = -1


def train_model(model, train_inputs, train_bits, val_inputs, val_bits,
                spec: ModelSpec, seed: int = 0) -> TrainResult:
    """Train up to ``spec.epochs`` epochs, keep the min-validation-loss snapshot.

    Full-batch Adam by default; ``spec.batch_size > 0`` switches to seeded
    shuffled mini-batches.  A non-finite validation loss aborts with
    :class:`TrainingDivergedError`.
    """
    train_bits = np.asarray(train_bits, dtype=int)
    val_bits = np.asarray(val_bits, dtype=int)
    n = _batch_count(train_inputs)
    if n != train_bits.size:
        raise ShapeError("training inputs and labels differ in length")
    adam = AdamState(lr=spec.learning_rate, decay=spec.lr_decay)
    result = TrainResult()
    best_loss = np.inf
    best_state = None
    shuffle_rng = derive_rng(seed, "batches") if spec.batch_size > 0 else None

    for epoch in range(spec.epochs):
        if spec.batch_size > 0:
            order = shuffle_rng.permutation(n)
            chunks = [order[i : i + spec.batch_size] for i in range(0, n, spec.batch_size)]
        else:
            chunks = [np.arange(n)]
        total = 0.0
        for idx in chunks:
            loss, _ = model.loss_and_grads(_subset(train_inputs, idx), train_bits[idx], train=True)
            adam_step(model.param_dict(), model.grad_dict(), adam)
            total += loss * len(idx)
        train_loss = total / n
        val_loss = cross_entropy(model.predict_proba(val_inputs), val_bits)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(f"validation loss became non-finite at epoch {epoch}")
        result.curve.append((train_loss, val_loss))
        if val_loss < best_loss:
            best_loss = val_loss
            result.best_epoch = epoch
            best_state = model.get_state()

    if best_state is not None:
        model.set_state(best_state)
    return result


# -- cross-validated experiment ----------------------------------------------


@dataclass
class FoldOutcome:
    fold: int
    test_ids: list[str]
    train_ids: list[str]
    val_ids: list[str]
    predicted: dict[str, str]
    probabilities: dict[str, list[float]]
    curves: dict[str, list[tuple[float, float]]]
    metrics: dict


@dataclass
class KindResult:
    kind: str
    feature_label: str
    dimension: str
    folds: list[FoldOutcome]
    report: MetricsReport
    models: list[object]  # per fold

    @property
    def result_id(self) -> str:
        if self.kind == "svm_linear":
            return f"svm_{self.feature_label}"
        return self.kind


def _feature_dims(spec: ModelSpec, feature_label: str) -> str:
    n, lags, nb, fl = spec.channels, spec.lags, spec.n_bands, spec.cn_length
    dims = {
        "var": f"{n}x{n}x{lags}",
        "pdc": f"{n}x{n}x{nb}",
        "cn": f"{fl}x{nb}",
        "var+pdc+cn": f"{n}x{n}x{lags} + {n}x{n}x{nb} + {fl}x{nb}",
        "all": f"{n * n * lags + n * n * nb + fl * nb} flat",
    }
    return dims[feature_label]


class ExperimentRunner:
    """Trains every requested classifier kind over a shared fold plan.

    The three domain CNNs are cached per fold so that single-domain kinds
    and the fusion ensembles reuse identical trained members (identical
    seeds make this exact, not approximate).
    """

    def __init__(self, features, manifest: CohortManifest, spec: ModelSpec,
                 master_seed: int, k: int = 5, val_fraction: float = 0.15,
                 positive_class: str = "SZ", band_idx: list[int] | None = None,
                 svm_l2: float = 1e-3, svm_learning_rate: float = 0.1,
                 svm_steps: int = 2000, standardize_inputs: bool = True):
        self.features = features
        self.manifest = manifest
        self.spec = spec
        self.master_seed = master_seed
        self.k = k
        self.val_fraction = val_fraction
        self.band_idx = band_idx
        self.svm_l2 = svm_l2
        self.svm_learning_rate = svm_learning_rate
        self.svm_steps = svm_steps
        self.standardize_inputs = standardize_inputs
        self._stats_cache: dict[int, dict] = {}
        self.class_names = manifest.class_names
        if positive_class not in manifest.class_names:
            raise ValidationError(
                f"positive class {positive_class!r} not among {manifest.class_names}"
            )
        self.positive_class = positive_class
        self.labels = manifest.labels()
        self.plan = stratified_kfold(manifest, k=k, seed=derive_seed(master_seed, "folds"))
        self._member_cache: dict[tuple[str, int], tuple[Network, TrainResult]] = {}
        self._splits: dict[int, tuple[list[str], list[str], list[str]]] = {}

    # ids and labels ---------------------------------------------------------

    def fold_split(self, fold: int) -> tuple[list[str], list[str], list[str]]:
        if fold not in self._splits:
            ordered = self.manifest.subject_ids()
            test = self.plan.test_ids(fold, ordered)
            rest = self.plan.rest_ids(fold, ordered)
            train, val = stratified_split(
                rest, self.labels, self.class_names, self.val_fraction,
                derive_seed(self.master_seed, "valsplit", fold),
            )
            self._splits[fold] = (train, val, test)
        return self._splits[fold]

    def bits_of(self, sids: list[str]) -> np.ndarray:
        return np.array([self.class_names.index(self.labels[s]) for s in sids], dtype=int)

    def names_of_bits(self, bits: np.ndarray) -> list[str]:
        return [self.class_names[int(b)] for b in bits]

    def fold_stats(self, fold: int) -> dict | None:
        if not self.standardize_inputs:
            return None
        if fold not in self._stats_cache:
            train_ids, _, _ = self.fold_split(fold)
            self._stats_cache[fold] = compute_input_stats(
                self.features, train_ids, self.band_idx
            )
        return self._stats_cache[fold]

    def _domain_inputs(self, domain: str, sids: list[str], fold: int) -> np.ndarray:
        x = domain_matrix(self.features, sids, domain, self.band_idx)
        stats = self.fold_stats(fold)
        return apply_input_stats(x, stats.get(domain) if stats else None)

    # member training --------------------------------------------------------

    def trained_member(self, domain: str, fold: int) -> tuple[Network, TrainResult]:
        key = (domain, fold)
        if key not in self._member_cache:
            train_ids, val_ids, _ = self.fold_split(fold)
            net = build_domain_network(
                domain, self.spec, seed=derive_seed(self.master_seed, "init", domain, fold)
            )
            res = train_model(
                net,
                self._domain_inputs(domain, train_ids, fold),
                self.bits_of(train_ids),
                self._domain_inputs(domain, val_ids, fold),
                self.bits_of(val_ids),
                self.spec,
                seed=derive_seed(self.master_seed, "train", domain, fold),
            )
            self._member_cache[key] = (net, res)
        return self._member_cache[key]

    # per-kind execution -----------------------------------------------------

    def run_kind(self, kind: str) -> list[KindResult]:
        if kind == "svm_linear":
            return [self._run_svm(feature) for feature in (*DOMAINS, "all")]
        feature_label = KIND_DOMAINS[kind][0] if kind.startswith("cnn") else "var+pdc+cn"
        folds: list[FoldOutcome] = []
        models: list[object] = []
        for fold in range(self.k):
            outcome, model = self._run_tensor_fold(kind, fold)
            folds.append(outcome)
            models.append(model)
        report = MetricsReport.from_folds([f.metrics for f in folds])
        return [KindResult(kind=kind, feature_label=feature_label,
                           dimension=_feature_dims(self.spec, feature_label),
                           folds=folds, report=report, models=models)]

    def _run_tensor_fold(self, kind: str, fold: int):
        train_ids, val_ids, test_ids = self.fold_split(fold)
        stats = self.fold_stats(fold)
        curves: dict[str, list[tuple[float, float]]] = {}

        def inputs_for(sids):
            return standardized_inputs(kind, self.features, sids, self.band_idx, stats)

        if kind in ("cnn2d_var", "cnn2d_pdc", "cnn1d_cn"):
            domain = KIND_DOMAINS[kind][0]
            net, res = self.trained_member(domain, fold)
            curves[domain] = res.curve
            core: object = net
        elif kind == "fusion_feature":
            net = build_feature_fusion(
                self.spec, seed=derive_seed(self.master_seed, "init", "fusion_feature", fold)
            )
            res = train_model(
                net, inputs_for(train_ids), self.bits_of(train_ids),
                inputs_for(val_ids), self.bits_of(val_ids), self.spec,
                seed=derive_seed(self.master_seed, "train", "fusion_feature", fold),
            )
            curves["main"] = res.curve
            core = net
        elif kind in ("fusion_score", "fusion_decision"):
            members = {}
            for domain in DOMAINS:
                net, res = self.trained_member(domain, fold)
                members[domain] = net
                curves[domain] = res.curve
            if kind == "fusion_score":
                stage2 = build_stage2(seed=derive_seed(self.master_seed, "init", "stage2", fold))
                ens = EnsembleModel(mode="score", members=members, stage2=stage2)
                train_probs = ens.member_probs(inputs_for(train_ids)).reshape(len(train_ids), 6)
                val_probs = ens.member_probs(inputs_for(val_ids)).reshape(len(val_ids), 6)
                res2 = train_model(
                    stage2, train_probs, self.bits_of(train_ids), val_probs,
                    self.bits_of(val_ids), self.spec,
                    seed=derive_seed(self.master_seed, "train", "stage2", fold),
                )
                curves["stage2"] = res2.curve
                core = ens
            else:
                core = EnsembleModel(mode="decision", members=members)
        else:
            raise ValidationError(f"unknown model kind {kind!r}")

        test_inputs = inputs_for(test_ids)
        if isinstance(core, EnsembleModel):
            bits, probs = core.predict(test_inputs)
        else:
            probs = core.predict_proba(test_inputs)
            bits = probs.argmax(axis=1)
        predicted = self.names_of_bits(bits)
        metrics = evaluate(predicted, [self.labels[s] for s in test_ids], self.positive_class)
        outcome = FoldOutcome(
            fold=fold, test_ids=test_ids, train_ids=train_ids, val_ids=val_ids,
            predicted=dict(zip(test_ids, predicted)),
            probabilities={s: [float(p) for p in row] for s, row in zip(test_ids, probs)},
            curves=curves, metrics=metrics,
        )
        return outcome, FittedModel(core=core, stats=stats)

    def _run_svm(self, feature: str) -> KindResult:
        folds: list[FoldOutcome] = []
        models: list[object] = []
        for fold in range(self.k):
            train_ids, val_ids, test_ids = self.fold_split(fold)
            fit_ids = train_ids + val_ids  # no epoch selection; use all non-test subjects
            svm = train_svm(
                svm_matrix(self.features, fit_ids, feature, self.band_idx),
                self.bits_of(fit_ids),
                l2=self.svm_l2,
                learning_rate=self.svm_learning_rate,
                steps=self.svm_steps,
            )
            x_test = svm_matrix(self.features, test_ids, feature, self.band_idx)
            bits = svm.predict_bits(x_test)
            scores = svm.decision(x_test)
            pos = 1.0 / (1.0 + np.exp(-scores))
            predicted = self.names_of_bits(bits)
            metrics = evaluate(predicted, [self.labels[s] for s in test_ids],
                               self.positive_class)
            folds.append(FoldOutcome(
                fold=fold, test_ids=test_ids, train_ids=train_ids, val_ids=val_ids,
                predicted=dict(zip(test_ids, predicted)),
                probabilities={s: [float(1 - p), float(p)] for s, p in zip(test_ids, pos)},
                curves={}, metrics=metrics,
            ))
            models.append(FittedModel(core=svm, stats=None))
        report = MetricsReport.from_folds([f.metrics for f in folds])
        return KindResult(kind="svm_linear", feature_label=feature,
                          dimension=_feature_dims(self.spec, feature),
                          folds=folds, report=report, models=models)

    def run(self, kinds: list[str]) -> list[KindResult]:
        results: list[KindResult] = []
        for kind in kinds:
            results.extend(self.run_kind(kind))
        return results


# -- prediction and timing ----------------------------------------------------


def predict_with_core(core, kind: str, features, sids: list[str],
                      band_idx=None, feature_set: str = "all", stats=None):
    """Class bits and probability rows for a batch of subjects."""
    if isinstance(core, FittedModel):
        stats = core.stats
        core = core.core
    if isinstance(core, LinearSvm):
        x = svm_matrix(features, sids, feature_set, band_idx)
        bits = core.predict_bits(x)
        pos = 1.0 / (1.0 + np.exp(-core.decision(x)))
        return bits, np.stack([1 - pos, pos], axis=1)
    inputs = standardized_inputs(kind, features, sids, band_idx, stats)
    if isinstance(core, EnsembleModel):
        return core.predict(inputs)
    probs = core.predict_proba(inputs)
    return probs.argmax(axis=1), probs


def time_classification(core, kind: str, features, sid: str,
                        repetitions: int = 1000, band_idx=None,
                        feature_set: str = "all", stats=None) -> float:
    """Mean wall-clock milliseconds to classify one subject."""
    if repetitions < 1:
        raise ValidationError(f"repetitions must be >= 1, got {repetitions}")
    start = time.perf_counter()
    for _ in range(repetitions):
        predict_with_core(core, kind, features, [sid], band_idx, feature_set, stats)
    elapsed = time.perf_counter() - start
    return 1000.0 * elapsed / repetitions
