"""Frame-vector classifiers and signal-level majority voting.

Feature vectors are (energy, zcr, pitch) triples. Quadratic discriminant
analysis scores each class k with

    y_k(x) = x' Q_k x + V_k' x + v0_k

where Q_k = -1/2 inv(S_k), V_k = inv(S_k) mu_k and
v0_k = -1/2 mu_k' inv(S_k) mu_k - 1/2 log det S_k + log pi_k, the standard
Gaussian maximum-likelihood realization. LDA is the same with one pooled
covariance; kNN and one-hot least squares serve as baselines. A whole signal
takes the most frequent label among its classified frames.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .audio_io import DataError
from .features import ExtractionConfig, FeatureTrack, select_high_energy, select_periodic

MODEL_FORMAT_VERSION = 1

KINDS = ("qda", "lda", "knn", "least_squares")
KNN_METRICS = ("euclidean", "cosine")


class NumericError(Exception):
    """A numerically unsolvable fit (singular covariance, unsolvable system)."""


@dataclass(frozen=True)
class ClassifierSpec:
    """Which frame classifier to fit and how."""

    kind: str = "qda"
    knn_k: int = 25
    knn_metric: str = "euclidean"
    shrinkage: float = 1e-4
    standardize: str = "auto"       # auto | on | off
    high_energy_only: bool = False  # train and test only on high-energy frames

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.knn_metric not in KNN_METRICS:
            raise ValueError(f"unknown knn metric {self.knn_metric!r}")
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if not 0.0 <= self.shrinkage < 1.0:
            raise ValueError("shrinkage must lie in [0, 1)")
        if self.standardize not in ("auto", "on", "off"):
            raise ValueError("standardize must be auto, on or off")

    @property
    def wants_standardize(self) -> bool:
        if self.standardize == "auto":
            # discriminant argmax is affine invariant; distance metrics are not
            return self.kind in ("knn", "least_squares")
        return self.standardize == "on"

    def display_name(self) -> str:
        if self.kind == "qda":
            name = "QDA"
        elif self.kind == "lda":
            name = "LDA"
        elif self.kind == "knn":
            name = f"kNN k={self.knn_k} {self.knn_metric}"
        else:
            name = "least squares"
        return name + (" high-energy" if self.high_energy_only else "")


@dataclass(eq=False)
class Standardizer:
    """Per-feature z-scoring with training statistics."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        scale = X.std(axis=0)
        constant = X.max(axis=0) == X.min(axis=0)  # exact, unlike std == 0
        scale[constant] = 1.0
        return cls(mean=X.mean(axis=0), scale=scale)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


def _shrunk_covariance(cov, lam):
    d = cov.shape[0]
    return (1.0 - lam) * cov + lam * (np.trace(cov) / d) * np.eye(d)


def _require_pd(cov, context):
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NumericError(f"{context} covariance is not positive definite; "
                           "increase shrinkage") from None


@dataclass(eq=False)
class GaussianModel:
    """Per-class Gaussian discriminants (covariances already shrunk)."""

    spec: ClassifierSpec
    labels: tuple
    means: np.ndarray        # (K, d)
    covariances: np.ndarray  # (K, d, d)
    priors: np.ndarray       # (K,)
    standardizer: Standardizer | None = None

    def __post_init__(self):
        inv = np.array([np.linalg.inv(S) for S in self.covariances])
        logdet = np.array([np.linalg.slogdet(S)[1] for S in self.covariances])
        self._quad = -0.5 * inv
        self._lin = np.einsum("kij,kj->ki", inv, self.means)
        self._const = (-0.5 * np.einsum("ki,kij,kj->k", self.means, inv, self.means)
                       - 0.5 * logdet + np.log(self.priors))

    def discriminants(self, X) -> np.ndarray:
        """Per-class scores y_k, one row per input vector."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        quad = np.einsum("ni,kij,nj->nk", X, self._quad, X)
        return quad + X @ self._lin.T + self._const

    def predict(self, X) -> np.ndarray:
        # argmax takes the first maximum, so ties resolve in label-set order
        return np.argmax(self.discriminants(X), axis=1)


def _class_blocks(X, y, labels):
    for k, lab in enumerate(labels):
        Xk = X[y == k]
        if len(Xk) < 2:
            raise DataError(f"class {lab!r} has {len(Xk)} training vectors, "
                            "need at least 2")
        yield k, lab, Xk


def fit_qda(vectors, target_idx, labels, shrinkage: float = 1e-4,
            standardizer=None, spec=None) -> GaussianModel:
    """Per-class sample mean and covariance (n-1 denominator), counts as priors."""
    X = np.asarray(vectors, dtype=float)
    y = np.asarray(target_idx, dtype=int)
    means, covs, priors = [], [], []
    for _, lab, Xk in _class_blocks(X, y, labels):
        mu = Xk.mean(axis=0)
        centered = Xk - mu
        cov = _shrunk_covariance(centered.T @ centered / (len(Xk) - 1), shrinkage)
        _require_pd(cov, f"class {lab!r}")
        means.append(mu)
        covs.append(cov)
        priors.append(len(Xk) / len(X))
    spec = spec or ClassifierSpec(kind="qda", shrinkage=shrinkage)
    return GaussianModel(spec, tuple(labels), np.array(means), np.array(covs),
                         np.array(priors), standardizer)


def fit_lda(vectors, target_idx, labels, shrinkage: float = 1e-4,
            standardizer=None, spec=None) -> GaussianModel:
    """Like fit_qda with one covariance pooled over all classes."""
    X = np.asarray(vectors, dtype=float)
    y = np.asarray(target_idx, dtype=int)
    means, priors = [], []
    scatter = np.zeros((X.shape[1], X.shape[1]))
    for _, _, Xk in _class_blocks(X, y, labels):
        mu = Xk.mean(axis=0)
        centered = Xk - mu
        scatter += centered.T @ centered
        means.append(mu)
        priors.append(len(Xk) / len(X))
    pooled = _shrunk_covariance(scatter / (len(X) - len(labels)), shrinkage)
    _require_pd(pooled, "pooled")
    covs = np.repeat(pooled[None, :, :], len(labels), axis=0)
    spec = spec or ClassifierSpec(kind="lda", shrinkage=shrinkage)
    return GaussianModel(spec, tuple(labels), np.array(means), covs,
                         np.array(priors), standardizer)


@dataclass(eq=False)
class KnnModel:
    spec: ClassifierSpec
    labels: tuple
    vectors: np.ndarray  # training vectors, already standardized when enabled
    targets: np.ndarray
    standardizer: Standardizer | None = None

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        T = self.vectors
        if self.spec.knn_metric == "euclidean":
            dist = (np.sum(X * X, axis=1)[:, None] + np.sum(T * T, axis=1)[None, :]
                    - 2.0 * X @ T.T)
        else:
            xn = np.linalg.norm(X, axis=1)
            tn = np.linalg.norm(T, axis=1)
            denom = np.outer(xn, tn)
            sim = np.divide(X @ T.T, denom, out=np.zeros((len(X), len(T))),
                            where=denom > 0)  # zero vectors get similarity 0
            dist = 1.0 - sim
        # stable sort: equal distances keep training insertion order
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :self.spec.knn_k]
        out = np.empty(len(X), dtype=int)
        for i, nn in enumerate(nearest):
            out[i] = np.argmax(np.bincount(self.targets[nn], minlength=len(self.labels)))
        return out


def fit_knn(vectors, target_idx, labels, spec: ClassifierSpec, standardizer=None) -> KnnModel:
    X = np.asarray(vectors, dtype=float)
    y = np.asarray(target_idx, dtype=int)
    if len(X) == 0:
        raise DataError("knn needs a non-empty training set")
    if spec.knn_k > len(X):
        raise DataError(f"knn k={spec.knn_k} exceeds the training set size {len(X)}")
    if standardizer is not None:
        X = standardizer.transform(X)
    return KnnModel(spec, tuple(labels), X, y, standardizer)


@dataclass(eq=False)
class LeastSquaresModel:
    spec: ClassifierSpec
    labels: tuple
    weights: np.ndarray  # (1 + d, K), first row is the bias
    standardizer: Standardizer | None = None

    def scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        A = np.column_stack([np.ones(len(X)), X])
        return A @ self.weights

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)


def fit_least_squares(vectors, target_idx, labels, spec=None, standardizer=None,
                      ridge: float = 1e-8) -> LeastSquaresModel:
    """One-hot linear regression decoded by argmax."""
    X = np.asarray(vectors, dtype=float)
    y = np.asarray(target_idx, dtype=int)
    if len(np.unique(y)) < 2:
        raise DataError("least squares needs vectors from at least 2 classes")
    if standardizer is not None:
        X = standardizer.transform(X)
    A = np.column_stack([np.ones(len(X)), X])
    Y = np.eye(len(labels))[y]
    gram = A.T @ A + ridge * np.eye(A.shape[1])
    try:
        W = np.linalg.solve(gram, A.T @ Y)
    except np.linalg.LinAlgError:
        raise NumericError("least-squares normal equations are unsolvable") from None
    spec = spec or ClassifierSpec(kind="least_squares")
    return LeastSquaresModel(spec, tuple(labels), W, standardizer)


def fit_classifier(spec: ClassifierSpec, vectors, target_idx, labels):
    """Fit the classifier described by spec on labeled frame vectors."""
    X = np.asarray(vectors, dtype=float)
    std = Standardizer.fit(X) if spec.wants_standardize else None
    if spec.kind == "qda":
        Xs = std.transform(X) if std else X
        return fit_qda(Xs, target_idx, labels, spec.shrinkage, std, spec)
    if spec.kind == "lda":
        Xs = std.transform(X) if std else X
        return fit_lda(Xs, target_idx, labels, spec.shrinkage, std, spec)
    if spec.kind == "knn":
        return fit_knn(X, target_idx, labels, spec, std)
    return fit_least_squares(X, target_idx, labels, spec, std)


@dataclass(frozen=True)
class SignalPrediction:
    """Outcome of voting over one signal's frames; label None = unclassifiable."""

    label: str | None
    fractions: dict
    frames_used: int


def classify_signal(model, track: FeatureTrack, config: ExtractionConfig) -> SignalPrediction:
    """Majority vote over the model's per-frame labels.

    Falls back to the plain periodic frames when the high-energy subset is
    empty; a signal with no periodic frames at all is unclassifiable rather
    than silently assigned some default class.
    """
    periodic = select_periodic(track)
    pool = periodic
    if model.spec.high_energy_only:
        selected = select_high_energy(periodic, config.alpha, config.zeta)
        if len(selected) > 0:
            pool = selected
    if len(pool) == 0:
        return SignalPrediction(None, {lab: 0.0 for lab in model.labels}, 0)
    idx = model.predict(pool.vectors())
    counts = np.bincount(idx, minlength=len(model.labels))
    winner = int(np.argmax(counts))  # vote ties resolve in label-set order
    fractions = {lab: float(counts[i]) / len(idx)
                 for i, lab in enumerate(model.labels)}
    return SignalPrediction(model.labels[winner], fractions, len(idx))


def _std_to_dict(std):
    if std is None:
        return None
    return {"mean": std.mean.tolist(), "scale": std.scale.tolist()}


def _std_from_dict(doc):
    if doc is None:
        return None
    return Standardizer(np.array(doc["mean"]), np.array(doc["scale"]))


def model_to_dict(model) -> dict:
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "kind": model.spec.kind,
        "labels": list(model.labels),
        "spec": asdict(model.spec),
        "standardize": _std_to_dict(model.standardizer),
    }
    if isinstance(model, GaussianModel):
        doc["params"] = {
            "means": model.means.tolist(),
            "covariances": model.covariances.tolist(),
            "priors": model.priors.tolist(),
        }
    elif isinstance(model, KnnModel):
        doc["params"] = {
            "vectors": model.vectors.tolist(),
            "targets": model.targets.tolist(),
        }
    elif isinstance(model, LeastSquaresModel):
        doc["params"] = {"weights": model.weights.tolist()}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return doc


def model_from_dict(doc):
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model format version {doc.get('version')!r}")
    spec = ClassifierSpec(**doc["spec"])
    labels = tuple(doc["labels"])
    std = _std_from_dict(doc.get("standardize"))
    params = doc["params"]
    if spec.kind in ("qda", "lda"):
        return GaussianModel(spec, labels, np.array(params["means"]),
                             np.array(params["covariances"]),
                             np.array(params["priors"]), std)
    if spec.kind == "knn":
        return KnnModel(spec, labels, np.array(params["vectors"]),
                        np.array(params["targets"], dtype=int), std)
    return LeastSquaresModel(spec, labels, np.array(params["weights"]), std)


def save_model(model, path, extra: dict | None = None):
    doc = model_to_dict(model)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path):
    """Returns (model, full document) so callers can read embedded metadata."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a model file ({exc})") from exc
    return model_from_dict(doc), doc
