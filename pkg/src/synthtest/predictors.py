"""Black-box classifiers to audit: small built-ins plus an adapter for external predictions.

Every predictor maps a :class:`Dataset` to label codes (``predict``) and to the
probability it assigns to the predicted label (``confidence``).
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import special
from sklearn.neighbors import KNeighborsClassifier
from sklearn.tree import DecisionTreeClassifier

from . import errors
from .data import Dataset, Schema

KINDS = ("logistic", "tree", "knn", "naive_bayes")


class Predictor:
    schema: Schema

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        raise NotImplementedError

    def predict(self, ds: Dataset) -> np.ndarray:
        return np.argmax(self.predict_proba(ds), axis=1)

    def confidence(self, ds: Dataset) -> np.ndarray:
        return np.max(self.predict_proba(ds), axis=1)

    def _one(self, row: Mapping) -> Dataset:
        full = dict(row)
        full.setdefault(self.schema.label, self.schema.label_feature.categories[0])
        return Dataset.from_rows(self.schema, [full])

    def predict_row(self, row: Mapping) -> str:
        return self.schema.label_feature.categories[int(self.predict(self._one(row))[0])]

    def confidence_row(self, row: Mapping) -> float:
        return float(self.confidence(self._one(row))[0])


class _Encoder:
    """Standardize continuous predictors and one-hot encode categorical ones."""

    def __init__(self, ds: Dataset, one_hot: bool = True):
        self.schema = ds.schema
        self.one_hot = one_hot
        self.cols = [ds.schema.index(n) for n in ds.schema.predictor_names]
        self.mu = {}
        self.sd = {}
        for j in self.cols:
            if ds.schema.features[j].is_continuous:
                x = ds.values[:, j]
                self.mu[j] = float(x.mean())
                sd = float(x.std())
                self.sd[j] = sd if sd > 0 else 1.0

    def __call__(self, ds: Dataset) -> np.ndarray:
        if ds.schema != self.schema:
            raise errors.SchemaError("dataset schema differs from the predictor's training schema")
        blocks = []
        for j in self.cols:
            feat = self.schema.features[j]
            x = ds.values[:, j]
            if feat.is_continuous:
                blocks.append(((x - self.mu[j]) / self.sd[j])[:, None])
            elif self.one_hot:
                blocks.append(np.eye(feat.n_categories)[x.astype(np.int64)])
            else:
                blocks.append(x[:, None])
        if not blocks:
            return np.zeros((len(ds), 0))
        return np.hstack(blocks)


def _check_hyper(hyper: Mapping, allowed: Mapping) -> dict:
    out = dict(allowed)
    for k, v in hyper.items():
        if k not in allowed:
            raise errors.BadHyper(f"unknown hyperparameter {k!r}; expected one of {sorted(allowed)}")
        out[k] = v
    return out


def _full_proba(proba, classes, m: int) -> np.ndarray:
    out = np.zeros((proba.shape[0], m))
    out[:, np.asarray(classes, dtype=np.int64)] = proba
    return out


class LogisticPredictor(Predictor):
    """Multinomial logistic regression trained by full-batch gradient descent."""

    def __init__(self, train: Dataset, l2: float, lr: float, iters: int):
        self.schema = train.schema
        self.enc = _Encoder(train)
        X = self.enc(train)
        y = train.labels
        m = self.schema.label_feature.n_categories
        Y = np.eye(m)[y]
        n, p = X.shape
        W = np.zeros((p, m))
        b = np.zeros(m)
        for _ in range(iters):
            P = special.softmax(X @ W + b, axis=1)
            G = (P - Y) / n
            W -= lr * (X.T @ G + l2 * W)
            b -= lr * G.sum(axis=0)
        self.W = W
        self.b = b

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        return special.softmax(self.enc(ds) @ self.W + self.b, axis=1)


class TreePredictor(Predictor):
    def __init__(self, train: Dataset, max_depth: int, min_leaf: int, seed: int):
        self.schema = train.schema
        self.enc = _Encoder(train, one_hot=False)
        self.model = DecisionTreeClassifier(max_depth=max_depth, min_samples_leaf=min_leaf, random_state=seed)
        self.model.fit(self.enc(train), train.labels)

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        return _full_proba(self.model.predict_proba(self.enc(ds)), self.model.classes_,
                           self.schema.label_feature.n_categories)


class KNNPredictor(Predictor):
    def __init__(self, train: Dataset, k: int):
        self.schema = train.schema
        self.enc = _Encoder(train)
        self.model = KNeighborsClassifier(n_neighbors=min(k, len(train)))
        self.model.fit(self.enc(train), train.labels)

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        return _full_proba(self.model.predict_proba(self.enc(ds)), self.model.classes_,
                           self.schema.label_feature.n_categories)


class NaiveBayesPredictor(Predictor):
    """Gaussian likelihoods for continuous predictors, smoothed frequencies for categorical ones."""

    def __init__(self, train: Dataset, pseudo: float, var_floor: float):
        self.schema = train.schema
        m = self.schema.label_feature.n_categories
        y = train.labels
        counts = np.bincount(y, minlength=m).astype(float)
        self.log_prior = np.log((counts + pseudo) / (counts.sum() + pseudo * m))
        self.cont = []
        self.cat = []
        for name in self.schema.predictor_names:
            j = self.schema.index(name)
            feat = self.schema.features[j]
            x = train.values[:, j]
            if feat.is_continuous:
                floor = var_floor * max(float(x.var()), 1e-12)
                mu = np.zeros(m)
                var = np.ones(m)
                for c in range(m):
                    xc = x[y == c]
                    if xc.size:
                        mu[c] = xc.mean()
                        var[c] = xc.var() + floor
                self.cont.append((j, mu, var))
            else:
                tab = np.zeros((m, feat.n_categories))
                np.add.at(tab, (y, x.astype(np.int64)), 1.0)
                tab = (tab + pseudo) / (tab.sum(axis=1, keepdims=True) + pseudo * feat.n_categories)
                self.cat.append((j, np.log(tab)))

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        L = np.tile(self.log_prior, (len(ds), 1))
        for j, mu, var in self.cont:
            x = ds.values[:, j][:, None]
            L += -0.5 * (np.log(2 * math.pi * var) + (x - mu) ** 2 / var)
        for j, logtab in self.cat:
            L += logtab[:, ds.values[:, j].astype(np.int64)].T
        return special.softmax(L, axis=1)


def fit_predictor(kind: str, train: Dataset, hyper: Mapping | None = None, seed: int = 0) -> Predictor:
    """Fit a built-in classifier; ``kind`` is one of logistic, tree, knn, naive_bayes."""
    hyper = dict(hyper or {})
    if len(train) == 0:
        raise errors.EmptyDataset("cannot fit a predictor on zero rows")
    if np.unique(train.labels).size < 2:
        raise errors.DegenerateLabel("training labels contain a single class")
    if kind == "logistic":
        h = _check_hyper(hyper, {"l2": 1e-4, "lr": 0.1, "iters": 500})
        if h["l2"] < 0 or h["lr"] <= 0 or int(h["iters"]) < 1:
            raise errors.BadHyper(f"invalid logistic hyperparameters {h}")
        return LogisticPredictor(train, float(h["l2"]), float(h["lr"]), int(h["iters"]))
    if kind == "tree":
        h = _check_hyper(hyper, {"max_depth": 6, "min_leaf": 5})
        if int(h["max_depth"]) < 1 or int(h["min_leaf"]) < 1:
            raise errors.BadHyper(f"invalid tree hyperparameters {h}")
        return TreePredictor(train, int(h["max_depth"]), int(h["min_leaf"]), seed)
    if kind == "knn":
        h = _check_hyper(hyper, {"k": 5})
        if int(h["k"]) < 1:
            raise errors.BadHyper("k must be >= 1")
        return KNNPredictor(train, int(h["k"]))
    if kind == "naive_bayes":
        h = _check_hyper(hyper, {"pseudo": 1.0, "var_floor": 1e-9})
        if h["pseudo"] < 0 or h["var_floor"] < 0:
            raise errors.BadHyper(f"invalid naive Bayes hyperparameters {h}")
        return NaiveBayesPredictor(train, float(h["pseudo"]), float(h["var_floor"]))
    raise errors.BadHyper(f"unknown predictor kind {kind!r}; expected one of {KINDS}")


class ExternalPredictor(Predictor):
    """Predictions produced elsewhere, looked up by the dataset's row index."""

    def __init__(self, table: Mapping[int, tuple[str, float]], schema: Schema | None = None):
        self.table = dict(table)
        self.schema = schema

    def _lookup(self, ds: Dataset):
        try:
            return [self.table[int(i)] for i in ds.index]
        except KeyError as exc:
            raise errors.MissingPrediction(f"no prediction for row {exc.args[0]}") from None

    def predict(self, ds: Dataset) -> np.ndarray:
        feat = ds.schema.label_feature
        out = np.empty(len(ds), dtype=np.int64)
        for i, (label, _) in enumerate(self._lookup(ds)):
            if label not in feat.categories:
                raise errors.UnknownCategory(feat.name, label, int(ds.index[i]))
            out[i] = feat.categories.index(label)
        return out

    def confidence(self, ds: Dataset) -> np.ndarray:
        return np.array([c for _, c in self._lookup(ds)], dtype=np.float64)

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        raise errors.ConfigError("external predictions carry only the predicted label's confidence")


def load_external(path, schema: Schema | None = None) -> ExternalPredictor:
    """Read a ``row_index,label,confidence`` CSV."""
    path = Path(path)
    if not path.exists():
        raise errors.ConfigError(f"predictions file not found: {path}")
    table = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"row_index", "label", "confidence"}
        if reader.fieldnames is None or not need <= {h.strip() for h in reader.fieldnames}:
            raise errors.MissingColumn(f"{path}: expected columns row_index,label,confidence")
        for r, rec in enumerate(reader):
            rec = {k.strip(): (v or "").strip() for k, v in rec.items()}
            try:
                idx = int(rec["row_index"])
            except ValueError:
                raise errors.UnparseableNumber("row_index", rec["row_index"], r) from None
            try:
                conf = float(rec["confidence"])
            except ValueError:
                raise errors.UnparseableNumber("confidence", rec["confidence"], r) from None
            if not 0.0 <= conf <= 1.0:
                raise errors.BadConfidence(f"row {idx}: confidence {conf} outside [0, 1]")
            table[idx] = (rec["label"], conf)
    return ExternalPredictor(table, schema)


def save_predictions(f: Predictor, ds: Dataset, path) -> None:
    codes = f.predict(ds)
    conf = f.confidence(ds)
    cats = ds.schema.label_feature.categories
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row_index", "label", "confidence"])
        for i, c, p in zip(ds.index, codes, conf):
            w.writerow([int(i), cats[int(c)], repr(float(p))])
