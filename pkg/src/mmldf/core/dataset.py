# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import csv
import io
import logging
import math
import warnings

import numpy as np
from sklearn.model_selection import StratifiedKFold
from sklearn.utils import check_random_state
from sklearn.utils.random import sample_without_replacement

from mmldf.core.error import (
    ConfigurationError,
    DatasetError,
    DatasetParseError,
    DimensionMismatch,
    EmptyClassError,
)

logger = logging.getLogger(__name__)

# Columns with a smaller population standard deviation are centered only.
DEGENERATE_STDDEV = 1e-12

# Spread of the jitter added to redundant synthetic columns.
REDUNDANT_JITTER = 0.01


def label_sort_key(token):
    """
    Order label tokens numerically when they parse as numbers ("-1" < "+1"),
    lexically otherwise; numeric tokens sort before the rest.
    """
    try:
        return (0, float(token), token)
    except ValueError:
        return (1, 0.0, token)


def remap_labels(tokens):
    label_map = tuple(sorted(set(tokens), key=label_sort_key))
    position = {token: index for index, token in enumerate(label_map)}
    labels = np.array([position[token] for token in tokens], dtype=np.intp)
    return labels, label_map


class LabeledDataset(object):
    """
    Dense feature matrix (n samples x d features) with integer class labels.

    ``label_map[k]`` is the original label token of internal class ``k``.
    Every class occurs at least once unless ``allow_missing`` is set, which
    held-out parts of a split and data relabeled against a model need.
    Instances are immutable: the arrays are flagged read-only.
    """

    __slots__ = ("features", "labels", "label_map")

    def __init__(self, features, labels, label_map, allow_missing=False):
        features = np.array(features, dtype=np.float64)
        if features.ndim != 2:
            raise DatasetError(
                "features must be a 2-d matrix, got {} dimension(s)".format(
                    features.ndim
                )
            )
        labels = np.array(labels, dtype=np.intp).reshape(-1)
        label_map = tuple(label_map)

        if labels.shape[0] != features.shape[0]:
            raise DimensionMismatch(
                "{} labels for {} samples".format(labels.shape[0], features.shape[0])
            )
        if not np.all(np.isfinite(features)):
            raise DatasetError("all feature values must be finite")
        if len(set(label_map)) != len(label_map):
            raise DatasetError("label_map entries must be distinct")
        if list(label_map) != sorted(label_map, key=label_sort_key):
            raise DatasetError("label_map must be sorted ascending")
        if labels.size and (labels.min() < 0 or labels.max() >= len(label_map)):
            raise DatasetError(
                "label indices must be in [0, {}]".format(len(label_map) - 1)
            )
        if not allow_missing:
            counts = np.bincount(labels, minlength=len(label_map))
            missing = np.flatnonzero(counts == 0)
            if missing.size:
                raise EmptyClassError(
                    "classes {} have no samples".format(
                        [label_map[k] for k in missing]
                    )
                )

        features.setflags(write=False)
        labels.setflags(write=False)
        self.features = features
        self.labels = labels
        self.label_map = label_map

    def __repr__(self):
        return "<LabeledDataset(n={}, d={}, K={})>".format(self.n, self.d, self.K)

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.label_map == other.label_map
            and self.features.shape == other.features.shape
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.features, other.features)
        )

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def K(self):
        return len(self.label_map)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.K)

    def missing_classes(self):
        return [int(k) for k in np.flatnonzero(self.class_counts() == 0)]

    def signs(self):
        """
        Binary targets: internal class 0 is y = -1, class 1 is y = +1.
        """
        if self.K != 2:
            raise DatasetError(
                "binary targets need exactly 2 classes, got {}".format(self.K)
            )
        return np.where(self.labels == 1, 1.0, -1.0)

    def subset(self, indices, allow_missing=False):
        indices = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(
            self.features[indices],
            self.labels[indices],
            self.label_map,
            allow_missing=allow_missing,
        )

    def with_features(self, features):
        return LabeledDataset(
            features, self.labels, self.label_map, allow_missing=True
        )


def _iter_lines(text):
    if isinstance(text, str):
        return iter(text.splitlines())
    return (line.rstrip("\r\n") for line in text)


def parse_libsvm(text, expected_dim=None):
    """
    Parse LIBSVM sparse text (``<label> <idx>:<val> ...``, 1-based strictly
    ascending indices) into a dense LabeledDataset.
    """
    tokens = []
    rows = []
    max_index = 0
    for line_number, raw_line in enumerate(_iter_lines(text), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        label = parts[0]
        indices = []
        values = []
        previous = 0
        for part in parts[1:]:
            index_text, sep, value_text = part.partition(":")
            if not sep:
                raise DatasetParseError(
                    "malformed feature token {!r} at line {}".format(
                        part, line_number
                    ),
                    line=line_number,
                )
            try:
                index = int(index_text)
                value = float(value_text)
            except ValueError:
                raise DatasetParseError(
                    "non-numeric token {!r} at line {}".format(part, line_number),
                    line=line_number,
                )
            if index < 1:
                raise DatasetParseError(
                    "index {} below 1 at line {}".format(index, line_number),
                    line=line_number,
                )
            if index <= previous:
                raise DatasetParseError(
                    "non-ascending index at line {}".format(line_number),
                    line=line_number,
                )
            if expected_dim is not None and index > expected_dim:
                raise DatasetParseError(
                    "index {} exceeds expected dimension {} at line {}".format(
                        index, expected_dim, line_number
                    ),
                    line=line_number,
                )
            if not math.isfinite(value):
                raise DatasetParseError(
                    "non-finite value at line {}".format(line_number),
                    line=line_number,
                )
            previous = index
            indices.append(index - 1)
            values.append(value)
        max_index = max(max_index, previous)
        tokens.append(label)
        rows.append((indices, values))

    if not rows:
        raise DatasetParseError("empty input", line=0)

    d = max(max_index, expected_dim or 0)
    if d == 0:
        raise DatasetParseError("no feature columns", line=0)

    features = np.zeros((len(rows), d))
    for row, (indices, values) in enumerate(rows):
        features[row, indices] = values
    labels, label_map = remap_labels(tokens)
    logger.debug("Parsed LIBSVM data: n=%s d=%s K=%s", len(rows), d, len(label_map))
    return LabeledDataset(features, labels, label_map)


def serialize_libsvm(ds):
    out = io.StringIO()
    for row, label in zip(ds.features, ds.labels):
        parts = [ds.label_map[label]]
        for index in np.flatnonzero(row):
            parts.append("{}:{!r}".format(index + 1, float(row[index])))
        out.write(" ".join(parts))
        out.write("\n")
    return out.getvalue()


def parse_csv(text, label_column=0, has_header=False):
    """
    Parse a rectangular CSV table. ``label_column`` is a 0-based column
    position or, with a header, a column name.
    """
    reader = csv.reader(_iter_lines(text))
    table = [
        (line_number, row)
        for line_number, row in enumerate(reader, start=1)
        if any(cell.strip() for cell in row)
    ]
    if not table:
        raise DatasetParseError("empty input", line=0)

    names = None
    if has_header:
        names = [cell.strip() for cell in table[0][1]]
        table = table[1:]
        if not table:
            raise DatasetParseError("empty input", line=0)

    width = len(names) if names is not None else len(table[0][1])
    if isinstance(label_column, str):
        if names is None or label_column not in names:
            raise DatasetError("missing label column {!r}".format(label_column))
        label_position = names.index(label_column)
    else:
        label_position = int(label_column)
        if not 0 <= label_position < width:
            raise DatasetError("missing label column {!r}".format(label_column))
    if width < 2:
        raise DatasetParseError("no feature columns", line=table[0][0])

    tokens = []
    features = np.empty((len(table), width - 1))
    for row_number, (line_number, row) in enumerate(table, start=1):
        if len(row) != width:
            raise DatasetParseError(
                "ragged row {}: expected {} cells, got {}".format(
                    row_number, width, len(row)
                ),
                line=line_number,
            )
        label = row[label_position].strip()
        if not label:
            raise DatasetParseError(
                "empty label row {}".format(row_number), line=line_number
            )
        tokens.append(label)
        column = 0
        for position, cell in enumerate(row):
            if position == label_position:
                continue
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise DatasetParseError(
                    "non-numeric feature cell row {} col {}".format(
                        row_number, position + 1
                    ),
                    line=line_number,
                )
            features[row_number - 1, column] = value
            column += 1

    labels, label_map = remap_labels(tokens)
    logger.debug(
        "Parsed CSV data: n=%s d=%s K=%s", len(table), width - 1, len(label_map)
    )
    return LabeledDataset(features, labels, label_map)


def serialize_csv(ds, header=True):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(["label"] + ["f{}".format(j + 1) for j in range(ds.d)])
    for row, label in zip(ds.features, ds.labels):
        writer.writerow([ds.label_map[label]] + [repr(float(v)) for v in row])
    return out.getvalue()


class StandardizationStats(object):
    __slots__ = ("mean", "stddev")

    def __init__(self, mean, stddev):
        mean = np.array(mean, dtype=np.float64).reshape(-1)
        stddev = np.array(stddev, dtype=np.float64).reshape(-1)
        if mean.shape != stddev.shape:
            raise DimensionMismatch("mean and stddev lengths differ")
        if np.any(stddev < 0):
            raise DatasetError("stddev entries must be non-negative")
        mean.setflags(write=False)
        stddev.setflags(write=False)
        self.mean = mean
        self.stddev = stddev

    @property
    def d(self):
        return self.mean.shape[0]

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d), np.ones(d))

    def to_dict(self):
        return {
            "mean": [float(v) for v in self.mean],
            "stddev": [float(v) for v in self.stddev],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["mean"], data["stddev"])


def fit_standardize(ds):
    if ds.n == 0:
        raise DatasetError("cannot standardize an empty dataset")
    # Population (divide-by-n) standard deviation.
    return StandardizationStats(ds.features.mean(axis=0), ds.features.std(axis=0))


def standardize_matrix(X, stats):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != stats.d:
        raise DimensionMismatch(
            "standardization fitted on d={}, data has d={}".format(
                stats.d, X.shape[1]
            )
        )
    scale = np.where(stats.stddev < DEGENERATE_STDDEV, 1.0, stats.stddev)
    return (X - stats.mean) / scale


def apply_standardize(ds, stats):
    return ds.with_features(standardize_matrix(ds.features, stats))


def _allocate_quotas(sizes, total):
    """
    Proportional per-class train counts summing to ``total``, each at least 1
    and at most the class size.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    raw = total * sizes / sizes.sum()
    quotas = np.minimum(np.maximum(np.floor(raw).astype(np.int64), 1), sizes)
    while quotas.sum() < total:
        candidates = np.flatnonzero(quotas < sizes)
        shortfall = raw[candidates] - quotas[candidates]
        quotas[candidates[np.argmax(shortfall)]] += 1
    while quotas.sum() > total:
        candidates = np.flatnonzero(quotas > 1)
        shortfall = raw[candidates] - quotas[candidates]
        quotas[candidates[np.argmin(shortfall)]] -= 1
    return quotas


def split_indices(labels, train_count, seed):
    """
    Seeded stratified split. Returns ascending (train, test) index arrays.

    Per-class train quotas come from ``_allocate_quotas``; each class draws
    its quota without replacement from one seeded random state.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if not 0 < train_count < n:
        raise ConfigurationError(
            "train_count must be in (0, {}), got {}".format(n, train_count)
        )
    classes = np.unique(labels)
    if train_count < classes.shape[0]:
        raise ConfigurationError(
            "cannot stratify: train_count {} is below the number of classes "
            "{}".format(train_count, classes.shape[0])
        )
    groups = [np.flatnonzero(labels == c) for c in classes]
    quotas = _allocate_quotas([g.shape[0] for g in groups], train_count)

    random_state = check_random_state(seed)
    chosen = [
        group[
            sample_without_replacement(
                group.shape[0], quota, random_state=random_state
            )
        ]
        for group, quota in zip(groups, quotas)
    ]
    train = np.sort(np.concatenate(chosen))
    mask = np.ones(n, dtype=bool)
    mask[train] = False
    test = np.flatnonzero(mask)
    return train, test


def split(ds, train_count, seed):
    train, test = split_indices(ds.labels, train_count, seed)
    return ds.subset(train), ds.subset(test, allow_missing=True)


def kfold_indices(labels, folds, seed):
    """
    Stratified, seeded fold assignment: a list of (train, validation) index
    arrays, one pair per fold.
    """
    labels = np.asarray(labels)
    if folds < 2:
        raise ConfigurationError("need at least 2 folds, got {}".format(folds))
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    placeholder = np.zeros((labels.shape[0], 1))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UserWarning)
        try:
            pairs = [
                (np.sort(train), np.sort(valid))
                for train, valid in splitter.split(placeholder, labels)
            ]
        except ValueError as exc:
            raise ConfigurationError(
                "cannot assign {} folds: {}".format(folds, exc)
            )
    for warning in caught:
        logger.debug("Fold assignment: %s", warning.message)
    return pairs


class SynthSpec(object):
    """
    Gaussian class blobs with optional noise and redundant columns.

    ``correlation`` in [0, 1) mixes a shared seeded direction into every
    class-mean direction, making the per-class tasks correlated.
    """

    __slots__ = (
        "classes",
        "samples_per_class",
        "informative_dims",
        "noise_dims",
        "redundant_dims",
        "class_separation",
        "noise_scale",
        "correlation",
    )

    FIELD_ALIASES = {
        "informative": "informative_dims",
        "noise": "noise_dims",
        "redundant": "redundant_dims",
        "separation": "class_separation",
        "per_class": "samples_per_class",
    }

    def __init__(
        self,
        classes=2,
        samples_per_class=50,
        informative_dims=5,
        noise_dims=0,
        redundant_dims=0,
        class_separation=4.0,
        noise_scale=1.0,
        correlation=0.0,
    ):
        self.classes = int(classes)
        self.samples_per_class = int(samples_per_class)
        self.informative_dims = int(informative_dims)
        self.noise_dims = int(noise_dims)
        self.redundant_dims = int(redundant_dims)
        self.class_separation = float(class_separation)
        self.noise_scale = float(noise_scale)
        self.correlation = float(correlation)

        if min(self.classes, self.samples_per_class, self.informative_dims) < 1:
            raise ConfigurationError(
                "classes, samples_per_class and informative_dims must be positive"
            )
        if min(self.noise_dims, self.redundant_dims) < 0:
            raise ConfigurationError("noise_dims and redundant_dims must be >= 0")
        if self.noise_scale < 0:
            raise ConfigurationError("noise_scale must be >= 0")
        if not 0.0 <= self.correlation < 1.0:
            raise ConfigurationError("correlation must be in [0, 1)")

    @property
    def d(self):
        return self.informative_dims + self.noise_dims + self.redundant_dims

    @property
    def n(self):
        return self.classes * self.samples_per_class

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}

    @classmethod
    def from_string(cls, text):
        """
        Parse ``key=value`` pairs separated by commas, e.g.
        ``classes=3,per_class=100,informative=6,noise=44,redundant=10``.
        """
        kwargs = {}
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            key, sep, value = item.partition("=")
            key = cls.FIELD_ALIASES.get(key.strip(), key.strip())
            if not sep or key not in cls.__slots__:
                raise ConfigurationError("unknown synthetic field {!r}".format(item))
            kwargs[key] = float(value)
        return cls(**kwargs)


def _class_directions(rng, classes, dims, correlation):
    raw = rng.standard_normal((dims, classes))
    if dims >= classes:
        own = np.linalg.qr(raw)[0].T
    else:
        own = (raw / np.linalg.norm(raw, axis=0)).T
    shared = rng.standard_normal(dims)
    shared /= np.linalg.norm(shared)
    directions = math.sqrt(1.0 - correlation) * own + math.sqrt(correlation) * shared
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def synth_blobs(spec, seed):
    rng = np.random.default_rng(seed)
    directions = _class_directions(
        rng, spec.classes, spec.informative_dims, spec.correlation
    )
    labels = np.repeat(np.arange(spec.classes), spec.samples_per_class)
    n = labels.shape[0]

    means = spec.class_separation * directions
    informative = means[labels] + rng.standard_normal((n, spec.informative_dims))
    noise = spec.noise_scale * rng.standard_normal((n, spec.noise_dims))
    mixing = rng.standard_normal(
        (spec.informative_dims, spec.redundant_dims)
    ) / math.sqrt(spec.informative_dims)
    redundant = informative.dot(mixing) + REDUNDANT_JITTER * rng.standard_normal(
        (n, spec.redundant_dims)
    )

    features = np.hstack([informative, noise, redundant])
    label_map = tuple(str(c) for c in range(spec.classes))
    return LabeledDataset(features, labels, label_map)
