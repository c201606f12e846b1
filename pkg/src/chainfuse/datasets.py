"""Multi-label datasets: ARFF + XML label-header IO, statistics, fold planning.

Datasets are stored column-encoded: numeric cells hold their value, nominal
cells hold the index of the value in the attribute's declared value set, and
missing cells hold NaN.  Labels live in a separate binary matrix ordered as
declared by the XML label header.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

NUMERIC_TYPES = {"numeric", "real", "integer"}


class ArffError(ValueError):
    """Malformed ARFF or label-header input. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class FeatureSpec:
    """One input attribute: ``kind`` is 'numeric' or 'nominal' (with value set)."""

    name: str
    kind: str
    values: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("numeric", "nominal"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == "nominal" and not self.values:
            raise ValueError(f"nominal feature {self.name!r} needs a value set")
        if self.kind == "numeric" and self.values is not None:
            raise ValueError(f"numeric feature {self.name!r} cannot carry values")


@dataclass(frozen=True, eq=False)
class MultiLabelDataset:
    """n instances of mixed numeric/nominal features plus an n x m binary label matrix.

    Immutable after construction; safe to share across threads.
    """

    feature_schema: tuple[FeatureSpec, ...]
    features: np.ndarray  # (n, d) float64, nominal cells are value indices, NaN = missing
    labels: np.ndarray  # (n, m) int8
    label_names: tuple[str, ...]
    relation: str = "multilabel"

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int8)
        if features.ndim != 2 or labels.ndim != 2:
            raise ValueError("features and labels must be 2-D")
        object.__setattr__(self, "feature_schema", tuple(self.feature_schema))
        object.__setattr__(self, "label_names", tuple(self.label_names))
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        features.setflags(write=False)
        labels.setflags(write=False)
        n, d = features.shape
        if n < 1:
            raise ValueError("dataset needs at least one instance")
        if labels.shape[0] != n:
            raise ValueError("features and labels disagree on instance count")
        if labels.shape[1] < 1:
            raise ValueError("dataset needs at least one label")
        if labels.shape[1] != len(self.label_names):
            raise ValueError("label matrix width does not match label_names")
        if d != len(self.feature_schema):
            raise ValueError("feature matrix width does not match schema")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("label entries must be 0 or 1")
        feature_names = [s.name for s in self.feature_schema]
        all_names = feature_names + list(self.label_names)
        if len(set(all_names)) != len(all_names):
            raise ValueError("attribute names must be unique (features and labels)")
        for col, spec in enumerate(self.feature_schema):
            if spec.kind != "nominal":
                continue
            vals = features[:, col]
            observed = vals[~np.isnan(vals)]
            if observed.size and (
                (observed != np.floor(observed)).any()
                or observed.min() < 0
                or observed.max() >= len(spec.values)
            ):
                raise ValueError(
                    f"nominal feature {spec.name!r} holds values outside its declared set"
                )

    # -- basic shape accessors -------------------------------------------------
    @property
    def n_instances(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_labels(self) -> int:
        return self.labels.shape[1]

    def feature_kinds(self) -> np.ndarray:
        """Per column: -1 for numeric, else the declared nominal category count."""
        return np.array(
            [-1 if s.kind == "numeric" else len(s.values) for s in self.feature_schema],
            dtype=np.int64,
        )

    def subset(self, indices) -> "MultiLabelDataset":
        """Row subset (bootstrap samples may repeat indices)."""
        idx = np.asarray(indices, dtype=np.intp)
        return MultiLabelDataset(
            feature_schema=self.feature_schema,
            features=self.features[idx].copy(),
            labels=self.labels[idx].copy(),
            label_names=self.label_names,
            relation=self.relation,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiLabelDataset):
            return NotImplemented
        return (
            self.feature_schema == other.feature_schema
            and self.label_names == other.label_names
            and self.relation == other.relation
            and np.array_equal(self.features, other.features, equal_nan=True)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class DatasetStats:
    diversity: float
    cardinality: float
    distinct_labelsets: int


@dataclass(frozen=True)
class FoldPlan:
    """Partition of n instances into k folds (assignment[i] = fold of instance i)."""

    k: int
    assignment: np.ndarray

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", assignment)
        assignment.setflags(write=False)
        if self.k < 2:
            raise ValueError("fold count must be at least 2")
        if assignment.min() < 0 or assignment.max() >= self.k:
            raise ValueError("fold ids out of range")

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


# ---------------------------------------------------------------------------
# ARFF + XML parsing
# ---------------------------------------------------------------------------

_QUOTES = "'\""


def _unquote(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] in _QUOTES and token[-1] == token[0]:
        return token[1:-1]
    return token


def _split_csv(text: str, line_no: int) -> list[str]:
    """Split on commas that are outside single/double quotes."""
    out, buf, quote = [], [], None
    for ch in text:
        if quote:
            if ch == quote:
                quote = None
            buf.append(ch)
        elif ch in _QUOTES:
            quote = ch
            buf.append(ch)
        elif ch == ",":
            out.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    if quote:
        raise ArffError("unterminated quote", line_no)
    out.append("".join(buf))
    return out


_ATTR_RE = re.compile(r"@attribute\s+(?P<name>'[^']*'|\"[^\"]*\"|\S+)\s+(?P<type>.+)$", re.I)


def _parse_attribute(line: str, line_no: int) -> tuple[str, str | tuple[str, ...]]:
    match = _ATTR_RE.match(line)
    if not match:
        raise ArffError("malformed @attribute declaration", line_no)
    name = _unquote(match.group("name"))
    type_text = match.group("type").strip()
    if type_text.startswith("{"):
        if not type_text.endswith("}"):
            raise ArffError("unterminated nominal value set", line_no)
        values = tuple(
            _unquote(v) for v in _split_csv(type_text[1:-1], line_no)
        )
        if any(v == "" for v in values) or not values:
            raise ArffError("empty nominal value", line_no)
        return name, values
    if type_text.lower().split()[0] in NUMERIC_TYPES:
        return name, "numeric"
    raise ArffError(f"unsupported attribute type {type_text!r}", line_no)


def parse_label_header(xml_text: str) -> tuple[str, ...]:
    """Label names from a ``<labels><label name='...'/></labels>`` header."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise ArffError(f"invalid label header XML: {exc}") from exc
    names = []
    for node in root.iter():
        if node.tag.rsplit("}", 1)[-1] == "label":
            name = node.attrib.get("name")
            if name is None:
                raise ArffError("label element without a name attribute")
            names.append(name)
    if not names:
        raise ArffError("label header declares no labels")
    if len(set(names)) != len(names):
        raise ArffError("duplicate label names in header")
    return tuple(names)


def _cell_value(
    token: str, attr_type, attr_name: str, is_label: bool, line_no: int
) -> float:
    token = token.strip()
    if token == "?":  # a quoted '?' stays a value; only the bare token is missing
        if is_label:
            raise ArffError(f"label attribute {attr_name!r} has a missing value", line_no)
        return np.nan
    token = _unquote(token)
    if attr_type == "numeric":
        try:
            value = float(token)
        except ValueError:
            raise ArffError(f"bad numeric value {token!r} for {attr_name!r}", line_no) from None
        if is_label and value not in (0.0, 1.0):
            raise ArffError(f"label attribute {attr_name!r} is not binary", line_no)
        return value
    try:
        index = attr_type.index(token)
    except ValueError:
        raise ArffError(
            f"value {token!r} not in declared set of {attr_name!r}", line_no
        ) from None
    if is_label:
        value = float(attr_type[index])
        if value not in (0.0, 1.0):  # pragma: no cover - declaration already vetted
            raise ArffError(f"label attribute {attr_name!r} is not binary", line_no)
        return value
    return float(index)


def parse_dataset(arff_text: str, label_header_xml: str) -> MultiLabelDataset:
    """Parse Mulan-format data: an ARFF body plus the XML header naming the labels.

    Handles dense and sparse data sections, ``%`` comments, case-insensitive
    keywords and quoted names/values.  Labels are extracted in XML-declared
    order; the remaining attributes become features in declaration order.
    Missing feature values are kept as explicit NaN markers.
    """
    label_names = parse_label_header(label_header_xml)

    relation = "multilabel"
    attributes: list[tuple[str, str | tuple[str, ...]]] = []
    data_rows: list[tuple[int, str]] = []
    in_data = False
    for line_no, raw in enumerate(arff_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            lowered = line.lower()
            if lowered.startswith("@relation"):
                rest = line[len("@relation"):].strip()
                relation = _unquote(rest) or relation
            elif lowered.startswith("@attribute"):
                attributes.append(_parse_attribute(line, line_no))
            elif lowered.startswith("@data"):
                in_data = True
            else:
                raise ArffError(f"unexpected header line {line!r}", line_no)
        else:
            data_rows.append((line_no, line))

    if not in_data:
        raise ArffError("missing @data section")
    if not data_rows:
        raise ArffError("empty data section")

    attr_names = [name for name, _ in attributes]
    if len(set(attr_names)) != len(attr_names):
        raise ArffError("duplicate attribute names")
    name_to_pos = {name: pos for pos, (name, _) in enumerate(attributes)}
    for label in label_names:
        if label not in name_to_pos:
            raise ArffError(f"label {label!r} declared in XML is absent from the ARFF")
    label_set = set(label_names)

    for name, attr_type in attributes:
        if name in label_set:
            if attr_type != "numeric" and set(attr_type) - {"0", "1"}:
                raise ArffError(
                    f"label attribute {name!r} must be binary or nominal over {{0,1}}"
                )

    n_attrs = len(attributes)
    sparse_defaults = np.empty(n_attrs, dtype=np.float64)
    for pos, (name, attr_type) in enumerate(attributes):
        if attr_type == "numeric":
            sparse_defaults[pos] = 0.0
        elif name in label_set:
            # default is the first declared value, per sparse-ARFF convention
            sparse_defaults[pos] = float(attr_type[0])
        else:
            sparse_defaults[pos] = 0.0  # index of the first declared value

    rows = np.empty((len(data_rows), n_attrs), dtype=np.float64)
    for out_i, (line_no, line) in enumerate(data_rows):
        if line.startswith("{"):
            if not line.endswith("}"):
                raise ArffError("unterminated sparse row", line_no)
            rows[out_i] = sparse_defaults
            body = line[1:-1].strip()
            if not body:
                continue
            for pair in _split_csv(body, line_no):
                pair = pair.strip()
                if not pair:
                    raise ArffError("empty sparse entry", line_no)
                parts = pair.split(None, 1)
                if len(parts) != 2:
                    raise ArffError(f"malformed sparse entry {pair!r}", line_no)
                try:
                    pos = int(parts[0])
                except ValueError:
                    raise ArffError(f"bad sparse index {parts[0]!r}", line_no) from None
                if not 0 <= pos < n_attrs:
                    raise ArffError(f"sparse index {pos} out of range", line_no)
                name, attr_type = attributes[pos]
                rows[out_i, pos] = _cell_value(
                    parts[1], attr_type, name, name in label_set, line_no
                )
        else:
            tokens = line.split(",") if "'" not in line and '"' not in line else _split_csv(line, line_no)
            if len(tokens) != n_attrs:
                raise ArffError(
                    f"expected {n_attrs} values, found {len(tokens)}", line_no
                )
            for pos, token in enumerate(tokens):
                name, attr_type = attributes[pos]
                if attr_type == "numeric" and name not in label_set:
                    try:  # plain-number fast path; '?' and quoting fall through
                        rows[out_i, pos] = float(token)
                        continue
                    except ValueError:
                        pass
                rows[out_i, pos] = _cell_value(
                    token, attr_type, name, name in label_set, line_no
                )

    label_cols = [name_to_pos[name] for name in label_names]
    feature_cols = [pos for pos in range(n_attrs) if attributes[pos][0] not in label_set]
    schema = []
    for pos in feature_cols:
        name, attr_type = attributes[pos]
        if attr_type == "numeric":
            schema.append(FeatureSpec(name, "numeric"))
        else:
            schema.append(FeatureSpec(name, "nominal", tuple(attr_type)))
    labels = rows[:, label_cols].astype(np.int8)
    return MultiLabelDataset(
        feature_schema=tuple(schema),
        features=rows[:, feature_cols],
        labels=labels,
        label_names=label_names,
        relation=relation,
    )


# ---------------------------------------------------------------------------
# ARFF writing
# ---------------------------------------------------------------------------

_SAFE_TOKEN = re.compile(r"^[^\s,'\"{}%?]+$")


def _quote(token: str) -> str:
    if _SAFE_TOKEN.match(token):
        return token
    if "'" not in token:
        return f"'{token}'"
    if '"' not in token:
        return '"' + token + '"'
    raise ArffError(f"value {token!r} mixes both quote kinds and cannot be written")


def _format_numeric(value: float) -> str:
    return repr(float(value))


def to_arff(ds: MultiLabelDataset) -> str:
    """Serialize as dense ARFF (features first, labels last, in order)."""
    lines = [f"@relation {_quote(ds.relation)}", ""]
    for spec in ds.feature_schema:
        if spec.kind == "numeric":
            lines.append(f"@attribute {_quote(spec.name)} numeric")
        else:
            values = ",".join(_quote(v) for v in spec.values)
            lines.append(f"@attribute {_quote(spec.name)} {{{values}}}")
    for name in ds.label_names:
        lines.append(f"@attribute {_quote(name)} {{0,1}}")
    lines.append("")
    lines.append("@data")
    for i in range(ds.n_instances):
        cells = []
        for col, spec in enumerate(ds.feature_schema):
            value = ds.features[i, col]
            if np.isnan(value):
                cells.append("?")
            elif spec.kind == "numeric":
                cells.append(_format_numeric(value))
            else:
                cells.append(_quote(spec.values[int(value)]))
        cells.extend(str(int(v)) for v in ds.labels[i])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def label_header_xml(ds: MultiLabelDataset) -> str:
    """XML label header matching :func:`parse_dataset`'s expectations."""
    body = "\n".join(f'  <label name="{name}"/>' for name in ds.label_names)
    return f'<labels xmlns="http://mulan.sourceforge.net/labels">\n{body}\n</labels>\n'


# ---------------------------------------------------------------------------
# Dataset statistics
# ---------------------------------------------------------------------------


def distinct_labelsets(ds: MultiLabelDataset) -> int:
    return np.unique(ds.labels, axis=0).shape[0]


def diversity(ds: MultiLabelDataset) -> float:
    """Observed distinct labelsets over the attainable count min(2^m, n)."""
    denom = min(2 ** ds.n_labels, ds.n_instances)
    return distinct_labelsets(ds) / denom


def dataset_stats(ds: MultiLabelDataset) -> DatasetStats:
    return DatasetStats(
        diversity=diversity(ds),
        cardinality=float(ds.labels.sum(axis=1).mean()),
        distinct_labelsets=distinct_labelsets(ds),
    )


# ---------------------------------------------------------------------------
# Fold planning (iterative label-wise stratification)
# ---------------------------------------------------------------------------


def plan_folds(ds: MultiLabelDataset, k: int, seed: int) -> FoldPlan:
    """Stratified k-fold plan, deterministic for a fixed seed.

    Greedy label-wise stratification: repeatedly take the label with the
    fewest unassigned positive instances and place each such instance into
    the fold that most wants positives of that label, subject to fold
    capacities that keep sizes within one of each other.  Ties break first
    toward the fold with the most remaining room, then randomly.
    """
    n = ds.n_instances
    if k < 2:
        raise ValueError("fold count must be at least 2")
    if k > n:
        raise ValueError(f"cannot split {n} instances into {k} folds")
    rng = np.random.default_rng(seed)
    labels = ds.labels

    capacity = np.full(k, n // k, dtype=np.int64)
    capacity[: n % k] += 1
    desired = labels.sum(axis=0, dtype=np.float64)[:, None] / k * np.ones(k)
    assignment = np.full(n, -1, dtype=np.int64)
    remaining = np.ones(n, dtype=bool)
    remaining_pos = labels.sum(axis=0, dtype=np.int64)

    def place(instance: int, label: int | None) -> None:
        open_folds = np.flatnonzero(capacity > 0)
        if label is not None:
            score = desired[label, open_folds]
        else:
            score = capacity[open_folds].astype(np.float64)
        best = open_folds[score == score.max()]
        if len(best) > 1:
            room = capacity[best]
            best = best[room == room.max()]
        fold = int(best[rng.integers(len(best))]) if len(best) > 1 else int(best[0])
        assignment[instance] = fold
        capacity[fold] -= 1
        remaining[instance] = False
        pos = np.flatnonzero(labels[instance])
        desired[pos, fold] -= 1.0
        remaining_pos[pos] -= 1

    while True:
        counts = np.where(remaining_pos > 0, remaining_pos, np.iinfo(np.int64).max)
        label = int(counts.argmin())
        if remaining_pos[label] <= 0:
            break
        for instance in np.flatnonzero(remaining & (labels[:, label] == 1)):
            place(int(instance), label)

    for instance in np.flatnonzero(remaining):
        place(int(instance), None)

    return FoldPlan(k=k, assignment=assignment)
