import json
import logging
from collections import deque
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Deque, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from failscope.exceptions import DatasetException, ModelException
from failscope.instrument.signals import NUM_SIGNALS

if TYPE_CHECKING:
    from failscope.corpus.dataset import LabeledDataset

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MIN_DECREASE = 1e-12
"""Impurity decrease a split must exceed; smaller gains are treated as ties with not splitting."""


def gini(counts: Sequence[int]) -> float:
    """Gini impurity of a node with the given class counts. Zero for an empty node."""
    total = sum(counts)
    if total == 0:
        return 0.0
    return 1.0 - sum((count / total) ** 2 for count in counts)


@dataclass
class Node:
    counts: Tuple[int, int]
    """Training examples of class 0 and class 1 that reached the node."""
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional[int] = None
    """Index of the child receiving `x[feature] <= threshold`."""
    right: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def label(self) -> int:
        """Majority class; equal counts predict 0."""
        return 1 if self.counts[1] > self.counts[0] else 0


def _best_split(
    X: np.ndarray, y: np.ndarray, features: Sequence[int], parent: float
) -> Optional[Tuple[int, float, float]]:
    """Find the split with the largest impurity decrease.

    Candidate thresholds are midpoints between consecutive distinct sorted values. Ties go to the lowest feature index,
    then the lowest threshold.

    Returns:
        `(feature, threshold, decrease)`, or `None` if no split decreases impurity.
    """
    n = len(y)
    best: Optional[Tuple[int, float, float]] = None
    for feature in features:
        order = np.argsort(X[:, feature], kind="stable")
        values = X[order, feature].astype(np.float64)
        changes = np.nonzero(values[:-1] != values[1:])[0]
        if len(changes) == 0:
            continue
        left_n = changes + 1
        left_fail = np.cumsum(y[order])[changes]
        left_pass = left_n - left_fail
        right_n = n - left_n
        right_fail = y.sum() - left_fail
        right_pass = right_n - right_fail
        left_gini = 1.0 - (left_pass / left_n) ** 2 - (left_fail / left_n) ** 2
        right_gini = 1.0 - (right_pass / right_n) ** 2 - (right_fail / right_n) ** 2
        decrease = parent - (left_n * left_gini + right_n * right_gini) / n
        position = int(np.argmax(decrease >= decrease.max() - MIN_DECREASE))
        gain = float(decrease[position])
        if best is None or gain > best[2] + MIN_DECREASE:
            cut = changes[position]
            best = (int(feature), float((values[cut] + values[cut + 1]) / 2), gain)
    if best is None or best[2] <= MIN_DECREASE:
        return None
    return best


class DecisionTree:
    """Binary CART classifier grown until leaves are pure or no split reduces Gini impurity.

    Examples with `x[feature] <= threshold` go left. Features outside the mask are never split on, and their
    importance is zero.
    """

    def __init__(
        self,
        nodes: List[Node],
        importances: Sequence[float],
        feature_mask: Optional[Sequence[int]] = None,
        degenerate: bool = False,
    ) -> None:
        """DecisionTree constructor.

        Args:
            nodes: Node list; index 0 is the root.
            importances: One importance per signal.
            feature_mask: Signals the tree was allowed to split on; `None` means all.
            degenerate: Whether the tree was fitted on a single class.
        """
        self.nodes = nodes
        self.importances = np.asarray(importances, dtype=np.float64)
        self.feature_mask = None if feature_mask is None else tuple(int(f) for f in feature_mask)
        self.degenerate = degenerate

    @property
    def split_count(self) -> int:
        return sum(not node.is_leaf for node in self.nodes)

    @property
    def depth(self) -> int:
        depths = {0: 0}
        for index, node in enumerate(self.nodes):
            if not node.is_leaf:
                depths[node.left] = depths[node.right] = depths[index] + 1  # type: ignore[index]
        return max(depths.values())

    @classmethod
    def fit_arrays(cls, X: np.ndarray, y: np.ndarray, feature_mask: Optional[Sequence[int]] = None) -> "DecisionTree":
        """Grow a tree on a feature matrix with one column per signal and 0/1 labels.

        Raises:
            DatasetException: If the inputs are empty, misshapen or the mask names an unknown signal.
        """
        X = np.asarray(X)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != NUM_SIGNALS or len(X) != len(y) or not len(y):
            raise DatasetException(f"expected a non-empty (n, {NUM_SIGNALS}) matrix with n labels")
        features = list(range(NUM_SIGNALS)) if feature_mask is None else sorted(set(feature_mask))
        if not features or features[0] < 0 or features[-1] >= NUM_SIGNALS:
            raise DatasetException(f"feature mask must name signals between 0 and {NUM_SIGNALS - 1}")

        total = len(y)
        importances = np.zeros(NUM_SIGNALS)
        nodes: List[Node] = []
        pending: Deque[Tuple[int, np.ndarray]] = deque()

        def add(index: np.ndarray) -> int:
            fail = int(y[index].sum())
            nodes.append(Node(counts=(len(index) - fail, fail)))
            pending.append((len(nodes) - 1, index))
            return len(nodes) - 1

        add(np.arange(total))
        while pending:
            node_id, index = pending.popleft()
            node = nodes[node_id]
            if min(node.counts) == 0:
                continue
            parent = gini(node.counts)
            split = _best_split(X[index], y[index], features, parent)
            if split is None:
                continue
            feature, threshold, decrease = split
            goes_left = X[index, feature] <= threshold
            node.feature, node.threshold = feature, threshold
            importances[feature] += len(index) / total * decrease
            node.left = add(index[goes_left])
            node.right = add(index[~goes_left])

        if importances.sum() > 0:
            importances /= importances.sum()
        degenerate = min(nodes[0].counts) == 0
        if degenerate:
            logger.warning("fitted a single-leaf tree on a training set with a single class")
        return cls(nodes, importances, None if feature_mask is None else features, degenerate)

    def predict(self, features: Sequence[float]) -> int:
        """Label one feature vector.

        Args:
            features: All 26 signals, or only the masked signals in ascending signal order.

        Raises:
            DatasetException: If the vector has neither length.
        """
        vector = self._expand(features)
        node = self.nodes[0]
        while not node.is_leaf:
            child = node.left if vector[node.feature] <= node.threshold else node.right  # type: ignore[index,operator]
            node = self.nodes[child]  # type: ignore[index]
        return node.label

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict(row) for row in np.asarray(X)], dtype=np.int64)

    def _expand(self, features: Sequence[float]) -> np.ndarray:
        vector = np.asarray(features, dtype=np.float64)
        if len(vector) == NUM_SIGNALS:
            return vector
        if self.feature_mask is not None and len(vector) == len(self.feature_mask):
            full = np.zeros(NUM_SIGNALS)
            full[list(self.feature_mask)] = vector
            return full
        raise DatasetException(f"expected {NUM_SIGNALS} features, got {len(vector)}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "feature_mask": None if self.feature_mask is None else list(self.feature_mask),
            "degenerate": self.degenerate,
            "importances": [float(value) for value in self.importances],
            "nodes": [asdict(node) for node in self.nodes],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DecisionTree":
        """Rebuild a tree from `to_dict` output.

        Raises:
            ModelException: If the format version is not supported or the node list is malformed.
        """
        if data.get("format_version") != FORMAT_VERSION:
            raise ModelException(f"unsupported model format version {data.get('format_version')!r}")
        try:
            nodes = [
                Node(
                    counts=tuple(node["counts"]),  # type: ignore[arg-type]
                    feature=node["feature"],
                    threshold=node["threshold"],
                    left=node["left"],
                    right=node["right"],
                )
                for node in data["nodes"]
            ]
        except (KeyError, TypeError) as e:
            raise ModelException(f"malformed model: {e}") from e
        if not nodes:
            raise ModelException("malformed model: no nodes")
        return cls(nodes, data["importances"], data.get("feature_mask"), data.get("degenerate", False))

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DecisionTree":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit(train: "LabeledDataset", feature_mask: Optional[Sequence[int]] = None, seed: int = 0) -> DecisionTree:
    """Grow a decision tree on a labeled dataset.

    Args:
        train: Training examples.
        feature_mask: Signals the tree may split on; all 26 when omitted.
        seed: Unused: growth is fully deterministic given the example order.

    Returns:
        The fitted tree. A single-class training set gives a single-leaf tree flagged `degenerate`.
    """
    del seed
    return DecisionTree.fit_arrays(train.features(), train.labels(), feature_mask)
