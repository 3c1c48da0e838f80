"""Model configuration and construction."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .gbdt import GROWTH, GBDTClassifier
from .knn import KNNClassifier
from .tree import RandomForestClassifier

MODEL_KINDS = ("knn", "random_forest", "gbdt")


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters for one classifier.

    Defaults follow the stock settings of the reference libraries: 100
    trees, learning rate 0.1, 31 leaves leaf-wise and depth 6 level-wise.
    ``max_depth`` of ``None`` lets the growth mode pick its default.
    """

    kind: str = "gbdt"
    knn_k: int = 5
    trees: int = 100
    max_depth: int | None = None
    max_leaves: int = 31
    learning_rate: float = 0.1
    growth: str = "leaf_wise"
    subsample_features: str = "sqrt"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.growth not in GROWTH:
            raise ValueError(f"growth must be one of {GROWTH}, got {self.growth!r}")
        if self.subsample_features not in ("sqrt", "all"):
            raise ValueError("subsample_features must be 'sqrt' or 'all'")
        for name in ("knn_k", "trees", "max_leaves"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")

    @property
    def label(self) -> str:
        if self.kind == "gbdt":
            return f"gbdt-{self.growth}"
        return self.kind

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed: int) -> "ModelConfig":
        return ModelConfig(**{**asdict(self), "seed": int(seed)})


def make_model(config: ModelConfig):
    """Unfitted estimator for ``config``."""
    if config.kind == "knn":
        return KNNClassifier(n_neighbors=config.knn_k)
    if config.kind == "random_forest":
        return RandomForestClassifier(
            n_estimators=config.trees,
            max_depth=config.max_depth,
            max_features=config.subsample_features,
            random_state=config.seed,
        )
    if config.growth == "leaf_wise":
        depth = -1 if config.max_depth is None else config.max_depth
    else:
        depth = 6 if config.max_depth is None else config.max_depth
    return GBDTClassifier(
        n_estimators=config.trees,
        learning_rate=config.learning_rate,
        growth=config.growth,
        max_depth=depth,
        max_leaves=config.max_leaves,
        random_state=config.seed,
    )
