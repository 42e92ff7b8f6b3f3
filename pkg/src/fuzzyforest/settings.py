"""Run configuration using Pydantic settings."""

from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from fuzzyforest.domain.errors import InvalidConfigError
from fuzzyforest.domain.models import (
    EvalConfig,
    FuzzyConfig,
    ImputeConfig,
    SynthConfig,
    TreeParams,
    WgcnaConfig,
)

# fields that change where or how a run executes but never what it computes
EXECUTION_FIELDS = frozenset({"out_dir", "threads", "log_level", "json_logs"})


class RunConfig(BaseSettings):
    """
    Everything one CLI command needs.

    Precedence: command-line flags > YAML config file > ``FUZZYFOREST_*``
    environment variables > defaults. ``seed`` has no default.
    """

    model_config = SettingsConfigDict(env_prefix="FUZZYFOREST_", extra="forbid")

    # Input
    input_path: Path | None = Field(default=None)
    label_column: str = Field(default="label")
    weight_column: str | None = Field(default=None)
    positive_label: str | None = Field(default=None)
    missing_sentinels: list[str] = Field(default_factory=lambda: ["", "NA"])

    # Imputation
    donor_pool_size: int = Field(default=5, ge=1)

    # WGCNA (beta None selects the power automatically)
    beta: int | None = Field(default=None, ge=1)
    r2_cut: float = Field(default=0.8)
    cut_height: float | None = Field(default=None, ge=0)
    cut_fraction: float = Field(default=0.99, gt=0, le=1)
    min_module_size: int = Field(default=5, ge=1)
    audit_matrices: bool = Field(default=False)

    # Fuzzy Forests
    drop_fraction: float = Field(default=0.25, gt=0, lt=1)
    keep_fraction: float = Field(default=0.25, gt=0, le=1)
    final_k: int = Field(default=20, ge=1)
    screening_trees: int = Field(default=500, ge=1)
    selection_trees: int = Field(default=1000, ge=1)
    screen_grey: bool = Field(default=False)
    mtry: int | None = Field(default=None, ge=1)
    max_depth: int | None = Field(default=None, ge=0)
    min_leaf: int = Field(default=1, ge=1)

    # Evaluation
    k: int = Field(default=10, ge=2)
    stratified: bool = Field(default=True)
    ridge_lambda: float = Field(default=1e-3, ge=0)
    tolerance: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=100, ge=1)
    forest_path: Path | None = Field(default=None)

    # Synthetic data
    n_samples: int = Field(default=1000, ge=2)
    block_sizes: list[int] = Field(default_factory=lambda: [20, 20, 20])
    rho: float = Field(default=0.7)
    n_informative: int = Field(default=2, ge=0)
    n_informative_blocks: int | None = Field(default=None, ge=0)
    signal_strength: float = Field(default=3.0)
    noise_rate: float = Field(default=0.0)
    n_noise: int = Field(default=0, ge=0)
    synth_output: Literal["continuous", "indicator", "categorical"] = Field(default="continuous")
    n_levels: int = Field(default=3, ge=2)
    mask_fraction: float = Field(default=0.0, ge=0, lt=1)
    truth_path: Path | None = Field(default=None)

    # Crosstab
    crosstab_variables: list[str] = Field(default_factory=list)

    # Run
    seed: int = Field(..., ge=0)
    out_dir: Path = Field(default=Path("out"))
    threads: int = Field(default=1, ge=1)
    log_level: str = Field(default="INFO")
    json_logs: bool = Field(default=False)

    @field_validator("block_sizes")
    @classmethod
    def _positive_blocks(cls, value: list[int]) -> list[int]:
        if any(size < 1 for size in value):
            raise ValueError("block sizes must be >= 1")
        return value

    def require_input(self) -> Path:
        if self.input_path is None:
            raise InvalidConfigError("input_path is required (set it in the config file or with --input)")
        return self.input_path

    def tree_params(self) -> TreeParams:
        return TreeParams(mtry=self.mtry, max_depth=self.max_depth, min_leaf=self.min_leaf)

    def impute_config(self) -> ImputeConfig:
        exclude = tuple(c for c in (self.label_column, self.weight_column) if c)
        return ImputeConfig(
            donor_pool_size=self.donor_pool_size, rng_seed=self.seed, exclude=exclude
        )

    def wgcna_config(self) -> WgcnaConfig:
        return WgcnaConfig(
            beta=self.beta,
            r2_cut=self.r2_cut,
            cut_height=self.cut_height,
            cut_fraction=self.cut_fraction,
            min_module_size=self.min_module_size,
        )

    def fuzzy_config(self) -> FuzzyConfig:
        return FuzzyConfig(
            drop_fraction=self.drop_fraction,
            keep_fraction=self.keep_fraction,
            final_k=self.final_k,
            screening_trees=self.screening_trees,
            selection_trees=self.selection_trees,
            rng_seed=self.seed,
            screen_grey=self.screen_grey,
            tree_params=self.tree_params(),
        )

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            k=self.k,
            stratified=self.stratified,
            ridge_lambda=self.ridge_lambda,
            tolerance=self.tolerance,
            max_iter=self.max_iter,
            rng_seed=self.seed,
        )

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            n_samples=self.n_samples,
            block_sizes=tuple(self.block_sizes),
            rho=self.rho,
            n_informative=self.n_informative,
            n_informative_blocks=self.n_informative_blocks,
            signal_strength=self.signal_strength,
            noise_rate=self.noise_rate,
            n_noise=self.n_noise,
            output=self.synth_output,
            n_levels=self.n_levels,
            rng_seed=self.seed,
        )

    def artifact_header(self, command: str) -> dict[str, Any]:
        """Provenance block: the command, seed and every result-affecting setting."""
        settings = self.model_dump(mode="json", exclude=set(EXECUTION_FIELDS))
        return {"command": command, "seed": self.seed, "config": settings}


def read_config_file(path: Path | str) -> dict[str, Any]:
    """
    Load a YAML mapping of RunConfig fields.

    Raises:
        FileNotFoundError: If ``path`` does not exist
        InvalidConfigError: If the file is not a YAML mapping
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise InvalidConfigError(f"Cannot parse config file {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InvalidConfigError(f"Config file {path} must hold a key/value mapping")
    return {str(key).replace("-", "_"): value for key, value in data.items()}


def load_run_config(
    config_path: Path | str | None = None, overrides: Mapping[str, Any] | None = None
) -> RunConfig:
    """Merge the config file and flag overrides (``None`` values are ignored); flags win."""
    values = read_config_file(config_path) if config_path else {}
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return RunConfig(**values)
