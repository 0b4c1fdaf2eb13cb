import json
import tomllib
from pathlib import Path
from typing import Literal
from loguru import logger as log
from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from alcs.errors import ConfigError


STRATEGIES = ("alcs", "random", "center")
SOURCES = ("data", "synthetic")


class AlcsSettings(BaseSettings):
    normalize: Literal["none", "min-max", "z-score"] = Field(
        "min-max", description="Feature normalization applied before clustering"
    )
    label_col: str = Field(
        "-1", description="Label column as header name or zero-based index (negative from end)"
    )
    budget_fraction: float = Field(
        0.1, gt=0.0, lt=1.0, description="Fraction of the unlabeled pool queried for labels"
    )
    rho: float = Field(
        0.5, ge=0.0, le=1.0, description="Fraction of each cluster budget spent on boundaries"
    )
    strategies: list[str] = Field(
        list(STRATEGIES), min_length=1, description="Sampling strategies to benchmark"
    )
    seeds: list[int] = Field([0, 1, 2, 3, 4], min_length=1, description="Seeds, one per cell")
    knn_k: int = Field(5, ge=1, description="Neighbors used by the k-NN evaluation classifier")
    tau: float = Field(
        0.05, gt=0.0, lt=1.0, description="Stop peak search below tau * initial max density"
    )
    min_cluster_size: int | None = Field(
        None, ge=1, description="Drop peaks with fewer cluster members, None uses round(sqrt(n))"
    )
    test_fraction: float = Field(
        0.3, gt=0.0, lt=1.0, description="Held-out fraction used for evaluation"
    )
    subsample_limit: int = Field(
        20000, ge=2, description="Max samples used to estimate bandwidth and sharing radius"
    )
    workers: int = Field(1, ge=1, description="Benchmark cells evaluated concurrently")
    out_dir: Path = Field(Path("alcs-out"), description="Directory receiving reports")

    model_config = SettingsConfigDict(
        env_prefix="ALCS_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        validate_assignment=True,
    )

    @field_validator("label_col", mode="before")
    @classmethod
    def column_as_text(cls, v):
        # type: (str|int) -> str
        if isinstance(v, int) and not isinstance(v, bool):
            return str(v)
        return v

    @field_validator("strategies")
    @classmethod
    def known_strategies(cls, v):
        # type: (list[str]) -> list[str]
        unknown = [s for s in v if s not in STRATEGIES]
        if unknown:
            raise ValueError(f"unknown strategies {unknown}, choose from {list(STRATEGIES)}")
        return v

    def override(self, update=None):
        # type: (dict|None) -> AlcsSettings
        """Returns an updated and validated deep copy of the current settings instance."""

        update = update or {}

        opts = self.model_copy(deep=True)
        # Fields are set one by one so that validation gets triggered
        for field, value in update.items():
            if field not in type(self).model_fields:
                raise ConfigError(f"Unknown setting '{field}'")
            try:
                setattr(opts, field, value)
            except ValidationError as e:
                raise ConfigError(f"Invalid value for '{field}': {value!r}") from e
        return opts


class RunConfig(AlcsSettings):
    """Settings of a CLI run plus its dataset sources."""

    data: list[Path] = Field([], description="Dataset CSV files")
    synthetic: list[str] = Field([], description="Synthetic dataset specs blobs:<c>:<n>:<overlap>")

    @model_validator(mode="after")
    def check_sources(self):
        if not self.data and not self.synthetic:
            raise ValueError("no dataset given, use --data or --synthetic")
        missing = [str(p) for p in self.data if not Path(p).is_file()]
        if missing:
            raise ValueError(f"dataset files not found: {missing}")
        return self


def load_config(path):
    # type: (str|Path) -> dict
    """
    Read a flat TOML (or echoed JSON) config file.

    :param path: Path to a `.toml` or `.json` file
    :return: Mapping of setting names to values
    """
    path = Path(path)
    try:
        if path.suffix == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            with open(path, "rb") as f:
                data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Config file {path} is not valid: {e}") from e
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"Config file {path} must be flat, found tables {nested}")
    log.info(f"Loaded {len(data)} settings from {path.name}")
    return data


def resolve_run_config(path=None, flags=None):
    # type: (str|Path|None, dict|None) -> RunConfig
    """
    Apply an optional config file and then command-line flags on top of `al_opts`.

    :param path: Optional config file
    :param flags: Flag values, None entries are ignored
    :return: Validated run configuration
    """
    values = load_config(path) if path else {}
    unknown = [k for k in values if k not in RunConfig.model_fields]
    if unknown:
        raise ConfigError(f"Unknown settings {unknown}")
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    sources = {k: v for k, v in {**values, **flags}.items() if k in SOURCES}
    opts = al_opts
    for update in (values, flags):
        opts = opts.override({k: v for k, v in update.items() if k not in SOURCES})
    try:
        return RunConfig(**opts.model_dump(), **sources)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Invalid configuration: {problems}") from e


al_opts = AlcsSettings()
