"""
Run configuration - JSON configs parsed into frozen dataclasses, flag overrides and validation
"""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from src.data_io.bootstrap import lalonde_grid
from src.data_io.dataset import LALONDE_SCHEMA, CSVSchema
from src.errors import ConfigError
from src.estimation.bundle import DEFAULT_ESTIMATORS, ModelCombo, OrForm, validate_estimators
from src.models.propensity import Link
from src.models.regressors import RegressorSpec
from src.simulation.designs import Family, OutcomeSetting, SimDesign, preset
from src.utils import default_workers

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "estimate", "bootstrap")
FORMATS = ("csv", "json")


def _check_keys(raw: Any, allowed: Tuple[str, ...], path: str) -> Dict[str, Any]:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(raw).__name__}")
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"Unknown config key '{path + '.' if path else ''}{key}'")
    return raw


def _resolve(path: Optional[str], base: Optional[Path]) -> Optional[str]:
    if path is None or base is None or Path(path).is_absolute():
        return path
    return str(base / path)


@dataclass(frozen=True)
class DesignConfig:
    family: str = Family.QIN_ZHANG.value
    n: int = 1000
    gamma_star: Tuple[float, float, float] = (1.0, 0.2, 0.2)
    setting: str = OutcomeSetting.LIN_OR.value

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], path: str) -> "DesignConfig":
        _check_keys(raw, ("family", "n", "gamma_star", "setting"), path)
        config = cls(family=raw.get("family", cls.family), n=int(raw.get("n", cls.n)),
                     gamma_star=tuple(raw.get("gamma_star", cls.gamma_star)),
                     setting=raw.get("setting", cls.setting))
        config.to_design()
        return config

    def to_design(self) -> SimDesign:
        try:
            return SimDesign(Family(self.family), self.n, self.gamma_star, OutcomeSetting(self.setting))
        except ValueError as e:
            raise ConfigError(f"Invalid design: {e}") from e


@dataclass(frozen=True)
class ModelComboConfig:
    """One grid cell by spec name; c_spec is one name or a (c0, c1) pair"""

    ps: str
    outcome: str
    link: str = Link.LOGISTIC.value
    or_form: str = OrForm.SEPARATE.value
    c_spec: Optional[Tuple[str, ...]] = None

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], path: str) -> "ModelComboConfig":
        _check_keys(raw, ("ps", "outcome", "link", "or_form", "c_spec"), path)
        if "ps" not in raw or "outcome" not in raw:
            raise ConfigError(f"{path}: 'ps' and 'outcome' are required")
        c_spec = raw.get("c_spec")
        if isinstance(c_spec, str):
            c_spec = (c_spec,)
        elif c_spec is not None:
            c_spec = tuple(c_spec)
            if len(c_spec) != 2:
                raise ConfigError(f"{path}.c_spec: give one spec name or a [c0, c1] pair")
        return cls(ps=raw["ps"], outcome=raw["outcome"], link=raw.get("link", cls.link),
                   or_form=raw.get("or_form", cls.or_form), c_spec=c_spec)


@dataclass(frozen=True)
class GridConfig:
    """Named regressor specs and the PS × OR combinations built from them"""

    specs: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    combos: Tuple[ModelComboConfig, ...] = ()

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], path: str = "grid") -> "GridConfig":
        _check_keys(raw, ("specs", "combos"), path)
        specs = raw.get("specs", {})
        if not isinstance(specs, dict):
            raise ConfigError(f"{path}.specs: expected an object of named regressor specs")
        combos = tuple(ModelComboConfig.from_dict(c, f"{path}.combos[{k}]")
                       for k, c in enumerate(raw.get("combos", [])))
        config = cls(specs=dict(specs), combos=combos)
        config.build()
        return config

    def build(self) -> List[ModelCombo]:
        specs = {}
        for name, raw in self.specs.items():
            specs[name] = RegressorSpec.from_dict(raw, name=name)

        def lookup(name: str, where: str) -> RegressorSpec:
            if name not in specs:
                raise ConfigError(f"{where}: unknown spec '{name}'; defined specs are {sorted(specs)}")
            return specs[name]

        grid = []
        for k, combo in enumerate(self.combos):
            where = f"grid.combos[{k}]"
            try:
                link, or_form = Link(combo.link), OrForm(combo.or_form)
            except ValueError as e:
                raise ConfigError(f"{where}: {e}") from e
            c_spec = None
            if combo.c_spec is not None:
                targets = tuple(lookup(name, f"{where}.c_spec") for name in combo.c_spec)
                c_spec = targets[0] if len(targets) == 1 else targets
            grid.append(ModelCombo(ps=lookup(combo.ps, f"{where}.ps"),
                                   outcome=lookup(combo.outcome, f"{where}.outcome"),
                                   link=link, or_form=or_form, c_spec=c_spec))
        return grid


def _schema(raw: Union[str, Dict[str, Any], None], path: str) -> Optional[CSVSchema]:
    if raw is None:
        return None
    if raw == "lalonde":
        return LALONDE_SCHEMA
    if isinstance(raw, str):
        raise ConfigError(f"{path}: unknown schema preset '{raw}'")
    _check_keys(raw, ("outcome", "treatment", "covariates", "source"), path)
    if "outcome" not in raw or "treatment" not in raw:
        raise ConfigError(f"{path}: 'outcome' and 'treatment' columns are required")
    return CSVSchema.from_dict(raw)


@dataclass(frozen=True)
class DataConfig:
    """One CSV file for the estimate command"""

    path: str
    schema: CSVSchema

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], base: Optional[Path], path: str = "data") -> "DataConfig":
        _check_keys(raw, ("path", "schema"), path)
        if "path" not in raw or "schema" not in raw:
            raise ConfigError(f"{path}: 'path' and 'schema' are required")
        return cls(path=_resolve(raw["path"], base), schema=_schema(raw["schema"], f"{path}.schema"))


@dataclass(frozen=True)
class BootstrapDataConfig:
    """Experimental and comparison files plus the resampling settings"""

    experimental: str
    comparison: str
    schema: CSVSchema = LALONDE_SCHEMA
    resamples: int = 200
    pca_ratio: Optional[float] = None
    pca_standardize: bool = False
    benchmark: Optional[Tuple[float, float]] = None

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], base: Optional[Path],
                  path: str = "bootstrap") -> "BootstrapDataConfig":
        _check_keys(raw, ("experimental", "comparison", "schema", "resamples", "pca_ratio",
                          "pca_standardize", "benchmark"), path)
        if "experimental" not in raw or "comparison" not in raw:
            raise ConfigError(f"{path}: 'experimental' and 'comparison' files are required")
        benchmark = raw.get("benchmark")
        if benchmark is not None:
            if len(benchmark) != 2:
                raise ConfigError(f"{path}.benchmark: expected [estimate, standard error]")
            benchmark = (float(benchmark[0]), float(benchmark[1]))
        return cls(experimental=_resolve(raw["experimental"], base),
                   comparison=_resolve(raw["comparison"], base),
                   schema=_schema(raw.get("schema", "lalonde"), f"{path}.schema"),
                   resamples=int(raw.get("resamples", cls.resamples)),
                   pca_ratio=raw.get("pca_ratio"),
                   pca_standardize=bool(raw.get("pca_standardize", False)),
                   benchmark=benchmark)


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "results"
    format: str = "csv"
    long: bool = False
    boxplot_limits: Optional[Tuple[float, float]] = None

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], base: Optional[Path], path: str = "output") -> "OutputConfig":
        _check_keys(raw, ("dir", "format", "long", "boxplot_limits"), path)
        limits = raw.get("boxplot_limits")
        return cls(dir=_resolve(raw["dir"], base) if "dir" in raw else cls.dir, format=raw.get("format", cls.format),
                   long=bool(raw.get("long", False)),
                   boxplot_limits=None if limits is None else (float(limits[0]), float(limits[1])))


@dataclass(frozen=True)
class RunConfig:
    """Everything one command run needs; validated before any computation"""

    command: str
    seed: int = 0
    workers: int = field(default_factory=default_workers)
    estimators: Tuple[str, ...] = DEFAULT_ESTIMATORS
    preset: Optional[str] = None
    replicates: Optional[int] = None
    designs: Tuple[DesignConfig, ...] = ()
    grid: Optional[GridConfig] = None
    data: Optional[DataConfig] = None
    bootstrap: Optional[BootstrapDataConfig] = None
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def simulation_designs(self) -> List[SimDesign]:
        if self.designs:
            return [d.to_design() for d in self.designs]
        return list(preset(self.preset).designs)

    def simulation_replicates(self) -> int:
        if self.replicates is not None:
            return self.replicates
        return preset(self.preset).replicates

    def model_grid(self) -> Optional[List[ModelCombo]]:
        """The configured grid; the LaLonde grid for the LaLonde schema; None otherwise"""
        if self.grid is not None:
            return self.grid.build()
        schema = (self.bootstrap.schema if self.bootstrap is not None
                  else self.data.schema if self.data is not None else None)
        if schema == LALONDE_SCHEMA:
            return lalonde_grid()
        return None


_RUN_KEYS = ("command", "seed", "workers", "estimators", "preset", "replicates", "designs", "grid",
             "data", "bootstrap", "output")


def parse_config(raw: Dict[str, Any], command: Optional[str] = None,
                 base: Optional[Path] = None) -> RunConfig:
    """Build a RunConfig from a decoded JSON object; relative paths resolve against base"""
    _check_keys(raw, _RUN_KEYS, "")
    declared = raw.get("command")
    if command and declared and declared != command:
        raise ConfigError(f"Config is for '{declared}' but '{command}' was requested")
    command = command or declared
    if command is None:
        raise ConfigError("No command given")
    try:
        return RunConfig(
            command=command,
            seed=int(raw.get("seed", 0)),
            workers=int(raw["workers"]) if "workers" in raw else default_workers(),
            estimators=tuple(raw.get("estimators", DEFAULT_ESTIMATORS)),
            preset=raw.get("preset"),
            replicates=None if raw.get("replicates") is None else int(raw["replicates"]),
            designs=tuple(DesignConfig.from_dict(d, f"designs[{k}]")
                          for k, d in enumerate(raw.get("designs", []))),
            grid=GridConfig.from_dict(raw["grid"]) if "grid" in raw else None,
            data=DataConfig.from_dict(raw["data"], base) if "data" in raw else None,
            bootstrap=(BootstrapDataConfig.from_dict(raw["bootstrap"], base)
                       if "bootstrap" in raw else None),
            output=OutputConfig.from_dict(raw.get("output", {}), base))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid config value: {e}") from e


def load_config(path: Union[str, Path], command: Optional[str] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return parse_config(raw, command, base=path.parent)


def apply_overrides(config: RunConfig, seed: Optional[int] = None, workers: Optional[int] = None,
                    out: Optional[str] = None, fmt: Optional[str] = None, replicates: Optional[int] = None,
                    preset_name: Optional[str] = None, long: Optional[bool] = None) -> RunConfig:
    """Command-line flags take precedence over config fields"""
    changes: Dict[str, Any] = {}
    if seed is not None:
        changes["seed"] = seed
    if workers is not None:
        changes["workers"] = workers
    if replicates is not None:
        changes["replicates"] = replicates
    if preset_name is not None:
        changes["preset"] = preset_name
        changes["designs"] = ()
    output = {}
    if out is not None:
        output["dir"] = out
    if fmt is not None:
        output["format"] = fmt
    if long:
        output["long"] = True
    if output:
        changes["output"] = replace(config.output, **output)
    return replace(config, **changes)


def validate(config: RunConfig) -> RunConfig:
    """Reject anything that would fail part-way through a run"""
    if config.command not in COMMANDS:
        raise ConfigError(f"Unknown command '{config.command}'; choose from {list(COMMANDS)}")
    validate_estimators(config.estimators)
    if config.workers < 1:
        raise ConfigError(f"workers must be at least 1, got {config.workers}")
    if config.output.format not in FORMATS:
        raise ConfigError(f"output.format must be one of {list(FORMATS)}, got '{config.output.format}'")
    if config.grid is not None and not config.grid.combos:
        raise ConfigError("grid.combos is empty")

    if config.command == "simulate":
        if not config.designs and config.preset is None:
            raise ConfigError("simulate needs 'designs' or a preset")
        if config.preset is not None:
            preset(config.preset)
        if config.simulation_replicates() < 1:
            raise ConfigError(f"replicates must be at least 1, got {config.simulation_replicates()}")
    elif config.command == "estimate":
        if config.data is None:
            raise ConfigError("estimate needs a 'data' section")
        if config.model_grid() is None:
            raise ConfigError("estimate needs a 'grid' section")
    else:
        if config.bootstrap is None:
            raise ConfigError("bootstrap needs a 'bootstrap' section")
        if config.bootstrap.resamples < 1:
            raise ConfigError(f"bootstrap.resamples must be at least 1, got {config.bootstrap.resamples}")
        ratio = config.bootstrap.pca_ratio
        if ratio is not None and not 0 < ratio < 1:
            raise ConfigError(f"bootstrap.pca_ratio must lie in (0, 1), got {ratio}")
        if config.model_grid() is None:
            raise ConfigError("bootstrap needs a 'grid' section")
    return config
