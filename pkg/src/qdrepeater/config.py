"""Sectioned key-value configuration for the command-line runs.

Every physical quantity carries its unit in the key name.  Files are read
with :mod:`configparser`; ``section.key=value`` overrides are applied on top
and the fully resolved configuration can be echoed back.
"""
import configparser
import dataclasses
import math
import typing
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


@dataclass
class RunSection:
    master_seed: typing.Optional[int] = None
    workers: int = 1
    replicas: int = 8
    format: str = "json"
    min_deliveries: int = 10


@dataclass
class RateTableSection:
    r0_hz: float = 1e6
    alpha_db_per_km: typing.Optional[float] = 0.17
    lengths_per_arm_km: typing.Tuple[float, ...] = (0.0, 10.0, 100.0, 200.0, 300.0)
    detector_efficiency: float = 1.0


@dataclass
class LinkSection:
    length_km: float = 0.0
    alpha_db_per_km: float = 0.17
    n_core: float = 1.468
    source_rate_hz: float = 1e6
    detector_efficiency: float = 1.0
    dark_count_prob: float = 0.0
    p_success: typing.Optional[float] = 0.02


@dataclass
class MemorySection:
    t2_us: float = math.inf
    t1_us: float = math.inf
    local_op_us: float = 0.0
    swap_depolarizing: float = 0.0


@dataclass
class TwoLinkSection:
    max_rounds: int = 10_000_000
    memoryless: bool = False
    track_fidelity: bool = False


@dataclass
class ChainSection:
    n_nodes: int = 5
    heralded: bool = True
    protocol: str = "stop-on-success"
    max_rounds: int = 1_000_000
    track_fidelity: bool = False


@dataclass
class TomographySection:
    preset: str = "ideal"
    depolarizing_prob: typing.Optional[float] = None
    detection_window_ps: typing.Optional[float] = None
    background_prob: typing.Optional[float] = None
    init_fidelity: typing.Optional[float] = None
    shots_per_setting: typing.Optional[int] = None
    settings: typing.Tuple[str, ...] = ("ZZ", "ZX", "ZY", "XZ", "XX", "XY", "YZ", "YX", "YY")
    n_resamples: int = 300
    histogram_bins: int = 20
    analytic: bool = False


@dataclass
class ExperimentConfig:
    run: RunSection = field(default_factory=RunSection)
    rate_table: RateTableSection = field(default_factory=RateTableSection)
    link: LinkSection = field(default_factory=LinkSection)
    memory: MemorySection = field(default_factory=MemorySection)
    two_link: TwoLinkSection = field(default_factory=TwoLinkSection)
    chain: ChainSection = field(default_factory=ChainSection)
    tomography: TomographySection = field(default_factory=TomographySection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_ini(self) -> str:
        lines = []
        for sec in dataclasses.fields(self):
            lines.append(f"[{sec.name}]")
            for f in dataclasses.fields(getattr(self, sec.name)):
                lines.append(f"{f.name} = {_format_value(getattr(getattr(self, sec.name), f.name))}")
            lines.append("")
        return "\n".join(lines)


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(text: str, tp, where: str):
    text = text.strip()
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:  # Optional[X]
        if text == "" or text.lower() == "none":
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(text, inner, where)
    if origin is tuple:
        if text == "":
            return ()
        return tuple(_coerce(part, args[0], where) for part in text.split(","))
    try:
        if tp is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if tp is int:
            x = float(text)
            if not x.is_integer():
                raise ValueError(text)
            return int(x)
        if tp is float:
            return float(text)
        if tp is str:
            return text
    except ValueError:
        raise ConfigError(f"{where}: cannot read {text!r} as {tp.__name__}") from None
    raise ConfigError(f"{where}: unsupported field type {tp}")


def _set(cfg: ExperimentConfig, section: str, key: str, text: str) -> None:
    if section not in {f.name for f in dataclasses.fields(cfg)}:
        raise ConfigError(f"unknown section [{section}]")
    sec = getattr(cfg, section)
    hints = typing.get_type_hints(type(sec))
    if key not in hints:
        raise ConfigError(f"unknown key {section}.{key}")
    setattr(sec, key, _coerce(text, hints[key], f"{section}.{key}"))


def load_config(path: str | None = None, overrides: typing.Sequence[str] = ()) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then ``section.key=value`` overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for section in parser.sections():
            for key, value in parser.items(section):
                _set(cfg, section, key, value)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        _set(cfg, section, key, value)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    run = cfg.run
    if run.workers < 1 or run.replicas < 1:
        raise ConfigError("run.workers and run.replicas must be at least 1")
    if run.format not in ("csv", "json"):
        raise ConfigError("run.format must be csv or json")
    if run.master_seed is not None and not 0 <= run.master_seed < 2**64:
        raise ConfigError("run.master_seed must be a 64-bit unsigned integer")
    if cfg.chain.protocol not in ("stop-on-success", "reset-on-full-chain"):
        raise ConfigError("chain.protocol must be stop-on-success or reset-on-full-chain")
    if cfg.chain.n_nodes < 2:
        raise ConfigError("chain.n_nodes must be at least 2")
    if cfg.tomography.preset not in ("ideal", "experiment"):
        raise ConfigError("tomography.preset must be ideal or experiment")
    if cfg.tomography.n_resamples < 0:
        raise ConfigError("tomography.n_resamples must be nonnegative")
