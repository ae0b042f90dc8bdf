import math
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict

import msgspec
import orjson
from dynaconf import Dynaconf

from ntuple2048.constants import (
    HORIZON_CUTOFF,
    MAX_STAGE_BITS,
    SearchMode,
    UpdateRule,
    get_default_out_dir,
)
from ntuple2048.error import ConfigurationError
from ntuple2048.ntuple.shape import DEFAULT_ARCHITECTURE, get_architecture


def horizon(lam: float) -> int:
    """
    Number of earlier afterstates an update still reaches,
    ``ceil(log_lam 0.1) - 1``: the largest ``h`` with ``lam**h > 0.1``.
    """
    if lam == 1.0:
        raise ConfigurationError("lambda = 1 has an unbounded horizon")
    if not 0.0 <= lam < 1.0:
        raise ConfigurationError(f"lambda must be in [0, 1), got {lam}")
    if lam == 0.0:
        return 0
    return math.ceil(math.log(HORIZON_CUTOFF) / math.log(lam)) - 1


@dataclass
class LearningConfig:
    """Update rule and its hyper-parameters.

    Attributes:
        rule: TD, TC or AUTOSTEP
        delayed: apply each afterstate's update once, ``h`` steps late
        lam: trace decay, AUTOSTEP requires 0
        alpha: TD step size
        beta: TC meta step size
        mu: Autostep meta step size
        tau: Autostep normalizer decay
        alpha_init: initial Autostep step size
        stage_bits: ``g``, the network has ``2**g`` stages
        weight_promotion: initialize untouched stage weights from the previous stage
        carousel: start episodes from recorded stage-initial afterstates
    """

    rule: UpdateRule = UpdateRule.TC
    delayed: bool = True
    lam: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0
    mu: float = 0.1
    tau: float = 0.0001
    alpha_init: float = 1.0
    stage_bits: int = 0
    weight_promotion: bool = False
    carousel: bool = False

    def __post_init__(self):
        if isinstance(self.rule, str):
            self.rule = UpdateRule(self.rule.lower())
        horizon(self.lam)
        if self.rule == UpdateRule.AUTOSTEP and self.lam != 0.0:
            raise ConfigurationError("autostep requires lambda = 0")
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1], got {value}")
        if self.mu < 0.0 or self.tau < 0.0 or self.alpha_init <= 0.0:
            raise ConfigurationError(
                f"autostep needs mu >= 0, tau >= 0, alpha_init > 0 "
                f"(got {self.mu}, {self.tau}, {self.alpha_init})"
            )
        if not 0 <= self.stage_bits <= MAX_STAGE_BITS:
            raise ConfigurationError(
                f"stage bits must be in [0, {MAX_STAGE_BITS}], got {self.stage_bits}"
            )
        if self.weight_promotion and self.stage_bits == 0:
            raise ConfigurationError("weight promotion needs more than one stage")

    @property
    def horizon(self) -> int:
        return horizon(self.lam)

    @property
    def step_size(self) -> float:
        """Rate multiplying the prediction error before view normalization."""
        return self.beta if self.rule == UpdateRule.TC else self.alpha

    def describe(self) -> str:
        if self.rule == UpdateRule.AUTOSTEP:
            return f"autostep(mu={self.mu}, tau={self.tau}, alpha_init={self.alpha_init})"
        prefix = "delayed-" if self.delayed else ""
        rate = "beta" if self.rule == UpdateRule.TC else "alpha"
        return f"{prefix}{self.rule.name}({self.lam}) {rate}={self.step_size}"


@dataclass
class TrainBudget:
    total_actions: int = 10**8
    eval_every: int = 10**7
    eval_games_1ply: int = 1000
    eval_games_3ply: int = 300
    workers: int = 1

    def __post_init__(self):
        if self.total_actions < 0:
            raise ConfigurationError(f"total_actions must be >= 0, got {self.total_actions}")
        if self.eval_every < 1:
            raise ConfigurationError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.eval_games_1ply < 0 or self.eval_games_3ply < 0:
            raise ConfigurationError("evaluation game counts must be >= 0")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class SearchLimit:
    """Per-move search budget: a fixed depth in plies or a time budget in ms."""

    mode: SearchMode = SearchMode.DEPTH
    depth: int = 1
    time_budget_ms: float = 0.0
    tt_bits: int = 20

    def __post_init__(self):
        if self.mode == SearchMode.DEPTH and self.depth < 1:
            raise ConfigurationError(f"search depth must be >= 1, got {self.depth}")
        if self.mode == SearchMode.TIME and self.time_budget_ms <= 0.0:
            raise ConfigurationError(
                f"time budget must be > 0 ms, got {self.time_budget_ms}"
            )
        if not 0 <= self.tt_bits <= 30:
            raise ConfigurationError(f"tt_bits must be in [0, 30], got {self.tt_bits}")

    @classmethod
    def plies(cls, depth: int, tt_bits: int = 20) -> "SearchLimit":
        return cls(SearchMode.DEPTH, depth=depth, tt_bits=tt_bits)

    @classmethod
    def millis(cls, budget_ms: float, tt_bits: int = 20) -> "SearchLimit":
        return cls(SearchMode.TIME, time_budget_ms=budget_ms, tt_bits=tt_bits)

    @property
    def is_greedy(self) -> bool:
        return self.mode == SearchMode.DEPTH and self.depth == 1

    def __str__(self) -> str:
        if self.mode == SearchMode.DEPTH:
            return f"{self.depth}-ply"
        return f"{self.time_budget_ms:g}ms"


# flat file key -> (section, attribute)
_FLAT_KEYS: Dict[str, tuple] = {
    "arch": (None, "arch"),
    "seed": (None, "seed"),
    "out_dir": (None, "out_dir"),
    "rule": ("learning", "rule"),
    "delayed": ("learning", "delayed"),
    "lambda": ("learning", "lam"),
    "alpha": ("learning", "alpha"),
    "beta": ("learning", "beta"),
    "mu": ("learning", "mu"),
    "tau": ("learning", "tau"),
    "alpha_init": ("learning", "alpha_init"),
    "stages": ("learning", "stage_bits"),
    "weight_promotion": ("learning", "weight_promotion"),
    "carousel": ("learning", "carousel"),
    "total_actions": ("budget", "total_actions"),
    "eval_every": ("budget", "eval_every"),
    "eval_games_1ply": ("budget", "eval_games_1ply"),
    "eval_games_3ply": ("budget", "eval_games_3ply"),
    "workers": ("budget", "workers"),
}

# environment-only settings that share the NTUPLE2048_ prefix
_AMBIENT_KEYS = {"log_dir"}


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (UpdateRule, SearchMode)):
        value = value.value
    if isinstance(value, str):
        return orjson.dumps(value).decode()
    return repr(value)


@dataclass
class RunConfig:
    arch: str = DEFAULT_ARCHITECTURE
    learning: LearningConfig = field(default_factory=LearningConfig)
    budget: TrainBudget = field(default_factory=TrainBudget)
    seed: int = 0
    out_dir: str | None = None

    def __post_init__(self):
        get_architecture(self.arch)
        if self.out_dir is None:
            self.out_dir = get_default_out_dir()

    def to_flat(self) -> Dict[str, Any]:
        sections = {
            None: self,
            "learning": self.learning,
            "budget": self.budget,
        }
        return {
            key: getattr(sections[section], attr)
            for key, (section, attr) in _FLAT_KEYS.items()
        }

    @classmethod
    def from_flat(cls, flat: Dict[str, Any]) -> "RunConfig":
        nested: Dict[Any, Dict[str, Any]] = {None: {}, "learning": {}, "budget": {}}
        for key, value in flat.items():
            key = key.lower()
            if key not in _FLAT_KEYS:
                raise ConfigurationError(f"unknown config key {key!r}")
            section, attr = _FLAT_KEYS[key]
            if isinstance(value, Enum):
                value = value.value
            if attr == "rule" and isinstance(value, str):
                value = value.lower()
            nested[section][attr] = value
        if nested["learning"].get("rule") == UpdateRule.AUTOSTEP.value:
            nested["learning"].setdefault("lam", 0.0)
        try:
            learning = msgspec.convert(nested["learning"], LearningConfig, strict=False)
            budget = msgspec.convert(nested["budget"], TrainBudget, strict=False)
        except msgspec.ValidationError as e:
            raise ConfigurationError(f"invalid config value: {e}")
        top = nested[None]
        return cls(
            arch=str(top.get("arch", DEFAULT_ARCHITECTURE)),
            learning=learning,
            budget=budget,
            seed=int(top.get("seed", 0)),
            out_dir=top.get("out_dir"),
        )

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "RunConfig":
        """
        Load a flat ``key = value`` file. ``NTUPLE2048_<KEY>`` environment
        variables override values from the file.
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        loaded = Dynaconf(
            envvar_prefix="NTUPLE2048",
            settings_files=[str(path)],
            environments=False,
        )
        flat = {
            k.lower(): v
            for k, v in loaded.as_dict().items()
            if k.lower() not in _AMBIENT_KEYS
        }
        return cls.from_flat(flat)

    def to_file(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        lines = [
            f"{key} = {_toml_value(value)}"
            for key, value in self.to_flat().items()
            if value is not None
        ]
        path.write_text("\n".join(lines) + "\n")
        return path

    def override(self, **flat: Any) -> "RunConfig":
        """Copy with flat keys replaced; ``None`` values are ignored."""
        merged = self.to_flat()
        merged.update({k: v for k, v in flat.items() if v is not None})
        return RunConfig.from_flat(merged)

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["learning"]["rule"] = self.learning.rule.value
        return data


