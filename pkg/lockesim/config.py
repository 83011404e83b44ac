# lockesim Configuration
# Version 1.0.0
from dataclasses import dataclass, fields, replace
from pathlib import Path

from lockesim.core.errors import ConfigError
from lockesim.core.protocol import TableMode

# ==================== PROTOCOL SIZING ====================
N_L1 = 4
MIN_TOKENS = 2           # T below 2 cannot tell readers from writers
INITIAL_VALUE = 0        # data word of every block before any store
ADDRESS_SPACE = 64       # block addresses are 0 .. ADDRESS_SPACE-1

# ==================== CACHE GEOMETRY ====================
L1_SETS = 2
L1_WAYS = 2
L2_SETS = 16
L2_WAYS = 8              # L2 must cover every block a workload touches

# ==================== TABLES ====================
DEFAULT_MODE = TableMode.ERRATA

# ==================== NETWORK ====================
DEFAULT_POLICY = "random"          # fifo, random, adversarial
DEFAULT_SEED = 0
BACKOFF_DELAY = 10                 # delivery steps before a LATER retry re-broadcasts
REISSUE_ON_QUIESCENCE = True
REISSUE_TIMEOUT = 200              # steps a request may go unanswered under traffic; 0 waits for quiescence
FOLD_REQUESTS = True              # an identical control message already in flight absorbs a new copy

# ==================== CHECKER ====================
PROGRESS_BOUND = 10_000            # K: delivery steps an op may stay pending
LOG_EXCERPT = 50                   # log records attached to a violation report

# ==================== FUZZING ====================
FUZZ_BLOCKS = 4
FUZZ_MAX_VALUE = 255
FUZZ_STORE_RATIO = 0.5
FUZZ_OPS = 10_000
FUZZ_SEEDS = 20
DEFAULT_WORKERS = 4

# ==================== EXPLORER ====================
EXPLORE_DEPTH = 40
EXPLORE_MAX_STATES = 200_000
EXPLORE_N_L1 = 2
EXPLORE_TOKENS = 2

# ==================== STORAGE ====================
ARTIFACT_DIR = "lockesim-artifacts"

# ==================== DISPLAY ====================
MSC_COLUMN_WIDTH = 8

# ==================== LOGGING ====================
LOG_LEVEL = "WARNING"  # DEBUG, INFO, WARNING, ERROR
LOG_FILE = "lockesim.log"
LOG_TO_FILE = False

# ==================== VERSION ====================
VERSION = "1.0.0"
APP_NAME = "lockesim"

POLICIES = ("fifo", "random", "adversarial")
FLAGS = ("reissue_on_quiescence", "fold_requests")


@dataclass(frozen=True)
class SimConfig:
    """Per-run settings; defaults come from the module constants above"""
    n_l1: int = N_L1
    tokens: int = 0                    # 0 means "one token per L1"
    l1_sets: int = L1_SETS
    l1_ways: int = L1_WAYS
    l2_sets: int = L2_SETS
    l2_ways: int = L2_WAYS
    mode: TableMode = DEFAULT_MODE
    policy: str = DEFAULT_POLICY
    seed: int = DEFAULT_SEED
    progress_bound: int = PROGRESS_BOUND
    backoff_delay: int = BACKOFF_DELAY
    reissue_on_quiescence: bool = REISSUE_ON_QUIESCENCE
    reissue_timeout: int = REISSUE_TIMEOUT
    fold_requests: bool = FOLD_REQUESTS
    initial_value: int = INITIAL_VALUE
    address_space: int = ADDRESS_SPACE

    def __post_init__(self):
        if self.tokens == 0:
            object.__setattr__(self, "tokens", max(self.n_l1, MIN_TOKENS))

    @property
    def total_tokens(self) -> int:
        return self.tokens

    def validate(self) -> "SimConfig":
        if self.n_l1 < 1:
            raise ConfigError("n_l1 must be at least 1")
        if self.tokens < MIN_TOKENS:
            raise ConfigError(f"tokens must be at least {MIN_TOKENS}")
        for name in ("l1_sets", "l1_ways", "l2_sets", "l2_ways", "progress_bound", "address_space"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("backoff_delay", "reissue_timeout"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must not be negative")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy '{self.policy}' (expected one of {', '.join(POLICIES)})")
        return self

    def with_overrides(self, **overrides) -> "SimConfig":
        """Copy with every non-None override applied"""
        changes = {k: v for k, v in overrides.items() if v is not None}
        if "n_l1" in changes and "tokens" not in changes:
            changes["tokens"] = 0
        return replace(self, **changes).validate()

    @classmethod
    def from_text(cls, text: str) -> "SimConfig":
        """Parse flat key=value lines; '#' starts a comment"""
        known = {f.name: f for f in fields(cls)}
        values = {}
        for line_no, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (p.strip() for p in line.partition("="))
            if not sep or not key:
                raise ConfigError(f"expected key=value at line {line_no}")
            if key not in known:
                raise ConfigError(f"unknown key '{key}' at line {line_no}")
            values[key] = _coerce(key, value, line_no)
        return cls(**values).validate()

    @classmethod
    def from_file(cls, path) -> "SimConfig":
        try:
            return cls.from_text(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, TableMode):
                value = value.value
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


def _coerce(key: str, value: str, line_no: int):
    try:
        if key == "mode":
            return TableMode(value.lower())
        if key == "policy":
            return value.lower()
        if key in FLAGS:
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("true", "1", "yes")
        return int(value)
    except ValueError:
        raise ConfigError(f"bad value '{value}' for {key} at line {line_no}") from None


def load_config(path=None, **overrides) -> SimConfig:
    """Defaults, then the config file if given, then every non-None override"""
    base = SimConfig.from_file(path) if path else SimConfig()
    return base.with_overrides(**overrides)
