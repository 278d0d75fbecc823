"""
Configuration settings for the DEAL thermal enhancement toolkit.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from dotenv import load_dotenv

from degradation.bank import SeverityBank
from losses.objectives import LossWeights
from utils.errors import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)


class Config:
    """Configuration class for environment variables and constants."""

    # Environment variables
    LOG_LEVEL: str = os.getenv('DEAL_LOG_LEVEL', 'INFO').upper()
    DEFAULT_SEED: int = int(os.getenv('DEAL_SEED', 0))
    OUTPUT_DIR: str = os.getenv('DEAL_OUTPUT_DIR', 'runs')
    SHOW_PROGRESS: bool = os.getenv('DEAL_PROGRESS', '1').lower() not in ('0', 'false', 'no')

    # Optimization
    GAMMA_E: float = 1e-4
    GAMMA_G: float = 2e-4
    TOTAL_EPOCHS: int = 30
    BATCH_SIZE: int = 4
    COMPOSE_STEPS: int = 2
    ASCENT_EVERY: int = 1
    WARM_FRACTION: float = 0.05
    LAMBDA_REG: float = 0.1

    # Divergence guard: loss above FACTOR x initial for PATIENCE epochs
    DIVERGENCE_FACTOR: float = 10.0
    DIVERGENCE_PATIENCE: int = 3

    # Enhancer
    WIDTH: int = 16
    TIME_STEPS: int = 4
    LIF_TAU: float = 0.5
    LIF_V_TH: float = 1.0

    # Console output
    PROGRESS_BAR_LENGTH: int = 20

    STRATEGIES: Tuple[str, ...] = ('proposed', 'average', 'all')

    # Held-out corruption used by the ablations and the toy acceptance run
    ABLATION_SPECS: Dict[str, str] = {
        'stripe': 'stripe:0.15',
        'lowres': 'lowres:2',
        'contrast': 'contrast:0.5:1.2',
        'composite': 'stripe:0.15+lowres:2',
    }
    DATA_USAGE_SPEC: str = 'stripe:0.15'
    DATA_USAGE_SIZES: Tuple[int, ...] = (10, 20, 50)

    # Synthetic scenes
    SYNTH_SIZE: int = 64
    SYNTH_COUNT: int = 50

    @classmethod
    def validate_log_level(cls) -> None:
        """Validate that the configured log level is a known logging level."""
        if not isinstance(logging.getLevelName(cls.LOG_LEVEL), int):
            raise ValueError(f"DEAL_LOG_LEVEL must be a logging level name, got {cls.LOG_LEVEL!r}")


# Global config instance
config = Config()


@dataclass
class TrainConfig:
    """Hyperparameters of one adversarial training run."""

    gamma_e: float = Config.GAMMA_E
    gamma_g: float = Config.GAMMA_G
    warm_epochs: Optional[int] = None
    total_epochs: int = Config.TOTAL_EPOCHS
    batch_size: int = Config.BATCH_SIZE
    steps: int = Config.COMPOSE_STEPS
    ascent_every: int = Config.ASCENT_EVERY
    seed: int = Config.DEFAULT_SEED
    strategy: str = 'proposed'
    lambda_reg: float = Config.LAMBDA_REG
    divergence_factor: float = Config.DIVERGENCE_FACTOR
    divergence_patience: int = Config.DIVERGENCE_PATIENCE
    train_subset: Optional[int] = None
    loss_weights: LossWeights = field(default_factory=LossWeights)
    bank: SeverityBank = field(default_factory=SeverityBank)
    width: int = Config.WIDTH
    time_steps: int = Config.TIME_STEPS
    tau: float = Config.LIF_TAU
    v_th: float = Config.LIF_V_TH

    @property
    def resolved_warm_epochs(self) -> int:
        if self.warm_epochs is not None:
            return self.warm_epochs
        return min(self.total_epochs, max(1, int(Config.WARM_FRACTION * self.total_epochs)))

    def validate(self) -> None:
        if self.gamma_e < 0 or self.gamma_g < 0:
            raise ConfigError(f"learning rates must be non-negative, got {self.gamma_e} / {self.gamma_g}")
        if self.total_epochs < 0:
            raise ConfigError(f"total_epochs must be non-negative, got {self.total_epochs}")
        if self.warm_epochs is not None and not 0 <= self.warm_epochs <= self.total_epochs:
            raise ConfigError(f"warm_epochs must lie in [0, total_epochs], got {self.warm_epochs}")
        if self.batch_size < 1 or self.steps < 1 or self.ascent_every < 1:
            raise ConfigError("batch_size, steps and ascent_every must be at least 1")
        if self.strategy not in Config.STRATEGIES:
            raise ConfigError(f"strategy must be one of {Config.STRATEGIES}, got {self.strategy!r}")
        if self.lambda_reg < 0:
            raise ConfigError(f"lambda_reg must be non-negative, got {self.lambda_reg}")
        if self.train_subset is not None and self.train_subset < 1:
            raise ConfigError(f"train_subset must be positive, got {self.train_subset}")
        if self.divergence_factor <= 1 or self.divergence_patience < 1:
            raise ConfigError("divergence guard needs factor > 1 and patience >= 1")
        if self.width < 1 or self.time_steps < 1:
            raise ConfigError("width and time_steps must be at least 1")
        if not 0 < self.tau < 1 or self.v_th <= 0:
            raise ConfigError(f"LIF constants out of range: tau={self.tau}, v_th={self.v_th}")

    def to_text(self) -> str:
        """Render as a config file that `parse_train_config` reads back to an equal object."""
        lines = ['[train]']
        for name in _SECTIONS['train']:
            value = getattr(self, name)
            if value is not None:
                lines.append(f"{name} = {value!r}" if isinstance(value, float) else f"{name} = {value}")
        lines += ['', '[loss]', f"alpha = {self.loss_weights.alpha!r}", f"beta = {self.loss_weights.beta!r}", '']
        lines.append(self.bank.to_section().rstrip('\n'))
        lines += ['', '[network]']
        for name in _SECTIONS['network']:
            value = getattr(self, name)
            lines.append(f"{name} = {value!r}" if isinstance(value, float) else f"{name} = {value}")
        return '\n'.join(lines) + '\n'


_INT_KEYS = {'warm_epochs', 'total_epochs', 'batch_size', 'steps', 'ascent_every', 'seed',
             'divergence_patience', 'train_subset', 'width', 'time_steps'}
_STR_KEYS = {'strategy'}

_SECTIONS = {
    'train': ('gamma_e', 'gamma_g', 'warm_epochs', 'total_epochs', 'batch_size', 'steps', 'ascent_every',
              'seed', 'strategy', 'lambda_reg', 'divergence_factor', 'divergence_patience', 'train_subset'),
    'loss': ('alpha', 'beta'),
    'bank': ('stripe', 'lowres', 'contrast'),
    'network': ('width', 'time_steps', 'tau', 'v_th'),
}


def parse_train_config(text: str, source: str = '<string>') -> TrainConfig:
    """
    Parse `[section]` / `key = value` text into a validated TrainConfig.

    Unknown sections or keys fail with the offending line number.
    """
    section: Optional[str] = None
    values: Dict[str, Dict[str, Tuple[str, int]]] = {name: {} for name in _SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].split(';', 1)[0].strip()
        if not line:
            continue
        if line.startswith('[') and line.endswith(']'):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if '=' not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"{source}:{lineno}: key outside of any section")
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in _SECTIONS[section]:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} in [{section}]")
        values[section][key] = (value, lineno)

    kwargs = {}
    for key, (value, lineno) in {**values['train'], **values['network']}.items():
        kwargs[key] = _convert(key, value, source, lineno)
    try:
        if values['loss']:
            loss = {k: float(v) for k, (v, _) in values['loss'].items()}
            kwargs['loss_weights'] = LossWeights(**loss)
        if values['bank']:
            kwargs['bank'] = SeverityBank.from_section({k: v for k, (v, _) in values['bank'].items()})
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    cfg = TrainConfig(**kwargs)
    cfg.validate()
    return cfg


def load_train_config(path: Optional[str]) -> TrainConfig:
    """Read a config file; `None` gives the defaults."""
    if path is None:
        cfg = TrainConfig()
        cfg.validate()
        return cfg
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    logger.info(f"Loaded training config from {path}")
    return parse_train_config(text, source=path)


def _convert(key: str, value: str, source: str, lineno: int):
    try:
        if key in _STR_KEYS:
            return value.strip().lower()
        if value.lower() in ('none', ''):
            if key in ('warm_epochs', 'train_subset'):
                return None
            raise ValueError('a value is required')
        if key in _INT_KEYS:
            return int(value)
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc

