"""Simulator settings and environment variables."""

import os
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional, Sequence

POLICY_CHOICES = ("coexist", "rbf", "rbf-replace")


class Settings:
    """Global settings for the snipesim CLI."""

    def __init__(self) -> None:
        """Initialize settings from environment variables."""
        # Load .env file first so it can fill unset variables
        self._load_env_file()

        # Scenario overrides
        self.seed = self._int_env("SNIPESIM_SEED")
        self.policy = self._choice_env("SNIPESIM_POLICY", POLICY_CHOICES)

        # Chain and relay defaults
        self.min_relay_fee_rate = self._decimal_env("SNIPESIM_MIN_RELAY_FEE_RATE", Decimal(1))
        self.coinbase_reward = self._int_env("SNIPESIM_COINBASE_REWARD") or 5_000_000_000
        self.max_block_vbytes = self._int_env("SNIPESIM_MAX_BLOCK_VBYTES") or 1_000_000

        # Where saved reports go
        self.report_dir = os.path.expanduser(os.getenv("SNIPESIM_REPORT_DIR", "~/.snipesim/reports"))

        # Debug mode
        self.debug = os.getenv("SNIPESIM_DEBUG", "false").lower() in ("true", "1", "yes")

    def _load_env_file(self) -> None:
        """Load .env file if it exists."""
        env_file = Path.cwd() / ".env"
        if env_file.exists():
            try:
                with open(env_file) as f:
                    for line in f:
                        line = line.strip()
                        if line and not line.startswith("#") and "=" in line:
                            key, value = line.split("=", 1)
                            key = key.strip()
                            value = value.strip().strip('"').strip("'")
                            if key and not os.getenv(key):
                                os.environ[key] = value
            except Exception:
                pass  # Silently ignore .env file errors

    @staticmethod
    def _int_env(name: str) -> Optional[int]:
        value = os.getenv(name, "").strip()
        if not value:
            return None
        try:
            return int(value)
        except ValueError:
            return None

    @staticmethod
    def _choice_env(name: str, choices: Sequence[str]) -> Optional[str]:
        value = os.getenv(name, "").strip().lower()
        return value if value in choices else None

    @staticmethod
    def _decimal_env(name: str, default: Decimal) -> Decimal:
        value = os.getenv(name, "").strip()
        if not value:
            return default
        try:
            parsed = Decimal(value)
        except InvalidOperation:
            return default
        return parsed if parsed >= 0 else default

    @property
    def has_seed_override(self) -> bool:
        """Check if a seed is forced from the environment."""
        return self.seed is not None


# Global settings instance
settings = Settings()
