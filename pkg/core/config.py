#core/config.py

"""
Centralized configuration manager for predifix.

Settings resolve as: built-in defaults < environment variables (a local .env is
loaded through python-dotenv) < JSON config file (--config) < command-line flags.

⚠️ WARNING: Do NOT commit your .env (with API keys) to source control.
"""

import json
import logging
import os
from pathlib import Path

from dotenv import load_dotenv

from core.errors import ConfigError
from core.retrieval.conditions import RetrievalConfig
from core.utils.data_sanitizer import mask_sensitive_value

_INT_SETTINGS = (
    "EXAMPLE_CONTEXT", "ALERT_CONTEXT", "MAX_PREDICATE_MATCHES", "MAX_EXAMPLES_PER_SOURCE",
    "LITERAL_TOP_K", "LITERAL_MIN_LEN", "WORKERS", "LLM_RETRIES",
)
_FLOAT_SETTINGS = ("LLM_TIMEOUT",)
_BOOL_SETTINGS = ("SAME_FILE_COND3",)
_LIST_SETTINGS = ("LIBRARY_GLOBS",)
_SECRET_SETTINGS = ("GOOGLE_API_KEY", "PREDIFIX_API_KEY")


class Config:
    """
    Loads settings from the environment (via python-dotenv), an optional JSON
    config file and explicit overrides. Validates numbers and canonicalizes the
    log directory to keep it inside the project.
    """

    def __init__(self, config_file=None, overrides: dict | None = None):
        load_dotenv()  # Load variables from .env into os.environ

        # ── API Keys (environment only) ───────────────────────────────────────
        self.GOOGLE_API_KEY = self._get_env_var("GOOGLE_API_KEY")
        self.PREDIFIX_API_KEY = self._get_env_var("PREDIFIX_API_KEY")

        # ── Retrieval ─────────────────────────────────────────────────────────
        self.EXAMPLE_CONTEXT = self._get_env_var("EXAMPLE_CONTEXT", 3)
        self.ALERT_CONTEXT = self._get_env_var("ALERT_CONTEXT", 10)
        self.MAX_PREDICATE_MATCHES = self._get_env_var("MAX_PREDICATE_MATCHES", 20)
        self.MAX_EXAMPLES_PER_SOURCE = self._get_env_var("MAX_EXAMPLES_PER_SOURCE", 4)
        self.LIBRARY_GLOBS = self._get_env_var("LIBRARY_GLOBS", "")
        self.SAME_FILE_COND3 = self._get_env_var("SAME_FILE_COND3", "false")
        self.LITERAL_TOP_K = self._get_env_var("LITERAL_TOP_K", 3)
        self.LITERAL_MIN_LEN = self._get_env_var("LITERAL_MIN_LEN", 5)
        self.WORKERS = self._get_env_var("WORKERS", 4)

        # ── LLM Backends ──────────────────────────────────────────────────────
        self.BACKEND = self._get_env_var("BACKEND", "mock")
        self.MOCK_CONFIG = self._get_env_var("MOCK_CONFIG")
        self.LLM_URL = self._get_env_var("LLM_URL", "")
        self.LLM_MODEL = self._get_env_var("LLM_MODEL", "gpt-4o")
        self.LLM_TIMEOUT = self._get_env_var("LLM_TIMEOUT", 60)
        self.LLM_RETRIES = self._get_env_var("LLM_RETRIES", 1)
        self.GEMINI_MODEL = self._get_env_var("GEMINI_MODEL", "gemini-2.5-flash")
        self.LANGUAGE = self._get_env_var("LANGUAGE", "MiniLang")
        self.SESSION_LOG = self._get_env_var("SESSION_LOG")

        # ── Logging Configuration ─────────────────────────────────────────────
        self.LOG_DIRECTORY = self._get_env_var("LOG_DIRECTORY", "log")
        self.LOGGER_NAME = self._get_env_var("LOGGER_NAME", "predifix")
        self.LOG_LEVEL = self._get_env_var("LOG_LEVEL", "INFO")
        self.LOG_FORMAT = self._get_env_var("LOG_FORMAT", "%(asctime)s %(levelname)s: %(message)s")
        self.LOG_DATE_FORMAT = self._get_env_var("LOG_DATE_FORMAT", "%Y-%m-%d %H:%M:%S")

        if config_file:
            self._apply(self._read_config_file(config_file))
        if overrides:
            self._apply({k: v for k, v in overrides.items() if v is not None})
        self._validate()

    def _get_env_var(self, key: str, default=None, required: bool = False):
        """
        Helper to retrieve an environment variable:
        - If required=True and not found, raises ConfigError.
        - Otherwise returns os.getenv(key) or the provided default.
        """
        value = os.getenv(key)
        if value is None:
            if required:
                raise ConfigError(f"Missing required environment variable: {key}")
            return default
        return value

    @staticmethod
    def _read_config_file(path) -> dict:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")
        return data

    def _apply(self, values: dict):
        for raw_key, value in values.items():
            key = raw_key.replace("-", "_").upper()
            if key in _SECRET_SETTINGS:
                raise ConfigError(f"{key} may only be set through the environment")
            if not hasattr(self, key):
                raise ConfigError(f"Unknown setting: {raw_key}")
            setattr(self, key, value)

    def _validate(self):
        for key in _INT_SETTINGS:
            try:
                setattr(self, key, int(getattr(self, key)))
            except (TypeError, ValueError):
                raise ConfigError(f"Invalid {key}; must be an integer.")
        for key in _FLOAT_SETTINGS:
            try:
                setattr(self, key, float(getattr(self, key)))
            except (TypeError, ValueError):
                raise ConfigError(f"Invalid {key}; must be a number.")
        for key in _BOOL_SETTINGS:
            value = getattr(self, key)
            if isinstance(value, str):
                value = value.strip().lower() in ("1", "true", "yes", "on")
            setattr(self, key, bool(value))
        for key in _LIST_SETTINGS:
            value = getattr(self, key)
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            setattr(self, key, list(value or []))

        raw_log_dir = self.LOG_DIRECTORY
        abs_log_dir = os.path.realpath(raw_log_dir)
        project_root = Path(os.getcwd()).resolve()
        if not Path(abs_log_dir).resolve().is_relative_to(project_root):
            raise ConfigError(f"LOG_DIRECTORY must be inside the project directory: {raw_log_dir}")
        self.LOG_DIRECTORY = abs_log_dir

        if isinstance(self.LOG_LEVEL, str):
            self.LOG_LEVEL = getattr(logging, self.LOG_LEVEL.upper(), logging.INFO)

        # validates counts
        self.retrieval_config()

    def retrieval_config(self) -> RetrievalConfig:
        return RetrievalConfig(
            example_context=self.EXAMPLE_CONTEXT,
            alert_context=self.ALERT_CONTEXT,
            max_predicate_matches=self.MAX_PREDICATE_MATCHES,
            max_examples_per_source=self.MAX_EXAMPLES_PER_SOURCE,
            library_globs=tuple(self.LIBRARY_GLOBS),
            same_file_cond3=self.SAME_FILE_COND3,
            literal_top_k=self.LITERAL_TOP_K,
            literal_min_len=self.LITERAL_MIN_LEN,
            workers=self.WORKERS,
        )

    def describe(self) -> dict:
        """Effective settings, secrets masked."""
        settings = {}
        for key, value in sorted(vars(self).items()):
            if not key.isupper():
                continue
            if key == "LOG_LEVEL":
                value = logging.getLevelName(value)
            settings[key] = mask_sensitive_value(key, value)
        return settings

    def init_llm(self):
        """
        Initializes and returns the LangChain Gemini chat model (temperature 0).
        """
        if not self.GOOGLE_API_KEY:
            raise ConfigError("GOOGLE_API_KEY is not set in environment variables.")
        from langchain_google_genai import ChatGoogleGenerativeAI

        return ChatGoogleGenerativeAI(
            model=self.GEMINI_MODEL,
            temperature=0,
            api_key=self.GOOGLE_API_KEY,
        )
