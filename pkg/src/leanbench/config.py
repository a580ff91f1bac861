"""TOML configuration with environment-variable interpolation.

Unknown keys are rejected by name; string values may reference environment
variables as ${VAR}. Defaults follow the evaluation setup: 32 samples per
expansion, 100 expansions, 1024-token context budget.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .instruct import COUNTERS
from .search import SearchParams


class ConfigError(ValueError):
    pass


_KNOWN_KEYS: dict[str, set[str]] = {
    "repo": {"roots"},
    "output": {"directory"},
    "checker": {
        "command",
        "fixture",
        "timeout_seconds",
        "theorem_timeout_seconds",
        "banned_tactics",
    },
    "model": {
        "backend",
        "fixture",
        "endpoint",
        "name",
        "api_key_env",
        "timeout_seconds",
        "retries",
        "temperature",
    },
    "search": {"samples_per_expansion", "max_expansions", "max_depth"},
    "budget": {"limit", "fullproof_limit", "counter"},
    "evaluation": {"transform", "mode", "workers", "seed"},
    "vcs": {"commits_file"},
}

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass
class CliConfig:
    repo_roots: list[str] = field(default_factory=list)
    output_dir: str = "out"
    checker_command: list[str] | None = None
    checker_fixture: str | None = None
    checker_timeout: float = 300.0
    theorem_timeout: float = 600.0
    banned_tactics: tuple[str, ...] = ("sorry", "admit")
    model_backend: str = "mock"
    model_fixture: str | None = None
    model_endpoint: str | None = None
    model_name: str | None = None
    api_key_env: str | None = None
    model_timeout: float = 60.0
    model_retries: int = 3
    temperature: float = 1.0
    samples_per_expansion: int = 32
    max_expansions: int = 100
    max_depth: int = 50
    budget_limit: int = 1024
    fullproof_limit: int = 8000
    counter: str = "whitespace"
    transform: str = "all"
    mode: str = "tactic"
    workers: int = 1
    seed: int = 0
    commits_file: str | None = None
    base_dir: Path = field(default_factory=Path)

    def search_params(self) -> SearchParams:
        return SearchParams(
            samples_per_expansion=self.samples_per_expansion,
            max_expansions=self.max_expansions,
            max_depth=self.max_depth,
            theorem_timeout=self.theorem_timeout,
        )

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _interpolate(value: Any) -> Any:
    if isinstance(value, str):
        def sub(m: re.Match) -> str:
            name = m.group(1)
            if name not in os.environ:
                raise ConfigError(f"environment variable {name!r} is not set")
            return os.environ[name]

        return _ENV_RE.sub(sub, value)
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    return value


def load_config(path: str | Path) -> CliConfig:
    path = Path(path)
    with open(path, "rb") as f:
        raw = tomllib.load(f)

    for section, body in raw.items():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown configuration key: {section}")
        if not isinstance(body, dict):
            raise ConfigError(f"configuration section {section!r} must be a table")
        for key in body:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown configuration key: {section}.{key}")

    def get(section: str, key: str, default: Any = None) -> Any:
        return _interpolate(raw.get(section, {}).get(key, default))

    cfg = CliConfig(
        repo_roots=list(get("repo", "roots", [])),
        output_dir=get("output", "directory", "out"),
        checker_command=get("checker", "command"),
        checker_fixture=get("checker", "fixture"),
        checker_timeout=float(get("checker", "timeout_seconds", 300.0)),
        theorem_timeout=float(get("checker", "theorem_timeout_seconds", 600.0)),
        banned_tactics=tuple(get("checker", "banned_tactics", ["sorry", "admit"])),
        model_backend=get("model", "backend", "mock"),
        model_fixture=get("model", "fixture"),
        model_endpoint=get("model", "endpoint"),
        model_name=get("model", "name"),
        api_key_env=get("model", "api_key_env"),
        model_timeout=float(get("model", "timeout_seconds", 60.0)),
        model_retries=int(get("model", "retries", 3)),
        temperature=float(get("model", "temperature", 1.0)),
        samples_per_expansion=int(get("search", "samples_per_expansion", 32)),
        max_expansions=int(get("search", "max_expansions", 100)),
        max_depth=int(get("search", "max_depth", 50)),
        budget_limit=int(get("budget", "limit", 1024)),
        fullproof_limit=int(get("budget", "fullproof_limit", 8000)),
        counter=get("budget", "counter", "whitespace"),
        transform=get("evaluation", "transform", "all"),
        mode=get("evaluation", "mode", "tactic"),
        workers=int(get("evaluation", "workers", 1)),
        seed=int(get("evaluation", "seed", 0)),
        commits_file=get("vcs", "commits_file"),
        base_dir=path.parent,
    )
    if cfg.counter not in COUNTERS:
        raise ConfigError(f"unknown budget.counter {cfg.counter!r}")
    return cfg
