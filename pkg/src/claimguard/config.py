"""Runtime configuration: one JSON file, selectively overridable via env.

The same config drives the service and the CLI so a `check` run on the
operator's shell sees exactly the store, fusion layout, and policy the
service uses.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .features import (
    EmbeddingProvider,
    FusionConfig,
    LookupEmbeddingProvider,
    ToyEmbeddingProvider,
)
from .matcher import FraudMode, FraudPolicy

ENV_PREFIX = "CLAIMGUARD_"


@dataclass(frozen=True)
class AppConfig:
    store_path: str = "store"
    host: str = "127.0.0.1"
    port: int = 8330
    fusion: FusionConfig = field(default_factory=FusionConfig)
    policy: FraudPolicy = field(default_factory=FraudPolicy)
    provider: str = "toy"  # "toy" | "lookup"
    lookup_local_path: str | None = None
    lookup_global_path: str | None = None
    hist_source: str = "full_body"
    max_image_bytes: int = 10 * 1024 * 1024

    def build_provider(self) -> EmbeddingProvider:
        if self.provider == "toy":
            return ToyEmbeddingProvider(self.fusion.local_dim, self.fusion.global_dim)
        if self.provider == "lookup":
            if not self.lookup_local_path or not self.lookup_global_path:
                raise ConfigError("lookup provider needs lookup_local_path and lookup_global_path")
            return LookupEmbeddingProvider.from_files(
                self.lookup_local_path, self.lookup_global_path
            )
        raise ConfigError(f"unknown embedding provider {self.provider!r}")


def _fusion_from_json(data: dict[str, Any]) -> FusionConfig:
    weights = data.get("block_weights", (1.0, 1.0, 1.0))
    return FusionConfig(
        local_dim=int(data.get("local_dim", 64)),
        global_dim=int(data.get("global_dim", 64)),
        hist_bins=int(data.get("hist_bins", 8)),
        block_weights=tuple(float(w) for w in weights),  # type: ignore[arg-type]
    )


def _policy_from_json(data: dict[str, Any]) -> FraudPolicy:
    return FraudPolicy(
        mode=FraudMode(data.get("mode", "cross_vehicle")),
        threshold=float(data.get("threshold", 0.9)),
        top_k=int(data.get("top_k", 10)),
    )


def load_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> AppConfig:
    """Config file first, then CLAIMGUARD_* environment overrides."""
    env = os.environ if env is None else env
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc

    fusion = _fusion_from_json(data.get("fusion", {}))
    policy = _policy_from_json(data.get("policy", {}))

    def env_get(key: str, default: Any) -> Any:
        return env.get(ENV_PREFIX + key, default)

    threshold = env_get("THRESHOLD", None)
    if threshold is not None:
        policy = FraudPolicy(mode=policy.mode, threshold=float(threshold), top_k=policy.top_k)
    mode = env_get("POLICY_MODE", None)
    if mode is not None:
        policy = FraudPolicy(mode=FraudMode(mode), threshold=policy.threshold, top_k=policy.top_k)

    return AppConfig(
        store_path=str(env_get("STORE_PATH", data.get("store_path", "store"))),
        host=str(env_get("HOST", data.get("host", "127.0.0.1"))),
        port=int(env_get("PORT", data.get("port", 8330))),
        fusion=fusion,
        policy=policy,
        provider=str(env_get("PROVIDER", data.get("provider", "toy"))),
        lookup_local_path=data.get("lookup_local_path"),
        lookup_global_path=data.get("lookup_global_path"),
        hist_source=str(data.get("hist_source", "full_body")),
        max_image_bytes=int(data.get("max_image_bytes", 10 * 1024 * 1024)),
    )
