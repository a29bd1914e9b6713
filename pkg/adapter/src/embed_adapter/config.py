from __future__ import annotations

from dataclasses import dataclass

MODES = ("deterministic", "encoder")


@dataclass(frozen=True)
class AdapterConfig:
    mode: str = "deterministic"
    dim: int = 32  # deterministic mode only; encoder mode uses the model's dim
    model_name: str = "clip-ViT-B-32"
    model_id: str = "det-hash-v1"
    host: str = "127.0.0.1"
    port: int = 9090

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "deterministic" and self.dim < 8:
            raise ValueError("deterministic mode needs dim >= 8")
