"""Run configuration: TOML file plus command-line overrides."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli
import tomli_w

from . import __version__
from .connection import ConnectionFamily


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


_NUMERIC = {"r", "D", "delta", "alpha", "cutoff_dim"}


def parse_family(text: str) -> dict:
    """``kind:key=value,...`` into a family table.

    Examples: ``vr:r=0.3,D=0.8,alpha=2``;
    ``boolean:marks=uniform_radius/0.1/0.3,D=0.6``;
    ``diam_kernel:D=0.8,profiles=exp:0.5|const:0.7``.
    """
    kind, _, rest = text.partition(":")
    out: dict = {"kind": kind.strip()}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"family option {item!r} is not key=value")
        key = key.strip()
        if key in _NUMERIC:
            num = float(val)
            out[key] = int(num) if key in ("alpha", "cutoff_dim") else num
        elif key == "profiles":
            out[key] = val.split("|")
        elif key == "marks":
            parts = val.split("/")
            law = {"kind": parts[0]}
            if len(parts) > 1:
                law["lo"] = float(parts[1])
                law["hi"] = float(parts[2] if len(parts) > 2 else parts[1])
            out[key] = law
        else:
            raise ConfigError(f"unknown family option {key!r}")
    return out


@dataclass
class RunConfig:
    family: dict = field(default_factory=lambda: {"kind": "vr", "r": 0.3, "D": 0.8, "alpha": 1})
    d: int = 2
    q: int = 0
    betas: list[float] = field(default_factory=lambda: [4.0])
    r: list[float] = field(default_factory=lambda: [4.0])
    s: float = 2.0
    n: int = 100
    seed: int = 0
    out: str = "out"
    threads: int = 1
    bracket: list[float] = field(default_factory=lambda: [2.0, 6.0])
    n_beta: int = 13
    tau: float = 0.05
    r_small: float = 4.0
    r_large: float = 8.0

    def connection_family(self) -> ConnectionFamily:
        try:
            return ConnectionFamily.from_dict(self.family)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid family: {exc}") from exc

    def validate(self) -> "RunConfig":
        if "D" not in self.family:
            raise ConfigError("family needs an explicit cutoff D (the (V2) range)")
        fam = self.connection_family()
        if not 0 <= self.q < fam.alpha:
            raise ConfigError(f"need 0 <= q < alpha (got q = {self.q}, alpha = {fam.alpha})")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if any(b < 0 for b in self.betas):
            raise ConfigError("beta must be >= 0")
        if not self.r or any(x <= 0 for x in self.r):
            raise ConfigError("radii must be > 0")
        if not self.s > 0:
            raise ConfigError("s must be > 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if len(self.bracket) != 2 or not 0 <= self.bracket[0] < self.bracket[1]:
            raise ConfigError("bracket must be [lo, hi] with 0 <= lo < hi")
        if not 0 < self.r_small < self.r_large:
            raise ConfigError("need 0 < r_small < r_large")
        return self

    def check_sphere(self) -> None:
        """Commands that explore use r = max(r) and need s <= r."""
        if not self.s <= max(self.r):
            raise ConfigError(f"need 0 < s <= r (got s = {self.s}, r = {max(self.r)})")

    # -- serialisation ---------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.betas = [float(b) for b in _as_list(cfg.betas)]
        cfg.r = [float(x) for x in _as_list(cfg.r)]
        cfg.bracket = [float(x) for x in _as_list(cfg.bracket)]
        for name in ("d", "q", "n", "seed", "threads", "n_beta"):
            setattr(cfg, name, int(getattr(cfg, name)))
        for name in ("s", "tau", "r_small", "r_large"):
            setattr(cfg, name, float(getattr(cfg, name)))
        return cfg

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RunConfig":
        return cls.from_toml(Path(path).read_text())

    def config_hash(self) -> str:
        """Hash of everything that affects results (threads and out excluded)."""
        doc = self.to_dict()
        doc.pop("threads")
        doc.pop("out")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def metadata(self) -> dict:
        return {"version": __version__, "master_seed": self.seed, "config_hash": self.config_hash()}


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def atomic_write(path: str | os.PathLike, data: str | bytes) -> Path:
    """Write to a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
