"""Flat key-value configuration with flag overrides.

One versioned document holds every path and knob so a run can be
reproduced from the file alone; command-line flags override individual
keys.  The format is flat TOML: `key = value` lines, # comments, quoted
or bare strings.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

CONFIG_VERSION = 1


@dataclass(frozen=True)
class AppConfig:
    version: int = CONFIG_VERSION
    out_dir: Path = Path("out")
    store_path: Path | None = None
    fixture_path: Path | None = None
    dictionaries_path: Path | None = None
    model_path: Path | None = None
    reports_dir: Path | None = None
    provider: str = "builtin"
    provider_url: str = ""
    consumers: int = 1
    horizon_days: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.horizon_days < 14:
            raise ValueError("detection horizon must be at least 14 days")
        if self.consumers < 1:
            raise ValueError("need at least one consumer")

    # unset paths hang off out_dir so one flag relocates everything
    def resolved(self) -> "AppConfig":
        out = Path(self.out_dir)
        return replace(
            self,
            out_dir=out,
            store_path=Path(self.store_path or out / "store.jsonl"),
            dictionaries_path=Path(self.dictionaries_path or out / "dictionaries.json"),
            model_path=Path(self.model_path or out / "model.json"),
            reports_dir=Path(self.reports_dir or out / "reports"),
            fixture_path=Path(self.fixture_path) if self.fixture_path else None,
        )

    @property
    def domains_path(self) -> Path:
        return Path(self.out_dir) / "domains.jsonl"


def parse_flat_config(text: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if value.startswith(("'", '"')) and value.endswith(value[0]) and len(value) >= 2:
            out[key] = value[1:-1]
        elif value.lower() in ("true", "false"):
            out[key] = value.lower() == "true"
        else:
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value
    return out


_PATH_KEYS = {"out_dir", "store_path", "fixture_path", "dictionaries_path",
              "model_path", "reports_dir"}


def load_config(path: Path) -> AppConfig:
    values = parse_flat_config(Path(path).read_text(encoding="utf-8"))
    known = {f.name for f in fields(AppConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if values.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        raise ValueError(f"unsupported config version: {values.get('version')}")
    for key in _PATH_KEYS & set(values):
        values[key] = Path(str(values[key]))
    return AppConfig(**values)
