"""Plain-text ``key = value`` configuration files.

Lines starting with ``#`` or ``;`` are comments. Keys are case-insensitive
and dashes are treated as underscores, so ``min-order-size`` and
``min_order_size`` name the same setting.
"""
from __future__ import annotations

import configparser
from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"))
    try:
        parser.read_string("[config]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return {k.replace("-", "_"): v.strip() for k, v in parser["config"].items()}


def read_config(path: str | Path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config_text(text, str(p))
