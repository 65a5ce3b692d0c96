"""Structured-text run configuration.

The format is a small indentation-based block language: ``key: value`` pairs,
nested blocks introduced by a bare ``key:`` line, lists written inline as
``[a, b, c]``.  Lines starting with ``#`` are comments.  It parses into plain
nested dicts and serializes back deterministically, so every report can embed
the exact configuration that produced it.
"""

from __future__ import annotations

from .errors import ConfigError


def _parse_scalar(text: str):
    t = text.strip()
    if t.startswith("[") and t.endswith("]"):
        inner = t[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(p) for p in inner.split(",")]
    low = t.lower()
    if low in ("true", "yes"):
        return True
    if low in ("false", "no"):
        return False
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    return t


def parse_config(text: str) -> dict:
    root: dict = {}
    # stack of (indent, dict)
    stack = [(-1, root)]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        indent = len(stripped) - len(stripped.lstrip())
        key_part = stripped.strip()
        if ":" not in key_part:
            raise ConfigError(f"line {lineno}: expected 'key: value', got {key_part!r}")
        key, _, value = key_part.partition(":")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        while stack and indent <= stack[-1][0]:
            stack.pop()
        if not stack:
            raise ConfigError(f"line {lineno}: indentation does not match any block")
        parent = stack[-1][1]
        if value.strip() == "":
            block: dict = {}
            parent[key] = block
            stack.append((indent, block))
        else:
            parent[key] = _parse_scalar(value)
    return root


def _emit_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return "[" + ", ".join(_emit_scalar(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(cfg: dict, indent: int = 0) -> str:
    lines = []
    pad = "  " * indent
    for key, val in cfg.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.append(emit_config(val, indent + 1))
        else:
            lines.append(f"{pad}{key}: {_emit_scalar(val)}")
    return "\n".join(lines)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def get_path(cfg: dict, dotted: str, default=None, required=False):
    cur = cfg
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if required:
                raise ConfigError(f"missing required config field {dotted!r}")
            return default
        cur = cur[part]
    return cur


def resolved_lines(cfg: dict):
    """Config as a list of lines for embedding into report headers."""
    return emit_config(cfg).splitlines()
