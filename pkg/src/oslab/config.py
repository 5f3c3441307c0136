"""Experiment configuration files.

Grammar: INI-style sections with ``key = value`` lines; ``#`` or ``;`` start
comments.  Two sections are recognised:

``[run]``
    ``kind`` (optional, must match the command line), ``seed`` (integer).
``[params]``
    kind-specific parameters, documented in the README.

Lists are comma separated; obstacle lists (``discs``) are semicolon
separated ``cx cy r`` triples.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import ObstacleConfig, equilateral_config, load_config, parse_config

__all__ = ["KINDS", "ExperimentConfig", "load_experiment", "parse_experiment"]

KINDS = (
    "geometry-check",
    "orbit",
    "trapped-set",
    "quantize",
    "gap-scan",
    "resolvent-scan",
    "spectrum",
    "wave",
    "contour-test",
)

_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


@dataclass
class ExperimentConfig:
    kind: str
    params: dict[str, str]
    seed: int = 0
    source: Path | None = None
    lines: dict[str, int] = field(default_factory=dict)

    # -- typed accessors with line diagnostics; keys are case-insensitive ----

    def _fail(self, key: str, message: str):
        raise ConfigError(message, field=key, line=self.lines.get(key.lower()))

    def has(self, key: str) -> bool:
        key = key.lower()
        return key in self.params

    def get_str(self, key: str, default: str | None = None, choices=None) -> str:
        key = key.lower()
        if key not in self.params:
            if default is None:
                self._fail(key, "missing required parameter")
            return default
        value = self.params[key].strip()
        if choices is not None and value not in choices:
            self._fail(key, f"expected one of {', '.join(choices)}, got {value!r}")
        return value

    def get_int(self, key: str, default: int | None = None, minimum: int | None = None) -> int:
        key = key.lower()
        if key not in self.params:
            if default is None:
                self._fail(key, "missing required parameter")
            return default
        try:
            value = int(self.params[key])
        except ValueError:
            self._fail(key, f"expected an integer, got {self.params[key]!r}")
        if minimum is not None and value < minimum:
            self._fail(key, f"must be >= {minimum}, got {value}")
        return value

    def get_float(self, key: str, default: float | None = None, positive: bool = False) -> float:
        key = key.lower()
        if key not in self.params:
            if default is None:
                self._fail(key, "missing required parameter")
            return default
        try:
            value = float(self.params[key])
        except ValueError:
            self._fail(key, f"expected a number, got {self.params[key]!r}")
        if positive and not value > 0:
            self._fail(key, f"must be positive, got {value}")
        return value

    def get_int_list(self, key: str, default=None, minimum: int | None = None) -> list[int]:
        key = key.lower()
        raw = self._list(key, default)
        try:
            values = [int(v) for v in raw]
        except ValueError:
            self._fail(key, f"expected a comma-separated list of integers, got {self.params[key]!r}")
        if minimum is not None and any(v < minimum for v in values):
            self._fail(key, f"entries must be >= {minimum}")
        return values

    def get_float_list(self, key: str, default=None) -> list[float]:
        key = key.lower()
        raw = self._list(key, default)
        try:
            return [float(v) for v in raw]
        except ValueError:
            self._fail(key, f"expected a comma-separated list of numbers, got {self.params[key]!r}")

    def get_complex_list(self, key: str, default=None) -> list[complex]:
        key = key.lower()
        raw = self._list(key, default)
        try:
            return [complex(v.replace(" ", "")) for v in raw]
        except ValueError:
            self._fail(key, f"expected complex numbers like 0.5+0.2j, got {self.params[key]!r}")

    def get_words(self, key: str) -> list[tuple[int, ...]]:
        key = key.lower()
        words = []
        for item in self._list(key, None, sep=";"):
            try:
                words.append(tuple(int(v) for v in re.split(r"[\s,\-]+", item) if v))
            except ValueError:
                self._fail(key, f"words are 0-based letters like '0-1-2', got {item!r}")
        return words

    def _list(self, key, default, sep=","):
        key = key.lower()
        if key not in self.params:
            if default is None:
                self._fail(key, "missing required parameter")
            return [str(v) for v in default]
        items = [v.strip() for v in self.params[key].strip().strip("[]").split(sep)]
        items = [v for v in items if v]
        if not items:
            self._fail(key, "empty list")
        return items

    def obstacles(self, required: bool = True) -> ObstacleConfig | None:
        """Obstacles from ``discs``, ``obstacles_file`` or ``triangle_side``."""
        given = [k for k in ("discs", "obstacles_file", "triangle_side") if k in self.params]
        if len(given) > 1:
            self._fail(given[1], "give only one of discs, obstacles_file, triangle_side")
        if not given:
            if required:
                raise ConfigError("no obstacles given (discs, obstacles_file or triangle_side)")
            return None
        key = given[0]
        if key == "triangle_side":
            return equilateral_config(self.get_float(key, positive=True), self.get_float("radius", 1.0, positive=True))
        if key == "obstacles_file":
            path = Path(self.params[key].strip())
            if self.source is not None and not path.is_absolute():
                path = self.source.parent / path
            try:
                return load_config(path)
            except OSError as exc:
                self._fail(key, f"cannot read obstacle file: {exc}")
        value = self.params[key].strip()
        if value.lower() == "none":
            if required:
                self._fail(key, "obstacles are required for this experiment")
            return None
        try:
            return parse_config(value.replace(";", "\n"))
        except ConfigError as exc:
            self._fail(key, str(exc))

    # -- canonical form ------------------------------------------------------

    def canonical(self) -> dict:
        params = {k: " ".join(v.split()) for k, v in sorted(self.params.items())}
        return {"kind": self.kind, "seed": self.seed, "params": params}

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _line_index(text: str) -> dict[str, int]:
    lines, section = {}, None
    for number, raw in enumerate(text.splitlines(), start=1):
        sec = _SECTION_RE.match(raw)
        if sec:
            section = sec.group(1).strip()
            continue
        key = _KEY_RE.match(raw)
        if key and section is not None:
            lines.setdefault(f"{section}.{key.group(1).strip().lower()}", number)
    return lines


def parse_experiment(text: str, kind: str | None = None, source: Path | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(source) if source else "<config>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], line=line) from None
    index = _line_index(text)
    unknown = [s for s in parser.sections() if s not in ("run", "params")]
    if unknown:
        raise ConfigError(f"unknown section [{unknown[0]}]; expected [run] and [params]")
    run = dict(parser["run"]) if parser.has_section("run") else {}
    params = dict(parser["params"]) if parser.has_section("params") else {}
    file_kind = run.get("kind")
    if kind is None:
        kind = file_kind
    if kind is None:
        raise ConfigError("experiment kind not given", field="kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}", field="kind", line=index.get("run.kind"))
    if file_kind is not None and file_kind != kind:
        raise ConfigError(f"config is for {file_kind!r}, not {kind!r}", field="kind", line=index.get("run.kind"))
    try:
        seed = int(run.get("seed", "0"))
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {run['seed']!r}", field="seed",
                          line=index.get("run.seed")) from None
    lines = {k.split(".", 1)[1]: v for k, v in index.items() if k.startswith("params.")}
    return ExperimentConfig(kind, params, seed, source, lines)


def load_experiment(path, kind: str | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_experiment(text, kind, path)
