"""Scenario configuration: a flat, namespaced key/value set.

Scenario files use one ``key = value`` per line; ``#`` starts a comment.
Key ``codel.target_s`` maps to field ``codel_target_s``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

QDISC_KINDS = ("droptail", "red", "codel", "lstfcodel")


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    sim_duration_s: float = 600.0
    sim_seed: int = 1

    qdisc_kind: str = "codel"
    qdisc_capacity_bytes: int = 15_000

    codel_target_s: float = 0.005
    codel_interval_s: float = 0.100

    lstfcodel_alpha: float = 0.5
    lstfcodel_drop_next_influence: bool = True
    lstfcodel_congestion_signal: str = "victim"

    red_w_q: float = 0.002
    red_min_th_bytes: float = 7_500.0
    red_max_th_bytes: float = 22_500.0
    red_max_p: float = 0.1

    ftp_enabled: bool = True
    ftp_start_s: float = 0.0
    tcp_alpha: float = 0.125
    tcp_init_ssthresh: float = 64.0
    tcp_packet_bytes: int = 1500

    cbr_enabled: bool = True
    cbr_rate_bps: int = 1_500_000
    cbr_packet_bytes: int = 1000
    cbr_start_s: float = 300.0

    link_client_a_bps: int = 2_000_000
    link_client_b_bps: int = 1_500_000
    link_server_bps: int = 1_700_000
    link_delay_s: float = 0.001

    ack_jitter_s: float = 0.001

    def validate(self) -> Scenario:
        problems = []
        if self.sim_duration_s <= 0:
            problems.append("sim.duration_s must be positive")
        if not 0 <= self.sim_seed < 2**64:
            problems.append("sim.seed must be a 64-bit unsigned integer")
        if self.qdisc_kind not in QDISC_KINDS:
            problems.append(f"qdisc.kind must be one of {', '.join(QDISC_KINDS)}; got {self.qdisc_kind!r}")
        if self.qdisc_capacity_bytes < 1500:
            problems.append("qdisc.capacity_bytes must hold at least one 1500-byte MTU")
        if not 0 < self.codel_target_s < self.codel_interval_s:
            problems.append("need 0 < codel.target_s < codel.interval_s")
        if not 0 <= self.lstfcodel_alpha <= 1:
            problems.append("lstfcodel.alpha must lie in [0, 1]")
        if self.lstfcodel_congestion_signal not in ("victim", "candidate"):
            problems.append("lstfcodel.congestion_signal must be 'victim' or 'candidate'")
        if not 0 < self.red_w_q < 1:
            problems.append("red.w_q must lie in (0, 1)")
        if not 0 <= self.red_min_th_bytes < self.red_max_th_bytes:
            problems.append("need 0 <= red.min_th_bytes < red.max_th_bytes")
        if not 0 < self.red_max_p <= 1:
            problems.append("red.max_p must lie in (0, 1]")
        if not 0 <= self.tcp_alpha <= 1:
            problems.append("tcp.alpha must lie in [0, 1]")
        if self.tcp_init_ssthresh < 2:
            problems.append("tcp.init_ssthresh must be at least 2")
        for key in ("tcp_packet_bytes", "cbr_packet_bytes"):
            if not 0 < getattr(self, key) <= 1500:
                problems.append(f"{_key(key)} must lie in (0, 1500]")
        for key in ("cbr_rate_bps", "link_client_a_bps", "link_client_b_bps", "link_server_bps"):
            if getattr(self, key) <= 0:
                problems.append(f"{_key(key)} must be positive")
        for key in ("ftp_start_s", "cbr_start_s", "link_delay_s", "ack_jitter_s"):
            if getattr(self, key) < 0:
                problems.append(f"{_key(key)} must be nonnegative")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def with_overrides(self, overrides: Mapping[str, Any]) -> Scenario:
        changes = {}
        for key, raw in overrides.items():
            name = _field_name(key)
            changes[name] = _coerce(key, _FIELD_TYPES[name], raw)
        return dataclasses.replace(self, **changes)

    def to_items(self) -> list[tuple[str, str]]:
        return [(_key(f.name), _render(getattr(self, f.name))) for f in fields(self)]

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_items())


_FIELD_TYPES = {f.name: f.type for f in fields(Scenario)}
_NAMESPACES = ("sim", "qdisc", "codel", "lstfcodel", "red", "ftp", "tcp", "cbr", "link", "ack")


def _key(name: str) -> str:
    ns, rest = name.split("_", 1)
    return f"{ns}.{rest}"


def _field_name(key: str) -> str:
    ns, sep, rest = key.partition(".")
    name = f"{ns}_{rest}"
    if not sep or ns not in _NAMESPACES or name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    return name


def _coerce(key: str, typ: str, raw: Any) -> Any:
    if not isinstance(raw, str):
        raw = str(raw)
    text = raw.strip()
    try:
        if typ == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ == "int":
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        if typ == "float":
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} (expected {typ})") from None


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def parse_scenario_text(text: str) -> dict[str, str]:
    items: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        _field_name(key)
        items[key] = value.strip()
    return items


def load_scenario(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> Scenario:
    scenario = Scenario()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file {path}: {exc}") from None
        scenario = scenario.with_overrides(parse_scenario_text(text))
    if overrides:
        scenario = scenario.with_overrides(overrides)
    return scenario.validate()
