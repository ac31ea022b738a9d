"""
Configuration service - loads flat key/value sweep files into a SweepSpec.
"""
import logging
from typing import Any, Callable, Dict, Optional, Tuple

import aiofiles
from pydantic import ValidationError

from src.exceptions import ConfigError
from src.models.config import Protocol, SpecOverride, SweepKind, SweepSpec
from src.models.network import CombiningMode, KnowledgeMode
from src.services.audit_service import AuditService

logger = logging.getLogger(__name__)

TRUE_WORDS = {"true", "yes", "on", "1"}
FALSE_WORDS = {"false", "no", "off", "0"}


def parse_bool(text: str) -> bool:
    word = text.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError(f"Expected a boolean, got '{text}'")


def parse_protocols(text: str):
    return [Protocol.parse(name) for name in text.split(",") if name.strip()]


def parse_kind(text: str) -> SweepKind:
    try:
        return SweepKind(text.strip())
    except ValueError:
        valid = ", ".join(k.value for k in SweepKind)
        raise ValueError(f"Unknown sweep kind '{text.strip()}'; valid kinds: {valid}")


def parse_schedule(text: str) -> KnowledgeMode:
    return KnowledgeMode(text.strip().lower())


def parse_combining(text: str) -> CombiningMode:
    return CombiningMode(text.strip().lower().replace("-", "").replace("_", ""))


PARSERS: Dict[str, Callable[[str], Any]] = {
    "kind": parse_kind,
    "start": float,
    "stop": float,
    "step": float,
    "r": float,
    "n_relays": int,
    "snr_db": float,
    "theta": float,
    "protocols": parse_protocols,
    "combining": parse_combining,
    "schedule": parse_schedule,
    "normalize_power": parse_bool,
    "seed": int,
    "budget": int,
    "workers": int,
    "max_relay_orders": int,
}


class ConfigService:
    """
    Reads sweep configuration files.

    Format: one `key = value` pair per line, `#` starts a comment, blank
    lines are ignored. Values are validated by the SweepSpec model.
    """

    def __init__(self, audit_service: Optional[AuditService] = None):
        self.audit_service = audit_service

    async def load_config(self, path: str, override: Optional[SpecOverride] = None) -> SweepSpec:
        """
        Load and validate a sweep file.

        Args:
            path: UTF-8 key/value file
            override: Command-line values replacing file values

        Returns:
            Validated SweepSpec

        Raises:
            ConfigError: unreadable file, malformed line, unknown key or invalid value
        """
        try:
            async with aiofiles.open(path, mode="r", encoding="utf-8") as f:
                text = await f.read()
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e.strerror or e}")

        spec = self.parse_config(text)
        if override is not None:
            spec = self._apply_override(spec, override)
        logger.info(f"Loaded {spec.kind.value} config from {path} ({len(spec.protocols)} protocols)")
        if self.audit_service:
            await self.audit_service.log_config_loaded(path, spec.kind.value)
        return spec

    def parse_config(self, text: str) -> SweepSpec:
        """Parse config text into a SweepSpec; errors carry the offending line number."""
        values: Dict[str, Any] = {}
        lines: Dict[str, int] = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, value = self._split_line(line, number)
            if key in values:
                raise ConfigError(f"Duplicate key '{key}' (first set on line {lines[key]})", line=number)
            try:
                values[key] = PARSERS[key](value)
            except ValueError as e:
                raise ConfigError(f"Invalid value for '{key}': {e}", line=number)
            lines[key] = number

        try:
            return SweepSpec(**values)
        except ValidationError as e:
            raise ConfigError(self._describe(e), line=self._first_line(e, lines))

    @staticmethod
    def _split_line(line: str, number: int) -> Tuple[str, str]:
        if "=" not in line:
            raise ConfigError(f"Expected 'key = value', got '{line}'", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("Missing key before '='", line=number)
        if key not in PARSERS:
            raise ConfigError(f"Unknown key '{key}'; valid keys: {', '.join(PARSERS)}", line=number)
        if not value:
            raise ConfigError(f"Missing value for '{key}'", line=number)
        return key, value

    @staticmethod
    def _first_line(error: ValidationError, lines: Dict[str, int]) -> Optional[int]:
        for detail in error.errors():
            if detail["loc"] and detail["loc"][0] in lines:
                return lines[detail["loc"][0]]
        return None

    @staticmethod
    def _describe(error: ValidationError) -> str:
        messages = []
        for detail in error.errors():
            field = detail["loc"][0] if detail["loc"] else None
            message = detail["msg"].removeprefix("Value error, ")
            messages.append(f"{field}: {message}" if field else message)
        return "; ".join(messages)

    @staticmethod
    def _apply_override(spec: SweepSpec, override: SpecOverride) -> SweepSpec:
        try:
            return override.apply(spec)
        except ValidationError as e:
            raise ConfigError(ConfigService._describe(e))
