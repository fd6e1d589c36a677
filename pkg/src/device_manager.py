"""
Device configuration loading.

A device config names an FPGA and a link model. Either may start from a preset and
override individual keys:

    {
      "presets": {"cyclone10gx-dhm": {"mac_budget": 4800, "clock_hz": 1e8}},
      "fpga": {"preset": "cyclone10gx-dhm", "mac_budget": 9600},
      "link": {"bandwidth_bytes_per_s": 2.5e9, "fixed_latency_s": 0}
    }

Without an explicit path, devices.json at the project root is used, then
devices.sample.json, then the built-in defaults.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type

from pydantic import BaseModel, ValidationError

from calibration import GpuCalibrationTable, read_calibration
from cost_models import FpgaModel, LinkModel
from errors import DeviceConfigError
from log.log_util import load_json

_SECTIONS = ("presets", "fpga", "link")


@dataclass(frozen=True)
class DeviceModels:
    """Everything the planner and simulator cost against."""
    fpga: FpgaModel
    link: LinkModel
    gpu: GpuCalibrationTable

    def with_fpga(self, **overrides) -> "DeviceModels":
        return DeviceModels(self.fpga.model_copy(update=overrides), self.link, self.gpu)


def _project_root() -> Path:
    return Path(__file__).resolve().parents[1]


def default_config_path() -> Optional[Path]:
    for name in ("devices.json", "devices.sample.json"):
        path = _project_root() / name
        if path.exists():
            return path
    return None


def _resolve_section(config: Dict[str, Any], section: str, source: str) -> Dict[str, Any]:
    entry = config.get(section, {})
    if not isinstance(entry, dict):
        raise DeviceConfigError("must be an object", source=source, field=section)
    entry = dict(entry)
    values: Dict[str, Any] = {}
    preset = entry.pop("preset", None)
    if preset is not None:
        presets = config.get("presets", {})
        if preset not in presets:
            raise DeviceConfigError(f"unknown preset '{preset}'. Allowed: {list(presets.keys())}",
                                    source=source, field=f"{section}.preset")
        values.update(presets[preset])
    values.update(entry)
    return values


def _build(model_cls: Type[BaseModel], values: Dict[str, Any], section: str, source: str):
    try:
        return model_cls(**values)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or section
        raise DeviceConfigError(error["msg"], source=source, field=f"{section}.{key}") from None


def parse_device_config(config: Dict[str, Any], source: str = "<device config>") -> Tuple[FpgaModel, LinkModel]:
    if not isinstance(config, dict):
        raise DeviceConfigError("device config must be a JSON object", source=source)
    unknown = set(config) - set(_SECTIONS)
    if unknown:
        raise DeviceConfigError(f"unknown keys {sorted(unknown)}. Allowed: {list(_SECTIONS)}", source=source,
                                field=sorted(unknown)[0])
    presets = config.get("presets", {})
    if not isinstance(presets, dict) or not all(isinstance(p, dict) for p in presets.values()):
        raise DeviceConfigError("presets must map names to objects", source=source, field="presets")
    fpga = _build(FpgaModel, _resolve_section(config, "fpga", source), "fpga", source)
    link = _build(LinkModel, _resolve_section(config, "link", source), "link", source)
    return fpga, link


def load_device_config(path=None) -> Tuple[FpgaModel, LinkModel]:
    """FPGA and link models from `path`, or from the project defaults when no path is given."""
    if path is None:
        path = default_config_path()
        if path is None:
            return FpgaModel(), LinkModel()
    source = str(path)
    if not os.path.exists(source):
        raise DeviceConfigError("file not found", source=source)
    try:
        config = load_json(source)
    except json.JSONDecodeError as e:
        raise DeviceConfigError(f"invalid JSON: {e.msg}", source=source, field=f"line {e.lineno}") from None
    except UnicodeDecodeError as e:
        raise DeviceConfigError(f"not UTF-8 text (byte {e.start})", source=source) from None
    return parse_device_config(config, source)


def load_device_models(device_config=None, calibration=None) -> DeviceModels:
    if calibration is None:
        calibration = _project_root() / "fixtures" / "calibration" / "fpga_favorable.csv"
    fpga, link = load_device_config(device_config)
    return DeviceModels(fpga=fpga, link=link, gpu=read_calibration(calibration))
