import inspect
from pathlib import Path
from typing import Any, Callable, Dict

from errors import ModelSemanticError
from log.log_util import load_json
from model import ModelGraph

TEMPLATES: Dict[str, Callable[..., ModelGraph]] = {}

# used when neither templates.json nor templates.sample.json is present
FALLBACK_DEFAULTS: Dict[str, Dict[str, int]] = {
    "fire": {"s1": 16, "e1": 64, "e3": 64, "h": 56, "w": 56, "c": 96},
    "bottleneck": {"out_channels": 16, "expansion": 6, "stride": 1, "h": 56, "w": 56, "c": 16},
    "shufflenet_unit": {"h": 28, "w": 28, "c": 48},
    "shufflenet_unit_down": {"out_channels": 48, "h": 56, "w": 56, "c": 24},
}


def _project_root() -> Path:
    # src/templates/templates_manager.py -> src -> project root
    return Path(__file__).resolve().parents[2]


def _load_json(path: Path) -> Dict[str, Any]:
    try:
        return load_json(path)
    except (ValueError, OSError):
        return {}


def template(func: Callable[..., ModelGraph]) -> Callable[..., ModelGraph]:
    """
    Decorator to register a function as a builtin module template.

    The function name is the template name; its keyword parameters are the template
    parameters, with `h`, `w`, `c` giving the input shape.
    """
    TEMPLATES[func.__name__] = func
    return func


def get_template(name: str) -> Callable[..., ModelGraph]:
    if name not in TEMPLATES:
        raise KeyError(f"Template '{name}' not found. Available templates: {list(TEMPLATES.keys())}")
    return TEMPLATES[name]


def list_templates() -> list:
    return list(TEMPLATES.keys())


def template_defaults(name: str) -> Dict[str, int]:
    """
    Default parameters for a template:
    - templates.json at the project root if it defines the template
    - otherwise templates.sample.json
    - otherwise the in-code fallback
    """
    root = _project_root()
    for path in (root / "templates.json", root / "templates.sample.json"):
        cfg = _load_json(path)
        if isinstance(cfg, dict) and isinstance(cfg.get(name), dict):
            return dict(cfg[name])
    return dict(FALLBACK_DEFAULTS.get(name, {}))


def builtin_module(name: str, params: Dict[str, int] = None) -> ModelGraph:
    """Build a template graph from its defaults overridden by `params`."""
    try:
        builder = get_template(name)
    except KeyError as e:
        raise ModelSemanticError(e.args[0], field="model") from None
    accepted = set(inspect.signature(builder).parameters)
    merged = {k: v for k, v in template_defaults(name).items() if k in accepted}
    for key, value in (params or {}).items():
        if key not in accepted:
            raise ModelSemanticError(f"template '{name}' has no parameter '{key}'. Allowed: {sorted(accepted)}",
                                     field=key)
        merged[key] = value
    missing = accepted - set(merged)
    if missing:
        raise ModelSemanticError(f"template '{name}' is missing parameters {sorted(missing)}", field="model")
    for key, value in merged.items():
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ModelSemanticError(f"template parameter must be a positive integer, got {value!r}", field=key)
    return builder(**merged)


def parse_builtin_reference(reference: str) -> ModelGraph:
    """`builtin:<name>[:key=value,...]` as given on the command line."""
    _, _, rest = reference.partition(":")
    name, _, arg_text = rest.partition(":")
    params = {}
    for item in filter(None, arg_text.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ModelSemanticError(f"malformed template argument '{item}'", field="--model")
        try:
            params[key.strip()] = int(value)
        except ValueError:
            raise ModelSemanticError(f"template argument '{key}' expects an integer", field="--model") from None
    return builtin_module(name.strip(), params)
