"""Scenario files: INI text with physical units, plus dotted overrides.

A scenario file has up to six sections; every key is optional and falls back
to the :class:`~ghostsim.experiments.ScenarioConfig` defaults::

    [scenario]
    name = fig1a
    experiment = coherence_transition   ; ghost_diffraction | coherence_transition
                                         ; coherent_limit | oracle
    focal = 200 mm
    D0_list = 10mm, 1mm, 0.1mm, 0

    [source]
    method = spectral      ; spectral | physical | plane_wave
    D0 = 10 mm
    z = 395 mm
    wavelength = 532 nm

    [diaphragm]
    D = 3 mm
    shape = slit           ; slit | circle

    [object]
    type = phase_double_slit
    phi = pi
    slit_width = 160 um
    separation = 530 um

    [grid]
    n = 2048
    dx = 3 um
    dims = 1

    [run]
    frames = 50000
    seed = 20041220

Lengths accept the suffixes ``m``, ``mm``, ``um`` (or ``µm``) and ``nm``; a bare
number is metres.  Phases accept ``pi`` multiples (``pi``, ``0.5pi``, ``pi/2``).
Overrides address keys as ``section.key=value``, e.g. ``source.D0=0.1mm``.
Every error is a :class:`~ghostsim.errors.ConfigError` naming the key and,
for file entries, the line.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, replace
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError
from .experiments import EXPERIMENTS, ScenarioConfig
from .field import Grid
from .io import load_map_csv
from .objects import (
    CustomAmplitude,
    CustomPhase,
    Diaphragm,
    DoubleSlit,
    PhaseDoubleSlit,
    PhaseGrating,
    PhaseStep,
    SingleSlit,
)

__all__ = [
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "parse_override",
    "parse_length",
    "parse_phase",
    "NUMERIC_KEYS",
]

_LENGTH_UNITS = {"m": 0, "mm": -3, "um": -6, "µm": -6, "μm": -6, "nm": -9}  # powers of ten
_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_LENGTH_RE = re.compile(rf"^\s*({_NUMBER})\s*([a-zµμ]*)\s*$")

# key -> value kind, per section
_SCHEMA = {
    "scenario": {
        "name": "str",
        "experiment": "str",
        "focal": "length",
        "object_distance": "length",
        "d0_list": "length_list",
        "width_frames": "int",
        "control": "bool",
        "control_frames": "int",
        "outputs": "str_list",
    },
    "source": {
        "method": "str",
        "d0": "length",
        "z": "length",
        "wavelength": "length",
        "lambda": "length",
        "target_dx_speckle": "length_opt",
        "shape": "str",
        "envelope": "length_opt",
    },
    "diaphragm": {"d": "length", "shape": "str"},
    "object": {
        "type": "str",
        "phi": "phase",
        "width": "length_opt",
        "period": "length",
        "slit_width": "length",
        "separation": "length",
        "a": "length",
        "d": "length",
        "map": "str",
    },
    "grid": {"n": "int", "dx": "length", "dims": "int"},
    "run": {
        "frames": "int",
        "seed": "int",
        "workers": "int_opt",
        "chunk": "int_opt",
        "quick": "bool",
    },
}

NUMERIC_KEYS = frozenset(
    f"{sec}.{key}"
    for sec, keys in _SCHEMA.items()
    for key, kind in keys.items()
    if kind in ("length", "length_opt", "phase", "int", "int_opt")
)

_OBJECT_TYPES = {
    "phase_step": (PhaseStep, ("phi", "width")),
    "phase_grating": (PhaseGrating, ("phi", "period", "width")),
    "phase_double_slit": (PhaseDoubleSlit, ("phi", "slit_width", "separation")),
    "double_slit": (DoubleSlit, ("a", "d")),
    "single_slit": (SingleSlit, ("a",)),
    "custom_phase": (CustomPhase, ("map",)),
    "custom_amplitude": (CustomAmplitude, ("map",)),
}


def parse_length(text: str) -> float:
    """``"160 um"`` -> ``1.6e-4``.  A bare number is in metres."""
    m = _LENGTH_RE.match(str(text))
    if not m:
        raise ValueError(f"not a length: {text!r}")
    unit = m.group(2) or "m"
    if unit not in _LENGTH_UNITS:
        raise ValueError(f"unknown length unit {unit!r} (use m, mm, um or nm)")
    # decimal scaling keeps "100 um" exactly equal to 100e-6
    v = float(Decimal(m.group(1)).scaleb(_LENGTH_UNITS[unit]))
    if not math.isfinite(v):
        raise ValueError(f"not a finite length: {text!r}")
    return v


def parse_phase(text: str) -> float:
    """Radians; accepts ``pi``, ``2pi``, ``0.5*pi``, ``pi/2`` and plain numbers."""
    s = str(text).strip().lower().replace(" ", "")
    m = re.fullmatch(rf"({_NUMBER})?\*?pi(?:/({_NUMBER}))?", s)
    if m:
        k = float(m.group(1)) if m.group(1) else 1.0
        div = float(m.group(2)) if m.group(2) else 1.0
        return k * math.pi / div
    return float(s)


def _parse_bool(text: str) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    v = float(str(text).strip())
    if not v.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _convert(kind: str, text: str):
    text = str(text).strip()
    if kind.endswith("_opt"):
        if text == "" or text.lower() == "none":
            return None
        kind = kind[:-4]
    if kind == "str":
        return text
    if kind == "str_list":
        return tuple(t.strip() for t in text.split(",") if t.strip())
    if kind == "length":
        return parse_length(text)
    if kind == "length_list":
        return tuple(parse_length(t) for t in text.split(",") if t.strip())
    if kind == "phase":
        return parse_phase(text)
    if kind == "int":
        return _parse_int(text)
    if kind == "bool":
        return _parse_bool(text)
    raise AssertionError(kind)


@dataclass(frozen=True)
class Scenario:
    """A resolved scenario: the config plus where it came from.

    ``values`` holds the parsed ``section.key`` entries after overrides;
    ``text`` is the source text used for the config hash.
    """

    config: ScenarioConfig
    values: Mapping[str, object]
    text: str
    path: Path | None = None

    @property
    def sha256(self) -> str:
        """Hash of the file text plus the applied overrides, in order."""
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


def _key_lines(text: str) -> dict:
    """``section.key`` -> 1-based line number of its entry in the file."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section:
            out.setdefault(f"{section}.{m.group(1).strip().lower()}", i)
    return out


def parse_override(item: str) -> tuple[str, str]:
    """``"source.D0=0.1mm"`` -> ``("source.d0", "0.1mm")``."""
    key, sep, value = item.partition("=")
    key = key.strip().lower()
    if not sep or "." not in key:
        raise ConfigError(f"override {item!r} must look like section.key=value", key=key or item)
    return key, value.strip()


def _check_key(key: str, line=None):
    sec, _, name = key.partition(".")
    if sec not in _SCHEMA:
        raise ConfigError(f"unknown section [{sec}]", key=key, line=line)
    if name not in _SCHEMA[sec]:
        raise ConfigError(f"unknown key {name!r} in [{sec}]", key=key, line=line)
    return _SCHEMA[sec][name]


def parse_scenario(
    text: str,
    overrides: Iterable[str] = (),
    base_dir: Path | str | None = None,
    path: Path | str | None = None,
) -> Scenario:
    """Parse scenario text, apply ``section.key=value`` overrides, build the config.

    Raises
    ------
    ConfigError
        Syntax errors, unknown sections or keys, bad values and invalid
        combinations.  The message names the key and the file line.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        raise ConfigError(f"malformed scenario file: {e.message.splitlines()[0]}", line=line) from None
    lines = _key_lines(text)
    raw = {}
    for sec in cp.sections():
        secl = sec.lower()
        if secl not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", key=sec, line=_section_line(text, sec))
        for name, value in cp.items(sec):
            key = f"{secl}.{name.lower()}"
            raw[key] = (value, lines.get(key))
    applied = []
    for item in overrides:
        key, value = parse_override(item)
        raw[key] = (value, None)
        applied.append(f"{key}={value}")

    values = {}
    for key, (value, line) in raw.items():
        kind = _check_key(key, line)
        try:
            values[key] = _convert(kind, value)
        except ValueError as e:
            raise ConfigError(f"bad value {value!r}: {e}", key=key, line=line) from None

    def at(key):
        return raw.get(key, (None, None))[1]

    try:
        cfg = _build(values, Path(base_dir) if base_dir else Path.cwd(), at)
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None
    full_text = text + "".join(f"\n#override {a}" for a in applied)
    return Scenario(cfg, values, full_text, Path(path) if path else None)


def _section_line(text, sec):
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip().lower() == f"[{sec.lower()}]":
            return i
    return None


def _build(v: Mapping, base: Path, at) -> ScenarioConfig:
    d = ScenarioConfig()

    def guarded(keys, fn):
        try:
            return fn()
        except (ValueError, TypeError) as e:
            key = next((k for k in keys if k in v), keys[0])
            raise ConfigError(str(e), key=key, line=at(key)) from None

    src_kw = {}
    for k, field_name in (
        ("source.method", "method"),
        ("source.d0", "D0"),
        ("source.z", "z"),
        ("source.wavelength", "wavelength"),
        ("source.lambda", "wavelength"),
        ("source.target_dx_speckle", "target_dx_speckle"),
        ("source.shape", "shape"),
        ("source.envelope", "envelope"),
    ):
        if k in v:
            src_kw[field_name] = v[k]
    src_keys = [k for k in v if k.startswith("source.")] or ["source.method"]
    source = guarded(src_keys, lambda: replace(d.source, **src_kw))

    dia = d.diaphragm
    dia = guarded(
        ["diaphragm.d", "diaphragm.shape"],
        lambda: Diaphragm(v.get("diaphragm.d", dia.D), v.get("diaphragm.shape", dia.shape)),
    )

    grid = guarded(
        ["grid.n", "grid.dx", "grid.dims"],
        lambda: Grid(v.get("grid.n", d.grid.n), v.get("grid.dx", d.grid.dx), v.get("grid.dims", d.grid.dims)),
    )

    obj = d.object
    if any(k.startswith("object.") for k in v):
        obj = _build_object(v, grid, base, at, guarded)

    exp = v.get("scenario.experiment", d.experiment)
    if exp not in EXPERIMENTS:
        key = "scenario.experiment"
        raise ConfigError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}", key=key, line=at(key))

    kw = dict(
        name=v.get("scenario.name", d.name),
        experiment=exp,
        source=source,
        diaphragm=dia,
        object=obj,
        focal=v.get("scenario.focal", d.focal),
        object_distance=v.get("scenario.object_distance", d.object_distance),
        grid=grid,
        frames=v.get("run.frames", d.frames),
        seed=v.get("run.seed", d.seed),
        workers=v.get("run.workers", d.workers),
        chunk=v.get("run.chunk", d.chunk),
        D0_list=v.get("scenario.d0_list", d.D0_list),
        width_frames=v.get("scenario.width_frames", d.width_frames),
        control=v.get("scenario.control", d.control),
        control_frames=v.get("scenario.control_frames", d.control_frames),
        quick=v.get("run.quick", d.quick),
        outputs=v.get("scenario.outputs", d.outputs),
    )
    for key in ("run.seed",):
        if key in v and not 0 <= v[key] < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", key=key, line=at(key))
    if "scenario.d0_list" in v and not v["scenario.d0_list"]:
        raise ConfigError("D0_list must not be empty", key="scenario.d0_list", line=at("scenario.d0_list"))
    return guarded(["run.frames", "scenario.focal", "run.workers"], lambda: ScenarioConfig(**kw))


def _build_object(v, grid, base, at, guarded):
    kind = v.get("object.type")
    if kind is None:
        raise ConfigError("missing object type", key="object.type")
    if kind not in _OBJECT_TYPES:
        raise ConfigError(
            f"unknown object type {kind!r}; choose from {', '.join(_OBJECT_TYPES)}", key="object.type", line=at("object.type")
        )
    cls, allowed = _OBJECT_TYPES[kind]
    for k in v:
        if k.startswith("object.") and k not in ("object.type",) and k.split(".", 1)[1] not in allowed:
            raise ConfigError(f"key does not apply to object type {kind!r}", key=k, line=at(k))
    if "map" in allowed:
        key = "object.map"
        if key not in v:
            raise ConfigError(f"object type {kind!r} needs a map file", key=key)
        p = Path(v[key])
        p = p if p.is_absolute() else base / p
        try:
            arr = load_map_csv(p, grid)
        except OSError as e:
            raise ConfigError(f"cannot read map: {e.strerror}", key=key, line=at(key)) from None
        except ValueError as e:
            raise ConfigError(str(e), key=key, line=at(key)) from None
        return guarded([key], lambda: cls(arr))
    kw = {name: v[f"object.{name}"] for name in allowed if f"object.{name}" in v}
    return guarded([f"object.{n}" for n in allowed], lambda: cls(**kw))


def load_scenario(path, overrides: Iterable[str] = ()) -> Scenario:
    """Read and parse a scenario file; relative map paths resolve next to it."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path}: {e.strerror}") from None
    return parse_scenario(text, overrides, base_dir=path.parent, path=path)
