"""INI configuration files for scenarios.

Sections mirror the :class:`Scenario` fields::

    [scenario]    name, kind, description, units
    [mesh]        kind, h, L, H, pattern, holes, radius, path, seed, size_factor
    [material]    mode, E, nu, mu, Gc
    [boundary.T]  region, kind, value, mask          (one section per tag T)
    [crack]       initial, N, seed, filter
    [loading]     du, u_final, beta, force_tag, force_direction
    [analysis]    speed_reference
    [output]      dir, snapshot_every
    [convergence] levels, tau, a

Vectors are whitespace separated, lists of vectors are separated by
commas (``initial = 0 0.5, 1 0.5``), booleans are ``true``/``false``.
"""

from __future__ import annotations

import configparser
import hashlib
from pathlib import Path

from .scenario import (
    BoundarySpec,
    ConvergenceSpec,
    MaterialSpec,
    MeshSpec,
    Scenario,
    ScenarioError,
    validate,
)

_SECTIONS = {
    "scenario": {"name", "kind", "description", "units"},
    "mesh": {"kind", "h", "L", "H", "pattern", "holes", "radius", "path", "seed", "size_factor"},
    "material": {"mode", "E", "nu", "mu", "Gc"},
    "crack": {"initial", "N", "seed", "filter"},
    "loading": {"du", "u_final", "beta", "force_tag", "force_direction"},
    "analysis": {"speed_reference"},
    "output": {"dir", "snapshot_every"},
    "convergence": {"levels", "tau", "a"},
}
_BOUNDARY_KEYS = {"region", "kind", "value", "mask"}


class ConfigError(ScenarioError):
    pass


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (E, Gc, L, H)
    return cp


def _get(cp, section, key, conv, default=None):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    if raw == "":
        return default
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from None


def _floats(raw: str) -> tuple:
    return tuple(float(x) for x in raw.split())


def _ints(raw: str) -> tuple:
    return tuple(int(x) for x in raw.split())


def _bools(raw: str) -> tuple:
    table = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}
    try:
        return tuple(table[x.lower()] for x in raw.split())
    except KeyError as exc:
        raise ValueError(str(exc)) from None


def _points(raw: str) -> tuple:
    return tuple(_floats(p) for p in raw.split(",") if p.strip())


def parse_config(text: str, source: str = "<string>") -> Scenario:
    """Parse and validate configuration text."""
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    for sec in cp.sections():
        if sec.startswith("boundary."):
            allowed = _BOUNDARY_KEYS
        elif sec in _SECTIONS:
            allowed = _SECTIONS[sec]
        else:
            raise ConfigError(sec, "unknown section")
        for key in cp[sec]:
            if key not in allowed:
                raise ConfigError(f"{sec}.{key}", "unknown key")
    if not cp.has_section("scenario"):
        raise ConfigError("scenario", "missing section")

    name = _get(cp, "scenario", "name", str)
    if not name:
        raise ConfigError("scenario.name", "missing")
    mesh = MeshSpec(
        kind=_get(cp, "mesh", "kind", str, "structured"),
        h=_get(cp, "mesh", "h", float, None),
        L=_get(cp, "mesh", "L", float, 1.0),
        H=_get(cp, "mesh", "H", float, 1.0),
        pattern=_get(cp, "mesh", "pattern", str, "crossed"),
        holes=_get(cp, "mesh", "holes", _points, ()),
        radius=_get(cp, "mesh", "radius", float, 1.0),
        path=_get(cp, "mesh", "path", str, ""),
        seed=_get(cp, "mesh", "seed", int, 0),
        size_factor=_get(cp, "mesh", "size_factor", float, 1.5),
    )
    if mesh.path and not Path(mesh.path).is_absolute() and source != "<string>":
        mesh.path = str(Path(source).parent / mesh.path)
    material = MaterialSpec(
        mode=_get(cp, "material", "mode", str, "plane_strain"),
        E=_get(cp, "material", "E", float),
        nu=_get(cp, "material", "nu", float),
        mu=_get(cp, "material", "mu", float),
        Gc=_get(cp, "material", "Gc", float),
    )
    boundaries = []
    for sec in cp.sections():
        if not sec.startswith("boundary."):
            continue
        tag = sec[len("boundary."):]
        region = _get(cp, sec, "region", str)
        if not region:
            raise ConfigError(f"{sec}.region", "missing")
        boundaries.append(BoundarySpec(
            tag=tag, region=region,
            kind=_get(cp, sec, "kind", str, "neumann"),
            value=_get(cp, sec, "value", _floats, ()),
            mask=_get(cp, sec, "mask", _bools, None)))
    conv_default = ConvergenceSpec()
    sc = Scenario(
        name=name,
        kind=_get(cp, "scenario", "kind", str, "quasi-static"),
        description=_get(cp, "scenario", "description", str, ""),
        units=_get(cp, "scenario", "units", str, ""),
        mesh=mesh,
        material=material,
        boundaries=boundaries,
        initial_crack=_get(cp, "crack", "initial", _points, ()),
        du=_get(cp, "loading", "du", float, None),
        u_final=_get(cp, "loading", "u_final", float, None),
        N=_get(cp, "crack", "N", int, 6),
        seed=_get(cp, "crack", "seed", int, 0),
        path_filter=_get(cp, "crack", "filter", str, ""),
        beta=_get(cp, "loading", "beta", float, 2.0),
        force_tag=_get(cp, "loading", "force_tag", str, ""),
        force_direction=_get(cp, "loading", "force_direction", _floats, ()),
        speed_reference=_get(cp, "analysis", "speed_reference", float, None),
        output_dir=_get(cp, "output", "dir", str, ""),
        snapshot_every=_get(cp, "output", "snapshot_every", int, 0),
        convergence=ConvergenceSpec(
            levels=_get(cp, "convergence", "levels", _ints, conv_default.levels),
            tau=_get(cp, "convergence", "tau", float, conv_default.tau),
            a=_get(cp, "convergence", "a", float, conv_default.a)),
    )
    if sc.mesh.h is None:
        if sc.mesh.kind == "disk" and sc.convergence.levels:
            sc.mesh.h = sc.mesh.radius / sc.convergence.levels[0]
        elif sc.mesh.kind != "file":
            raise ConfigError("mesh.h", "missing")
        else:
            sc.mesh.h = 0.0
    if sc.kind != "convergence":
        if sc.du is None:
            raise ConfigError("loading.du", "missing")
        if sc.u_final is None:
            raise ConfigError("loading.u_final", "missing")
    else:
        sc.du = 1.0 if sc.du is None else sc.du
        sc.u_final = 1.0 if sc.u_final is None else sc.u_final
    try:
        validate(sc)
    except ScenarioError as exc:
        raise ConfigError(exc.field, str(exc).split(": ", 1)[-1]) from None
    return sc


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (tuple, list)):
        if x and isinstance(x[0], (tuple, list)):
            return ", ".join(_fmt(p) for p in x)
        return " ".join(_fmt(v) for v in x)
    return str(x)


def dump_config(sc: Scenario) -> str:
    """Configuration text that parses back to ``sc``."""
    cp = _parser()

    def put(section, **values):
        cp.add_section(section)
        for k, v in values.items():
            if v is None or v == "" or v == ():
                continue
            cp.set(section, k, _fmt(v))

    put("scenario", name=sc.name, kind=sc.kind, description=sc.description, units=sc.units)
    m = sc.mesh
    put("mesh", kind=m.kind, h=m.h, L=m.L, H=m.H, pattern=m.pattern, holes=m.holes,
        radius=m.radius, path=m.path, seed=m.seed, size_factor=m.size_factor)
    mat = sc.material
    put("material", mode=mat.mode, E=mat.E, nu=mat.nu, mu=mat.mu, Gc=mat.Gc)
    for b in sc.boundaries:
        put(f"boundary.{b.tag}", region=b.region, kind=b.kind, value=b.value, mask=b.mask)
    put("crack", initial=sc.initial_crack, N=sc.N, seed=sc.seed, filter=sc.path_filter)
    put("loading", du=sc.du, u_final=sc.u_final, beta=sc.beta, force_tag=sc.force_tag,
        force_direction=sc.force_direction)
    put("analysis", speed_reference=sc.speed_reference)
    put("output", dir=sc.output_dir, snapshot_every=sc.snapshot_every)
    c = sc.convergence
    put("convergence", levels=c.levels, tau=c.tau, a=c.a)
    lines = []
    for sec in cp.sections():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
        lines.append("")
    return "\n".join(lines)


def config_hash(sc: Scenario) -> str:
    return hashlib.sha256(dump_config(sc).encode()).hexdigest()
