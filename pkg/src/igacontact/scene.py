"""Scene configuration files and the tube-on-sheath reference scene.

Config files are YAML documents with one block per concern.  Every block that
carries dimensional numbers declares its ``units``; values are converted to SI
at parse time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path

import yaml

from .contact import ContactConfig
from .elasticity import Material
from .nurbs import make_annulus_patch, refine
from .solver import Body, ConfigError, LoadSchedule, Scene, SolverConfig

LENGTH_UNITS = {"m": 1.0, "mm": 1000.0}  # divisors to metres
STRESS_UNITS = {"Pa": 1.0, "MPa": 1e6, "GPa": 1e9}


@dataclass(frozen=True)
class SceneConfig:
    """All inputs of a run, in SI units."""

    sheath_inner_radius: float = 29.225e-3
    sheath_outer_radius: float = 30.225e-3
    tube_inner_radius: float = 6.35e-3
    tube_outer_radius: float = 7.1e-3
    arc_span: float = 2 * math.pi / 3
    contact_point: tuple[float, float] = (0.0, 0.0)
    tube: Material = field(default_factory=lambda: Material(2.0e11, 0.3))
    sheath: Material = field(default_factory=lambda: Material(7.0e8, 0.35))
    contact: ContactConfig = field(default_factory=ContactConfig)
    schedule: LoadSchedule = field(default_factory=LoadSchedule)
    solver: SolverConfig = field(default_factory=SolverConfig)
    insertions: int = 4
    output_dir: str = "results"
    name: str = "tube-sheath"

    def with_(self, **changes) -> "SceneConfig":
        return replace(self, **changes)

    def with_contact(self, **changes) -> "SceneConfig":
        return replace(self, contact=replace(self.contact, **changes))


def build_scene(cfg: SceneConfig = SceneConfig()) -> Scene:
    """Tube sector resting inside the bottom of a sheath sector.

    Both bodies are annular sectors of ``arc_span`` centred on the downward
    vertical through ``contact_point``, where the tube's outer arc touches
    the sheath's inner arc.  The tube (slave) is driven on its inner arc and
    the sheath (master) is clamped on its outer arc.
    """
    if cfg.tube_outer_radius >= cfg.sheath_inner_radius:
        raise ConfigError("tube must fit inside the sheath")
    if cfg.insertions < 0:
        raise ConfigError("insertions must be non-negative")
    cx, cy = cfg.contact_point
    th0 = -0.5 * math.pi - 0.5 * cfg.arc_span
    th1 = -0.5 * math.pi + 0.5 * cfg.arc_span
    sheath = make_annulus_patch((cx, cy + cfg.sheath_inner_radius), cfg.sheath_inner_radius, cfg.sheath_outer_radius, th0, th1)
    tube = make_annulus_patch((cx, cy + cfg.tube_outer_radius), cfg.tube_inner_radius, cfg.tube_outer_radius, th0, th1)
    # v = 0 is the outer arc, v = 1 the inner arc; the unrefined patches
    # serve as exact reference geometry for the contact surfaces
    slave = Body("tube", refine(tube, cfg.insertions), cfg.tube, contact_edge="v0", driven_edges=("v1",), geometry=tube)
    master = Body(
        "sheath", refine(sheath, cfg.insertions), cfg.sheath, contact_edge="v1", fixed_edges=("v0",), geometry=sheath
    )
    return Scene(
        slave,
        master,
        contact=cfg.contact,
        schedule=cfg.schedule,
        solver=cfg.solver,
        refinement=cfg.insertions,
        name=cfg.name,
    )


class _Located(dict):
    """Mapping that remembers the source line of each key."""

    def __init__(self, *a, lines=None, **kw):
        super().__init__(*a, **kw)
        self.lines = lines or {}


def _to_python(node):
    if isinstance(node, yaml.MappingNode):
        out = _Located(lines={})
        for k, v in node.value:
            key = k.value
            if key in out:
                raise ConfigError(f"line {k.start_mark.line + 1}: duplicate key {key!r}")
            out[key] = _to_python(v)
            out.lines[key] = k.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v) for v in node.value]
    return yaml.SafeLoader("").construct_object(node, deep=True)


class _Reader:
    def __init__(self, block: _Located, name: str, parent_line: int = 0):
        self.block = block if block is not None else _Located()
        self.name = name
        self.line = parent_line
        self.used = {"units"}

    def err(self, key, msg):
        line = self.block.lines.get(key, self.line) if isinstance(self.block, _Located) else self.line
        where = f"line {line}: " if line else ""
        return ConfigError(f"{where}{self.name}.{key}: {msg}")

    def get(self, key, default, kind=float, check=None):
        self.used.add(key)
        if key not in self.block:
            return default
        raw = self.block[key]
        try:
            if kind is float and isinstance(raw, str):
                raw = float(raw)
            val = kind(raw)
            if kind in (int, float) and isinstance(raw, bool):
                raise TypeError
        except (TypeError, ValueError):
            raise self.err(key, f"expected {kind.__name__}, got {raw!r}") from None
        if check is not None:
            problem = check(val)
            if problem:
                raise self.err(key, problem)
        return val

    def sub(self, key):
        self.used.add(key)
        val = self.block.get(key)
        if val is not None and not isinstance(val, dict):
            raise self.err(key, "expected a nested block")
        line = self.block.lines.get(key, self.line) if isinstance(self.block, _Located) else self.line
        return _Reader(val, f"{self.name}.{key}", line)

    def units(self, table, default):
        u = self.block.get("units", default)
        if u not in table:
            raise self.err("units", f"unknown unit {u!r}; expected one of {sorted(table)}")
        return table[u]

    def finish(self):
        for key in self.block:
            if key not in self.used:
                raise self.err(key, "unknown key")


def _si(value: float, divisor: float) -> float:
    """``value / divisor`` rounded once, from the decimal literal as written."""
    return float(Decimal(repr(float(value))) / Decimal(repr(float(divisor))))


def _positive(v):
    return None if v > 0 else "must be positive"


def parse_config(text: str, source: str = "<config>") -> SceneConfig:
    """Parse a scene document; errors name the offending line."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"line {mark.line + 1}: " if mark else ""
        raise ConfigError(f"{source}: {line}malformed config: {getattr(exc, 'problem', exc)}") from None
    if node is None:
        return SceneConfig()
    data = _to_python(node)
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    top = _Reader(data, "scene")
    d = SceneConfig()
    try:
        g = top.sub("geometry")
        L = g.units(LENGTH_UNITS, "mm")
        sh, tb = g.sub("sheath"), g.sub("tube")
        s_in = _si(sh.get("inner_diameter", d.sheath_inner_radius * 2 * L, check=_positive), 2 * L)
        s_out = _si(sh.get("outer_diameter", d.sheath_outer_radius * 2 * L, check=_positive), 2 * L)
        t_in = _si(tb.get("inner_diameter", d.tube_inner_radius * 2 * L, check=_positive), 2 * L)
        t_out = _si(tb.get("outer_diameter", d.tube_outer_radius * 2 * L, check=_positive), 2 * L)
        for r in (sh, tb):
            r.finish()
        if not s_in < s_out:
            raise sh.err("outer_diameter", "must exceed inner_diameter")
        if not t_in < t_out:
            raise tb.err("outer_diameter", "must exceed inner_diameter")
        if not t_out < s_in:
            raise tb.err("outer_diameter", "tube must fit inside the sheath")
        span = g.get(
            "arc_span_deg", math.degrees(d.arc_span), check=lambda v: None if 0 < v < 180 else "must lie in (0, 180)"
        )
        cp = g.get("contact_point", [0.0, 0.0], kind=list)
        if len(cp) != 2 or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in cp):
            raise g.err("contact_point", "expected [x, y]")
        contact_point = (_si(cp[0], L), _si(cp[1], L))
        g.finish()

        mat = top.sub("materials")
        S = mat.units(STRESS_UNITS, "MPa")
        mats = {}
        for name, dm in (("tube", d.tube), ("sheath", d.sheath)):
            r = mat.sub(name)
            E = r.get("young_modulus", dm.young_modulus / S, check=_positive) * S
            nu = r.get(
                "poisson_ratio", dm.poisson_ratio, check=lambda v: None if 0 <= v <= 0.49 else "must lie in [0, 0.49]"
            )
            r.finish()
            mats[name] = Material(E, nu)
        mat.finish()

        c = top.sub("contact")
        penalty = c.get("penalty", d.contact.penalty, check=_positive)
        factor = c.get("penalty_times_tube_modulus", None, check=_positive)
        if factor is not None:
            if "penalty" in c.block:
                raise c.err("penalty_times_tube_modulus", "give either penalty or penalty_times_tube_modulus")
            penalty = factor * mats["tube"].young_modulus
        mode = c.get("boundary_mode", d.contact.boundary_mode, kind=str)
        if mode not in ("exact", "faceted"):
            raise c.err("boundary_mode", "expected 'exact' or 'faceted'")
        integration = c.get("integration", d.contact.integration, kind=str)
        if integration not in ("pointwise", "consistent"):
            raise c.err("integration", "expected 'pointwise' or 'consistent'")
        contact = ContactConfig(
            penalty=penalty,
            projection_tol=c.get("projection_tol", d.contact.projection_tol, check=_positive),
            max_iterations=c.get("max_iterations", d.contact.max_iterations, kind=int, check=_positive),
            boundary_mode=mode,
            segments=c.get("segments", d.contact.segments, kind=int, check=lambda v: None if v >= 2 else "must be >= 2"),
            integration=integration,
        )
        c.finish()

        ld = top.sub("load")
        LL = ld.units(LENGTH_UNITS, "m")
        inc = _si(ld.get("increment", d.schedule.increment * LL, check=_positive), LL)
        tot = _si(ld.get("total", d.schedule.total * LL, check=_positive), LL)
        try:
            schedule = LoadSchedule(inc, tot)
        except ConfigError as exc:
            raise ld.err("total", str(exc)) from None
        ld.finish()

        rf = top.sub("refinement")
        ins = rf.get("insertions", d.insertions, kind=int, check=lambda v: None if v >= 0 else "must be >= 0")
        rf.finish()

        so = top.sub("solver")
        solver = SolverConfig(
            gauss_points=so.get("gauss_points", 3, kind=int, check=lambda v: None if 1 <= v <= 10 else "must be 1..10"),
        )
        so.finish()

        out = top.sub("output")
        outdir = out.get("directory", d.output_dir, kind=str)
        out.finish()
        name = top.get("name", d.name, kind=str)
        top.finish()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    return SceneConfig(
        sheath_inner_radius=s_in,
        sheath_outer_radius=s_out,
        tube_inner_radius=t_in,
        tube_outer_radius=t_out,
        arc_span=math.radians(span),
        contact_point=contact_point,
        tube=mats["tube"],
        sheath=mats["sheath"],
        contact=contact,
        schedule=schedule,
        solver=solver,
        insertions=ins,
        output_dir=outdir,
        name=name,
    )


def load_config(path) -> SceneConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))
