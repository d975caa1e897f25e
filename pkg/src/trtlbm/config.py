"""Flat ``section.key = value`` experiment configuration.

Values may be numbers, fractions such as ``96/73``, arithmetic on ``pi``,
bracketed or comma-separated lists, booleans, or bare strings.  ``#``
starts a comment.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field

import numpy as np

from .kernel import GridSpec, InitialDatum
from .scheme import FluxModel, RelaxPair, SchemeSpec, burgers, d1q3, d2q5, rotated_burgers, validate

DEFAULTS = {
    "scheme.preset": "d1q3",
    "scheme.lam": 2.0,
    "flux.name": "burgers",
    "datum.name": "indicator",
    "grid.low": -1.0,
    "grid.high": 1.0,
    "grid.n0": 64,
    "grid.levels": 10,
    "run.T": 0.25,
    "run.observe_every": 1,
    "run.oracle_refine": 32,
    "run.reference": "auto",
    "output.dir": "out",
    "output.fields": True,
    "output.distributions": False,
    "region.resolution": 512,
    "check.m": None,
    "maxprinciple.threshold": 1e-6,
}


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_eval_node(e) for e in node.elts]
    raise ValueError("not arithmetic")


def parse_value(text: str):
    """Arithmetic, list, bool or string; integers stay integers."""
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if not low:
        return None
    try:
        return _eval_node(ast.parse(text, mode="eval").body)
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError):
        pass
    if text.startswith("[") and text.endswith("]"):
        return [parse_value(part) for part in _split_top(text[1:-1]) if part.strip()]
    parts = _split_top(text)
    if len(parts) > 1:
        return [parse_value(part) for part in parts]
    return text


def _split_top(text: str) -> list[str]:
    """Split on commas that are not nested in brackets or parentheses."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


def parse_text(text: str) -> dict:
    values, lines = {}, {}
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=num)
        key, _, val = line.partition("=")
        key = key.strip()
        if "." not in key:
            raise ConfigError("keys must be dotted, e.g. 'grid.n'", key=key, line=num)
        if key in values:
            raise ConfigError("duplicate key", key=key, line=num)
        values[key] = parse_value(val)
        lines[key] = num
    return {"values": values, "lines": lines}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parsed = parse_text(text)
        return cls(parsed["values"], parsed["lines"])

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    @classmethod
    def from_dict(cls, values: dict) -> "ExperimentConfig":
        return cls(dict(values), {})

    def has(self, key: str) -> bool:
        return self.values.get(key) is not None

    def raw(self, key: str, default=None):
        if key in self.values and self.values[key] is not None:
            return self.values[key]
        return DEFAULTS.get(key, default)

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, key=key, line=self.lines.get(key))

    def number(self, key: str, default=None) -> float:
        v = self.raw(key, default)
        if v is None:
            raise self.error(key, "required value missing")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(key, f"expected a number, got {v!r}")
        return float(v)

    def integer(self, key: str, default=None) -> int:
        v = self.number(key, default)
        if v != int(v):
            raise self.error(key, f"expected an integer, got {v!r}")
        return int(v)

    def string(self, key: str, default=None) -> str:
        v = self.raw(key, default)
        if v is None:
            raise self.error(key, "required value missing")
        return str(v)

    def list(self, key: str, default=None) -> list:
        v = self.raw(key, default)
        if v is None:
            return []
        return list(v) if isinstance(v, list) else [v]

    def set(self, key: str, value) -> None:
        self.values[key] = value

    def expanded(self) -> dict:
        """Resolved settings with presets expanded, for manifests."""
        out = {k: v for k, v in DEFAULTS.items() if v is not None}
        out.update({k: v for k, v in self.values.items() if v is not None})
        spec = build_scheme(self)
        out["scheme.resolved.lam"] = spec.lam
        out["scheme.resolved.velocities"] = spec.velocities.tolist()
        out["scheme.resolved.eps_zero"] = spec.eps_zero
        out["scheme.resolved.eps_link"] = spec.eps_link.tolist()
        out["scheme.resolved.sigma"] = spec.sigma.tolist()
        out["datum.resolved.m"] = build_datum(self).m
        pairs = relax_list(self)
        if pairs:
            out["relax.resolved"] = [[p.omega_s, p.omega_a] for p in pairs]
        return out


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    return str(v)


def write_manifest(path, cfg: ExperimentConfig, extra: dict | None = None) -> None:
    items = cfg.expanded()
    if extra:
        items.update(extra)
    with open(path, "w") as fh:
        for key in sorted(items):
            fh.write(f"{key} = {format_value(items[key])}\n")


def build_scheme(cfg: ExperimentConfig) -> SchemeSpec:
    preset = cfg.string("scheme.preset")
    lam = cfg.number("scheme.lam")
    if preset == "d1q3":
        spec = d1q3(cfg.number("scheme.eps_link"), lam)
    elif preset == "d2q5":
        ex = cfg.number("scheme.eps_x", cfg.raw("scheme.eps_link"))
        ey = cfg.number("scheme.eps_y", ex)
        spec = d2q5(ex, ey, lam)
    elif preset == "custom":
        try:
            spec = SchemeSpec(
                lam=lam,
                velocities=np.asarray(cfg.raw("scheme.velocities"), dtype=float).reshape(len(cfg.list("scheme.eps_link")), -1),
                eps_zero=cfg.number("scheme.eps_zero"),
                eps_link=np.asarray(cfg.list("scheme.eps_link"), dtype=float),
                sigma=np.asarray(cfg.raw("scheme.sigma"), dtype=float).reshape(len(cfg.list("scheme.eps_link")), -1),
                name="custom",
            )
        except (TypeError, ValueError) as exc:
            raise cfg.error("scheme.velocities", f"malformed custom scheme: {exc}") from exc
    else:
        raise cfg.error("scheme.preset", f"unknown preset {preset!r}")
    problems = validate(spec)
    if problems:
        raise cfg.error("scheme.preset", "inconsistent scheme: " + "; ".join(map(str, problems)))
    return spec


def _custom_expr(cfg: ExperimentConfig, key: str, text: str):
    allowed = {name: getattr(np, name) for name in ("sin", "cos", "exp", "abs", "sqrt", "tanh", "sign", "pi")}
    try:
        code = compile(text, key, "eval")
    except SyntaxError as exc:
        raise cfg.error(key, f"bad expression {text!r}") from exc
    for name in code.co_names:
        if name not in allowed and name != "u":
            raise cfg.error(key, f"unknown name {name!r} in expression")
    return lambda u, _c=code: np.asarray(eval(_c, {"__builtins__": {}}, dict(allowed, u=u)), dtype=float) + 0.0 * u


def build_flux(cfg: ExperimentConfig, d: int) -> FluxModel:
    name = cfg.string("flux.name")
    if name == "burgers":
        if d == 1:
            return burgers()
        return rotated_burgers(cfg.number("flux.theta", math.pi / 4))
    if name == "rotated-burgers":
        return rotated_burgers(cfg.number("flux.theta", math.pi / 4))
    if name == "custom":
        comps = [str(c) for c in cfg.list("flux.components")]
        ders = [str(c) for c in cfg.list("flux.derivatives")]
        if len(comps) != d or len(ders) != d:
            raise cfg.error("flux.components", f"need {d} components and {d} derivatives")
        conv = [int(c) for c in cfg.list("flux.convexity")] or [0] * d
        sonic = [float(c) for c in cfg.list("flux.sonic_points")] or [0.0] * d
        return FluxModel(tuple(_custom_expr(cfg, "flux.components", c) for c in comps),
                         tuple(_custom_expr(cfg, "flux.derivatives", c) for c in ders),
                         name="custom", convexity=tuple(conv), sonic_points=tuple(sonic))
    raise cfg.error("flux.name", f"unknown flux {name!r}")


def _interval_average(lo, hi, antiderivative):
    return (antiderivative(hi) - antiderivative(lo)) / (hi - lo)


def _indicator_prim(a: float, b: float):
    return lambda x: np.clip(x, a, b) - a


def _hat_prim(x):
    x = np.asarray(x, dtype=float)
    left = np.clip(x, -0.5, 0.0)
    right = np.clip(x, 0.0, 0.5)
    return (left + 0.5) ** 2 + (0.25 - (0.5 - right) ** 2)


def _edges(grid: GridSpec):
    a, _ = grid.domain[0]
    e = a + np.arange(grid.n + 1) * grid.dx
    return e[:-1], e[1:]


def named_datum(name: str, d: int, *, value: float = 1.0, radius: float = 0.5) -> InitialDatum:
    if name == "indicator":
        if d == 1:
            prim = _indicator_prim(-0.5, 0.5)
            return InitialDatum(lambda x: (np.abs(x) <= 0.5).astype(float), 1.0,
                                lambda g: _interval_average(*_edges(g), prim), 2.0, "indicator")
        return InitialDatum(lambda *xs: np.all([np.abs(x) <= 0.5 for x in xs], axis=0).astype(float),
                            1.0, None, None, "indicator")
    if name == "double-indicator":
        if d != 1:
            raise ValueError("double-indicator is one-dimensional")
        p1, p2 = _indicator_prim(-0.75, -0.25), _indicator_prim(0.25, 0.75)
        return InitialDatum(lambda x: ((np.abs(x + 0.5) <= 0.25) | (np.abs(x - 0.5) <= 0.25)).astype(float), 1.0,
                            lambda g: _interval_average(*_edges(g), lambda x: p1(x) + p2(x)), 4.0, "double-indicator")
    if name == "hat":
        if d != 1:
            raise ValueError("hat is one-dimensional")
        return InitialDatum(lambda x: np.clip(1.0 - 2.0 * np.abs(x), 0.0, None), 1.0,
                            lambda g: _interval_average(*_edges(g), _hat_prim), 2.0, "hat")
    if name == "indicator-radial":
        return InitialDatum(lambda *xs: (sum(x * x for x in xs) <= radius * radius).astype(float), 1.0,
                            None, None, "indicator-radial")
    if name == "constant":
        return InitialDatum(lambda *xs: np.full(np.shape(xs[0]), value), abs(value),
                            lambda g: np.full(g.shape, value), 0.0, "constant")
    raise ValueError(f"unknown datum {name!r}")


def build_datum(cfg: ExperimentConfig, name: str | None = None) -> InitialDatum:
    d = build_scheme(cfg).d
    name = name or cfg.string("datum.name")
    if name == "custom":
        expr = cfg.string("datum.expression")
        allowed = {n: getattr(np, n) for n in ("sin", "cos", "exp", "abs", "sqrt", "pi", "where")}
        try:
            code = compile(expr, "datum.expression", "eval")
        except SyntaxError as exc:
            raise cfg.error("datum.expression", f"bad expression {expr!r}") from exc
        names = ["x", "y", "z"][:d]

        def pointwise(*xs, _c=code):
            return np.asarray(eval(_c, {"__builtins__": {}}, dict(allowed, **dict(zip(names, xs)))), dtype=float) + 0.0 * xs[0]

        datum = InitialDatum(pointwise, cfg.number("datum.m"), None, cfg.raw("datum.tv"), "custom")
    else:
        try:
            datum = named_datum(name, d, value=cfg.number("datum.value", 1.0), radius=cfg.number("datum.radius", 0.5))
        except ValueError as exc:
            raise cfg.error("datum.name", str(exc)) from exc
        if cfg.has("datum.m"):
            datum.m = cfg.number("datum.m")
    return datum


def parse_relax(text, key: str = "relax.preset", cfg: ExperimentConfig | None = None) -> RelaxPair:
    """``bgk:w``, ``magic:wa`` or a pair ``[ws, wa]``."""
    def fail(msg):
        return cfg.error(key, msg) if cfg is not None else ConfigError(msg, key=key)

    try:
        if isinstance(text, list) and len(text) == 2:
            return RelaxPair(float(text[0]), float(text[1]))
        kind, _, val = str(text).partition(":")
        w = parse_value(val)
        if not isinstance(w, (int, float)):
            raise fail(f"bad relaxation value in {text!r}")
        if kind == "bgk":
            return RelaxPair.bgk(float(w))
        if kind == "magic":
            return RelaxPair.magic(float(w))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise fail(str(exc)) from exc
    raise fail(f"expected 'bgk:w', 'magic:wa' or [ws, wa], got {text!r}")


def build_relax(cfg: ExperimentConfig) -> RelaxPair:
    if cfg.has("relax.preset"):
        return parse_relax(cfg.raw("relax.preset"), "relax.preset", cfg)
    if cfg.has("relax.omega_s") or cfg.has("relax.omega_a"):
        return parse_relax([cfg.number("relax.omega_s"), cfg.number("relax.omega_a")], "relax.omega_s", cfg)
    raise cfg.error("relax.preset", "no relaxation pair given")


def relax_sweep(cfg: ExperimentConfig) -> list[RelaxPair]:
    """Pairs from ``relax.sweep``: presets, or bare numbers on ``relax.line``."""
    line = cfg.raw("relax.line")
    out = []
    for item in cfg.list("relax.sweep"):
        if isinstance(item, (int, float)):
            if line not in ("magic", "bgk"):
                raise cfg.error("relax.line", "bare sweep values need relax.line = magic or bgk")
            out.append(parse_relax(f"{line}:{item!r}", "relax.sweep", cfg))
        else:
            out.append(parse_relax(item, "relax.sweep", cfg))
    return out


def relax_line(cfg: ExperimentConfig) -> tuple[str, np.ndarray]:
    """Scan values ``start, start+step, ..., <= stop`` along the magic line or the diagonal."""
    line = cfg.string("relax.line")
    if line not in ("magic", "bgk"):
        raise cfg.error("relax.line", f"expected 'magic' or 'bgk', got {line!r}")
    if cfg.has("relax.sweep"):
        vals = [float(v) for v in cfg.list("relax.sweep")]
        return line, np.asarray(vals)
    start, stop, stp = cfg.number("relax.start"), cfg.number("relax.stop"), cfg.number("relax.step")
    if stp <= 0 or stop < start:
        raise cfg.error("relax.step", "need step > 0 and stop >= start")
    count = int(math.floor((stop - start) / stp + 1e-9)) + 1
    return line, start + stp * np.arange(count)


def relax_list(cfg: ExperimentConfig) -> list[RelaxPair]:
    if cfg.has("relax.sweep") and not cfg.has("relax.start"):
        return relax_sweep(cfg)
    if cfg.has("relax.preset") or cfg.has("relax.omega_s"):
        return [build_relax(cfg)]
    return []


def build_grid(cfg: ExperimentConfig, n: int | None = None) -> GridSpec:
    spec = build_scheme(cfg)
    n = cfg.integer("grid.n") if n is None else n
    try:
        return GridSpec.uniform(spec.d, n, spec.lam, cfg.number("grid.low"), cfg.number("grid.high"))
    except ValueError as exc:
        raise cfg.error("grid.n", str(exc)) from exc


def n_ladder(cfg: ExperimentConfig, quick: bool = False) -> list[int]:
    if cfg.has("grid.n_list"):
        ns = [int(v) for v in cfg.list("grid.n_list")]
    else:
        n0, levels = cfg.integer("grid.n0"), cfg.integer("grid.levels")
        ns = [n0 * 2 ** i for i in range(levels)]
    return ns[:4] if quick else ns
