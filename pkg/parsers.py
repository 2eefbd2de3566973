# ------------------ Config and Signal Parsing ------------------
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from errors import ChannelCountMismatch, FhnIdentError, NonUniformSampling, ParseError, ValidationError
from filters import STARTS, FilterParams
from identify import GainMatrix
from integrate import IntegratorConfig
from model import (CouplingConfig, FhnParams, adjacency_from_edges, adjacency_from_generator, rotational_scheme,
                   theta_from_original, validate_fhn_params)

logger = logging.getLogger(__name__)

SECTIONS = {"name", "fhn", "coupling", "filter", "gain", "integrator", "init", "signals", "output"}


@dataclass(eq=False)
class SignalSource:
    path: str
    i_ext: float = 1.0


@dataclass(eq=False)
class SignalSet:
    channels: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=float))
        if not self.dt > 0:
            raise ValidationError("signal dt > 0")
        if self.channels.shape[0] < 2:
            raise ValidationError("signals need at least two samples")
        if not np.all(np.isfinite(self.channels)):
            raise ValidationError("signal samples must be finite")

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.channels.shape[0])

    @property
    def duration(self):
        return self.dt * (self.channels.shape[0] - 1)


@dataclass(eq=False)
class ExperimentConfig:
    coupling: CouplingConfig
    filter: FilterParams
    gain: GainMatrix
    integrator: IntegratorConfig
    theta0: np.ndarray
    fhn: FhnParams = None
    y0: np.ndarray = None
    v0: np.ndarray = None
    signals: SignalSource = None
    output: dict = field(default_factory=dict)
    name: str = "experiment"
    source: str = None

    def __post_init__(self):
        n = self.coupling.n
        self.theta0 = np.asarray(self.theta0, dtype=float).ravel()
        if self.theta0.size != self.gain.m:
            raise ValidationError(f"theta0 has {self.theta0.size} entries, gain matrix is {self.gain.m}x{self.gain.m}")
        has_state = self.y0 is not None
        if has_state and self.signals is not None:
            raise ValidationError("exactly one of simulation (fhn + initial state) or signals may be given")
        if self.signals is None:
            if self.fhn is None or not has_state:
                raise ValidationError("simulation mode needs both [fhn] and init.y0")
            self.y0 = np.asarray(self.y0, dtype=float).ravel()
            self.v0 = np.zeros(n) if self.v0 is None else np.asarray(self.v0, dtype=float).ravel()
            if self.y0.size != n or self.v0.size != n:
                raise ValidationError(f"initial state length must match adjacency dimension {n}")
            if not (np.all(np.isfinite(self.y0)) and np.all(np.isfinite(self.v0))):
                raise ValidationError("initial state entries must be finite")
        elif self.v0 is not None:
            raise ValidationError("exactly one of simulation (fhn + initial state) or signals may be given")

    @property
    def mode(self):
        return "data" if self.signals is not None else "simulation"

    @property
    def i_ext(self):
        return self.fhn.i_ext if self.fhn is not None else self.signals.i_ext


# ------------------ YAML Helpers ------------------
def _line_map(text):
    """Dotted key path -> 1-based line of its value in the YAML source."""
    lines = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                child = f"{path}.{key.value}" if path else str(key.value)
                lines[child] = key.start_mark.line + 1
                walk(value, child)
        elif isinstance(node, yaml.SequenceNode):
            for i, value in enumerate(node.value):
                lines[f"{path}[{i}]"] = value.start_mark.line + 1
                walk(value, f"{path}[{i}]")

    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, "")
    return lines


class _Reader:
    """Typed access to the raw YAML tree, raising ParseError with line/field."""

    def __init__(self, raw, lines):
        self.raw = raw
        self.lines = lines

    def fail(self, message, path):
        return ParseError(message, line=self.lines.get(path), field=path)

    def section(self, name, required=True):
        value = self.raw.get(name)
        if value is None:
            if required:
                raise ParseError(f"missing section [{name}]", field=name)
            return None
        if not isinstance(value, dict):
            raise self.fail("section must be a mapping", name)
        return value

    def number(self, mapping, key, path, default=None):
        value = mapping.get(key, default)
        full = f"{path}.{key}"
        if value is None:
            raise ParseError("missing value", line=self.lines.get(path), field=full)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(f"expected a number, got {value!r}", full)
        return float(value)

    def vector(self, mapping, key, path, length=None):
        value = mapping.get(key)
        full = f"{path}.{key}"
        if not isinstance(value, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            raise self.fail("expected a list of numbers", full)
        if length is not None and len(value) != length:
            raise self.fail(f"expected {length} numbers, got {len(value)}", full)
        return np.array(value, dtype=float)


def _read_fhn(reader, section):
    if section is None:
        return None
    p = FhnParams(a=reader.number(section, "a", "fhn"), b=reader.number(section, "b", "fhn"),
                  eps=reader.number(section, "eps", "fhn"), c=reader.number(section, "c", "fhn", 1.0),
                  i_ext=reader.number(section, "i_ext", "fhn", 1.0))
    return validate_fhn_params(p)


def _read_coupling(reader, section):
    topology = section.get("topology")
    if not isinstance(topology, dict):
        raise reader.fail("expected {generator, n} or {edges, n}", "coupling.topology")
    n = topology.get("n")
    if not isinstance(n, int) or isinstance(n, bool):
        raise reader.fail("node count must be an integer", "coupling.topology.n")
    if "generator" in topology:
        adjacency = adjacency_from_generator(str(topology["generator"]), n)
    elif "edges" in topology:
        edges = topology["edges"]
        if not isinstance(edges, list):
            raise reader.fail("edges must be a list of [i, j] pairs", "coupling.topology.edges")
        adjacency = adjacency_from_edges(edges, n)
    else:
        raise reader.fail("topology needs 'generator' or 'edges'", "coupling.topology")

    scheme = section.get("scheme", {})
    if not isinstance(scheme, dict):
        raise reader.fail("scheme must be a mapping", "coupling.scheme")
    if "phi" in scheme:
        b_uu, b_uv, b_vu, b_vv = rotational_scheme(reader.number(scheme, "phi", "coupling.scheme"))
    else:
        b_uu, b_uv, b_vu, b_vv = (reader.number(scheme, key, "coupling.scheme", 0.0)
                                  for key in ("b_uu", "b_uv", "b_vu", "b_vv"))
    return CouplingConfig(adjacency, reader.number(section, "sigma", "coupling"), b_uu, b_uv, b_vu, b_vv)


def _read_gain(reader, section, m=5):
    if section is None:
        return GainMatrix.scalar(1.0, m)
    if "g" in section:
        return GainMatrix.scalar(reader.number(section, "g", "gain"), m)
    if "diag" in section:
        return GainMatrix(np.diag(reader.vector(section, "diag", "gain", m)))
    if "matrix" in section:
        rows = section["matrix"]
        if not isinstance(rows, list) or len(rows) != m:
            raise reader.fail(f"expected {m} rows", "gain.matrix")
        return GainMatrix(np.array([reader.vector({"row": row}, "row", f"gain.matrix[{i}]", m)
                                    for i, row in enumerate(rows)]))
    raise reader.fail("gain needs 'g', 'diag' or 'matrix'", "gain")


def _read_theta0(reader, init, n, i_ext):
    value = init.get("theta0")
    if isinstance(value, dict):
        guess = FhnParams(a=reader.number(value, "a", "init.theta0"), b=reader.number(value, "b", "init.theta0"),
                          eps=reader.number(value, "eps", "init.theta0"),
                          c=reader.number(value, "c", "init.theta0"), i_ext=i_ext)
        return theta_from_original(guess, n).as_array()
    return reader.vector(init, "theta0", "init", 5)


# ------------------ Config Loading ------------------
def parse_config(text, source=None):
    """Build a validated ExperimentConfig from YAML text."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                         line=mark.line + 1 if mark is not None else None) from exc
    if not isinstance(raw, dict):
        raise ParseError("config must be a mapping of sections")
    unknown = sorted(set(raw) - SECTIONS)
    if unknown:
        raise ParseError(f"unknown section(s): {', '.join(unknown)}", field=unknown[0])
    reader = _Reader(raw, _line_map(text))

    try:
        fhn = _read_fhn(reader, reader.section("fhn", required=False))
        coupling = _read_coupling(reader, reader.section("coupling"))
        n = coupling.n
        filt = reader.section("filter", required=False) or {}
        start = filt.get("start")
        if start is not None and start not in STARTS:
            raise reader.fail(f"expected one of {list(STARTS)}, got {start!r}", "filter.start")
        filter_params = FilterParams(tau1=reader.number(filt, "tau1", "filter", 0.01),
                                     tau2=reader.number(filt, "tau2", "filter", 0.01), start=start)
        gain = _read_gain(reader, reader.section("gain", required=False))
        integ = reader.section("integrator", required=False) or {}
        stride = integ.get("record_stride", 100)
        if not isinstance(stride, int) or isinstance(stride, bool):
            raise reader.fail("record_stride must be an integer", "integrator.record_stride")
        integrator = IntegratorConfig(dt=reader.number(integ, "dt", "integrator", 1e-3),
                                      t_end=reader.number(integ, "t_end", "integrator", 6000.0),
                                      record_stride=stride)

        signals = None
        sig = reader.section("signals", required=False)
        if sig is not None:
            path = sig.get("path")
            if not isinstance(path, str):
                raise reader.fail("signals.path must be a string", "signals.path")
            signals = SignalSource(path=path, i_ext=reader.number(sig, "i_ext", "signals", 1.0))
        i_ext = fhn.i_ext if fhn is not None else (signals.i_ext if signals is not None else 1.0)

        init = reader.section("init")
        theta0 = _read_theta0(reader, init, n, i_ext)
        y0 = reader.vector(init, "y0", "init", n) if "y0" in init else None
        v0 = reader.vector(init, "v0", "init", n) if "v0" in init else None
        output = reader.section("output", required=False) or {}
        name = raw.get("name") or (Path(source).stem if source else "experiment")
        return ExperimentConfig(coupling=coupling, filter=filter_params, gain=gain, integrator=integrator,
                                theta0=theta0, fhn=fhn, y0=y0, v0=v0, signals=signals, output=dict(output),
                                name=str(name), source=source)
    except (ParseError, ValidationError):
        raise
    except FhnIdentError as exc:
        raise ValidationError(str(exc)) from exc


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc.strerror}") from exc
    cfg = parse_config(text, source=str(path))
    logger.info("loaded config %s (%s mode, hash %s)", path, cfg.mode, config_hash(cfg)[:12])
    return cfg


def config_to_dict(cfg):
    """Canonical, JSON-ready view of a validated config."""
    adj = cfg.coupling.adjacency
    n = cfg.coupling.n
    out = {
        "coupling": {
            "n": n,
            "edges": [[i, j] for i in range(n) for j in range(i + 1, n) if adj[i, j]],
            "sigma": float(cfg.coupling.sigma),
            "scheme": [float(x) for x in cfg.coupling.coupling_vector()[1:]],
        },
        "filter": {"tau1": float(cfg.filter.tau1), "tau2": float(cfg.filter.tau2),
                   "start": cfg.filter.start_for(cfg.mode)},
        "gain": [[float(x) for x in row] for row in cfg.gain.gamma],
        "integrator": {"dt": float(cfg.integrator.dt), "t_end": float(cfg.integrator.t_end),
                       "record_stride": int(cfg.integrator.record_stride)},
        "theta0": [float(x) for x in cfg.theta0],
        "output": cfg.output,
    }
    if cfg.fhn is not None:
        out["fhn"] = {k: float(getattr(cfg.fhn, k)) for k in ("a", "b", "eps", "c", "i_ext")}
    if cfg.y0 is not None:
        out["y0"] = [float(x) for x in cfg.y0]
        out["v0"] = [float(x) for x in cfg.v0]
    if cfg.signals is not None:
        out["signals"] = {"path": cfg.signals.path, "i_ext": float(cfg.signals.i_ext)}
    return out


def config_hash(cfg):
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ------------------ Signal Files ------------------
def load_signals(path, expected_n=None):
    """Read 't, y1..yN' CSV into a SignalSet on a uniform grid."""
    try:
        frame = pd.read_csv(path, float_precision="round_trip", skipinitialspace=True)
    except FileNotFoundError as exc:
        raise ParseError(f"signals file not found: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot parse signals {path}: {exc}") from exc
    if frame.shape[1] < 2:
        raise ParseError("signals need a time column and at least one channel", line=1)
    n = frame.shape[1] - 1
    if expected_n is not None and n != expected_n:
        raise ChannelCountMismatch(f"{path}: {n} channels, expected {expected_n}")

    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        row, col = (int(x) for x in bad[0])
        # header is line 1
        raise ParseError(f"non-numeric or non-finite sample at row {row}", line=row + 2,
                         field=str(frame.columns[col]))
    if values.shape[0] < 2:
        raise ParseError("signals need at least two samples")

    times = values[:, 0]
    t0, t_last = float(times[0]), float(times[-1])
    dt = (t_last - t0) / (times.size - 1)
    if not dt > 0:
        raise NonUniformSampling(f"{path}: time column must be increasing")
    grid = t0 + dt * np.arange(times.size)
    tolerance = 1e-9 * max(abs(t0), abs(t_last), dt)
    worst = int(np.argmax(np.abs(times - grid)))
    if abs(times[worst] - grid[worst]) > tolerance:
        raise NonUniformSampling(f"{path}: sample {worst} at t = {times[worst]!r} is off the uniform grid "
                                 f"(dt = {dt:.17g})")
    logger.debug("loaded %d samples x %d channels from %s (dt = %g)", times.size, n, path, dt)
    return SignalSet(values[:, 1:], dt, t0)
