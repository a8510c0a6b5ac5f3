"""INI experiment configs: parsing, schema checks and canonical echo.

Energies are in units of the effective hopping ``t`` for the hard-core model
and of the photon hopping ``J`` for the cavity model. ``alpha`` must be an
exact rational such as ``1/4``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .lattice import Boundary, LatticeSpec, Solenoid, parse_alpha

TASKS = (
    "spectrum",
    "fidelity",
    "convergence",
    "gap-curve",
    "preparation",
    "flux-insertion",
    "oracle",
    "regime",
)
MODELS = ("hardcore", "cavity")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _pairs(text: str) -> tuple[tuple[int, int], ...]:
    """``"0 0; 2 2"`` -> ((0, 0), (2, 2))."""
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            vals = _ints(chunk)
            if len(vals) != 2:
                raise ValueError(f"expected two integers in {chunk!r}")
            out.append(vals)
    return tuple(out)


def _solenoids(text: str) -> tuple[Solenoid, ...]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            vals = _floats(chunk)
            if len(vals) != 3:
                raise ValueError(f"solenoids need 'x y flux', got {chunk!r}")
            out.append(Solenoid(*vals))
    return tuple(out)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, Boundary):
        return value.value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], Solenoid):
            return "; ".join(f"{s.x!r} {s.y!r} {s.flux!r}" for s in value)
        if value and isinstance(value[0], tuple):
            return "; ".join(" ".join(str(v) for v in pair) for pair in value)
        return " ".join(_fmt(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class LatticeBlock:
    Lx: int
    Ly: int
    boundary: Boundary = Boundary.TORUS

    def spec(self) -> LatticeSpec:
        return LatticeSpec(self.Lx, self.Ly, self.boundary)


@dataclass(frozen=True)
class GaugeBlock:
    alpha: Fraction
    solenoids: tuple[Solenoid, ...] = ()


@dataclass(frozen=True)
class ModelBlock:
    kind: str = "hardcore"
    N: int = 2
    t: float = 1.0
    pinned: tuple[tuple[int, int], ...] = ()
    eps: float = 0.0
    # cavity parameters: either ratios or explicit couplings (isotropic)
    delta_over_J: float = 10.0
    J_over_omega: float = 10.0
    J: float = 1.0
    g: float = 0.0
    Delta: float = 0.0
    Omega: float = 0.0


@dataclass(frozen=True)
class TaskBlock:
    kind: str
    k: int = 4
    tol: float = 1e-10
    m: int = 2
    epsilons: tuple[float, ...] = ()
    durations: tuple[float, ...] = ()
    eps0: float = 1.0
    dt: float = 0.01
    shape: str = "smoothstep"
    plaquette: tuple[int, int] = (0, 0)
    orientation: str = "quasihole"
    scales: tuple[float, ...] = ()
    gamma: float = 1.0
    Nb: int = 2
    factor: float = 10.0


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "results"
    formats: tuple[str, ...] = ("json", "csv", "bin")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    lattice: LatticeBlock
    gauge: GaugeBlock
    model: ModelBlock
    task: TaskBlock
    output: OutputBlock = field(default_factory=OutputBlock)
    seed: int = 0
    description: str = ""

    def to_ini(self) -> str:
        """Canonical text form; parsing it gives back an equal config."""
        lines = ["[experiment]", f"name = {self.name}", f"seed = {self.seed}"]
        if self.description:
            lines.append(f"description = {self.description}")
        for section, block in (
            ("lattice", self.lattice),
            ("gauge", self.gauge),
            ("model", self.model),
            ("task", self.task),
            ("output", self.output),
        ):
            lines += ["", f"[{section}]"]
            for f in fields(block):
                lines.append(f"{f.name} = {_fmt(getattr(block, f.name))}".rstrip())
        return "\n".join(lines) + "\n"


_CONVERTERS = {
    "lattice": {"Lx": int, "Ly": int, "boundary": Boundary},
    "gauge": {"alpha": parse_alpha, "solenoids": _solenoids},
    "model": {
        "kind": str, "N": int, "t": float, "pinned": _pairs, "eps": float,
        "delta_over_J": float, "J_over_omega": float, "J": float, "g": float, "Delta": float, "Omega": float,
    },
    "task": {
        "kind": str, "k": int, "tol": float, "m": int, "epsilons": _floats, "durations": _floats,
        "eps0": float, "dt": float, "shape": str, "plaquette": lambda s: _ints(s), "orientation": str,
        "scales": _floats, "gamma": float, "Nb": int, "factor": float,
    },
    "output": {"directory": str, "formats": lambda s: tuple(s.replace(",", " ").split())},
}
_REQUIRED = {"lattice": ("Lx", "Ly"), "gauge": ("alpha",), "task": ("kind",)}


def _read_block(cp, section, cls):
    if section not in cp:
        if section in _REQUIRED:
            raise ConfigError(f"missing [{section}] section")
        return cls()
    conv = _CONVERTERS[section]
    kwargs = {}
    for key, raw in cp[section].items():
        if key not in conv:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        if raw.strip() == "":
            continue
        try:
            kwargs[key] = conv[key](raw.strip())
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    for key in _REQUIRED.get(section, ()):
        if key not in kwargs:
            raise ConfigError(f"[{section}] is missing required key {key!r}")
    return cls(**kwargs)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    allowed = {"experiment", "lattice", "gauge", "model", "task", "output"}
    for sec in cp.sections():
        if sec not in allowed:
            raise ConfigError(f"unknown section [{sec}]")
    exp = cp["experiment"] if "experiment" in cp else {}
    for key in exp:
        if key not in ("name", "seed", "description"):
            raise ConfigError(f"unknown key {key!r} in [experiment]")
    cfg = ExperimentConfig(
        name=exp.get("name", Path(source).stem or "experiment"),
        lattice=_read_block(cp, "lattice", LatticeBlock),
        gauge=_read_block(cp, "gauge", GaugeBlock),
        model=_read_block(cp, "model", ModelBlock),
        task=_read_block(cp, "task", TaskBlock),
        output=_read_block(cp, "output", OutputBlock),
        seed=int(exp.get("seed", 0)),
        description=exp.get("description", ""),
    )
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, str(path))


def validate(cfg: ExperimentConfig) -> None:
    """Schema rules beyond types; raises ``ConfigError``."""
    L = cfg.lattice
    if L.Lx < 2 or L.Ly < 2:
        raise ConfigError("lattice sides must be at least 2")
    m, t = cfg.model, cfg.task
    if m.kind not in MODELS:
        raise ConfigError(f"model kind must be one of {MODELS}")
    if t.kind not in TASKS:
        raise ConfigError(f"task kind must be one of {TASKS}")
    if m.N < 0 or m.N > L.Lx * L.Ly:
        raise ConfigError("particle number out of range")
    if m.t <= 0:
        raise ConfigError("t must be positive")
    for p, q in m.pinned:
        if not (0 <= p < L.Lx and 0 <= q < L.Ly):
            raise ConfigError(f"pinned site ({p}, {q}) is off the lattice")
    if t.k < 1:
        raise ConfigError("k must be positive")
    if t.kind in ("gap-curve",) and not t.epsilons:
        raise ConfigError("gap-curve needs an epsilons list")
    if t.kind in ("preparation", "flux-insertion") and not t.durations:
        raise ConfigError(f"{t.kind} needs a durations list")
    if t.kind == "convergence" and not t.scales:
        raise ConfigError("convergence needs a scales list")
    if t.kind == "flux-insertion":
        if len(t.plaquette) != 2:
            raise ConfigError("plaquette needs two integers")
        if t.orientation not in ("quasihole", "parallel", "antiparallel"):
            raise ConfigError("orientation must be quasihole, parallel or antiparallel")
    if t.shape not in ("linear", "smoothstep"):
        raise ConfigError("shape must be linear or smoothstep")
    if t.dt <= 0:
        raise ConfigError("dt must be positive")
    for fmt in cfg.output.formats:
        if fmt not in ("json", "csv", "bin"):
            raise ConfigError(f"unknown output format {fmt!r}")
