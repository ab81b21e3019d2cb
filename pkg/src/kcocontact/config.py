"""Run configuration: a YAML key-value tree with typed, validated leaves.

Top-level blocks are ``system`` (required), ``sample`` (required, with a
``seed``), ``solver``, ``output`` and ``tolerances``. Unknown keys and
duplicate keys are rejected; parse errors carry line and column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .autodiff import ScalarField
from .errors import ConfigError, KCocontactError
from .geometry import CanonicalStructure
from .hamiltonian import HamiltonianSystem
from .integrators import PERIODIC, WaveConfig
from .lagrangian import LagrangianSystem, assemble_holonomic
from .phase import HAMILTONIAN, LAGRANGIAN, SIDES, PhasePoint, Signature, random_points
from .tolerances import DEFAULTS, Tolerances


class _UniqueKeyLoader(yaml.SafeLoader):
    """SafeLoader that refuses repeated mapping keys."""


def _construct_mapping(loader, node, deep=False):
    seen = {}
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            mark = key_node.start_mark
            raise ConfigError(f"duplicate key {key!r}", key, mark.line + 1, mark.column + 1)
        seen[key] = True
    return yaml.SafeLoader.construct_mapping(loader, node, deep)


_UniqueKeyLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


SYSTEM_KEYS = {"side", "k", "n", "structure", "L", "h", "holonomic", "wave", "params"}
HOLONOMIC_KEYS = {"kinetic", "damping"}
WAVE_KEYS = {"strain", "potential", "damping"}
SAMPLE_KEYS = {"seed", "count", "ranges", "points"}
SOLVER_KEYS = {
    "kind", "T", "dt", "x0", "levels",
    "x_min", "x_max", "nx", "boundary", "u0", "ut0", "save_every", "exact",
}
OUTPUT_KEYS = {"dir"}
TOP_KEYS = {"system", "sample", "solver", "output", "tolerances"}


@dataclass
class RunConfig:
    signature: Signature
    side: str
    system: object
    structure_kind: str
    samples: list
    seed: int
    solver: dict
    output_dir: str
    tolerances: Tolerances
    wave: dict | None = None
    closed_form_h: HamiltonianSystem | None = None
    raw: dict = field(default_factory=dict)

    def wave_config(self, **overrides):
        """The wave solver settings, with ``overrides`` applied."""
        if self.wave is None:
            raise ConfigError("a wave run needs a system.wave block", "system.wave")
        s = {**self.solver, **overrides}
        kw = dict(
            strain=self.wave["strain"],
            potential=self.wave.get("potential", "0"),
            damping=self.wave.get("damping", "0"),
            x0=float(s.get("x_min", 0.0)),
            x1=float(s.get("x_max", 2 * math.pi)),
            nx=int(s.get("nx", 64)),
            boundary=s.get("boundary", PERIODIC),
            T=float(s.get("T", 1.0)),
            dt=None if s.get("dt") is None else float(s["dt"]),
            u0=str(s.get("u0", "0")),
            ut0=str(s.get("ut0", "0")),
            params=dict(self.raw["system"].get("params", {})),
            save_every=int(s.get("save_every", 1)),
            cfl_safety=self.tolerances.cfl_safety,
        )
        return WaveConfig(**kw)


def _require_mapping(value, key):
    if not isinstance(value, dict):
        raise ConfigError("expected a mapping", key)
    return value


def _check_keys(block, allowed, where):
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", f"{where}.{unknown[0]}" if where else unknown[0])


def _as_int(value, key, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", key)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be at least {minimum}", key)
    return value


def _as_float(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key)
    return float(value)


def _field(text, sig, side, params, key):
    if not isinstance(text, (str, int, float)) or isinstance(text, bool):
        raise ConfigError("expected an expression string", key)
    try:
        return ScalarField.from_expression(str(text), sig, side, params, label=key)
    except KCocontactError as exc:
        raise ConfigError(str(exc), key) from None


def _build_system(block, tol):
    _check_keys(block, SYSTEM_KEYS, "system")
    side = block.get("side", LAGRANGIAN)
    if side not in SIDES:
        raise ConfigError(f"side must be one of {list(SIDES)}", "system.side")
    k = _as_int(block.get("k"), "system.k", 1)
    n = _as_int(block.get("n"), "system.n", 1)
    sig = Signature(k, n)
    params = _require_mapping(block.get("params", {}), "system.params")
    params = {str(p): _as_float(v, f"system.params.{p}") for p, v in params.items()}
    kind = block.get("structure", "field")
    if kind not in ("field", "canonical"):
        raise ConfigError("structure must be 'field' or 'canonical'", "system.structure")

    wave = None
    if "wave" in block:
        wave = _require_mapping(block["wave"], "system.wave")
        _check_keys(wave, WAVE_KEYS, "system.wave")
        if "strain" not in wave:
            raise ConfigError("missing strain energy", "system.wave.strain")
        if (k, n) != (2, 1):
            raise ConfigError("a wave system has k = 2 and n = 1", "system.wave")
        wave = {key: str(v) for key, v in wave.items()}

    closed_h = None
    if "h" in block:
        closed_h = HamiltonianSystem(_field(block["h"], sig, HAMILTONIAN, params, "system.h"), tol)

    if kind == "canonical":
        return sig, side, CanonicalStructure(sig), kind, wave, closed_h
    if side == HAMILTONIAN:
        if closed_h is None:
            raise ConfigError("a hamiltonian system needs h", "system.h")
        return sig, side, closed_h, kind, wave, None

    sources = [key for key in ("L", "holonomic", "wave") if key in block]
    if len(sources) != 1:
        raise ConfigError("give exactly one of L, holonomic or wave for a lagrangian system", "system")
    if "L" in block:
        system = LagrangianSystem(_field(block["L"], sig, LAGRANGIAN, params, "system.L"), tol=tol)
    else:
        if "holonomic" in block:
            parts = _require_mapping(block["holonomic"], "system.holonomic")
            _check_keys(parts, HOLONOMIC_KEYS, "system.holonomic")
            kinetic_text, damping_text = parts.get("kinetic"), parts.get("damping", "0")
            if kinetic_text is None:
                raise ConfigError("missing kinetic part", "system.holonomic.kinetic")
        else:
            kinetic_text = f"0.5*ut**2 - ({wave['strain']}) - ({wave.get('potential', '0')})"
            damping_text = f"-({wave.get('damping', '0')})*zt"
        kinetic = _field(kinetic_text, sig, LAGRANGIAN, params, "system.holonomic.kinetic")
        damping = _field(damping_text, sig, LAGRANGIAN, params, "system.holonomic.damping")
        try:
            system = assemble_holonomic(kinetic, damping, tol)
        except KCocontactError as exc:
            raise ConfigError(str(exc), "system.holonomic") from None
    return sig, side, system, kind, wave, closed_h


def _build_samples(block, sig, side):
    _check_keys(block, SAMPLE_KEYS, "sample")
    if "seed" not in block:
        raise ConfigError("a seed is required for reproducible sampling", "sample.seed")
    seed = _as_int(block["seed"], "sample.seed", 0)
    count = _as_int(block.get("count", 10), "sample.count", 0)
    ranges = _require_mapping(block.get("ranges", {}), "sample.ranges")
    clean = {}
    names = sig.coordinate_names(side)
    for name, bounds in ranges.items():
        key = f"sample.ranges.{name}"
        if name not in names:
            raise ConfigError(f"unknown coordinate {name!r}", key)
        if not isinstance(bounds, list) or len(bounds) != 2:
            raise ConfigError("expected [low, high]", key)
        lo, hi = _as_float(bounds[0], key), _as_float(bounds[1], key)
        if hi < lo:
            raise ConfigError("high must not be below low", key)
        clean[name] = (lo, hi)
    rng = np.random.default_rng(seed)
    pts = random_points(sig, count, rng, clean, side)
    for m, row in enumerate(block.get("points", []) or []):
        key = f"sample.points[{m}]"
        if not isinstance(row, list) or len(row) != sig.dim:
            raise ConfigError(f"expected a list of {sig.dim} numbers", key)
        pts.append(PhasePoint.from_flat(sig, [_as_float(v, key) for v in row]))
    return seed, pts


def _build_solver(block, sig):
    _check_keys(block, SOLVER_KEYS, "solver")
    kind = block.get("kind")
    if kind not in ("k1", "wave"):
        raise ConfigError("kind must be 'k1' or 'wave'", "solver.kind")
    for key in ("T", "dt", "x_min", "x_max"):
        if key in block and block[key] is not None:
            _as_float(block[key], f"solver.{key}")
    if kind == "k1":
        if sig.k != 1:
            raise ConfigError("k1 integration needs k = 1", "solver.kind")
        x0 = block.get("x0")
        if not isinstance(x0, list) or len(x0) != sig.dim:
            raise ConfigError(f"expected initial state of {sig.dim} numbers (t, q, p, z)", "solver.x0")
        for key in ("T", "dt"):
            if key not in block:
                raise ConfigError("required for k1 integration", f"solver.{key}")
    if kind == "wave" and "nx" in block:
        _as_int(block["nx"], "solver.nx", 8)
    levels = block.get("levels")
    if levels is not None and (not isinstance(levels, list) or len(levels) < 3):
        raise ConfigError("a convergence study needs at least 3 levels", "solver.levels")
    return dict(block)


def _build_tolerances(block):
    try:
        return DEFAULTS.override(**{str(k): v for k, v in block.items()})
    except KeyError as exc:
        raise ConfigError("unknown tolerance", f"tolerances.{exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "tolerances") from None


def parse_config(text):
    """Parse and validate configuration text."""
    try:
        raw = yaml.load(text, Loader=_UniqueKeyLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line, col = (mark.line + 1, mark.column + 1) if mark is not None else (None, None)
        raise ConfigError(f"parse error: {exc.problem}", None, line, col) from None
    if raw is None:
        raw = {}
    _require_mapping(raw, "<root>")
    _check_keys(raw, TOP_KEYS, "")
    if "system" not in raw:
        raise ConfigError("missing system block", "system")
    if "sample" not in raw:
        raise ConfigError("missing sample block (a seed is mandatory)", "sample")
    tol = _build_tolerances(_require_mapping(raw.get("tolerances", {}) or {}, "tolerances"))
    sig, side, system, kind, wave, closed_h = _build_system(_require_mapping(raw["system"], "system"), tol)
    seed, samples = _build_samples(_require_mapping(raw["sample"], "sample"), sig, side)
    solver = _build_solver(_require_mapping(raw["solver"], "solver"), sig) if "solver" in raw else {}
    output = _require_mapping(raw.get("output", {}) or {}, "output")
    _check_keys(output, OUTPUT_KEYS, "output")
    return RunConfig(
        signature=sig,
        side=side,
        system=system,
        structure_kind=kind,
        samples=samples,
        seed=seed,
        solver=solver,
        output_dir=str(output.get("dir", "out")),
        tolerances=tol,
        wave=wave,
        closed_form_h=closed_h,
        raw=raw,
    )


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
