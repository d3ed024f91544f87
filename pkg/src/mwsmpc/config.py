"""Run configuration files.

A config is flat ``key = value`` text; ``#`` starts a comment. Values are Python
literals: numbers, booleans, and bracketed row-major matrices such as
``A = [[1, 1], [0, 1]]``. ``sigma_w``, ``Q`` and ``R`` may also be given as a
scalar, meaning that multiple of the identity. ``gamma`` is either one value
applied to every step or a list of ``N - 1`` values.

The safe set is written in the ``C s + c <= 0`` convention.
"""

from __future__ import annotations

import ast
import math
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .controller import MissionSpec
from .lqr import LqrDesign, solve_dare
from .model import LinearSystem, Polytope

REQUIRED = ("A", "B", "sigma_w", "C", "c", "Q", "R", "N", "S0", "gamma", "beta", "s0")
OPTIONAL = ("sk_cap", "mc_samples", "seed", "missions", "conservative_sk", "K", "Q_N")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` and ``line`` locate the problem when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True, eq=False)
class RunConfig:
    system: LinearSystem
    poly: Polytope
    spec: MissionSpec
    s0: np.ndarray
    missions: int = 10_000
    k_gain: np.ndarray | None = None
    q_term: np.ndarray | None = None

    def lqr_design(self) -> LqrDesign:
        """LQR gain and terminal cost, with any explicit ``K``/``Q_N`` taking precedence."""
        design = solve_dare(self.system.A, self.system.B, self.spec.q_cost, self.spec.r_cost)
        K = design.K if self.k_gain is None else self.k_gain
        P = design.P if self.q_term is None else self.q_term
        return LqrDesign(K=K, P=P, iterations=design.iterations)


def bundled_config(name: str = "paper.cfg") -> str:
    """Path of a config shipped with the package."""
    return str(resources.files("mwsmpc") / "data" / name)


def resolve_path(path: str) -> str:
    """Return ``path`` if it exists, else the bundled config of the same name if any."""
    if os.path.exists(path):
        return path
    bundled = bundled_config(os.path.basename(path))
    if os.path.exists(bundled):
        return bundled
    return path


def _read_pairs(text: str) -> dict:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in REQUIRED and key not in OPTIONAL:
            raise ConfigError("unknown key", key, lineno)
        if key in pairs:
            raise ConfigError("duplicate key", key, lineno)
        lowered = value.lower()
        if lowered in ("true", "false"):
            value = lowered.capitalize()
        try:
            parsed = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            raise ConfigError(f"malformed value {value!r}", key, lineno) from None
        pairs[key] = (parsed, lineno)
    return pairs


def _array(pairs, key, ndim, size=None):
    value, line = pairs[key]
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected numbers", key, line) from None
    if arr.ndim == 0 and size is not None:
        arr = float(arr) * np.eye(size)
    if arr.ndim != ndim:
        raise ConfigError(f"expected a {'matrix' if ndim == 2 else 'vector'}", key, line)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("values must be finite", key, line)
    return arr


def _number(pairs, key, kind=float, lo=None, hi=None, lo_open=False, hi_open=False):
    value, line = pairs[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a number", key, line)
    if kind is int and value != int(value):
        raise ConfigError("expected an integer", key, line)
    value = kind(value)
    if not math.isfinite(value):
        raise ConfigError("value must be finite", key, line)
    bad_lo = lo is not None and (value <= lo if lo_open else value < lo)
    bad_hi = hi is not None and (value >= hi if hi_open else value > hi)
    if bad_lo or bad_hi:
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ConfigError(f"{value} outside {lb}{lo}, {hi}{rb}", key, line)
    return value


def parse_config_text(text: str) -> RunConfig:
    pairs = _read_pairs(text)
    for key in REQUIRED:
        if key not in pairs:
            raise ConfigError("missing required key", key)

    A = _array(pairs, "A", 2)
    n = A.shape[0]
    B = _array(pairs, "B", 2)
    m = B.shape[1]
    try:
        system = LinearSystem(A, B, _array(pairs, "sigma_w", 2, n))
    except ValueError as exc:
        raise ConfigError(str(exc), "sigma_w", pairs["sigma_w"][1]) from None
    try:
        poly = Polytope(_array(pairs, "C", 2), _array(pairs, "c", 1))
    except ValueError as exc:
        raise ConfigError(str(exc), "C", pairs["C"][1]) from None
    if poly.n != n:
        raise ConfigError(f"C must have {n} columns", "C", pairs["C"][1])

    Q = _array(pairs, "Q", 2, n)
    R = _array(pairs, "R", 2, m)
    if Q.shape != (n, n) or np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))) < -1e-10:
        raise ConfigError(f"Q must be a {n}x{n} PSD matrix", "Q", pairs["Q"][1])
    if R.shape != (m, m) or np.min(np.linalg.eigvalsh(0.5 * (R + R.T))) <= 0.0:
        raise ConfigError(f"R must be a {m}x{m} positive definite matrix", "R", pairs["R"][1])

    N = _number(pairs, "N", int, lo=1)
    gamma_value, gamma_line = pairs["gamma"]
    gammas = np.atleast_1d(np.array(gamma_value, dtype=float))
    if gammas.ndim != 1:
        raise ConfigError("expected a number or a list", "gamma", gamma_line)
    if gammas.size == 1:
        gammas = np.repeat(gammas, N - 1)
    if gammas.size != N - 1:
        raise ConfigError(f"expected {N - 1} values", "gamma", gamma_line)
    if np.any(~np.isfinite(gammas)) or np.any(gammas <= 0.0) or np.any(gammas > 1.0):
        raise ConfigError("values must lie in (0, 1]", "gamma", gamma_line)

    opts = {}
    if "sk_cap" in pairs:
        opts["sk_cap"] = _number(pairs, "sk_cap", lo=0.0, hi=1.0, hi_open=True)
    if "mc_samples" in pairs:
        opts["mc_samples"] = _number(pairs, "mc_samples", int, lo=1)
    if "seed" in pairs:
        opts["seed"] = _number(pairs, "seed", int, lo=0)
    if "conservative_sk" in pairs:
        value, line = pairs["conservative_sk"]
        if not isinstance(value, bool):
            raise ConfigError("expected true or false", "conservative_sk", line)
        opts["conservative_sk"] = value

    spec = MissionSpec(
        n_mission=N,
        s0_bound=_number(pairs, "S0", lo=0.0, hi=1.0),
        gammas=tuple(gammas.tolist()),
        beta=_number(pairs, "beta", lo=0.0, hi=1.0, lo_open=True, hi_open=True),
        q_cost=Q,
        r_cost=R,
        **opts,
    )

    s0 = _array(pairs, "s0", 1)
    if s0.shape != (n,):
        raise ConfigError(f"expected {n} entries", "s0", pairs["s0"][1])
    if not poly.contains(s0):
        raise ConfigError("initial state lies outside the safe set", "s0", pairs["s0"][1])

    missions = _number(pairs, "missions", int, lo=1) if "missions" in pairs else 10_000
    k_gain = q_term = None
    if "K" in pairs:
        k_gain = _array(pairs, "K", 2)
        if k_gain.shape != (m, n):
            raise ConfigError(f"K must be {m}x{n}", "K", pairs["K"][1])
    if "Q_N" in pairs:
        q_term = _array(pairs, "Q_N", 2, n)
        if q_term.shape != (n, n):
            raise ConfigError(f"Q_N must be {n}x{n}", "Q_N", pairs["Q_N"][1])
    return RunConfig(system, poly, spec, s0, missions, k_gain, q_term)


def parse_config(path) -> RunConfig:
    path = resolve_path(str(path))
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)


def _lit(arr) -> str:
    return repr(np.asarray(arr, dtype=float).tolist())


def format_config(cfg: RunConfig) -> str:
    """Serialise ``cfg`` so that :func:`parse_config_text` reproduces it exactly."""
    spec = cfg.spec
    lines = [
        f"A = {_lit(cfg.system.A)}",
        f"B = {_lit(cfg.system.B)}",
        f"sigma_w = {_lit(cfg.system.sigma_w)}",
        f"C = {_lit(cfg.poly.C)}",
        f"c = {_lit(cfg.poly.c)}",
        f"Q = {_lit(spec.q_cost)}",
        f"R = {_lit(spec.r_cost)}",
        f"N = {spec.n_mission}",
        f"S0 = {spec.s0_bound!r}",
        f"gamma = {list(spec.gammas)!r}",
        f"beta = {spec.beta!r}",
        f"s0 = {_lit(cfg.s0)}",
        f"sk_cap = {spec.sk_cap!r}",
        f"mc_samples = {spec.mc_samples}",
        f"seed = {spec.seed}",
        f"missions = {cfg.missions}",
        f"conservative_sk = {str(spec.conservative_sk).lower()}",
    ]
    if cfg.k_gain is not None:
        lines.append(f"K = {_lit(cfg.k_gain)}")
    if cfg.q_term is not None:
        lines.append(f"Q_N = {_lit(cfg.q_term)}")
    return "\n".join(lines) + "\n"
