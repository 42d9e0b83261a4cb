"""Run configuration: a flat text file of dotted ``section.key = value`` lines.

Blank lines and text after ``#`` are ignored. Values are Python literals;
a comma-separated list becomes a tuple. Unknown keys are rejected so typos
surface as configuration errors.

Example::

    dimension.N = 5
    dimension.k = 1
    period.grid = 2, 3, 4
    profile1.beta = 3.5, 3.5, 3.5, 3.5, 3.5
"""

import ast
from dataclasses import dataclass, field, replace

from .ansatz import KProfile
from .bubbles import Dimension
from .errors import ConfigError
from .norms import CloudSpec, NormParams
from .reduction import CONVENTIONS, SystemConfig

DEFAULTS = {
    "dimension.N": 5,
    "dimension.k": 1,
    "period.L": 2,
    "period.grid": (2, 3, 4),
    "profile1.a": None,
    "profile1.beta": None,
    "profile1.delta": 0.25,
    "profile2.a": None,
    "profile2.beta": None,
    "profile2.delta": 0.25,
    "reduction.convention": "exact",
    "norm.vartheta": 0.01,
    "cloud.shells": 16,
    "cloud.sobol": 52,
    "cloud.far": 12,
    "cloud.refine": True,
    "residual.L": 2,
    "residual.mu_min": 20.0,
    "residual.mu_max": 200.0,
    "residual.mu_count": 5,
    "project.mu": "auto",
    "quadrature.mc_samples": 100_000,
    "quadrature.seed": 20241016,
    "green.pairs": 20,
    "green.tol": 1e-8,
}


def _parse_value(text):
    text = text.strip()
    try:
        val = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        if "," in text:
            return tuple(_parse_value(t) for t in text.split(","))
        return text
    if isinstance(val, list):
        val = tuple(val)
    return val


def parse_config_text(text):
    """Parse the dotted key-value format into a dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(val)
    return out


def _tuple(v, name):
    if isinstance(v, (int, float)):
        return (v,)
    if not isinstance(v, tuple):
        raise ConfigError(f"{name} must be a number or a comma-separated list")
    return v


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def dim(self):
        return Dimension(int(self["dimension.N"]), int(self["dimension.k"]))

    def profile(self, l):
        N, k = self.dim.N, self.dim.k
        a = self[f"profile{l}.a"]
        beta = self[f"profile{l}.beta"]
        a = (-1.0,) * N if a is None else _tuple(a, f"profile{l}.a")
        beta = (3.5,) * N if beta is None else _tuple(beta, f"profile{l}.beta")
        if len(a) == 1:
            a = a * N
        if len(beta) == 1:
            beta = beta * N
        return KProfile(a, beta, float(self[f"profile{l}.delta"]), k)

    @property
    def system(self):
        return SystemConfig(self.dim, self.profile(1), self.profile(2),
                            str(self["reduction.convention"]))

    @property
    def grid(self):
        return tuple(int(v) for v in _tuple(self["period.grid"], "period.grid"))

    @property
    def cloud(self):
        return CloudSpec(int(self["cloud.shells"]), int(self["cloud.sobol"]), int(self["cloud.far"]))

    def validate(self):
        """Build every derived object once so hypothesis violations surface early."""
        dim = self.dim
        self.system
        if self["reduction.convention"] not in CONVENTIONS:
            raise ConfigError(f"reduction.convention must be one of {CONVENTIONS}")
        raw = _tuple(self["period.grid"], "period.grid")
        for L in raw + (self["period.L"], self["residual.L"]):
            if not isinstance(L, (int, float)) or int(L) != L or L < 2:
                raise ConfigError(f"periods must be integers >= 2, got {L}")
        NormParams(dim, 2.0, (0.0,) * dim.N, 10.0, float(self["norm.vartheta"]))
        if not 0 < self["residual.mu_min"] < self["residual.mu_max"]:
            raise ConfigError("residual mu range must satisfy 0 < mu_min < mu_max")
        if int(self["residual.mu_count"]) < 2:
            raise ConfigError("residual.mu_count must be at least 2")
        if int(self["quadrature.mc_samples"]) < 0 or int(self["green.pairs"]) < 1:
            raise ConfigError("sample counts must be non-negative")
        if not float(self["green.tol"]) > 0:
            raise ConfigError("green.tol must be positive")
        return self

    def with_overrides(self, **kv):
        vals = dict(self.values)
        vals.update({k: v for k, v in kv.items() if v is not None})
        return replace(self, values=vals)


def load_config(path=None, text=None):
    """Read, merge with defaults and validate."""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    vals = dict(DEFAULTS)
    if text:
        vals.update(parse_config_text(text))
    return RunConfig(vals).validate()
