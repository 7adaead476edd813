"""Experiment configuration, the flat key-value config format and the canned figure recipes."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .. import tolerances as tol
from ..errors import ConfigError
from ..precoders import SCHEMES

__all__ = ["ExperimentConfig", "KINDS", "FIGURES", "load_config", "parse_config", "figure_recipes"]

KINDS = ("rate", "gap", "convergence")
GAMMA_MODES = ("closed_form", "empirical")
CSI_MODES = ("quantized", "perfect")
DEFAULT_TRIALS = 5000


@dataclass
class ExperimentConfig:
    """One Monte-Carlo experiment.

    ``B`` and ``snr_db`` are sweep lists. ``K`` is a single user count unless
    ``k_sweep`` lists several, which activates the overloaded mode where
    ``M = N K`` is not required and BD is refused. ``gamma_mode`` is
    ``"closed_form"``, ``"empirical"`` or a float that overrides the
    distortion directly. ``kind`` selects the rate sweep (default), the
    second-order gap study or the convergence trace. ``bounds`` adds the
    low- and high-SNR rate approximations as extra rows.
    """

    M: int = 8
    N: int = 2
    K: int = 4
    B: list = field(default_factory=lambda: [10])
    snr_db: list = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    schemes: list = field(default_factory=lambda: list(SCHEMES))
    trials: int = DEFAULT_TRIALS
    root_seed: int = 0
    gamma_mode: str | float = "closed_form"
    csi_mode: str = "quantized"
    max_iter: int = 100
    tol: float = 1e-4
    clamp_gamma: bool = False
    workers: int = 1
    weights: list | None = None
    k_sweep: list | None = None
    gamma_trials: int = 1000
    kind: str = "rate"
    M_sweep: list | None = None
    bounds: bool = False
    name: str = "custom"

    def __post_init__(self):
        self.B = [int(b) for b in _as_list(self.B)]
        self.snr_db = [float(s) for s in _as_list(self.snr_db)]
        self.schemes = [str(s) for s in _as_list(self.schemes)]
        if self.k_sweep is not None:
            self.k_sweep = [int(k) for k in _as_list(self.k_sweep)]
        if self.M_sweep is not None:
            self.M_sweep = [int(m) for m in _as_list(self.M_sweep)]
        if self.weights is not None:
            self.weights = [float(w) for w in _as_list(self.weights)]

    @property
    def overloaded(self) -> bool:
        return self.k_sweep is not None

    @property
    def user_counts(self) -> list[int]:
        return list(self.k_sweep) if self.overloaded else [self.K]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "ExperimentConfig":
        """Raise :class:`ConfigError` for any infeasible combination; returns ``self``."""
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        for name in ("M", "N", "K", "trials", "max_iter", "workers", "gamma_trials"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if not 0 <= self.root_seed < 2**64:
            raise ConfigError(f"root_seed must fit in 64 bits, got {self.root_seed}")
        if not self.B or any(not 0 <= b <= tol.MAX_FEEDBACK_BITS for b in self.B):
            raise ConfigError(f"B values must lie in [0, {tol.MAX_FEEDBACK_BITS}], got {self.B}")
        if self.kind == "gap":
            if any(m < 2 * self.N or m % self.N for m in self.M_sweep or [self.M]):
                raise ConfigError("gap study needs M >= 2N with N dividing M")
            return self
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown or not self.schemes:
            raise ConfigError(f"unknown schemes {unknown}; expected a subset of {SCHEMES}")
        if not self.snr_db:
            raise ConfigError("snr_db sweep is empty")
        if self.csi_mode not in CSI_MODES:
            raise ConfigError(f"csi_mode must be one of {CSI_MODES}, got {self.csi_mode!r}")
        if isinstance(self.gamma_mode, str) and self.gamma_mode not in GAMMA_MODES:
            raise ConfigError(f"gamma_mode must be one of {GAMMA_MODES} or a number, got {self.gamma_mode!r}")
        if not isinstance(self.gamma_mode, str) and not 0.0 <= float(self.gamma_mode) < 1.0:
            raise ConfigError(f"gamma override must lie in [0, 1), got {self.gamma_mode}")
        if self.M <= self.N:
            raise ConfigError(f"need M > N, got M={self.M}, N={self.N}")
        if self.tol < 0:
            raise ConfigError("tol must be non-negative")
        if self.overloaded:
            if "bd" in self.schemes:
                raise ConfigError("BD is undefined in the overloaded user sweep (M < N K); drop it from schemes")
            if any(k < 1 for k in self.k_sweep):
                raise ConfigError(f"k_sweep entries must be positive, got {self.k_sweep}")
        elif self.M != self.N * self.K:
            raise ConfigError(f"M = N K required outside the user sweep, got M={self.M}, N={self.N}, K={self.K}")
        if self.weights is not None:
            if len(self.weights) != max(self.user_counts) or any(w <= 0 for w in self.weights):
                raise ConfigError("weights must hold one positive value per user")
        if self.kind == "convergence" and not {"rwmmse", "wmmse"} & set(self.schemes):
            raise ConfigError("convergence trace needs an iterative scheme (wmmse or rwmmse)")
        return self


def _as_list(value):
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [value]


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INTS = {"M", "N", "K", "trials", "root_seed", "max_iter", "workers", "gamma_trials"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _INTS:
        return int(raw, 0)
    if key == "tol":
        return float(raw)
    if key in ("clamp_gamma", "bounds"):
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{key} expects a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    if key == "gamma_mode":
        try:
            return float(raw)
        except ValueError:
            return raw
    if key in ("B", "snr_db", "schemes", "weights", "k_sweep", "M_sweep"):
        return _as_list(raw)
    return raw


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment and lists are comma separated.

    A ``figure`` key starts from that recipe and the remaining keys override it.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key != "figure" and key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = raw if key == "figure" else _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    base = figure_recipes(values.pop("figure")) if "figure" in values else ExperimentConfig()
    return base.replace(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


_FULL_SNR = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]


def _fig1():
    return ExperimentConfig(name="fig1", schemes=["mrt", "bd", "mmse"], bounds=True,
                            snr_db=[-20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0])


def _fig2():
    return ExperimentConfig(name="fig2", kind="gap", B=[4, 6, 8, 10], M_sweep=[8, 16])


def _fig3():
    return ExperimentConfig(name="fig3", csi_mode="perfect", snr_db=_FULL_SNR)


def _fig4():
    return ExperimentConfig(name="fig4", kind="convergence", schemes=["rmmse", "rwmmse"],
                            snr_db=[10.0, 20.0, 30.0], max_iter=50, tol=0.0)


def _fig5a():
    return ExperimentConfig(name="fig5a", snr_db=_FULL_SNR)


def _fig5b():
    return ExperimentConfig(name="fig5b", M=16, N=2, K=8, snr_db=_FULL_SNR)


def _fig6():
    return ExperimentConfig(name="fig6", B=[2, 4, 6, 8, 10, 12], snr_db=[10.0, 30.0])


def _fig7():
    return ExperimentConfig(name="fig7", snr_db=[10.0], k_sweep=[2, 3, 4, 5, 6, 7, 8],
                            schemes=["mrt", "mmse", "wmmse", "rmmse", "rwmmse"])


FIGURES = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5a,
    "fig5a": _fig5a,
    "fig5b": _fig5b,
    "fig6": _fig6,
    "fig7": _fig7,
}


def figure_recipes(name: str, trials: int | None = None) -> ExperimentConfig:
    """Return the canned configuration that regenerates one figure's data.

    ``fig5`` is an alias of ``fig5a``. ``fig4`` assumes the default system
    (M=8, N=2, K=4, B=10) because its dimensions are not given with the
    plot.
    """
    try:
        cfg = FIGURES[name]()
    except KeyError:
        raise ConfigError(f"unknown figure {name!r}; expected one of {sorted(FIGURES)}") from None
    if trials is not None:
        cfg = cfg.replace(trials=int(trials))
    return cfg
