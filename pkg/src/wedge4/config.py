"""Run configuration: TOML files validated against a strict schema."""
import sys
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FourierField(Strict):
    """sum of amplitude * cos(2 pi k.x + phase) plus a constant."""

    terms: List[Tuple[List[int], float, float]] = []
    constant: float = 0.0

    def series(self):
        from .fibers import FourierSeries
        return FourierSeries.from_config(self.model_dump())


class GridConfig(Strict):
    dim: Literal[3, 4] = 4
    n: Union[int, List[int]] = 16

    @field_validator("n")
    @classmethod
    def _even(cls, v):
        sizes = [v] if isinstance(v, int) else v
        if any(m < 4 or m % 2 for m in sizes):
            raise ValueError("grid sizes must be even and >= 4")
        return v

    @model_validator(mode="after")
    def _dims(self):
        if isinstance(self.n, list) and len(self.n) != self.dim:
            raise ValueError(f"n lists {len(self.n)} sizes for a {self.dim}-dimensional grid")
        return self


class GraphFamily(Strict):
    type: Literal["graph"]
    flux: Literal["identity", "rotation", "coefficient", "cubic"] = "identity"
    e0: List[float] = [1.0, 0.0, 0.0]
    coefficient: FourierField = FourierField(constant=1.0)
    s: FourierField = FourierField()
    eps: float = 0.1
    total_angle: float = 2.0943951023931953
    axis: int = 2


class _Density(Strict):
    """Log-density ``f`` or the density e^f itself, both as Fourier series."""

    f: FourierField = FourierField()
    density: Optional[FourierField] = None


class CYFamily(_Density):
    type: Literal["cy"]
    normalize: bool = False


class TranslatedCYFamily(_Density):
    type: Literal["translated-cy"]
    theta: List[FourierField] = Field(default_factory=lambda: [FourierField()] * 6)

    @field_validator("theta")
    @classmethod
    def _six(cls, v):
        if len(v) != 6:
            raise ValueError("theta needs six component series")
        return v


class MomentFamily(Strict):
    type: Literal["moment"]
    f: List[FourierField]

    @field_validator("f")
    @classmethod
    def _three(cls, v):
        if len(v) != 3:
            raise ValueError("moment data needs three series f1, f2, f3")
        return v


class LinearASDFamily(Strict):
    type: Literal["linear-asd"]
    mu: List[List[float]] = [[0.0] * 3] * 3


Family = Union[GraphFamily, CYFamily, TranslatedCYFamily, MomentFamily, LinearASDFamily]


class SolverConfig(Strict):
    tol: Optional[float] = None
    max_iter: int = 40
    krylov_rtol: float = 1e-3
    krylov_restart: int = 50
    krylov_maxiter: int = 20
    max_halvings: int = 20
    compatibility: Literal["reject", "normalize"] = "reject"


class SliceConfig(Strict):
    C: List[float] = [0.0] * 6
    basis: Union[Literal["sd"], List[List[float]]] = "sd"


class ContinuationConfig(Strict):
    t_end: float = 1.0
    dt0: float = 0.1
    dt_min: float = 1e-4
    K_max: float = 1e3
    margin_min: float = -0.05
    solver: Literal["auto", "general"] = "auto"
    reverse: bool = False


class DiagnoseConfig(Strict):
    source: Literal["solution", "bump"] = "solution"
    r0: float = 0.125
    depth: int = 5
    centers: Optional[List[List[int]]] = None
    random_centers: int = 2
    axis: int = 0


class OutputConfig(Strict):
    report: str = "report.json"
    fields: bool = True
    csv: bool = True


class RunConfig(Strict):
    problem: Literal["graph", "cy", "translated-cy", "general", "continue", "diagnose", "selftest"]
    seed: int = 0
    threads: int = 1
    grid: GridConfig = GridConfig()
    family: Optional[Family] = Field(default=None, discriminator="type")
    solver: SolverConfig = SolverConfig()
    slice: SliceConfig = SliceConfig()
    continuation: ContinuationConfig = ContinuationConfig()
    diagnose: DiagnoseConfig = DiagnoseConfig()
    output: OutputConfig = OutputConfig()
    perturbation: float = 0.0

    @model_validator(mode="after")
    def _consistent(self):
        if self.problem == "selftest":
            return self
        if self.family is None and not (self.problem == "diagnose" and self.diagnose.source == "bump"):
            raise ValueError(f"problem '{self.problem}' needs a [family] table")
        fam = self.family
        if self.problem == "graph" and not isinstance(fam, GraphFamily):
            raise ValueError("problem 'graph' needs family.type = 'graph'")
        if self.problem in ("graph",) and self.grid.dim != 3:
            raise ValueError("graph problems live on 3-dimensional grids")
        if self.problem in ("cy", "translated-cy", "general") and self.grid.dim != 4:
            raise ValueError(f"problem '{self.problem}' needs a 4-dimensional grid")
        if self.problem == "cy" and not isinstance(fam, CYFamily):
            raise ValueError("problem 'cy' needs family.type = 'cy'")
        if self.problem == "translated-cy" and not isinstance(fam, (TranslatedCYFamily, MomentFamily)):
            raise ValueError("problem 'translated-cy' needs family.type 'translated-cy' or 'moment'")
        return self


class ConfigError(Exception):
    pass


def _format_errors(exc):
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "\n".join(lines)


def parse_config(data):
    from pydantic import ValidationError
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)


def resolved(cfg):
    """Plain dict of the fully resolved configuration (defaults filled in)."""
    return cfg.model_dump(mode="json")
