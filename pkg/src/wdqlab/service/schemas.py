"""Request/response models for the HTTP service.

Paths travel as CSV text (header ``t,value``) so the service, the CLI and
the on-disk format are a single canonical encoding; everything else is
plain JSON scalars.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..distributions import DistributionSpec, ModelParams


class LawModel(BaseModel):
    family: Literal["normal", "shifted_exponential", "uniform", "two_point"]
    params: dict[str, float]

    def to_spec(self) -> DistributionSpec:
        p = self.params
        order = {
            "normal": ("mean", "sd"),
            "shifted_exponential": ("rate", "shift"),
            "uniform": ("a", "b"),
            "two_point": ("p", "lo", "hi"),
        }[self.family]
        return DistributionSpec(self.family, tuple(p[k] for k in order))

    @classmethod
    def from_spec(cls, spec: DistributionSpec) -> "LawModel":
        order = {
            "normal": ("mean", "sd"),
            "shifted_exponential": ("rate", "shift"),
            "uniform": ("a", "b"),
            "two_point": ("p", "lo", "hi"),
        }[spec.family]
        return cls(family=spec.family, params=dict(zip(order, spec.params)))


class ConfigModel(BaseModel):
    theta: LawModel
    x: LawModel
    mu: float
    r: float = 0.0
    beta: float = 0.2
    T: float = Field(1.0, gt=0)
    w0: float = Field(0.0, ge=0)
    seed: int = 0

    def to_params(self) -> ModelParams:
        x_spec = self.x.to_spec()
        if abs(self.mu - x_spec.mean) > 1e-12 * (1.0 + abs(self.mu)):
            raise ValueError(f"declared mu={self.mu} does not match the x law mean {x_spec.mean}")
        return ModelParams(
            theta_law=self.theta.to_spec(),
            x_law_base=x_spec,
            r=self.r,
            beta=self.beta,
            horizon=self.T,
            w0=self.w0,
        )


class SimulateRequest(BaseModel):
    config: ConfigModel
    n: int = Field(..., ge=1)
    reps: int = Field(1, ge=1)
    scaling: Literal["raw", "fluid", "diffusion", "md"] = "raw"
    process: Literal["w", "v"] = "w"
    v0: float = 0.0
    md_w0: Optional[float] = None


class SimulateResponse(BaseModel):
    csv: str  # rows: rep,t,value
    center: float


class ReflectRequest(BaseModel):
    op: Literal["r", "m", "rtheta"]
    theta: float = 0.0
    csv: str


class ReflectResponse(BaseModel):
    csv: str
    regulator_csv: Optional[str] = None


class ClassifyRequest(BaseModel):
    mu: float
    theta: float
    process: Literal["w", "v"] = "w"


class ClassifyResponse(BaseModel):
    load: str
    theta_sign: str
    stable: bool
    stable_point: Optional[float]
    initial_condition_dependent: bool
    secondary_fixed_point: Optional[float]


class FluidPathRequest(BaseModel):
    mu: float
    theta: float
    initial: float
    T: float = Field(..., gt=0)
    steps: int = Field(..., ge=1)
    process: Literal["w", "v"] = "w"


class FluidPathResponse(BaseModel):
    csv: str
    hitting_time: Optional[float] = None


class ConvergenceRequest(BaseModel):
    config: ConfigModel
    n_ladder: list[int]
    reps: int = Field(..., ge=2)
    process: Literal["w", "v"] = "w"
    v0: Optional[float] = None


class ConvergenceRow(BaseModel):
    n: int
    reps: int
    mean_sup_error: float
    se: float
    q10: float
    q50: float
    q90: float


class ConvergenceResponse(BaseModel):
    rows: list[ConvergenceRow]


class RateParamsModel(BaseModel):
    mu: float
    theta: float
    sigma_x: float = Field(..., gt=0)
    sigma_theta: float = Field(..., ge=0)
    r: float = 0.0
    initial: float = 0.0


class RateRequest(BaseModel):
    case: Literal["w-pos", "w-zero", "v-pos", "v-zero"]
    phi_csv: str
    params: RateParamsModel


class RateResponse(BaseModel):
    value_closed_form: Optional[float]  # null encodes +infinity
    value_variational: Optional[float]
    gap: Optional[float]
    psi1_csv: Optional[str] = None
    psi2_csv: Optional[str] = None
    y_csv: Optional[str] = None


class EndpointTargetRequest(BaseModel):
    case: Literal["w-pos", "w-zero", "v-pos", "v-zero"]
    params: RateParamsModel
    a: float
    T: float = Field(..., gt=0)
    cells: int = Field(200, ge=2, le=200)


class EndpointTargetResponse(BaseModel):
    target: float
    exact_random_walk: Optional[float] = None


class FcltRequest(BaseModel):
    case: Literal["i", "ii", "iii"]
    config: ConfigModel
    eta: float = 0.0
    n: int = Field(..., ge=1)
    t: float = Field(..., gt=0)
    reps: int = Field(..., ge=2)
    delta: float = 0.5
    # case i only: compare against closed-form stationary moments instead of
    # a simulated limit ensemble (needs t large and the start near the center)
    stationary: bool = False


class MomentReportModel(BaseModel):
    empirical_mean: float
    empirical_var: float
    target_mean: float
    target_var: float
    z_mean: float
    z_var: float
    ks_statistic: Optional[float]


class FcltResponse(BaseModel):
    case: str
    n: int
    reps: int
    t_eval: float
    moments: Optional[MomentReportModel]
    sup_exceed_diffusion: Optional[float]
    sup_exceed_md: Optional[float]
    regulator_active_fraction: Optional[float]


class TailEventModel(BaseModel):
    kind: Literal["endpoint", "sup"]
    a: float = Field(..., ge=0)


class MdpTailRequest(BaseModel):
    config: ConfigModel
    event: TailEventModel
    n_ladder: list[int]
    reps: int = Field(..., ge=1)
    target: Optional[float] = None  # computed from the rate function when omitted


class MdpTailResponse(BaseModel):
    n_ladder: list[int]
    b_values: list[float]
    p_hats: list[float]
    standard_errors: list[Optional[float]]
    rates: list[Optional[float]]
    censored_rate_lower_bounds: list[Optional[float]]
    target: float
    trend: str
    within_band: Optional[bool]
    csv: str  # rows: n,b_n,p_hat,se,rate,censored_lower_bound
    # set when the smallest rung saw fewer than 10 hits: the largest threshold
    # expected to stay estimable there
    suggested_threshold: Optional[float] = None


class OracleRequest(BaseModel):
    seed: int = 0
    cases: int = Field(1000, ge=1)


class SuiteRow(BaseModel):
    suite: str
    cases: int
    failures: int
    passed: bool


class OracleResponse(BaseModel):
    suites: list[SuiteRow]
    all_passed: bool
    csv: str  # rows: suite,cases,failures,passed
