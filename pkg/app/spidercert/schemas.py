from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

Kind = Literal["maxcut", "2xor"]
Mode = Literal["exhaustive", "sampled"]
Status = Literal["pass", "fail", "skipped"]


# ---------------------------------------------------------------- inputs

class GraphModel(BaseModel):
    n: int = Field(..., ge=1, description="Vertex count; vertices are 0-indexed")
    edges: List[Tuple[int, int, int, int]] = Field(..., min_length=1, description="[u, v, multiplicity, sign]")


class InstanceModel(BaseModel):
    n: int = Field(..., ge=1, description="Variable count")
    k: int = Field(..., ge=1, description="Arity")
    predicate: Optional[str] = Field(None, description="Truth table as a 0/1 string of length 2^k (CSP only)")
    terms: Optional[List[Tuple[List[int], int]]] = Field(None, description="XOR terms [[i1..ik], weight]")
    clauses: Optional[List[Tuple[List[int], List[int]]]] = Field(None, description="CSP clauses [[i1..ik], [z1..zk]]")
    p: Optional[float] = Field(None, ge=0, le=1, description="Clause probability the instance was drawn with")
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _one_body(self):
        if (self.terms is None) == (self.clauses is None):
            raise ValueError("instance needs exactly one of 'terms' or 'clauses'")
        if self.clauses is not None and self.predicate is None:
            raise ValueError("CSP instances need a 'predicate'")
        if self.predicate is not None and len(self.predicate) != 2 ** self.k:
            raise ValueError(f"predicate must have length 2^k = {2 ** self.k}")
        return self


class WeightSpec(BaseModel):
    kind: Literal["rademacher", "wn", "table"] = "rademacher"
    p: float = Field(1.0, ge=0, le=1, description="Bernoulli rate (rademacher, wn)")
    N: int = Field(1, ge=1, description="Number of summands for W_N(p)")
    values: Optional[List[int]] = Field(None, description="Integer atoms (table)")
    probs: Optional[List[float]] = Field(None, description="Atom probabilities (table)")

    @model_validator(mode="after")
    def _table(self):
        if self.kind == "table":
            if not self.values or not self.probs or len(self.values) != len(self.probs):
                raise ValueError("table weights need matching 'values' and 'probs'")
            if any(q < 0 for q in self.probs) or abs(sum(self.probs) - 1.0) > 1e-9:
                raise ValueError("table probabilities must be non-negative and sum to 1")
        return self


# ---------------------------------------------------------------- reports

class CheckResult(BaseModel):
    name: str
    status: Status
    residual: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"


class VerificationReport(BaseModel):
    kind: Kind
    mode: Mode
    checks: List[CheckResult]
    passed: bool
    samples: Optional[int] = None
    seed: Optional[int] = None

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


class PsiReport(BaseModel):
    k: int
    ell: int
    alpha: float
    eta: float
    size: int
    dense: bool
    inner: List[float] = Field(..., description="Recomputed <Psi, A^(d)>, d = 0..2l")
    formula: List[float] = Field(..., description="Closed-form values")
    residuals: List[float]
    tilde_inner: List[float]
    tilde_formula: List[float]
    min_eigenvalue: float
    max_eigenvalue: float
    psd: bool
    symmetric: bool
    corollary_applicable: bool
    corollary_ok: Optional[bool] = None
    passed: bool


class ParameterChoice(BaseModel):
    epsilon: float
    pi_star: float
    rho: float
    raw_ell: float
    ell: int
    k: int
    R: int
    alpha: float
    raised_k: bool = Field(False, description="k was lifted to 3^l")
    beta_closed: float
    within_guarantee: bool = Field(..., description="beta_closed <= 5/2 epsilon")


class CertificateModel(BaseModel):
    kind: Kind
    n: int
    edges: float
    k: int
    ell: int
    R: int
    locality: int
    alpha: float
    eta: float
    c0: float
    inner: List[float]
    rho: float
    pi_star: float
    norm_M: float
    gamma: float
    gamma_exact: bool
    beta_closed: float
    beta_sharp: float
    bound_obj: float
    bound_obj_sharp: float
    theta: Optional[float] = None
    iota: Optional[float] = None
    directions: List[str]
    vacuous: bool
    epsilon: Optional[float] = None
    parameters: Optional[ParameterChoice] = None
    verification: Optional[VerificationReport] = None


class RefutationReport(BaseModel):
    arity: int
    n: int
    reduction: Literal["identity", "flatten", "lift"]
    factor: int = Field(..., description="Round multiplier of the reduction (q or q+1)")
    n_flat: int
    support: int
    m_abs: int
    vol: int
    d_min: Optional[int] = None
    pi_star: Optional[float] = None
    rho: Optional[float] = None
    sigma2: float
    mean_abs_w: float
    max_abs_w: int
    predicted_rho_logN: Optional[float] = None
    predicted_rho_logn: Optional[float] = None
    epsilon: Optional[float] = None
    ell_prop: Optional[int] = None
    parameters: Optional[ParameterChoice] = None
    certificate: Optional[CertificateModel] = None
    refuted: bool
    reason: str = ""
    advantage_bound: float = Field(..., description="Certified bound on |sum b x^S| / m")
    bound_obj: float
    nominal_bound: Optional[float] = None
    eig_bound: Optional[float] = None
    rounds: Optional[int] = None


class AlphaBound(BaseModel):
    alpha: List[int]
    size: int
    coeff: str
    coeff_float: float
    m_alpha: int
    method: Literal["constant", "l1", "certificate", "l1-fallback"]
    bound: float = Field(..., description="Bound on |I^alpha(x)|")
    refutation: Optional[RefutationReport] = None


class PredicateRefutationReport(BaseModel):
    k: int
    n: int
    m: int
    p: Optional[float] = None
    expected_m: Optional[float] = None
    epsilon: float
    delta: float
    mean_P: str
    bound: float
    nominal_bound: float
    refuted: bool
    blocking: List[List[int]]
    alphas: List[AlphaBound]
    ell_theorem: Optional[int] = None
    rounds_theorem: Optional[int] = None
    rounds_measured: Optional[int] = None


class TailCheck(BaseModel):
    threshold: float
    frequency: float
    bound: float
    se: float
    violated: bool


class WeightStats(BaseModel):
    N: int
    p: float
    samples: int
    pN: float
    mean: float
    mean_se: float
    second_moment: float
    second_moment_se: float
    abs_mean: float
    abs_mean_se: float
    branch: Literal["pN>=1", "pN<1"]
    abs_bound: float = Field(..., description="Lower bound on E|X| that gates pass/fail")
    abs_bound_alt: Optional[float] = Field(None, description="1/e-constant variant (pN < 1)")
    abs_bound_alt_ok: Optional[bool] = None
    tails: List[TailCheck]
    violations: List[str]
    passed: bool


class EmbeddabilityReport(BaseModel):
    R: int
    r: int
    subset_size: int
    max_degree: int
    max_row_sum: float
    dominance: Literal["strict", "boundary", "fail"]
    exhaustive: bool
    subsets_checked: int
    min_eigenvalue: float
    factorization_failures: int
    passed: bool


class FPropertiesReport(BaseModel):
    points: int
    odd_max_residual: float
    lower_min_slack: float
    monotone_min_step: float
    passed: bool


class LowerBoundReport(BaseModel):
    R: int
    r: int
    constraints: int
    value: float
    guaranteed: float
    meets_guarantee: bool
    embeddability: EmbeddabilityReport


class EigBounds(BaseModel):
    laplacian_bound: float
    walk_bound: float
    signed_bound: float
    lambda_max_laplacian: float
    lambda_max_neg_walk: float
    lambda_max_signed: float


class GraphSummary(BaseModel):
    n: int
    edges: float
    pi_star: float
    d_min: int
    rho_signed: float
    rho_centered: float
    eig: EigBounds


# ---------------------------------------------------------------- bench

class ExperimentConfig(BaseModel):
    name: str = "experiment"
    generator: Literal["gnp", "regular", "complete"]
    n: int = Field(..., ge=2)
    degree: Optional[float] = Field(None, gt=0, description="Average degree (gnp) or regular degree")
    kind: Kind = "maxcut"
    epsilon: Optional[float] = Field(None, gt=0, lt=1)
    k: Optional[int] = Field(None, ge=2)
    ell: Optional[int] = Field(None, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0])
    simple: bool = False
    brute_max_n: int = Field(20, ge=1, le=26)
    lb_rounds: int = Field(1, ge=1)
    max_ell: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _params(self):
        if self.epsilon is None and (self.k is None or self.ell is None):
            raise ValueError("experiment needs epsilon or both k and ell")
        if self.generator in ("gnp", "regular") and self.degree is None:
            raise ValueError(f"generator '{self.generator}' needs a degree")
        return self


class Experiment(BaseModel):
    name: str
    generator: str
    n: int
    degree: Optional[float] = None
    seed: int
    kind: Kind
    vertices: Optional[int] = None
    edges: Optional[float] = None
    rho: Optional[float] = None
    pi_star: Optional[float] = None
    d_min: Optional[int] = None
    laplacian_bound: Optional[float] = None
    walk_bound: Optional[float] = None
    signed_bound: Optional[float] = None
    k: Optional[int] = None
    ell: Optional[int] = None
    R: Optional[int] = None
    beta_closed: Optional[float] = None
    beta_sharp: Optional[float] = None
    cert_bound: Optional[float] = None
    cert_bound_sharp: Optional[float] = None
    optimum: Optional[float] = None
    optimum_exact: Optional[str] = None
    feasible_value: Optional[float] = None
    violations: int = 0
    errors: Dict[str, str] = Field(default_factory=dict)
    timings: Dict[str, float] = Field(default_factory=dict)


class SweepReport(BaseModel):
    count: int
    violations: int
    by_family: Dict[str, int]
    certified_below_one: int
    failures: List[str]
    passed: bool


# ---------------------------------------------------------------- cli / api

class RunConfig(BaseModel):
    subcommand: str
    input: Optional[Path] = None
    generator: Optional[str] = None
    epsilon: Optional[float] = Field(None, gt=0, lt=1)
    delta: Optional[float] = Field(None, gt=0)
    k: Optional[int] = Field(None, ge=1)
    ell: Optional[int] = Field(None, ge=1)
    rounds: Optional[int] = Field(None, ge=1)
    seed: int = 0
    tol: Optional[float] = Field(None, gt=0)
    format: Literal["json", "csv"] = "json"
    jobs: int = Field(1, ge=1)
    needs_instance: bool = False

    @model_validator(mode="after")
    def _source(self):
        if self.needs_instance and (self.input is None) == (self.generator is None):
            raise ValueError("give exactly one of --input or a generator (--model)")
        return self


class SpiderCheckRequest(BaseModel):
    k: int = Field(..., ge=2, description="Leg count")
    ell: int = Field(..., ge=1, description="Leg length")
    alpha: Optional[float] = Field(None, gt=0, description="Defaults to k^(1/2l)")


class CertifyRequest(BaseModel):
    graph: GraphModel
    kind: Kind = "maxcut"
    epsilon: Optional[float] = Field(None, gt=0, lt=1)
    k: Optional[int] = Field(None, ge=2)
    ell: Optional[int] = Field(None, ge=1)
    verify: Literal["none", "exhaustive", "sampled"] = "none"
    samples: int = Field(100000, ge=1)
    seed: int = 0


class LowerBoundRequest(BaseModel):
    graph: GraphModel
    rounds: int = Field(1, ge=1)
    subset_size: Optional[int] = Field(None, ge=1)


class RefuteXorRequest(BaseModel):
    instance: InstanceModel
    epsilon: Optional[float] = Field(None, gt=0, lt=1)
    k: Optional[int] = Field(None, ge=2)
    ell: Optional[int] = Field(None, ge=1)
    seed: int = 0
