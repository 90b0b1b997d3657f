from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from ..core.config import settings


class CancellationReport(BaseModel):
    """Bounded-cancellation constants for the Nielsen generators of one rank."""

    rank: int
    search_depth: int
    per_generator: Dict[str, int]
    depth_profile: Dict[str, List[int]] = Field(default_factory=dict)
    symmetrized: Dict[str, int]
    lemma1_word_constant: int
    lemma1_cyclic_constant: int
    stabilized: bool
    certified: bool = False
    certification_samples: int = 0
    doublings: int = 0


class Lemma1Violation(BaseModel):
    generator: str
    word: str
    alpha_before: int
    alpha_after: int
    constant: int
    kind: Literal["cyclic", "word"] = "cyclic"


class DoublingViolation(BaseModel):
    """A generator that more than doubled the cyclic length of a necklace."""

    generator: str
    word: str
    length_before: int
    length_after: int


class FixtureViolation(BaseModel):
    index: Optional[int] = None
    condition: str
    message: str


class ValidationReport(BaseModel):
    valid: bool
    edge_count: int
    vertex_count: int
    violations: List[FixtureViolation] = Field(default_factory=list)


class WitnessCertificate(BaseModel):
    """Closed path whose path-alpha grows at least linearly under iteration."""

    path: List[str]
    slope: float
    intercept: int
    k_max: int
    table: List[Tuple[int, int]]


class SplittingResult(BaseModel):
    iterations: int
    decomposition: List[List[str]]
    persisted_through: int


class ClosedFormRow(BaseModel):
    k: int
    closed_form_power: int
    iterated_power: Optional[int]
    match: bool


class GrowthEvidence(BaseModel):
    k_values: List[int] = Field(default_factory=list)
    lengths: List[int] = Field(default_factory=list)
    tail_start: Optional[int] = None
    r2_exponential: Optional[float] = None
    r2_polynomial: Optional[float] = None
    exponential_slope: Optional[float] = None
    loglog_slope: Optional[float] = None


class GrowthClassification(BaseModel):
    verdict: Literal["finite_order", "polynomial", "exponential"]
    period: Optional[int] = None
    degree: Optional[int] = None
    lambda_hat: Optional[float] = None
    evidence: GrowthEvidence = Field(default_factory=GrowthEvidence)


class TauEstimate(BaseModel):
    """Bracketing interval for a translation length, with provenance."""

    lower: float = Field(ge=0.0)
    upper: Optional[float] = None
    method: Literal["case1_exponential", "case2_upg", "finite_order"]
    certified: bool = True
    lambda_lower: Optional[float] = None
    cancellation_constant: Optional[int] = None
    upg_power: Optional[int] = None
    certificate: Dict[str, Any] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)


class TauBoundEntry(BaseModel):
    k: int
    norm: int
    required_lower: int
    allowed_upper: Optional[int]
    ok: bool


class TauBoundReport(BaseModel):
    norm: Optional[int]
    radius: int
    entries: List[TauBoundEntry] = Field(default_factory=list)
    ratios: List[Tuple[int, float]] = Field(default_factory=list)
    violations: int = 0


class SuiteResult(BaseModel):
    name: str
    checked: int
    failures: int
    warning: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.failures == 0


class VerifySummary(BaseModel):
    suites: List[SuiteResult] = Field(default_factory=list)
    passed: bool = True
    details: Dict[str, Any] = Field(default_factory=dict)


class ExperimentConfig(BaseModel):
    """Per-run parameters of a CLI batch; JSON file passed with --config."""

    rank: int = 2
    automorphisms: List[Dict[str, Any]] = Field(default_factory=list)
    fixture: Optional[str] = None
    certificate: Optional[str] = None
    k_max: int = 20
    length_budget: int = 200_000
    bcc_depth: int = 8
    oracle_radius: int = 5
    node_budget: int = 10_000_000
    samples: int = 1000
    maxlen: int = 40
    exhaustive_length: int = 0
    constant_offset: int = 0
    workers: int = 1
    seed: int = 0
    out: str = settings.OUTPUT_FOLDER

    @field_validator("rank")
    @classmethod
    def validate_rank(cls, value: int) -> int:
        if value < 2:
            raise ValueError("rank must be at least 2")
        return value

    @field_validator("k_max", "length_budget", "bcc_depth", "node_budget", "maxlen", "workers")
    @classmethod
    def validate_positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("budgets must be positive")
        return value

    @field_validator("oracle_radius", "samples", "exhaustive_length")
    @classmethod
    def validate_non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be non-negative")
        return value
