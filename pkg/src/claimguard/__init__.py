"""claimguard: anti-fraud engine for photo-based car-insurance claims."""

__version__ = "0.1.0"

from .errors import ClaimGuardError
from .features import FusedDescriptor, FusionConfig
from .matcher import FraudAssessment, FraudMode, FraudPolicy, MatchResult
from .model import (
    Adjudication,
    ClaimRecord,
    ClaimStatus,
    DamageClass,
    DamageRegion,
    EvidenceKind,
    ImageEvidence,
    NormalizedBBox,
    RegionSource,
    ReviewDecision,
)
from .store import ClaimStore, DescriptorEntry, EnrolledFeature, GalleryFilter

__all__ = [
    "Adjudication",
    "ClaimGuardError",
    "ClaimRecord",
    "ClaimStatus",
    "ClaimStore",
    "DamageClass",
    "DamageRegion",
    "DescriptorEntry",
    "EnrolledFeature",
    "EvidenceKind",
    "FraudAssessment",
    "FraudMode",
    "FraudPolicy",
    "FusedDescriptor",
    "FusionConfig",
    "GalleryFilter",
    "ImageEvidence",
    "MatchResult",
    "NormalizedBBox",
    "RegionSource",
    "ReviewDecision",
    "__version__",
]
