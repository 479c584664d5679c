from .schemas import (
    CATALOG,
    CampaignConfig,
    CampaignManifest,
    CampaignRecord,
    CampaignSummary,
    EventKind,
    Fault,
    FaultModel,
    FaultTarget,
    GoldenReference,
    LocationClass,
    OutcomeClass,
    OutcomeReason,
    StopKind,
    TrapKind,
    TriggerMode,
)
