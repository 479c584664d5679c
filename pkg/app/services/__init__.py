from .analysis_service import AnalysisService
from .campaign_service import CampaignReport, CampaignService, run_grid
from .storage_service import CampaignStore
