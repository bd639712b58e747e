from fastapi import APIRouter

from src.core.logger import get_logger
from src.domains.clustering.schemas import DesignSpace, SpaceSource
from src.domains.models.schemas import ModelSpec
from .schemas import Criterion, DesignRequest, DesignResponse
from .service import DesignService

logger = get_logger(__name__)
design_service = DesignService()

design_router = APIRouter()


@design_router.post("", response_model=DesignResponse)
def create_design(request: DesignRequest):
    """Approximate optimal design over the posted candidate points."""
    candidates = DesignSpace(points=request.candidates, source=SpaceSource.full_sample)
    model = ModelSpec(family=request.family, p=candidates.points.shape[1])
    logger.info(f"Design request: {candidates.size} candidates, {request.family.value}, criterion {request.criterion}")

    design = design_service.optimize_design(candidates, model, request.beta, Criterion.parse(request.criterion), tol=request.tol)
    return DesignResponse(**design.to_dict())
