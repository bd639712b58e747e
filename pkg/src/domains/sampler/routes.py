from fastapi import APIRouter

from src.core.logger import get_logger
from src.domains.models.schemas import Dataset, ModelSpec
from .schemas import OdbssConfig, SubsampleRequest, SubsampleResponse
from .service import SamplerService

logger = get_logger(__name__)
sampler_service = SamplerService()

sampler_router = APIRouter()


@sampler_router.post("", response_model=SubsampleResponse)
def create_subsample(request: SubsampleRequest):
    """Run the full pipeline on the posted rows."""
    dataset = Dataset(X=request.X, y=request.y)
    model = ModelSpec(family=request.family, p=dataset.p)
    overrides = request.model_dump(include={"k0_fraction", "zeta"}, exclude_none=True)
    config = OdbssConfig(
        k=request.k,
        criterion=request.criterion,
        metric=request.metric,
        space_mode=request.space_mode,
        seed=request.seed,
        **overrides,
    )
    logger.info(f"Subsample request: n={dataset.n}, k={config.k}, {request.family.value}")

    result = sampler_service.odbss(dataset, model, config)
    design = result.design_used
    return SubsampleResponse(
        indices=result.indices.tolist(),
        initial_indices=result.initial_indices.tolist(),
        beta_hat=None if result.beta_hat is None else result.beta_hat.tolist(),
        support=design.support.tolist(),
        weights=design.weights.tolist(),
        timings_ms=result.timings,
    )
