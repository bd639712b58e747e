from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from src.core.config import settings
from src.core.errors import OdbssError
from src.core.logger import get_logger
from src.domains.design.routes import design_router
from src.domains.sampler.routes import sampler_router

logger = get_logger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info(f"{settings.APP_NAME} starting (log level {settings.LOG_LEVEL})")
    yield
    logger.info(f"{settings.APP_NAME} shutting down")


app = FastAPI(
    title=settings.APP_NAME,
    description="Optimal-design-based subsampling for regression on large datasets",
    version="1.0.0",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:3000", "http://127.0.0.1:3000"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(OdbssError)
async def odbss_error_handler(request: Request, exc: OdbssError):
    logger.error(f"{request.url.path}: {type(exc).__name__}: {exc.detail}")
    return JSONResponse(status_code=exc.status_code, content={"detail": exc.detail})


@app.exception_handler(ValidationError)
async def validation_error_handler(request: Request, exc: ValidationError):
    # raised by domain models built inside the handlers, not by request parsing
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={"detail": exc.errors(include_url=False, include_context=False, include_input=False)},
    )


app.include_router(design_router, prefix="/api/v1/design", tags=["Design"])
app.include_router(sampler_router, prefix="/api/v1/subsample", tags=["Subsampling"])


@app.get("/")
async def root():
    return {"message": f"{settings.APP_NAME} is running!"}


@app.get("/health")
async def health_check():
    return {"status": "healthy"}
