import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.config import settings
from app.independence.router import router as independence_router
from app.metrics.router import router as metrics_router
from app.simulation.router import router as simulation_router

logging.basicConfig(level=settings.log_level)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    settings.validate_runtime()
    logger.info("CORS origins: %s", settings.cors_origins)
    yield


# Disable interactive docs in production
_docs_url = "/docs" if settings.app_env != "production" else None
_redoc_url = "/redoc" if settings.app_env != "production" else None

app = FastAPI(
    title="PoW Redundancy Lab",
    description="Simulação e análise de redundância sem interrupção (PRP) sobre Wi-Fi",
    version="0.1.0",
    lifespan=lifespan,
    docs_url=_docs_url,
    redoc_url=_redoc_url,
)

cors_origins = list(settings.cors_origins)
if settings.app_env != "production":
    for origin in ["http://localhost:3000", "http://127.0.0.1:3000"]:
        if origin not in cors_origins:
            cors_origins.append(origin)

app.add_middleware(
    CORSMiddleware,
    allow_origins=cors_origins,
    allow_credentials=True,
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["Content-Type"],
)

app.include_router(simulation_router, prefix="/api/simulation", tags=["simulation"])
app.include_router(metrics_router, prefix="/api/metrics", tags=["metrics"])
app.include_router(independence_router, prefix="/api/independence", tags=["independence"])


@app.get("/api/health")
async def health_check():
    return {"status": "ok"}
