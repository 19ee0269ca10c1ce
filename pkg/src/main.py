"""Main FastAPI application."""
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from src.api.v1 import descriptions, evaluations, prompts, stores
from src.repositories.feature_store_repo import StoreRegistry


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Lifespan context manager for the store registry."""
    app.state.stores = StoreRegistry()
    try:
        yield
    finally:
        app.state.stores.clear()

app = FastAPI(
    title="LGA Few-Shot Matching API",
    lifespan=lifespan
)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(prompts.router, prefix="/api/v1", tags=["Prompts"])
app.include_router(descriptions.router, prefix="/api/v1", tags=["Descriptions"])
app.include_router(stores.router, prefix="/api/v1", tags=["Stores"])
app.include_router(evaluations.router, prefix="/api/v1", tags=["Evaluations"])


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy"}
