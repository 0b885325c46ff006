import logging

from dotenv import load_dotenv
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from .config import settings
from .errors import NRSfMError, RotationValidityError

# Load environment variables
load_dotenv()

logging.basicConfig(level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO))
logger = logging.getLogger(__name__)

VERSION = "1.0.0"

app = FastAPI(title="Dense NRSfM")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Import routers after app initialization
from .routers import reconstruction
app.include_router(reconstruction.router)


@app.exception_handler(NRSfMError)
async def domain_exception_handler(request: Request, exc: NRSfMError):
    logger.warning(f"{type(exc).__name__} on {request.url.path}: {str(exc)}")
    content = {"detail": str(exc), "error": type(exc).__name__}
    if isinstance(exc, RotationValidityError) and exc.frame is not None:
        content["frame"] = exc.frame
    return JSONResponse(status_code=422, content=content)


@app.exception_handler(ValidationError)
async def validation_exception_handler(request: Request, exc: ValidationError):
    logger.warning(f"Invalid parameters on {request.url.path}: {str(exc)}")
    return JSONResponse(status_code=422, content={"detail": exc.errors(include_url=False, include_context=False)})


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    logger.error(f"Error: {str(exc)}")
    return JSONResponse(
        status_code=500,
        content={"detail": str(exc)}
    )


@app.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "version": VERSION
    }
