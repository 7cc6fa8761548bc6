"""
FastAPI server for the QSL Toolkit
"""

import json
import math
import logging
from typing import Any, Dict, Optional

import numpy as np
from fastapi import FastAPI, File, HTTPException, UploadFile
from pydantic import BaseModel, ValidationError

from jobs import JobConfig, run_job

logger = logging.getLogger(__name__)

app = FastAPI(
    title="QSL Toolkit API",
    description="API for quantum-speed-limit scans, gate optimization and circuit run-time analysis",
    version="1.0.0"
)


class JobResponse(BaseModel):
    status: str
    output_dir: str
    manifest: Dict[str, Any]
    result: Dict[str, Any]


def _json_safe(value: Any) -> Any:
    # undefined reductions (nan) become null; JSON has no NaN
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return None if math.isnan(value) else float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def _execute(config: JobConfig) -> JobResponse:
    try:
        outcome = run_job(config)
        return JobResponse(
            status="completed",
            output_dir=str(outcome.out_dir),
            manifest=outcome.manifest.model_dump(mode="json"),
            result=_json_safe(outcome.result),
        )
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("Job %s failed", config.kind)
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")


@app.get("/")
async def root():
    return {"message": "QSL Toolkit API is running"}


@app.post("/jobs", response_model=JobResponse)
def submit_job(config: JobConfig):
    """Run a job synchronously and return its manifest and summary."""
    return _execute(config)


@app.post("/jobs/upload", response_model=JobResponse)
async def upload_job(file: UploadFile = File(...), seed: Optional[int] = None):
    """Run a job from an uploaded JSON configuration file."""
    try:
        data = json.loads(await file.read())
        if seed is not None:
            data["seed"] = seed
        config = JobConfig.model_validate(data)
    except (json.JSONDecodeError, ValidationError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    return _execute(config)


@app.get("/health")
async def health_check():
    return {"status": "healthy"}


if __name__ == "__main__":
    import uvicorn
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(name)s: %(message)s")
    uvicorn.run(app, host="0.0.0.0", port=8000)
