"""
FastAPI Web Service for the Ising Spin-Chain Full Adder Simulator
Exposes the cheap operations (protocol compilation, the invariant suite);
simulation runs stay on the command line.
"""
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field
from typing import Optional, List
import logging

from config import DEFAULT_K, DELTA_OMEGA, EXACT_MAX_SPINS, OMEGA0, VERSION
from errors import AdderError, ResourceCapExceeded
from experiments import ExperimentConfig, VerifyReport, cmd_compile, cmd_verify

logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="Ising Spin-Chain Full Adder",
    description="Pulse-level compiler and verification suite for a quantum full adder on an Ising spin chain",
    version=VERSION
)

# Add CORS middleware for web clients
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Largest register the compile endpoint will schedule
MAX_API_QUBITS = 1000


# Request/Response models
class CompileRequest(BaseModel):
    A: int = Field(ge=0)
    l: int = Field(ge=1, le=MAX_API_QUBITS)
    K: int = Field(default=DEFAULT_K, ge=1)
    delta_omega: float = Field(default=DELTA_OMEGA, gt=0)
    omega0: float = OMEGA0
    include_schedule: bool = True


class CompileResponse(BaseModel):
    A: int
    l: int
    qpulse_count: int
    physical_pulse_count: int
    total_time: float
    gates: List[str]
    schedule: Optional[str] = None


class VerifyRequest(BaseModel):
    K: int = Field(default=8, ge=1)
    delta_omega: float = Field(default=100.0, gt=0)
    quick: bool = True


class HealthResponse(BaseModel):
    status: str
    version: str
    exact_max_spins: int


def _http_error(e: AdderError) -> HTTPException:
    status = 413 if isinstance(e, ResourceCapExceeded) else 422 if e.exit_code == 1 else 500
    return HTTPException(status_code=status, detail=f"{type(e).__name__}: {e}")


# API Endpoints

@app.get("/health", response_model=HealthResponse)
async def health_check():
    """Health check endpoint."""
    return HealthResponse(status="healthy", version=VERSION, exact_max_spins=EXACT_MAX_SPINS)


@app.post("/compile", response_model=CompileResponse)
async def compile_adder(request: CompileRequest):
    """
    Compile FA(A) for an l-qubit addend register.

    Returns the Q-pulse and physical pulse counts, the total protocol time
    and, unless disabled, the schedule in the line-oriented text format.
    """
    try:
        cfg = ExperimentConfig(
            K=request.K, l=request.l, A=request.A,
            delta_omega=request.delta_omega, omega0=request.omega0,
        )
        result = cmd_compile(cfg)
    except AdderError as e:
        raise _http_error(e)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))

    return CompileResponse(
        A=result["A"],
        l=result["l"],
        qpulse_count=result["qpulse_count"],
        physical_pulse_count=result["physical_pulse_count"],
        total_time=result["total_time"],
        gates=[g.label for g in result["protocol"].gates],
        schedule=result["schedule"] if request.include_schedule else None,
    )


@app.post("/verify", response_model=VerifyReport)
async def verify(request: VerifyRequest):
    """Run the invariant suite and return every check with its measured value."""
    try:
        return cmd_verify(K=request.K, delta_omega=request.delta_omega, quick=request.quick)
    except AdderError as e:
        logger.exception("verify failed")
        raise _http_error(e)


# Run with: uvicorn api:app --reload --port 8000
if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
