
import asyncio
import json
import logging
import uuid
from pathlib import Path
from typing import Any, Dict, List, Optional

from fastapi import BackgroundTasks, FastAPI, HTTPException, Query
from pydantic import BaseModel
from sse_starlette.sse import EventSourceResponse

from . import storage
from .config import (
    CACHE_DIR,
    DATA_ROOT,
    DEFAULT_EPOCHS,
    DEFAULT_K,
    EVAL_EVERY,
    LEARNING_RATE,
    RUNS_DIR,
    TEST_FRAC,
    VAL_FRAC,
)
from .data import load_dataset
from .exceptions import ConfigError, MalformedDatasetError
from .linkpred import split_edges
from .models import PARAM_KS, ModelConfig, Variant, param_table
from .seeding import derive_seed
from .status_cache import get_run_status, update_run_status
from .training import EpochCallback, TrainConfig, prepare_graph, train

logger = logging.getLogger(__name__)

app = FastAPI(title="Linear Graph Auto-Encoder API", version="1.0")


class TrainRequest(BaseModel):
    dataset: str
    variant: str = Variant.LGAE.value
    k: int = DEFAULT_K
    featureless: bool = False
    epochs: int = DEFAULT_EPOCHS
    lr: float = LEARNING_RATE
    seed: int = 0
    split_seed: int = 0
    val_frac: float = VAL_FRAC
    test_frac: float = TEST_FRAC
    eval_every: int = EVAL_EVERY
    return_run_id_only: bool = False

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.lr,
            seed=derive_seed(self.seed, "noise"),
            eval_every=self.eval_every,
        )


def _run_training(run_id: str, request: TrainRequest, on_epoch: Optional[EpochCallback] = None) -> Dict[str, Any]:
    variant = Variant.parse(request.variant)
    dataset = load_dataset(_dataset_dir(request.dataset))
    split = split_edges(dataset, request.val_frac, request.test_frac, seed=derive_seed(request.split_seed, "split"))
    prepared = prepare_graph(dataset, split, variant, request.k, request.featureless, CACHE_DIR)
    model_config = ModelConfig.for_variant(
        variant, prepared.inputs.shape[1], request.k, seed=derive_seed(request.seed, "init")
    )
    report = train(
        dataset,
        split,
        model_config,
        request.train_config(),
        request.featureless,
        prepared=prepared,
        on_epoch=on_epoch,
    )

    run_dir = RUNS_DIR / run_id
    storage.save_split(run_dir / "split.txt", split)
    report.checkpoint = storage.save_checkpoint(run_dir / "params.bin", report.params).name
    storage.save_json(run_dir / "report.json", report.to_dict())
    return {
        "run_id": run_id,
        "method": variant.label + ("*" if request.featureless else ""),
        "test": report.test.to_dict() if report.test else None,
        "final_reconstruction": report.final_reconstruction,
        "run_dir": str(run_dir),
    }


def _progress_recorder(run_id: str, epochs: int) -> EpochCallback:
    def record(event: Dict[str, Any]) -> None:
        progress = {"percentage": round(100.0 * event["epoch"] / epochs, 1), **event}
        update_run_status(run_id, "RUNNING", progress)

    return record


def _process_run_background(run_id: str, request: TrainRequest) -> None:
    logger.info("[Service] Starting background run %s", run_id)
    try:
        result = _run_training(run_id, request, _progress_recorder(run_id, request.epochs))
    except Exception as exc:
        logger.exception("[Service] Run %s failed", run_id)
        update_run_status(run_id, "FAILED", error=f"{type(exc).__name__}: {exc}")
        return
    update_run_status(run_id, "SUCCESS", {"percentage": 100, "epoch": request.epochs}, result=result)
    logger.info("[Service] Run %s finished", run_id)


async def _error_stream(detail: str):
    yield {"event": "error", "data": json.dumps({"detail": detail})}


def _dataset_dir(name: str) -> Path:
    """Resolve a dataset name under DATA_ROOT; anything escaping the root is refused."""
    root = DATA_ROOT.resolve()
    path = (root / name).resolve()
    if Path(name).is_absolute() or not path.is_relative_to(root) or path == root:
        raise ConfigError(f"Dataset {name!r} must name a directory under the data root")
    return path


def _validate(request: TrainRequest) -> None:
    Variant.parse(request.variant)
    request.train_config()
    if not _dataset_dir(request.dataset).is_dir():
        raise MalformedDatasetError(f"Dataset directory not found: {request.dataset}")


@app.post("/train")
async def train_endpoint(request: TrainRequest, background_tasks: BackgroundTasks):
    """Train one model; streams progress as SSE unless return_run_id_only is set."""
    try:
        _validate(request)
    except (ConfigError, MalformedDatasetError) as exc:
        if request.return_run_id_only:
            raise HTTPException(status_code=400, detail=str(exc))
        return EventSourceResponse(_error_stream(str(exc)))

    run_id = uuid.uuid4().hex
    update_run_status(run_id, "QUEUED")

    if request.return_run_id_only:
        background_tasks.add_task(_process_run_background, run_id, request)
        return {"run_id": run_id, "status": "QUEUED", "status_url": f"/status/{run_id}"}

    async def event_stream():
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue()
        record = _progress_recorder(run_id, request.epochs)

        def on_epoch(event: Dict[str, Any]) -> None:
            record(event)
            if "val_auc" in event:
                loop.call_soon_threadsafe(queue.put_nowait, ("epoch", event))

        def worker() -> None:
            try:
                result = _run_training(run_id, request, on_epoch)
            except Exception as exc:
                logger.exception("[Service] Run %s failed", run_id)
                update_run_status(run_id, "FAILED", error=f"{type(exc).__name__}: {exc}")
                loop.call_soon_threadsafe(queue.put_nowait, ("error", {"run_id": run_id, "detail": str(exc)}))
                return
            update_run_status(run_id, "SUCCESS", {"percentage": 100, "epoch": request.epochs}, result=result)
            loop.call_soon_threadsafe(queue.put_nowait, ("completed", result))

        yield {"event": "queued", "data": json.dumps({"run_id": run_id, "status_url": f"/status/{run_id}"})}
        future = loop.run_in_executor(None, worker)
        while True:
            kind, payload = await queue.get()
            yield {"event": kind, "data": json.dumps(payload)}
            if kind in ("completed", "error"):
                break
        await future

    return EventSourceResponse(event_stream())


@app.get("/status/{run_id}")
async def status(run_id: str):
    doc = get_run_status(run_id)
    if not doc:
        raise HTTPException(404, detail="Unknown run_id")
    return doc


@app.get("/params")
async def params(
    feature_dim: int = Query(..., gt=0),
    variant: Optional[List[str]] = Query(None),
    k: Optional[List[int]] = Query(None),
):
    try:
        variants = [Variant.parse(v) for v in variant] if variant else list(Variant)
        table = param_table(feature_dim, variants, k or PARAM_KS)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return {
        "feature_dim": feature_dim,
        "rows": {v.label: {str(hops): count for hops, count in row.items()} for v, row in table.items()},
    }


@app.get("/health")
async def health():
    return {"status": "ok"}
