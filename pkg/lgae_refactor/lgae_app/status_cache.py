"""In-process status store for service training runs.

At most ``MAX_TRACKED_RUNS`` entries are kept; finished runs are evicted
oldest first, and only when none is finished does a live run go.
"""

import threading
from collections import OrderedDict
from datetime import datetime, timezone
from typing import Any, Dict

from .config import MAX_TRACKED_RUNS

FINISHED = ("SUCCESS", "FAILED")

_RUNS: "OrderedDict[str, Dict[str, Any]]" = OrderedDict()
_LOCK = threading.Lock()


def _evict(capacity: int) -> None:
    while len(_RUNS) > capacity:
        victim = next((run_id for run_id, doc in _RUNS.items() if doc["status"] in FINISHED), None)
        _RUNS.pop(victim if victim is not None else next(iter(_RUNS)))


def update_run_status(
    run_id: str,
    status: str,
    progress: Dict[str, Any] | None = None,
    result: Dict[str, Any] | None = None,
    error: str | None = None,
    capacity: int = MAX_TRACKED_RUNS,
) -> Dict[str, Any]:
    now = datetime.now(timezone.utc).isoformat()
    with _LOCK:
        doc = _RUNS.get(run_id)
        if doc is None:
            doc = {
                "run_id": run_id,
                "progress": {"percentage": 0, "epoch": 0},
                "result": None,
                "error": None,
                "created_at": now,
            }
            _RUNS[run_id] = doc
        doc["status"] = status
        doc["updated_at"] = now
        if progress:
            doc["progress"] = progress
        if result is not None:
            doc["result"] = result
        if error:
            doc["error"] = error
        snapshot = dict(doc)
        _evict(capacity)
        return snapshot


def get_run_status(run_id: str) -> Dict[str, Any] | None:
    with _LOCK:
        doc = _RUNS.get(run_id)
        return dict(doc) if doc else None
