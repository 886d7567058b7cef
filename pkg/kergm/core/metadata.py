"""Run metadata: versions, RNG identity and host description."""

import platform
from datetime import datetime, timezone
from importlib import metadata as importlib_metadata
from typing import Any

try:
    import psutil
    PSUTIL_AVAILABLE = True
except ImportError:
    PSUTIL_AVAILABLE = False

from kergm.core.utils import RNG_NAME, SEED_DERIVATION

TRACKED_PACKAGES = ("kergm", "numpy", "scipy", "pydantic", "psutil")


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def package_versions() -> dict[str, str | None]:
    """Installed versions of the packages a result depends on."""
    versions: dict[str, str | None] = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = importlib_metadata.version(name)
        except importlib_metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def get_host_metrics() -> dict[str, Any]:
    """CPU and memory description of the machine running the benchmark.

    Returns:
        Dictionary with ``cpu`` and ``memory`` entries, or an ``error`` entry
        when psutil is not available
    """
    if not PSUTIL_AVAILABLE:
        return {"error": "psutil not available"}

    metrics: dict[str, Any] = {}
    try:
        freq = None
        try:
            f = psutil.cpu_freq()
            if f:
                freq = {"current_mhz": f.current, "max_mhz": f.max or None}
        except Exception:
            pass
        metrics["cpu"] = {
            "logical": psutil.cpu_count(),
            "physical": psutil.cpu_count(logical=False),
            "frequency_mhz": freq,
        }
        memory = psutil.virtual_memory()
        metrics["memory"] = {
            "total_bytes": memory.total,
            "available_bytes": memory.available,
        }
    except Exception as e:
        metrics["error"] = str(e)
    return metrics


def run_metadata(config: dict[str, Any], started: str, finished: str) -> dict[str, Any]:
    """Metadata written next to a benchmark CSV."""
    return {
        "config": config,
        "started": started,
        "finished": finished,
        "versions": package_versions(),
        "rng": {"generator": RNG_NAME, "seed_derivation": SEED_DERIVATION},
        "platform": {
            "system": platform.system(),
            "release": platform.release(),
            "machine": platform.machine(),
            "python": platform.python_version(),
        },
        "host": get_host_metrics(),
    }
