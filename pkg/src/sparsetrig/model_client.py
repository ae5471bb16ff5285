"""File-based protocol for external (black-box) models.

For each batch a request CSV is written (one point per row, ``d`` columns,
17 significant digits, no header) and the backend is run as::

    <command...> request.csv response.csv

The backend writes one value per row in request order. A row that is empty,
``nan`` or ``fail`` marks a failed evaluation; those points are re-requested
up to ``retries`` times. Alternatively, with ``exchange_dir`` set and no
command, request files are dropped into that directory and the client polls
for the matching response file.
"""

import os
import shlex
import subprocess
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sparse_grid import ModelOracle, OracleError

TIMEOUT_ENV = "SPARSETRIG_MODEL_TIMEOUT"
_FAILED_TOKENS = {"", "nan", "fail", "failed"}


class ExternalModelError(OracleError):
    pass


@dataclass
class ExternalModelSpec:
    command: list = None
    dim: int = 1
    domain: list = None
    batch_size: int = 1000
    timeout: float = 600.0
    retries: int = 2
    exchange_dir: str = None
    work_dir: str = None
    keep_io: bool = False
    jobs: int = 1
    poll_interval: float = 0.05
    rows_requested: int = field(default=0, init=False)
    invocations: int = field(default=0, init=False)

    def __post_init__(self):
        if isinstance(self.command, str):
            self.command = shlex.split(self.command)
        if not self.command and not self.exchange_dir:
            raise ValueError("external model needs a command or an exchange directory")
        if self.domain is None:
            self.domain = [(0.0, 1.0)] * self.dim
        self._lock = threading.Lock()
        self._serial = 0

    def effective_timeout(self):
        env = os.environ.get(TIMEOUT_ENV)
        return float(env) if env else float(self.timeout)


def format_rows(points):
    return "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in points)


def write_request(path, points):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_rows(points))


def read_request(path):
    """Parse a request CSV (used by backends and tests)."""
    rows = []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                rows.append([float(v) for v in line.split(",")])
    return np.array(rows, dtype=float)


def parse_response(text, expected):
    """Values and a failure mask from a response file body."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != expected:
        raise ExternalModelError(f"response count mismatch: expected {expected} rows, got {len(lines)}")
    values = np.empty(expected)
    failed = np.zeros(expected, dtype=bool)
    for row, line in enumerate(lines, start=1):
        token = line.strip()
        if token.lower() in _FAILED_TOKENS:
            failed[row - 1] = True
            values[row - 1] = np.nan
            continue
        try:
            values[row - 1] = float(token)
        except ValueError:
            raise ExternalModelError(f"non-numeric value {token!r} in response row {row}") from None
        if not np.isfinite(values[row - 1]):
            failed[row - 1] = True
    return values, failed


def _claim_paths(spec, work_dir):
    # skip serials already used in this directory (kept files, earlier runs);
    # the exclusive create of the staging file is the reservation, so the
    # request name itself only appears once the file is complete
    with spec._lock:
        while True:
            spec._serial += 1
            request = Path(work_dir) / f"request-{spec._serial:06d}.csv"
            response = Path(work_dir) / f"response-{spec._serial:06d}.csv"
            staging = request.with_name("." + request.name + ".tmp")
            if request.exists() or response.exists():
                continue
            try:
                with open(staging, "x"):
                    pass
            except FileExistsError:
                continue
            return request, response, staging


def _run_once(spec, points, work_dir):
    request, response, staging = _claim_paths(spec, work_dir)
    write_request(staging, points)
    os.replace(staging, request)
    with spec._lock:
        spec.rows_requested += len(points)
        spec.invocations += 1
    timeout = spec.effective_timeout()
    try:
        if spec.command:
            try:
                proc = subprocess.run(list(spec.command) + [str(request), str(response)],
                                      capture_output=True, text=True, timeout=timeout)
            except subprocess.TimeoutExpired:
                raise ExternalModelError(
                    f"backend timed out after {timeout:g} s on {request.name}", points) from None
            if proc.returncode != 0:
                raise ExternalModelError(
                    f"backend exited with status {proc.returncode}: {proc.stderr.strip()[:200]}",
                    points)
        else:
            deadline = time.monotonic() + timeout
            while not response.exists():
                if time.monotonic() > deadline:
                    raise ExternalModelError(
                        f"no response for {request.name} after {timeout:g} s", points)
                time.sleep(spec.poll_interval)
        if not response.exists():
            raise ExternalModelError(f"backend wrote no response file for {request.name}", points)
        return parse_response(response.read_text(encoding="ascii"), len(points))
    finally:
        if not spec.keep_io:
            for path in (request, response):
                try:
                    path.unlink()
                except FileNotFoundError:
                    pass


def _run_batch(spec, points, work_dir):
    values = np.full(len(points), np.nan)
    pending = np.arange(len(points))
    for _ in range(spec.retries + 1):
        got, failed = _run_once(spec, points[pending], work_dir)
        values[pending[~failed]] = got[~failed]
        pending = pending[failed]
        if len(pending) == 0:
            return values
    bad = points[pending]
    raise ExternalModelError(
        f"{len(pending)} point(s) failed after {spec.retries} retries, first at {bad[0].tolist()}", bad)


def external_batch(spec, points):
    """Evaluate ``points`` (domain coordinates) through the external backend."""
    points = np.asarray(points, dtype=float).reshape(-1, spec.dim)
    if len(points) == 0:
        return np.zeros(0)
    if spec.exchange_dir:
        work_dir = spec.exchange_dir
        os.makedirs(work_dir, exist_ok=True)
        tmp = None
    elif spec.work_dir:
        work_dir = spec.work_dir
        os.makedirs(work_dir, exist_ok=True)
        tmp = None
    else:
        tmp = tempfile.TemporaryDirectory(prefix="sparsetrig-")
        work_dir = tmp.name
    try:
        size = max(1, int(spec.batch_size))
        batches = [points[s:s + size] for s in range(0, len(points), size)]
        if spec.jobs > 1 and len(batches) > 1:
            with ThreadPoolExecutor(max_workers=spec.jobs) as pool:
                results = list(pool.map(lambda b: _run_batch(spec, b, work_dir), batches))
        else:
            results = [_run_batch(spec, b, work_dir) for b in batches]
        return np.concatenate(results)
    finally:
        if tmp is not None:
            tmp.cleanup()


def external_oracle(spec, name="external"):
    return ModelOracle(lambda x: external_batch(spec, x), spec.dim, spec.domain, name=name)
