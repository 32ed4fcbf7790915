"""Run configuration, result files and kernel snapshot sidecars."""

from __future__ import annotations

import datetime as _dt
import io
import os
import struct
import tempfile
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from .collision import BathParams
from .errors import ConfigError, QJumpError
from .operators import GridSpec

MODES = ("annealed", "jump", "sde", "compare", "propcheck")
RESULT_MAGIC = "# qjump-result v1"
SNAPSHOT_MAGIC = b"QJK1"


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str):
    return None if text.strip() in ("", "none", "None") else float(text)


@dataclass(frozen=True)
class RunConfig:
    mode: str
    n_points: int = 256
    half_width: float = 10.0
    alpha: float = 1.0
    cutoff: float = 4.0
    beta0: float = 2.0
    rate: float = 200.0
    sign: int = 1
    center: float = 0.0
    momentum: float = 0.0
    width: float = 0.5
    horizon: float = 2.0
    sample_times: tuple = (0.5, 1.0, 2.0)
    dt: float = 1e-3
    dt_max: float | None = None
    n_nodes: int = 64
    scheme: str = "ito"
    hamiltonian: bool = True
    trajectories: int = 100
    n_list: tuple = (25, 100, 400)
    n_boot: int = 200
    trials: int = 200
    seed: int = 0
    output: str = ""

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.half_width, self.n_points)

    @property
    def bath(self) -> BathParams:
        return BathParams(self.alpha, self.cutoff, self.beta0, self.rate, self.sign)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}", key="mode")
        for key, build in (("n_points", lambda: self.grid), ("alpha", lambda: self.bath)):
            try:
                build()
            except QJumpError as exc:
                raise ConfigError(str(exc), key=_guess_key(str(exc), key)) from exc
        if self.scheme not in ("ito", "stratonovich"):
            raise ConfigError("scheme must be ito or stratonovich", key="scheme")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive", key="horizon")
        ts = np.asarray(self.sample_times)
        if ts.size == 0 or np.any(ts < 0) or np.any(ts > self.horizon) or np.any(np.diff(ts) <= 0):
            raise ConfigError("sample_times must increase strictly within [0, horizon]", key="sample_times")
        positive = ("dt", "width", "trajectories", "trials", "n_boot")
        for key in positive:
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive", key=key)
        if self.dt_max is not None and not self.dt_max > 0:
            raise ConfigError("dt_max must be positive", key="dt_max")
        if self.n_nodes < 32:
            raise ConfigError("n_nodes must be at least 32", key="n_nodes")
        if self.mode == "propcheck" and self.trials < 100:
            raise ConfigError("propcheck needs at least 100 trials", key="trials")
        if not self.n_list or min(self.n_list) <= self.alpha**2:
            raise ConfigError("every rate in n_list must exceed alpha²", key="n_list")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", key="seed")
        if 6 * self.width >= self.half_width or abs(self.center) + 6 * self.width >= self.half_width:
            raise ConfigError("initial packet does not fit the grid", key="width")
        return self


def _guess_key(message: str, default: str) -> str:
    for name in ("beta0", "rate", "alpha", "cutoff", "sign", "n_points", "half_width"):
        if message.startswith(name):
            return name
    return default


_PARSERS = {
    int: int,
    float: float,
    str: str,
    bool: _bool,
}


def _field_parser(f):
    if f.name == "sample_times":
        return _floats
    if f.name == "n_list":
        return _ints
    if f.name == "dt_max":
        return _opt_float
    return _PARSERS[{"int": int, "float": float, "str": str, "bool": bool}[f.type]]


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a validated config."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value", key=None)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in FIELD_NAMES:
            raise ConfigError(f"unknown key {key!r}", key=key)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", key=key)
        raw[key] = value
    raw.update({k: str(v) for k, v in (overrides or {}).items()})
    for key in raw:
        if key not in FIELD_NAMES:
            raise ConfigError(f"unknown key {key!r}", key=key)
    if "mode" not in raw:
        raise ConfigError("missing required key 'mode'", key="mode")
    kwargs = {}
    for f in fields(RunConfig):
        if f.name in raw:
            try:
                kwargs[f.name] = _field_parser(f)(raw[f.name])
            except ValueError as exc:
                raise ConfigError(f"bad value for {f.name}: {exc}", key=f.name) from exc
    return RunConfig(**kwargs).validate()


def serialize_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n" for f in fields(cfg))


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes).validate()


# -- result files -----------------------------------------------------------------------


@dataclass
class ResultFile:
    config: RunConfig
    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)

    def table_text(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_format(v) if not isinstance(v, str) else v for v in row) + "\n")
        return buf.getvalue()

    def to_text(self) -> str:
        head = [RESULT_MAGIC, f"# tool_version = {__version__}"]
        head += [f"# meta.{k} = {v}" for k, v in self.meta.items()]
        head += [f"# config.{line}" for line in serialize_config(self.config).splitlines()]
        return "\n".join(head) + "\n" + self.table_text()


def parse_result(text: str) -> ResultFile:
    lines = text.splitlines()
    if not lines or lines[0] != RESULT_MAGIC:
        raise ConfigError("not a result file (missing version header)")
    cfg_lines, meta, body = [], {}, []
    for line in lines[1:]:
        if line.startswith("# config."):
            cfg_lines.append(line[len("# config.") :])
        elif line.startswith("# meta."):
            k, v = line[len("# meta.") :].split(" = ", 1)
            meta[k] = v
        elif line.startswith("#"):
            continue
        else:
            body.append(line)
    cfg = parse_config("\n".join(cfg_lines))
    columns = tuple(body[0].split(",")) if body else ()
    rows = [tuple(r.split(",")) for r in body[1:]]
    return ResultFile(cfg, columns, rows, meta)


def atomic_write(path: str, data: bytes | str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    mode = "wb" if isinstance(data, bytes) else "w"
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_result(result: ResultFile, path: str, *, wall_clock: float | None = None) -> None:
    meta = dict(result.meta)
    meta.setdefault("written", _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    if wall_clock is not None:
        meta["wall_clock_s"] = f"{wall_clock:.3f}"
    atomic_write(path, replace(result, meta=meta).to_text())


# -- snapshots --------------------------------------------------------------------------


def snapshots_to_bytes(times, kernels) -> bytes:
    """``QJK1``, count, n (uint32 LE) then per snapshot: time and row-major (re, im) pairs, float64 LE."""
    kernels = [np.asarray(k, dtype=np.complex128) for k in kernels]
    n = kernels[0].shape[0] if kernels else 0
    out = [SNAPSHOT_MAGIC, struct.pack("<II", len(kernels), n)]
    for t, k in zip(times, kernels):
        if k.shape != (n, n):
            raise ValueError("all snapshots must share one square shape")
        out.append(struct.pack("<d", float(t)))
        out.append(np.ascontiguousarray(k).astype("<c16").tobytes())
    return b"".join(out)


def snapshots_from_bytes(data: bytes):
    if data[:4] != SNAPSHOT_MAGIC:
        raise ValueError("not a kernel snapshot block")
    count, n = struct.unpack_from("<II", data, 4)
    off = 12
    times, kernels = [], []
    for _ in range(count):
        (t,) = struct.unpack_from("<d", data, off)
        off += 8
        k = np.frombuffer(data, dtype="<c16", count=n * n, offset=off).reshape(n, n).astype(np.complex128)
        off += 16 * n * n
        times.append(t)
        kernels.append(k)
    return times, kernels
