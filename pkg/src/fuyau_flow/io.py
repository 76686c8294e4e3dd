"""Config files, snapshots and record streams.

Config is TOML.  Snapshots are a short text header followed by the raw field:

    fuyau-snapshot
    version = 1
    n = 16
    ...
    sha256 = <hex digest of the payload>
    end-header

and then n^4 little-endian float64 values in C order over (x1, y1, x2, y2).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import re
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .diagnostics import DiagnosticsRecord
from .flow import FlowConfig, FlowState, MuMode, RhoMode

log = logging.getLogger(__name__)

SNAPSHOT_MAGIC = "fuyau-snapshot"
SNAPSHOT_VERSION = 1
_END = "end-header"

TABLE_COLUMNS = (
    "t",
    "J",
    "conservation_error",
    "sup_T2",
    "sup_alpha_ric",
    "lambda_min_F",
    "sup_e_u",
    "inf_e_u",
    "sup_rhs",
)


class ConfigError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


# section -> key -> (FlowConfig field, type)
_SCALARS = {
    "grid": {"n": ("n", int)},
    "flow": {
        "alpha_prime": ("alpha_prime", float),
        "M": ("M", float),
        "t_max": ("t_max", float),
        "integrator": ("integrator", str),
        "dt": ("dt", float),
        "dt_policy": ("dt_policy", str),
        "safety": ("safety", float),
        "dt_max": ("dt_max", float),
    },
    "tolerances": {
        "eps_rhs": ("eps_rhs", float),
        "eps_residual": ("eps_residual", float),
        "conservation_tol": ("conservation_tol", float),
        "f_hat_min": ("f_hat_min", float),
        "f_hat_max": ("f_hat_max", float),
    },
    "output": {
        "directory": ("output_dir", str),
        "record_every": ("record_every", int),
        "dealias": ("dealias", bool),
    },
}
_MODE_LISTS = {"data": ("rho_modes", "mu_modes"), "initial": ("exp_u_modes",)}
_REQUIRED = (("grid", "n"), ("flow", "alpha_prime"), ("flow", "M"))
_RHO_KEYS = {"p", "q", "k", "re", "im"}
_COS_KEYS = {"k", "amplitude", "phase"}


def _line_of(text: str, section: str | None, key: str) -> int | None:
    """Best-effort 1-based line of ``key`` (inside ``[section]`` when given)."""
    lines = text.splitlines()
    current = None
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for i, line in enumerate(lines, 1):
        head = re.match(r"^\s*\[+\s*([^\]]+?)\s*\]+", line)
        if head:
            current = head.group(1).split(".")[0]
            if section is None and current == key:
                return i
            continue
        if pat.match(line) and (section is None or current == section):
            return i
    return None


def _fail(path, text, section, key, msg) -> ConfigError:
    line = _line_of(text, section, key)
    where = f"{path}:{line}" if line is not None else str(path)
    return ConfigError(f"{where}: {msg}")


def _coerce(value, kind, path, text, section, key):
    if kind is bool:
        if not isinstance(value, bool):
            raise _fail(path, text, section, key, f"{section}.{key} must be a boolean")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise _fail(path, text, section, key, f"{section}.{key} must be an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _fail(path, text, section, key, f"{section}.{key} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise _fail(path, text, section, key, f"{section}.{key} must be a string")
    return value


def _wavevector(entry, path, text, section, key):
    k = entry.get("k")
    if not isinstance(k, list) or len(k) != 4 or not all(isinstance(x, int) and not isinstance(x, bool) for x in k):
        raise _fail(path, text, section, key, f"{section}.{key}: k must be a list of 4 integers, got {k!r}")
    return tuple(k)


def _rho_modes(entries, path, text):
    out = []
    for e in entries:
        if not isinstance(e, dict):
            raise _fail(path, text, "data", "rho_modes", "rho_modes entries must be tables")
        extra = set(e) - _RHO_KEYS
        if extra:
            raise _fail(path, text, "data", "rho_modes", f"unknown key(s) in rho mode: {sorted(extra)}")
        for need in ("p", "q", "k"):
            if need not in e:
                raise _fail(path, text, "data", "rho_modes", f"rho mode missing '{need}'")
        p, q = e["p"], e["q"]
        if p not in (1, 2) or q not in (1, 2) or isinstance(p, bool) or isinstance(q, bool):
            raise _fail(path, text, "data", "rho_modes", f"rho mode slot (p, q) must be 1 or 2, got ({p}, {q})")
        k = _wavevector(e, path, text, "data", "rho_modes")
        re_ = _coerce(e.get("re", 0.0), float, path, text, "data", "rho_modes")
        im_ = _coerce(e.get("im", 0.0), float, path, text, "data", "rho_modes")
        if p == q and k == (0, 0, 0, 0) and im_ != 0.0:
            raise _fail(path, text, "data", "rho_modes", "diagonal constant rho mode must be real")
        out.append(RhoMode(p=p, q=q, k=k, re=re_, im=im_))
    return out


def _cos_modes(entries, section, key, path, text):
    out = []
    for e in entries:
        if not isinstance(e, dict):
            raise _fail(path, text, section, key, f"{key} entries must be tables")
        extra = set(e) - _COS_KEYS
        if extra:
            raise _fail(path, text, section, key, f"unknown key(s) in {key} entry: {sorted(extra)}")
        if "amplitude" not in e:
            raise _fail(path, text, section, key, f"{key} entry missing 'amplitude'")
        k = _wavevector(e, path, text, section, key)
        amp = _coerce(e["amplitude"], float, path, text, section, key)
        phase = _coerce(e.get("phase", 0.0), float, path, text, section, key)
        out.append(MuMode(k=k, amplitude=amp, phase=phase))
    return out


def parse_config_text(text: str, path: str | Path = "<config>") -> FlowConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    known = set(_SCALARS) | set(_MODE_LISTS)
    for section in doc:
        if section not in known:
            raise _fail(path, text, None, section, f"unknown section [{section}]")
        if not isinstance(doc[section], dict):
            raise _fail(path, text, None, section, f"[{section}] must be a table")
    kwargs = {}
    for section, body in doc.items():
        allowed = _SCALARS.get(section, {})
        lists = _MODE_LISTS.get(section, ())
        for key, value in body.items():
            if key in allowed:
                name, kind = allowed[key]
                kwargs[name] = _coerce(value, kind, path, text, section, key)
            elif key in lists:
                if not isinstance(value, list):
                    raise _fail(path, text, section, key, f"{section}.{key} must be an array of tables")
                if key == "rho_modes":
                    kwargs["rho_modes"] = _rho_modes(value, path, text)
                elif key == "mu_modes":
                    kwargs["mu_modes"] = _cos_modes(value, section, key, path, text)
                else:
                    kwargs["initial_modes"] = _cos_modes(value, section, key, path, text)
            else:
                raise _fail(path, text, section, key, f"unknown key '{key}' in [{section}]")

    for section, key in _REQUIRED:
        if key not in doc.get(section, {}):
            raise ConfigError(f"{path}: missing required key {section}.{key}")

    mu_zero = sum(m.amplitude * math.cos(m.phase) for m in kwargs.get("mu_modes", []) if not any(m.k))
    if mu_zero != 0.0:
        log.warning("%s: mu has a nonzero mean (%g); it will be removed", path, mu_zero)

    try:
        return FlowConfig(**kwargs)
    except ValueError as exc:
        key = "n" if "n_per_dim" in str(exc) else None
        if key:
            raise _fail(path, text, "grid", "n", str(exc)) from exc
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(path: str | Path) -> FlowConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    return parse_config_text(text, path)


def write_snapshot(state: FlowState, path: str | Path, M: float, alpha_prime: float) -> Path:
    path = Path(path)
    u = np.ascontiguousarray(state.u, dtype="<f8")
    if u.ndim != 4 or len(set(u.shape)) != 1:
        raise SnapshotError(f"u must have shape (n, n, n, n), got {u.shape}")
    payload = u.tobytes(order="C")
    header = {
        "version": SNAPSHOT_VERSION,
        "n": u.shape[0],
        "t": repr(float(state.t)),
        "M": repr(float(M)),
        "alpha_prime": repr(float(alpha_prime)),
        "step_count": int(state.step_count),
        "dt": repr(float(state.dt_current)),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    lines = [SNAPSHOT_MAGIC] + [f"{k} = {v}" for k, v in header.items()] + [_END]
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        fh.write(payload)
    tmp.replace(path)
    return path


def read_snapshot_header(path: str | Path) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    marker = ("\n" + _END + "\n").encode("ascii")
    cut = raw.find(marker)
    if not raw.startswith(SNAPSHOT_MAGIC.encode("ascii")) or cut < 0:
        raise SnapshotError(f"{path}: not a snapshot file (bad or truncated header)")
    header = {}
    for line in raw[:cut].decode("ascii").splitlines()[1:]:
        key, _, value = line.partition(" = ")
        header[key.strip()] = value.strip()
    version = int(header.get("version", -1))
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: snapshot version {version}, expected {SNAPSHOT_VERSION}")
    return header, raw[cut + len(marker):]


def read_snapshot(path: str | Path) -> tuple[FlowState, dict]:
    """Load a snapshot; returns the state and the parsed header."""
    header, payload = read_snapshot_header(path)
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise SnapshotError(f"{path}: checksum mismatch (file corrupt or truncated)")
    n = int(header["n"])
    if len(payload) != 8 * n**4:
        raise SnapshotError(f"{path}: payload has {len(payload)} bytes, expected {8 * n**4}")
    u = np.frombuffer(payload, dtype="<f8").reshape((n,) * 4).astype(np.float64)
    meta = {
        "n": n,
        "t": float(header["t"]),
        "M": float(header["M"]),
        "alpha_prime": float(header["alpha_prime"]),
        "step_count": int(header["step_count"]),
        "dt": float(header["dt"]),
    }
    state = FlowState(u=u, t=meta["t"], step_count=meta["step_count"], dt_current=meta["dt"])
    return state, meta


def table_row(rec: DiagnosticsRecord) -> list[float]:
    g = rec.geometry
    return [
        rec.t,
        rec.J,
        rec.conservation_error,
        g.sup_T2,
        g.sup_alpha_ric,
        g.lambda_min_F,
        g.sup_e_u,
        g.inf_e_u,
        rec.sup_rhs,
    ]


def emit_records(series, directory: str | Path) -> tuple[Path, Path]:
    """Write records.jsonl and records.csv into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    jpath, cpath = d / "records.jsonl", d / "records.csv"
    with open(jpath, "w") as fj, open(cpath, "w", newline="") as fc:
        writer = csv.writer(fc)
        writer.writerow(TABLE_COLUMNS)
        for rec in series:
            fj.write(json.dumps(rec.as_dict()) + "\n")
            writer.writerow([repr(float(x)) for x in table_row(rec)])
    return jpath, cpath


def read_records(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path) as fh:
        return [DiagnosticsRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
