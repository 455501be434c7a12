"""Configuration parsing, result tables and run manifests."""
from __future__ import annotations

import ast
import csv
import datetime as _dt
import hashlib
import json
import math
import operator
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .errors import ConfigError, LadderError
from .lattice import LadderParams
from .trajectory import RunConfig

SCHEMA_VERSION = 1
TABLE_SCHEMA_VERSION = 1

MODEL_KEYS = {"L", "t1", "t2", "t12", "tau_u", "p"}
RUN_KEYS = {"t_st", "m", "n_traj", "base_seed", "init", "purity_check_every"}
SECTION_DEFAULTS = {
    "scan": {"t12": None, "t2": None, "quantity": "delta_S"},
    "observables": {"entropy": [], "negativity": [], "mutual_info": []},
    "nonmarkov": {"n_pairs": 10, "t_max": 100, "mode": "orthogonal_pure", "n_traj": 50},
    "fit": {"model": "entropy_ansatz", "ranges": [], "weighted": True},
}
TOP_KEYS = {"schema_version", "run"} | MODEL_KEYS | set(SECTION_DEFAULTS)


def _bad(key_path: str, message: str) -> ConfigError:
    return ConfigError(message, key_path)


# --- symbolic numbers ------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_number(value, key_path: str = "") -> float:
    """Number or arithmetic expression in ``pi`` such as ``"3*pi/2"``."""
    if isinstance(value, bool):
        raise _bad(key_path, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise _bad(key_path, f"expected a number, got {value!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ValueError(ast.dump(node))

    try:
        return float(ev(ast.parse(value.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise _bad(key_path, f"cannot evaluate {value!r}") from exc


def _grid(value, key_path: str):
    """Explicit list, or {start, stop, num} inclusive linear grid."""
    if value is None:
        return None
    if isinstance(value, list):
        if not value:
            raise _bad(key_path, "empty grid")
        return [eval_number(v, f"{key_path}[{i}]") for i, v in enumerate(value)]
    if isinstance(value, dict):
        unknown = set(value) - {"start", "stop", "num"}
        if unknown:
            raise _bad(f"{key_path}.{sorted(unknown)[0]}", "unknown key")
        try:
            start = eval_number(value["start"], f"{key_path}.start")
            stop = eval_number(value["stop"], f"{key_path}.stop")
            num = value["num"]
        except KeyError as exc:
            raise _bad(f"{key_path}.{exc.args[0]}", "missing key") from exc
        if not isinstance(num, int) or num < 1:
            raise _bad(f"{key_path}.num", "must be a positive integer")
        if num == 1:
            return [start]
        return [start + (stop - start) * k / (num - 1) for k in range(num)]
    return [eval_number(value, key_path)]


# --- config ----------------------------------------------------------------------

@dataclass
class Config:
    params: LadderParams
    run: RunConfig
    sections: dict
    raw: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.params, self.run, self.sections))


def parse_config_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise _bad("", "config must be a mapping")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise _bad(sorted(unknown)[0], "unknown key")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise _bad("schema_version", f"unsupported version {version!r}")
    if "L" not in data:
        raise _bad("L", "missing key")
    L = data["L"]
    if not isinstance(L, int) or isinstance(L, bool):
        raise _bad("L", f"expected an integer, got {L!r}")
    model = {"L": L}
    for k in MODEL_KEYS - {"L"}:
        if k in data:
            model[k] = eval_number(data[k], k)
    for k in ("t2", "t12"):
        if k not in model:
            raise _bad(k, "missing key")
    try:
        params = LadderParams(**model)
    except LadderError as exc:
        key = str(exc).split()[0]
        raise _bad(key, str(exc)) from exc

    run_raw = data.get("run") or {}
    if not isinstance(run_raw, dict):
        raise _bad("run", "must be a mapping")
    unknown = set(run_raw) - RUN_KEYS
    if unknown:
        raise _bad(f"run.{sorted(unknown)[0]}", "unknown key")
    for k, v in run_raw.items():
        if k != "init" and (not isinstance(v, int) or isinstance(v, bool)):
            raise _bad(f"run.{k}", f"expected an integer, got {v!r}")
    try:
        run = RunConfig.for_size(L, params.t2, **run_raw)
    except LadderError as exc:
        raise _bad("run", str(exc)) from exc

    sections = {}
    for name, defaults in SECTION_DEFAULTS.items():
        sec = data.get(name) or {}
        if not isinstance(sec, dict):
            raise _bad(name, "must be a mapping")
        unknown = set(sec) - set(defaults)
        if unknown:
            raise _bad(f"{name}.{sorted(unknown)[0]}", "unknown key")
        sections[name] = {**defaults, **sec}
    scan = sections["scan"]
    scan["t12"] = _grid(scan["t12"], "scan.t12")
    scan["t2"] = _grid(scan["t2"], "scan.t2")
    if scan["quantity"] not in ("delta_S", "delta_E"):
        raise _bad("scan.quantity", f"unknown quantity {scan['quantity']!r}")
    for kind, sizes in sections["observables"].items():
        if not isinstance(sizes, list) or not all(isinstance(s, int) and 0 < s < L for s in sizes):
            raise _bad(f"observables.{kind}", f"expected a list of sizes in 1..{L - 1}")
    nm = sections["nonmarkov"]
    for k in ("n_pairs", "t_max", "n_traj"):
        if not isinstance(nm[k], int) or nm[k] < 1:
            raise _bad(f"nonmarkov.{k}", "must be a positive integer")
    return Config(params, run, sections, dict(data))


def parse_config(path) -> Config:
    path = Path(path)
    if not path.exists():
        raise _bad("", f"{path}: no such file")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise _bad("", f"{path}: invalid YAML ({exc})") from exc
    return parse_config_dict(data or {})


def config_snapshot(cfg: Config) -> dict:
    return {"schema_version": SCHEMA_VERSION, **asdict(cfg.params), "run": asdict(cfg.run), **cfg.sections}


# --- result tables ---------------------------------------------------------------

def _plain(v):
    """numpy scalars to Python scalars (their repr would leak the type name)."""
    return v.item() if hasattr(v, "item") and not isinstance(v, (str, bytes)) else v


def _fmt(v) -> str:
    v = _plain(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(s: str):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def emit_results(table, path, fmt: str | None = None) -> Path:
    """Write a list of row dicts as CSV or JSON; floats keep 17 significant digits."""
    rows = list(table)
    if not rows:
        raise LadderError("refusing to write an empty table")
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    columns = list(rows[0])
    for r in rows:
        if list(r) != columns:
            raise LadderError("rows have inconsistent columns")
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in columns])
    elif fmt == "json":
        doc = {"schema_version": TABLE_SCHEMA_VERSION, "columns": columns,
               "rows": [[_plain(r[c]) for c in columns] for r in rows]}
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    else:
        raise LadderError(f"unknown table format {fmt!r}")
    return path


def read_results(path) -> list[dict]:
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        return [dict(zip(doc["columns"], r)) for r in doc["rows"]]
    with open(path, encoding="utf-8", newline="") as fh:
        return [{k: _parse_cell(v) for k, v in r.items()} for r in csv.DictReader(fh)]


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(o):
    import numpy as np

    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


# --- manifests --------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed_policy: dict
    code_version: str = __version__
    started: str = field(default_factory=_now)
    finished: str = ""
    outputs: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def add_output(self, path) -> None:
        path = Path(path)
        self.outputs[path.name] = sha256_file(path)

    def write(self, out_dir) -> Path:
        self.finished = _now()
        return write_json(asdict(self), Path(out_dir) / "manifest.json")

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def verify(self, out_dir) -> bool:
        return all(sha256_file(Path(out_dir) / name) == digest for name, digest in self.outputs.items())


def prepare_out_dir(path) -> Path:
    """Fresh output directory; an existing non-empty one is never reused."""
    path = Path(path)
    if path.exists() and any(path.iterdir()):
        raise LadderError(f"output directory {path} exists and is not empty")
    path.mkdir(parents=True, exist_ok=True)
    return path
