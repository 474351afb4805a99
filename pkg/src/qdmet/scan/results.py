"""Scan result rows and CSV/JSON emission."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from qdmet.errors import ConfigError

CSV_COLUMNS = ("kind", "geom_param", "fragmentation", "solver", "e_total_ha", "delta_e_ha",
               "mu_ha", "n_frag_json", "seed", "scheme", "n_shots", "flags")


@dataclass
class Row:
    kind: str
    geom_param: float | None = None
    fragmentation: str = ""
    solver: str = ""
    e_total_ha: float | None = None
    delta_e_ha: float | None = None
    mu_ha: float | None = None
    n_frag: dict | None = None
    seed: int | None = None
    scheme: str = ""
    n_shots: int | None = None
    flags: list = field(default_factory=list)
    config_hash: str = ""
    timing_s: float | None = None

    @property
    def failed(self) -> bool:
        return any(f.startswith("error") for f in self.flags)

    def sort_key(self):
        def num(v):
            return (v is None, v if v is not None else 0)
        return (self.kind, self.fragmentation, num(self.geom_param), num(self.seed), self.scheme,
                num(self.n_shots), num(self.mu_ha), ";".join(self.flags))

    def csv_fields(self) -> list[str]:
        def fmt(v):
            return "" if v is None else repr(float(v)) if isinstance(v, float) else str(v)
        n_json = "" if self.n_frag is None else json.dumps(self.n_frag, sort_keys=True)
        return [self.kind, fmt(self.geom_param), self.fragmentation, self.solver,
                fmt(self.e_total_ha), fmt(self.delta_e_ha), fmt(self.mu_ha), n_json,
                fmt(self.seed), self.scheme, fmt(self.n_shots), ";".join(self.flags)]


@dataclass
class ScanResult:
    kind: str
    rows: list
    config: dict = field(default_factory=dict)
    config_hash: str = ""
    summary: dict = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(r.failed for r in self.rows)

    def sorted_rows(self):
        return sorted(self.rows, key=Row.sort_key)

    def select(self, kind=None, fragmentation=None, scheme=None):
        return [r for r in self.rows if (kind is None or r.kind == kind)
                and (fragmentation is None or r.fragmentation == fragmentation)
                and (scheme is None or r.scheme == scheme)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.sorted_rows():
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"kind": self.kind, "config_hash": self.config_hash, "config": self.config,
                "summary": self.summary, "rows": [asdict(r) for r in self.sorted_rows()]}

    @classmethod
    def from_json(cls, data) -> ScanResult:
        rows = [Row(**r) for r in data["rows"]]
        return cls(data["kind"], rows, data.get("config", {}), data.get("config_hash", ""),
                   data.get("summary", {}))


def emit_results(result: ScanResult, fmt: str, path) -> Path:
    """Write ``result`` as csv or json to ``path`` and return the path."""
    path = Path(path)
    if fmt == "csv":
        text = result.to_csv()
    elif fmt == "json":
        text = json.dumps(result.to_json(), indent=1, sort_keys=True, default=_jsonable)
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None
    return path


def load_results(path) -> ScanResult:
    return ScanResult.from_json(json.loads(Path(path).read_text()))


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")
