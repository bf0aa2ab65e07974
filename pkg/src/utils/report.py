import json
import platform
from pathlib import Path
from typing import List, Dict, Any, Optional

import numpy as np
import pandas as pd

VERSION = "0.3.0"


def _plain(value: Any) -> Any:
    """numpy scalars/arrays -> JSON-serializable Python objects"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


def to_json(report: Dict[str, Any]) -> str:
    """Stable text form: sorted keys, fixed indentation"""
    return json.dumps(_plain(report), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def save_json_report(report: Dict[str, Any], filepath, quiet: bool = False) -> Path:
    """Save report as JSON"""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", encoding="utf-8") as f:
        f.write(to_json(report))
    if not quiet:
        print(f"📄 JSON report saved: {filepath}")
    return filepath


def save_csv_table(table: pd.DataFrame, filepath, quiet: bool = False) -> Path:
    """Save a table as CSV"""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(filepath, index=False, float_format="%.6g")
    if not quiet:
        print(f"📋 CSV table saved: {filepath}")
    return filepath


def save_excel_tables(tables: Dict[str, pd.DataFrame], filepath, quiet: bool = False) -> Path:
    """Save tables as Excel, one sheet each"""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with pd.ExcelWriter(filepath, engine="openpyxl") as writer:
        for sheet, table in tables.items():
            table.to_excel(writer, sheet_name=sheet[:31], index=False)
    if not quiet:
        print(f"📊 Excel report saved: {filepath}")
    return filepath


def save_state_dump(snapshot: Dict[str, Any], filepath) -> Path:
    """Sampler state at a numeric abort"""
    path = save_json_report(snapshot, filepath, quiet=True)
    print(f"🧯 Sampler state dumped: {path}")
    return path


def beta_summary(beta_trace: List[Dict[str, float]]) -> Dict[str, Dict[str, float]]:
    """First, last, min and max of every granularity component"""
    if not beta_trace:
        return {}
    frame = pd.DataFrame(beta_trace)
    return {
        name: {
            "first": float(col.iloc[0]),
            "last": float(col.iloc[-1]),
            "max": float(col.max()),
            "min": float(col.min()),
        }
        for name, col in frame.items()
    }


def parameter_report(estimate, beta: Optional[Dict[str, float]] = None, psrf: Optional[Dict[str, float]] = None,
                     regression: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Per-class MMSE theta with posterior STD and 95% intervals"""
    report = {
        "classes": estimate.to_records(),
        "n_samples": estimate.n_samples,
    }
    if beta is not None:
        report["beta_final"] = beta
    if psrf is not None:
        report["psrf"] = psrf
    if regression is not None:
        report["regression"] = regression
    return report


def build_manifest(command: str, config: Dict[str, Any], seed: int, paths: Dict[str, Any],
                   timings: Dict[str, float], results: Dict[str, Any],
                   beta_trace: Optional[List[Dict[str, float]]] = None) -> Dict[str, Any]:
    """One self-contained record per run"""
    return {
        "command": command,
        "config": config,
        "paths": paths,
        "python": platform.python_version(),
        "results": results,
        "seed": seed,
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
        "version": VERSION,
        "beta_trajectory": beta_summary(beta_trace or []),
    }


def print_summary(title: str, lines: Dict[str, Any]):
    """Short console summary"""
    print(f"\n🎯 {title}:")
    for key, value in lines.items():
        print(f"   {key}: {value}")
