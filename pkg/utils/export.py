"""Export utilities for run artifacts."""

import io
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import pandas as pd


def export_dataframe(
    df: pd.DataFrame,
    path: Optional[Union[str, Path]] = None,
    format: str = "csv",
    float_format: str = "%.10g"
) -> bytes:
    """
    Export a result table.

    Args:
        df: DataFrame to export
        path: Also write the bytes here when given
        format: 'csv' or 'json'
        float_format: printf-style format for CSV floats

    Returns:
        Bytes content of the exported file
    """
    buffer = io.BytesIO()

    if format == "csv":
        df.to_csv(buffer, index=False, float_format=float_format)
    elif format == "json":
        buffer.write(df.to_json(orient="records", indent=2).encode("utf-8"))
    else:
        raise ValueError(f"Unsupported format: {format}")

    content = buffer.getvalue()
    if path is not None:
        Path(path).write_bytes(content)
    return content


def export_config(config: Dict[str, Any]) -> str:
    """
    Export a configuration as JSON.

    Args:
        config: Configuration dict

    Returns:
        JSON string
    """
    return json.dumps(config, indent=2, default=str)


def _markdown_table(df: pd.DataFrame, max_rows: int = 50) -> list:
    lines = [
        "| " + " | ".join(str(c) for c in df.columns) + " |",
        "|" + "|".join("---" for _ in df.columns) + "|"
    ]
    for row in df.head(max_rows).itertuples(index=False):
        cells = [f"{v:.4g}" if isinstance(v, float) else str(v) for v in row]
        lines.append("| " + " | ".join(cells) + " |")
    if len(df) > max_rows:
        lines.append(f"| ... ({len(df) - max_rows} more rows) |")
    return lines


def export_report(
    title: str,
    tables: Dict[str, pd.DataFrame],
    config: Dict[str, Any]
) -> str:
    """
    Generate a markdown summary of one command run.

    Args:
        title: Report heading
        tables: Section name -> result table
        config: Effective configuration

    Returns:
        Markdown report string
    """
    report = [f"# {title}\n"]

    for name, df in tables.items():
        report.append(f"## {name}\n")
        if df.empty:
            report.append("No rows.")
        else:
            report.extend(_markdown_table(df))
        report.append("")

    report.append("## Configuration\n")
    report.append("```json")
    report.append(export_config(config))
    report.append("```")
    report.append("")

    return "\n".join(report)
