"""Deterministic text output: number formatting, CSV, report sections."""

import numpy as np


def fmt_num(x):
    """Full-precision, locale-free rendering of one number.

    Scientific notation for |x| < 1e-3 or |x| >= 1e6, positional otherwise;
    both use the shortest digit string that round-trips (so two runs of the
    same binary produce byte-identical output).
    """
    xf = float(x)
    if np.isnan(xf):
        return "nan"
    if np.isinf(xf):
        return "inf" if xf > 0 else "-inf"
    if xf == 0.0:
        return "0"
    ax = abs(xf)
    if ax < 1e-3 or ax >= 1e6:
        return np.format_float_scientific(xf, unique=True, trim="-")
    return np.format_float_positional(xf, unique=True, trim="-")


def fmt_cell(value):
    if isinstance(value, str):
        if "," in value or "\n" in value:
            raise ValueError(f"CSV cell may not contain separators: {value!r}")
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return fmt_num(value)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row length does not match header")
        lines.append(",".join(fmt_cell(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def section(title, body_lines):
    out = [f"[{title}]"]
    out.extend(body_lines)
    out.append("")
    return out
