"""CSV reports and gnuplot scripts."""

import csv
import io
import math

import numpy as np

from .experiments import COLUMNS


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.17g}"
    return str(v)


def write_csv(rows, target, metadata=None, columns=COLUMNS):
    """Write ``rows`` with ``# key=value`` metadata lines and a header row.

    ``target`` is a path or a text stream.
    """
    own = isinstance(target, str)
    fh = open(target, "w", encoding="utf-8", newline="") if own else target
    try:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={format_value(val)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row.get(c)) for c in columns])
    finally:
        if own:
            fh.close()


def csv_text(rows, metadata=None, columns=COLUMNS):
    buf = io.StringIO()
    write_csv(rows, buf, metadata, columns)
    return buf.getvalue()


def read_csv(path):
    """Metadata dict and row dicts (strings) of a report written by :func:`write_csv`."""
    meta, body = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v
            else:
                body.append(line)
    return meta, list(csv.DictReader(body))


def all_passed(rows):
    """True iff no ``pass_*`` flag in ``rows`` is False."""
    return all(row.get(k) is not False for row in rows for k in row if k.startswith("pass"))


def gnuplot_script(csv_path, x="phi", ys=("lambda1", "bound"), columns=COLUMNS, title=""):
    """Text of a gnuplot script plotting columns of a report against ``x``."""
    idx = {c: i + 1 for i, c in enumerate(columns)}
    plots = ", ".join(f"'{csv_path}' using {idx[x]}:{idx[y]} with linespoints title '{y}'"
                      for y in ys)
    return "\n".join([
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{x}'",
        f"plot {plots}", ""])
