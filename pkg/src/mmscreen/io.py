"""Plain-text readers and writers.

Formats (UTF-8, one record per line):

dense matrix
    Header row ``<corner>\\t<gene ids...>``; each following row is a spot id
    followed by its values.  Tab or comma, detected from the header line.
sparse triplet
    Header ``spot\\tgene\\tvalue``; rows name a spot id, a gene id and a
    value.  Absent entries are 0.  The declared shape comes from two sidecar
    files, ``<path>.spots`` and ``<path>.genes``, one id per line.
coordinates
    Two or three numeric columns per spot, optional header row, optional
    leading spot-id column.
distances
    Dense square matrix of numbers, or triplets ``i j d`` (0-based spot
    indices) that are mirrored across the diagonal on load.
layout
    ``spot\\tx\\ty\\tlabel`` with a header row.
labels
    ``spot_id\\tcluster`` with a header row.
key=value
    ``key=value`` per line; ``#`` starts a comment.

Numbers are written in shortest round-trip form, so every writer/reader
pair is lossless.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError
from .expression import ExpressionMatrix


def format_value(v):
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _sniff(line):
    return "\t" if "\t" in line else ","


def _parse_float(token, path, lineno):
    try:
        return float(token)
    except ValueError:
        raise DataError(f"{path}:{lineno}: cannot parse {token!r} as a number") from None


def _lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.rstrip("\r\n")
                if line.strip():
                    yield lineno, line
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None


def _check_values(values, path):
    bad = ~np.isfinite(values) | (values < 0)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DataError(f"{path}: invalid value {values[i, j]!r} at (row {i}, column {j})")


# expression matrices -----------------------------------------------------------


def load_matrix(path, format="dense", spots_path=None, genes_path=None):
    """Read an :class:`ExpressionMatrix` in dense or sparse-triplet form."""
    if format in ("dense", "dense-delimited"):
        return _load_dense(path)
    if format in ("sparse", "sparse-triplet"):
        return _load_sparse(path, spots_path, genes_path)
    raise ConfigurationError(f"unknown matrix format {format!r}")


def _load_dense(path):
    it = _lines(path)
    try:
        _, header = next(it)
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    sep = _sniff(header)
    gene_ids = [g.strip() for g in header.split(sep)[1:]]
    spot_ids, rows = [], []
    for lineno, line in it:
        parts = line.split(sep)
        if len(parts) != len(gene_ids) + 1:
            raise DataError(f"{path}:{lineno}: expected {len(gene_ids) + 1} fields, got {len(parts)}")
        spot_ids.append(parts[0].strip())
        rows.append([_parse_float(t, path, lineno) for t in parts[1:]])
    values = np.array(rows, dtype=float).reshape(len(spot_ids), len(gene_ids))
    _check_values(values, path)
    return ExpressionMatrix(values, tuple(spot_ids), tuple(gene_ids))


def _read_ids(path):
    return [line.strip() for _, line in _lines(path)]


def _load_sparse(path, spots_path=None, genes_path=None):
    spot_ids = _read_ids(spots_path or f"{path}.spots")
    gene_ids = _read_ids(genes_path or f"{path}.genes")
    srow = {s: i for i, s in enumerate(spot_ids)}
    gcol = {g: j for j, g in enumerate(gene_ids)}
    values = np.zeros((len(spot_ids), len(gene_ids)))
    it = _lines(path)
    try:
        _, header = next(it)
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    sep = _sniff(header)
    if [h.strip().lower() for h in header.split(sep)] != ["spot", "gene", "value"]:
        raise DataError(f"{path}:1: expected header 'spot gene value'")
    for lineno, line in it:
        parts = line.split(sep)
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        s, g, v = (p.strip() for p in parts)
        if s not in srow or g not in gcol:
            raise DataError(f"{path}:{lineno}: unknown spot or gene id")
        values[srow[s], gcol[g]] = _parse_float(v, path, lineno)
    _check_values(values, path)
    return ExpressionMatrix(values, tuple(spot_ids), tuple(gene_ids))


def save_matrix(matrix, path, format="dense", sep="\t"):
    path = Path(path)
    if format in ("dense", "dense-delimited"):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(sep.join(["spot", *matrix.gene_ids]) + "\n")
            for sid, row in zip(matrix.spot_ids, matrix.values):
                fh.write(sep.join([sid, *map(format_value, row)]) + "\n")
    elif format in ("sparse", "sparse-triplet"):
        Path(f"{path}.spots").write_text("".join(f"{s}\n" for s in matrix.spot_ids), encoding="utf-8")
        Path(f"{path}.genes").write_text("".join(f"{g}\n" for g in matrix.gene_ids), encoding="utf-8")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(sep.join(["spot", "gene", "value"]) + "\n")
            for i, j in zip(*np.nonzero(matrix.values)):
                v = format_value(matrix.values[i, j])
                fh.write(sep.join([matrix.spot_ids[i], matrix.gene_ids[j], v]) + "\n")
    else:
        raise ConfigurationError(f"unknown matrix format {format!r}")


# geometry ------------------------------------------------------------------------


def _is_number(token):
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_coordinates(path):
    """Return ``(coords, spot_ids or None)`` from a delimited text file.

    A header naming ``x``, ``y`` (and optionally ``z``) selects those columns,
    so layout files with extra columns can be read directly.
    """
    rows, ids, pick = [], [], None
    for lineno, line in _lines(path):
        parts = re.split(r"[,\t ]+", line.strip())
        if lineno == 1 and not all(_is_number(p) for p in parts[-2:]):
            names = [p.lower() for p in parts]
            if "x" in names and "y" in names:
                pick = [names.index(c) for c in ("x", "y", "z") if c in names]
                id_col = 0 if pick[0] > 0 else None
            continue
        if pick is not None:
            if len(parts) < len(names):
                raise DataError(f"{path}:{lineno}: expected {len(names)} fields, got {len(parts)}")
            if id_col is not None:
                ids.append(parts[id_col])
            parts = [parts[c] for c in pick]
        elif not _is_number(parts[0]):
            ids.append(parts[0])
            parts = parts[1:]
        if len(parts) not in (2, 3):
            raise DataError(f"{path}:{lineno}: expected 2 or 3 coordinates, got {len(parts)}")
        rows.append([_parse_float(p, path, lineno) for p in parts])
    if not rows:
        raise DataError(f"{path}: no coordinates")
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: rows have different numbers of coordinates")
    coords = np.array(rows, dtype=float)
    if not np.all(np.isfinite(coords)):
        raise DataError(f"{path}: non-finite coordinate")
    if ids and len(ids) != len(rows):
        raise DataError(f"{path}: spot ids present on some rows only")
    return coords, (tuple(ids) if ids else None)


def save_coordinates(coords, path, spot_ids=None):
    coords = np.asarray(coords, dtype=float)
    names = ["x", "y", "z"][: coords.shape[1]]
    with open(path, "w", encoding="utf-8") as fh:
        head = (["spot"] if spot_ids is not None else []) + names
        fh.write("\t".join(head) + "\n")
        for i, row in enumerate(coords):
            lead = [spot_ids[i]] if spot_ids is not None else []
            fh.write("\t".join(lead + [format_value(v) for v in row]) + "\n")


def load_distances(path, format="dense", n=None):
    """Read a pairwise distance matrix (dense square or ``i j d`` triplets)."""
    if format == "dense":
        rows = []
        for lineno, line in _lines(path):
            parts = line.replace(",", " ").replace("\t", " ").split()
            rows.append([_parse_float(p, path, lineno) for p in parts])
        if not rows or any(len(r) != len(rows) for r in rows):
            raise DataError(f"{path}: distance matrix is not square")
        return np.array(rows, dtype=float)
    if format in ("triplet", "sparse", "sparse-triplet"):
        trip = []
        for lineno, line in _lines(path):
            parts = line.replace(",", " ").replace("\t", " ").split()
            if lineno == 1 and not _is_number(parts[0]):
                continue
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 'i j d'")
            i, j = int(_parse_float(parts[0], path, lineno)), int(_parse_float(parts[1], path, lineno))
            trip.append((lineno, i, j, _parse_float(parts[2], path, lineno)))
        size = n if n is not None else 1 + max(max(i, j) for _, i, j, _ in trip)
        D = np.full((size, size), np.nan)
        np.fill_diagonal(D, 0.0)
        for lineno, i, j, d in trip:
            if not (0 <= i < size and 0 <= j < size):
                raise DataError(f"{path}:{lineno}: index out of range")
            for a, b in ((i, j), (j, i)):
                if not math.isnan(D[a, b]) and D[a, b] != d:
                    raise DataError(f"{path}:{lineno}: conflicting distance for pair ({i}, {j})")
                D[a, b] = d
        if np.isnan(D).any():
            raise DataError(f"{path}: missing distances for some pairs")
        return D
    raise ConfigurationError(f"unknown distance format {format!r}")


def save_layout(layout, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("spot\tx\ty\tlabel\n")
        for sid, (x, y), lab in zip(layout.spot_ids, layout.coords, layout.labels):
            fh.write(f"{sid}\t{format_value(x)}\t{format_value(y)}\t{int(lab)}\n")


def load_layout(path):
    from .simgen import Layout

    ids, coords, labels = [], [], []
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if lineno == 1 and parts[0] == "spot":
            continue
        if len(parts) != 4:
            raise DataError(f"{path}:{lineno}: expected 'spot x y label'")
        ids.append(parts[0])
        coords.append([_parse_float(parts[1], path, lineno), _parse_float(parts[2], path, lineno)])
        labels.append(int(_parse_float(parts[3], path, lineno)))
    return Layout(np.array(coords, dtype=float), np.array(labels, dtype=np.int64), tuple(ids))


# labels, gene lists, key=value ---------------------------------------------------


def save_labels(path, spot_ids, labels):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("spot_id\tcluster\n")
        for sid, lab in zip(spot_ids, labels):
            fh.write(f"{sid}\t{int(lab)}\n")


def load_labels(path):
    """Return ``(spot_ids, labels)``; labels may be any string tokens."""
    ids, labels = [], []
    for lineno, line in _lines(path):
        parts = line.replace(",", "\t").split("\t")
        if lineno == 1 and parts[0].strip() in ("spot_id", "spot"):
            continue
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'spot_id cluster'")
        ids.append(parts[0].strip())
        labels.append(parts[1].strip())
    return tuple(ids), np.array(labels)


def save_id_list(path, ids):
    Path(path).write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")


def load_id_list(path):
    return _read_ids(path)


def write_key_value(path, items):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in items.items():
            fh.write(f"{k}={_kv_format(v)}\n")


def _kv_format(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def read_key_value(path):
    out = {}
    for lineno, line in _lines(path):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
