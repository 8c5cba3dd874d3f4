"""CSV file formats.

All files are UTF-8, comma separated, with a header row and LF line endings.

* ``agents.csv``        ``agent_id,x1,...,xK``
* ``alternatives.csv``  ``alt_id,z1,...,zL``
* ``rankings.csv``      ``agent_id,ranking`` with ``ranking`` a ``>``-joined list of
  alternative ids, best first (``a2>a0>a1``)
* ``truth.csv`` / ``theta.csv``  ``parameter,value`` with rows ``delta:<alt_id>``,
  ``b:<k>:<l>`` (1-based, row-major) and optionally ``noise_sd``

Floats are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
import io as _io
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import DataValidationError
from .model import AgentPool, AlternativeSet, Parameters, Profile

AGENTS_FILE = "agents.csv"
ALTERNATIVES_FILE = "alternatives.csv"
RANKINGS_FILE = "rankings.csv"
TRUTH_FILE = "truth.csv"


def fmt(value):
    """Format a number for output; ``None`` becomes an empty field."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def _read_rows(path):
    path = Path(path)
    if not path.exists():
        raise DataValidationError("file not found", path=path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataValidationError("missing header row", line=1, path=path)
    return rows[0], [(k + 2, row) for k, row in enumerate(rows[1:]) if row]


def read_attributes(path, id_column, prefix):
    header, rows = _read_rows(path)
    if not header or header[0] != id_column:
        raise DataValidationError(f"first column must be {id_column!r}", line=1, path=path)
    n_attr = len(header) - 1
    expected = [f"{prefix}{k + 1}" for k in range(n_attr)]
    if header[1:] != expected:
        raise DataValidationError(f"attribute columns must be {expected}", line=1, path=path)
    ids, values, seen = [], [], set()
    for line, row in rows:
        if len(row) != n_attr + 1:
            raise DataValidationError(f"expected {n_attr + 1} fields, got {len(row)}",
                                      line=line, path=path)
        ident = row[0].strip()
        if not ident or ident in seen:
            raise DataValidationError(f"empty or duplicate id {ident!r}", line=line, path=path)
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise DataValidationError(str(exc), line=line, path=path) from None
        if not all(np.isfinite(vals)):
            raise DataValidationError("non-finite attribute value", line=line, path=path)
        seen.add(ident)
        ids.append(ident)
        values.append(vals)
    return ids, np.array(values, dtype=float).reshape(len(ids), n_attr)


def agent_ids(n):
    return [f"i{i}" for i in range(n)]


def alt_ids(m):
    return [f"a{j}" for j in range(m)]


def load_profile(rankings_path, agents_path, alternatives_path):
    """Read and validate the three profile files.

    Agents and alternatives are indexed in file order.
    """
    a_ids, x = read_attributes(agents_path, "agent_id", "x")
    c_ids, z = read_attributes(alternatives_path, "alt_id", "z")
    if len(c_ids) < 2:
        raise DataValidationError("need at least two alternatives", path=alternatives_path)
    agent_index = {a: i for i, a in enumerate(a_ids)}
    alt_index = {c: j for j, c in enumerate(c_ids)}
    header, rows = _read_rows(rankings_path)
    if header != ["agent_id", "ranking"]:
        raise DataValidationError("header must be 'agent_id,ranking'", line=1, path=rankings_path)
    rankings, seen = [], set()
    for line, row in rows:
        if len(row) != 2:
            raise DataValidationError(f"expected 2 fields, got {len(row)}", line=line,
                                      path=rankings_path)
        agent = row[0].strip()
        if agent not in agent_index:
            raise DataValidationError(f"unknown agent id {agent!r}", line=line, path=rankings_path)
        if agent in seen:
            raise DataValidationError(f"duplicate ranking for agent {agent!r}", line=line,
                                      path=rankings_path)
        seen.add(agent)
        names = [s.strip() for s in row[1].split(">")]
        unknown = [s for s in names if s not in alt_index]
        if unknown:
            raise DataValidationError(f"unknown alternative id {unknown[0]!r}", line=line,
                                      path=rankings_path)
        order = [alt_index[s] for s in names]
        if sorted(order) != list(range(len(c_ids))):
            raise DataValidationError("ranking must list every alternative exactly once",
                                      line=line, path=rankings_path)
        rankings.append((agent_index[agent], tuple(order)))
    return Profile(AlternativeSet(z), AgentPool(x), tuple(rankings))


def load_profile_dir(directory):
    directory = Path(directory)
    return load_profile(directory / RANKINGS_FILE, directory / AGENTS_FILE,
                        directory / ALTERNATIVES_FILE)


def write_profile(profile, directory):
    """Write agents, alternatives and rankings files into ``directory``."""
    directory = Path(directory)
    a_ids, c_ids = agent_ids(profile.agents.n), alt_ids(profile.m)
    K, L = profile.agents.K, profile.alternatives.L
    write_csv(directory / AGENTS_FILE, ["agent_id"] + [f"x{k + 1}" for k in range(K)],
              ([a_ids[i]] + [fmt(v) for v in row] for i, row in enumerate(profile.agents.x)))
    write_csv(directory / ALTERNATIVES_FILE, ["alt_id"] + [f"z{l + 1}" for l in range(L)],
              ([c_ids[j]] + [fmt(v) for v in row] for j, row in enumerate(profile.alternatives.z)))
    write_csv(directory / RANKINGS_FILE, ["agent_id", "ranking"],
              ([a_ids[a], ">".join(c_ids[j] for j in order)] for a, order in profile.rankings))


_B_NAME = re.compile(r"^b:(\d+):(\d+)$")


def write_parameters(params, path, noise_sd=None):
    rows = [[f"delta:{c}", fmt(v)] for c, v in zip(alt_ids(params.m), params.delta)]
    for k in range(params.K):
        for l in range(params.L):
            rows.append([f"b:{k + 1}:{l + 1}", fmt(params.b[k, l])])
    if noise_sd is not None:
        rows.append(["noise_sd", fmt(noise_sd)])
    write_csv(path, ["parameter", "value"], rows)


def read_parameters(path, K=None, L=None):
    """Read a parameter file; returns ``(Parameters, noise_sd or None)``.

    ``delta`` is re-normalized so that its first entry is 0.  ``K`` and
    ``L`` default to the largest indices present.
    """
    header, rows = _read_rows(path)
    if header != ["parameter", "value"]:
        raise DataValidationError("header must be 'parameter,value'", line=1, path=path)
    delta, entries, noise_sd = [], {}, None
    for line, row in rows:
        if len(row) != 2:
            raise DataValidationError(f"expected 2 fields, got {len(row)}", line=line, path=path)
        name = row[0].strip()
        try:
            value = float(row[1])
        except ValueError as exc:
            raise DataValidationError(str(exc), line=line, path=path) from None
        if name.startswith("delta:"):
            delta.append(value)
        elif name == "noise_sd":
            noise_sd = value
        elif (match := _B_NAME.match(name)):
            entries[(int(match.group(1)) - 1, int(match.group(2)) - 1)] = value
        else:
            raise DataValidationError(f"unknown parameter {name!r}", line=line, path=path)
    if len(delta) < 2:
        raise DataValidationError("need at least two delta entries", path=path)
    if K is None:
        K = 1 + max((k for k, _ in entries), default=-1)
    if L is None:
        L = 1 + max((l for _, l in entries), default=-1)
    b = np.zeros((K, L))
    for (k, l), value in entries.items():
        if not (0 <= k < K and 0 <= l < L):
            raise DataValidationError(f"b:{k + 1}:{l + 1} outside a {K}x{L} matrix", path=path)
        b[k, l] = value
    if len(entries) != K * L:
        raise DataValidationError(f"expected {K * L} interaction entries, got {len(entries)}",
                                  path=path)
    return Parameters.normalized(delta, b), noise_sd


def write_matrix(path, matrix, names):
    write_csv(path, ["row"] + list(names),
              ([names[i]] + [fmt(v) for v in row] for i, row in enumerate(np.asarray(matrix))))


def parameter_names(m, K, L):
    """Labels of the free-vector coordinates."""
    return [f"delta:a{j}" for j in range(1, m)] + [
        f"b:{k + 1}:{l + 1}" for k in range(K) for l in range(L)
    ]


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataValidationError("expected 'key = value'", line=line_no, path=path)
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise DataValidationError("empty key", line=line_no, path=path)
            values[key.replace("-", "_")] = value
    return values
