"""File formats: correspondence text files, ASCII PLY, JSON result reports.

The correspondence format is one pair per line, whitespace-separated:

    ax ay az bx by bz [beta]

with '#' starting a comment. The beta column is optional when a global
default is supplied. Reports are versioned JSON; floats survive a
serialize/parse round trip exactly (Python emits shortest round-trip
representations, never more than 17 significant digits).
"""

from __future__ import annotations

import json

import numpy as np
from numpy.typing import NDArray

from .errors import (
    InputError,
    MalformedHeader,
    ShortFile,
    UnsupportedFormat,
)
from .geometry import CorrespondenceSet, Points
from .pipeline import RegistrationResult

FORMAT_VERSION = "1.0"


# -- correspondence files ------------------------------------------------------


def _data_lines(text: str) -> list[tuple[int, str]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((lineno, line))
    return out


def parse_correspondences(text: str, default_beta: float | None = None) -> CorrespondenceSet:
    """Parse `ax ay az bx by bz [beta]` rows into a correspondence set."""
    source, target, betas = [], [], []
    for lineno, line in _data_lines(text):
        parts = line.split()
        if len(parts) not in (6, 7):
            raise InputError(
                f"line {lineno}: expected 6 or 7 columns, got {len(parts)}"
            )
        try:
            nums = [float(p) for p in parts]
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from exc
        source.append(nums[0:3])
        target.append(nums[3:6])
        if len(nums) == 7:
            betas.append(nums[6])
        elif default_beta is not None:
            betas.append(float(default_beta))
        else:
            raise InputError(
                f"line {lineno}: no beta column and no default beta given"
            )
    if not source:
        raise InputError("no correspondence rows found")
    return CorrespondenceSet(
        np.array(source), np.array(target), np.array(betas)
    )


def read_correspondences(path: str, default_beta: float | None = None) -> CorrespondenceSet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_correspondences(fh.read(), default_beta)


def format_correspondences(c: CorrespondenceSet) -> str:
    lines = ["# ax ay az bx by bz beta"]
    for a, b, beta in zip(c.source, c.target, c.betas):
        row = list(a) + list(b) + [beta]
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_correspondences(path: str, c: CorrespondenceSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_correspondences(c))


def parse_pairs(text: str) -> tuple[NDArray[np.int64], NDArray[np.float64] | None]:
    """Parse `i j [beta]` index rows pairing two point clouds."""
    pairs, betas = [], []
    for lineno, line in _data_lines(text):
        parts = line.split()
        if len(parts) not in (2, 3):
            raise InputError(f"line {lineno}: expected 2 or 3 columns")
        try:
            i, j = int(parts[0]), int(parts[1])
            beta = float(parts[2]) if len(parts) == 3 else None
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from exc
        pairs.append((i, j))
        betas.append(beta)
    if not pairs:
        raise InputError("no index pairs found")
    has_beta = [b is not None for b in betas]
    if any(has_beta) and not all(has_beta):
        raise InputError("beta column must be present on all rows or none")
    return (
        np.array(pairs, dtype=np.int64),
        np.array(betas, dtype=np.float64) if all(has_beta) else None,
    )


# -- ASCII PLY -----------------------------------------------------------------

_PLY_TYPES = {
    "char", "uchar", "short", "ushort", "int", "uint",
    "int8", "uint8", "int16", "uint16", "int32", "uint32",
    "float", "double", "float32", "float64",
}


def parse_ply_ascii(data: bytes | str) -> Points:
    """Vertex positions from an ASCII PLY file, in file order.

    Unknown scalar vertex properties are skipped. Binary files raise
    UnsupportedFormat; truncated files raise ShortFile; anything else
    unparseable raises MalformedHeader.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise UnsupportedFormat(f"not an ASCII PLY file: {exc}") from exc
    else:
        text = data
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MalformedHeader("missing 'ply' magic line")

    elements: list[tuple[str, int]] = []  # (name, count) in declaration order
    properties: dict[str, list[str]] = {}
    fmt_seen = False
    end = None
    for idx, raw in enumerate(lines[1:], start=1):
        line = raw.strip()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if len(parts) < 2:
                raise MalformedHeader("bad format line")
            if parts[1] != "ascii":
                raise UnsupportedFormat(f"only ASCII PLY is supported, got {parts[1]}")
            fmt_seen = True
        elif parts[0] == "element":
            if len(parts) != 3:
                raise MalformedHeader(f"bad element line: {line!r}")
            try:
                count = int(parts[2])
            except ValueError as exc:
                raise MalformedHeader(f"bad element count: {line!r}") from exc
            elements.append((parts[1], count))
            properties[parts[1]] = []
        elif parts[0] == "property":
            if not elements:
                raise MalformedHeader("property before any element")
            name = elements[-1][0]
            if parts[1] == "list":
                if name == "vertex":
                    raise UnsupportedFormat("list properties on vertex not supported")
                properties[name].append("__list__")
            elif len(parts) == 3 and parts[1] in _PLY_TYPES:
                properties[name].append(parts[2])
            else:
                raise MalformedHeader(f"bad property line: {line!r}")
        elif parts[0] == "end_header":
            end = idx
            break
        else:
            raise MalformedHeader(f"unrecognized header line: {line!r}")
    if end is None:
        raise MalformedHeader("missing end_header")
    if not fmt_seen:
        raise MalformedHeader("missing format line")
    vertex_counts = [cnt for name, cnt in elements if name == "vertex"]
    if not vertex_counts:
        raise MalformedHeader("no vertex element declared")

    body = [ln for ln in lines[end + 1 :] if ln.strip()]
    row = 0
    points = None
    for name, count in elements:
        if name != "vertex":
            # skip this element's rows (list rows still occupy one line each)
            row += count
            continue
        props = properties[name]
        try:
            cols = [props.index(axis) for axis in ("x", "y", "z")]
        except ValueError as exc:
            raise MalformedHeader("vertex element lacks x/y/z properties") from exc
        pts = np.empty((count, 3))
        for k in range(count):
            if row + k >= len(body):
                raise ShortFile(
                    f"expected {count} vertex rows, file ended after {k}"
                )
            parts = body[row + k].split()
            if len(parts) < len(props):
                raise ShortFile(f"vertex row {k}: expected {len(props)} values")
            try:
                pts[k] = [float(parts[c]) for c in cols]
            except ValueError as exc:
                raise MalformedHeader(f"vertex row {k}: {exc}") from exc
        points = pts
        row += count
    if points is None:  # pragma: no cover - guarded by vertex_counts above
        raise MalformedHeader("no vertex data")
    return points


def format_ply_ascii(points) -> str:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InputError(f"expected (N, 3) points, got {pts.shape}")
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {pts.shape[0]}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    rows = [" ".join(repr(float(v)) for v in p) for p in pts]
    return "\n".join(header + rows) + "\n"


# -- JSON result reports -------------------------------------------------------


def report_dict(
    result: RegistrationResult,
    config_echo: dict | None = None,
    include_timings: bool = False,
) -> dict:
    """Serializable summary of a registration result."""
    tf = result.transform
    cert = result.rotation_cert
    doc = {
        "format_version": FORMAT_VERSION,
        "transform": {
            "scale": tf.s,
            "rotation_row_major": [float(v) for v in tf.R.reshape(-1)],
            "translation": [float(v) for v in tf.t],
            "det_rotation": tf.det_r,
        },
        "certificate": {
            "stable_rank": cert.stable_rank,
            "subopt_bound": cert.subopt_bound,
            "f_rounded": cert.f_rounded,
            "f_sdp": cert.f_sdp,
            "tight": cert.tight,
            "det_r": cert.det_r,
            "sdp_converged": result.sdp_solution.converged,
            "sdp_iterations": result.sdp_solution.iterations,
        },
        "inliers": {
            "scale_consensus": (
                None
                if result.scale_solution is None
                else [int(i) for i in result.scale_solution.consensus]
            ),
            "clique_vertices": [int(i) for i in result.clique.vertices],
            "clique_method": result.clique.method,
            "rotation_accepted": [int(t) for t in cert.thetas],
            "translation_joint": [int(i) for i in result.translation.joint_inliers],
            "translation_by_component": [
                [int(i) for i in comp] for comp in result.translation.component_consensus
            ],
        },
        "warnings": list(result.warnings),
        "config": config_echo or {},
    }
    if include_timings:
        doc["timings"] = dict(result.timings)
    return doc


def report_to_json(
    result: RegistrationResult,
    config_echo: dict | None = None,
    include_timings: bool = False,
) -> str:
    return json.dumps(report_dict(result, config_echo, include_timings), indent=2) + "\n"


def parse_report(text: str) -> dict:
    """Parse and version-check a report produced by report_to_json."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"not valid JSON: {exc}") from exc
    version = str(doc.get("format_version", ""))
    major = version.split(".", 1)[0]
    ours = FORMAT_VERSION.split(".", 1)[0]
    if major != ours:
        raise UnsupportedFormat(
            f"report format_version {version!r} not supported (need major {ours})"
        )
    return doc
