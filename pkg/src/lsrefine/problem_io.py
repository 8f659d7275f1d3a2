"""Versioned binary container for least-squares problem instances.

Layout (little-endian throughout):

    offset 0   magic  b"LSQP"
    offset 4   uint32 version (currently 1)
    offset 8   uint64 m
    offset 16  uint64 n
    offset 24  uint8  residual format tag (1 = binary64 master)
    offset 25  uint8  truth format tag (2 = double-word binary64)
    offset 26  6 reserved zero bytes
    offset 32  A payload: m*n float64, row-major
    then       b (m), x_hi (n), x_lo (n), r_hi (m), r_lo (m) float64 payloads
    then       uint64 metadata length, UTF-8 JSON metadata block

The metadata block carries kappa_target, rnorm_target, seed, the measured
singular values, and the generator name.  Floats in the JSON round-trip
exactly (shortest-repr encoding).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .precision import DwVector
from .probgen import LsProblem

MAGIC = b"LSQP"
VERSION = 1
_TAG_RESIDUAL_BINARY64 = 1
_TAG_TRUTH_DOUBLEWORD = 2


def write_problem(problem: LsProblem, path) -> None:
    m, n = problem.m, problem.n
    meta = {
        "kappa_target": problem.kappa_target,
        "rnorm_target": problem.rnorm_target,
        "seed": problem.seed,
        "sigma": [float(s) for s in problem.sigma],
        "generator": "philox",
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<QQ", m, n))
        fh.write(struct.pack("<BB6x", _TAG_RESIDUAL_BINARY64, _TAG_TRUTH_DOUBLEWORD))
        for arr in (problem.a, problem.b, problem.x_star.hi, problem.x_star.lo,
                    problem.r_star.hi, problem.r_star.lo):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)


def read_problem(path) -> LsProblem:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a problem container (bad magic)")
    version, = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    m, n = struct.unpack_from("<QQ", data, 8)
    tags = struct.unpack_from("<BB", data, 24)
    if tags != (_TAG_RESIDUAL_BINARY64, _TAG_TRUTH_DOUBLEWORD):
        raise ValueError(f"{path}: unsupported precision tags {tags}")
    off = 32

    def take(count):
        nonlocal off
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).copy()
        off += count * 8
        return arr

    a = take(m * n).reshape(m, n)
    b = take(m)
    x_hi, x_lo = take(n), take(n)
    r_hi, r_lo = take(m), take(m)
    meta_len, = struct.unpack_from("<Q", data, off)
    off += 8
    meta = json.loads(data[off:off + meta_len].decode("utf-8"))
    return LsProblem(a=a, b=b,
                     x_star=DwVector(x_hi, x_lo), r_star=DwVector(r_hi, r_lo),
                     kappa_target=meta["kappa_target"],
                     rnorm_target=meta["rnorm_target"],
                     seed=meta["seed"],
                     sigma=np.asarray(meta["sigma"]))


def dump_problem_text(path, stream, limit: int | None = None) -> None:
    """Human-readable dump; ``limit`` truncates each array to its head."""
    problem = read_problem(path)
    w = stream.write
    w(f"container: {path}\n")
    w(f"version: {VERSION}\n")
    w(f"m: {problem.m}\nn: {problem.n}\n")
    w(f"kappa_target: {problem.kappa_target!r}\n")
    w(f"rnorm_target: {problem.rnorm_target!r}\n")
    w(f"seed: {problem.seed}\n")
    w(f"sigma: {[float(s) for s in problem.sigma]!r}\n")

    def dump_vec(name, arr):
        vals = arr if limit is None else arr[:limit]
        w(f"{name} ({arr.shape[0]} entries{'' if limit is None else ', truncated'}):\n")
        for v in vals:
            w(f"  {float(v)!r}\n")

    a = problem.a
    rows = a.shape[0] if limit is None else min(limit, a.shape[0])
    w(f"A ({a.shape[0]}x{a.shape[1]}{'' if limit is None else ', truncated'}):\n")
    for i in range(rows):
        w("  " + " ".join(repr(float(v)) for v in a[i]) + "\n")
    dump_vec("b", problem.b)
    dump_vec("x_star.hi", problem.x_star.hi)
    dump_vec("x_star.lo", problem.x_star.lo)
    dump_vec("r_star.hi", problem.r_star.hi)
    dump_vec("r_star.lo", problem.r_star.lo)
