"""Instance loading and preprocessing.

An :class:`Instance` is an ``N x M`` matrix of non-negative integer
distances plus the number ``p`` of sites to open.  Three benchmark formats
are supported (graph-based with shortest paths, planar coordinates with
floored Euclidean distances, and dense random matrices) together with a
native JSON dump used by the tests.

:func:`preprocess` derives, per client, the strictly increasing list of
distinct distances, the permutation of sites by non-decreasing distance and
the rank of each site's distance in the distinct list.  Everything downstream
(cut separation, solution evaluation, model export) works off these arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import GuardExceeded, InstanceError, ParseError

# Largest N*M for which the dense sorted-site matrix is precomputed.
# 3e7 int32/int64 cells keeps preprocessing under ~1 GiB of RAM.
MAX_DENSE_CELLS = 30_000_000


@dataclass
class Instance:
    """A p-median instance: open ``p`` of ``n_sites`` sites to serve ``n_clients``."""

    n_clients: int
    n_sites: int
    p: int
    dist: np.ndarray  # (n_clients, n_sites) int64, possibly asymmetric

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=np.int64)
        if self.dist.shape != (self.n_clients, self.n_sites):
            raise InstanceError(
                f"distance matrix shape {self.dist.shape} does not match "
                f"({self.n_clients}, {self.n_sites})"
            )
        if not (1 <= self.p <= self.n_sites):
            raise InstanceError(f"p={self.p} outside [1, {self.n_sites}]")
        if self.n_clients < 1:
            raise InstanceError("instance needs at least one client")
        if (self.dist < 0).any():
            raise InstanceError("negative distances are not allowed")

    def with_p(self, p: int) -> "Instance":
        return Instance(self.n_clients, self.n_sites, p, self.dist)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_clients": self.n_clients,
                "n_sites": self.n_sites,
                "p": self.p,
                "dist": self.dist.tolist(),
            }
        )

    @staticmethod
    def from_json(text: str) -> "Instance":
        try:
            obj = json.loads(text)
            return Instance(
                int(obj["n_clients"]),
                int(obj["n_sites"]),
                int(obj["p"]),
                np.asarray(obj["dist"], dtype=np.int64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad native instance dump: {exc}") from exc


@dataclass
class Preprocessed:
    """Per-client sorted-distance structures, all 0-based.

    ``dvals[offs[i] + t]`` is the (t+1)-th smallest distinct distance of
    client ``i`` (``t = 0 .. K[i]-1``).  ``order[i]`` permutes sites by
    non-decreasing distance (ties by ascending site index), ``sorted_dist``
    is the distance row in that order, and ``sorted_rank[i, r]`` is the
    0-based index of ``sorted_dist[i, r]`` within client ``i``'s distinct
    list.  ``rank[i, j]`` gives that index for site ``j`` directly, and
    ``count_leq[offs[i] + t]`` is the number of sites within distance
    ``dvals[offs[i] + t]`` of client ``i``.
    """

    n_clients: int
    n_sites: int
    K: np.ndarray            # (N,) int64, distinct-distance counts
    offs: np.ndarray         # (N+1,) int64, prefix offsets into dvals/count_leq
    dvals: np.ndarray        # (sum K,) int64, distinct distances, increasing per client
    count_leq: np.ndarray    # (sum K,) int64
    order: np.ndarray        # (N, M) int32, sites by non-decreasing distance
    sorted_dist: np.ndarray  # (N, M) int64
    sorted_rank: np.ndarray  # (N, M) int32
    rank: np.ndarray         # (N, M) int32

    @property
    def total_distinct(self) -> int:
        """K = sum over clients of the distinct-distance counts."""
        return int(self.offs[-1])

    def distinct(self, i: int) -> np.ndarray:
        """Distinct distances of client ``i``, strictly increasing."""
        return self.dvals[self.offs[i]:self.offs[i + 1]]

    def n_within(self, i: int) -> np.ndarray:
        """Number of sites within each distinct distance of client ``i``."""
        return self.count_leq[self.offs[i]:self.offs[i + 1]]


def preprocess(inst: Instance) -> Preprocessed:
    """Build the sorted-distance structures for every client."""
    n, m = inst.n_clients, inst.n_sites
    if n * m > MAX_DENSE_CELLS:
        raise GuardExceeded(
            f"instance has {n}x{m} = {n * m} cells; the dense preprocessing "
            f"guard is {MAX_DENSE_CELLS} (huge instances are out of scope)"
        )
    order = np.argsort(inst.dist, axis=1, kind="stable").astype(np.int32)
    sorted_dist = np.take_along_axis(inst.dist, order.astype(np.int64), axis=1)

    increases = np.empty((n, m), dtype=bool)
    increases[:, 0] = True
    increases[:, 1:] = sorted_dist[:, 1:] > sorted_dist[:, :-1]
    sorted_rank = (np.cumsum(increases, axis=1) - 1).astype(np.int32)

    K = increases.sum(axis=1).astype(np.int64)
    offs = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(K, out=offs[1:])
    dvals = sorted_dist[increases]

    # count_leq for group t of client i = index after the last sorted position
    # of that group: group ends where the next position starts a new group.
    ends = np.empty((n, m), dtype=bool)
    ends[:, :-1] = increases[:, 1:]
    ends[:, -1] = True
    count_leq = np.nonzero(ends)[1] + 1

    rank = np.empty((n, m), dtype=np.int32)
    np.put_along_axis(rank, order.astype(np.int64), sorted_rank, axis=1)

    return Preprocessed(
        n_clients=n,
        n_sites=m,
        K=K,
        offs=offs,
        dvals=dvals,
        count_leq=count_leq,
        order=order,
        sorted_dist=sorted_dist,
        sorted_rank=sorted_rank,
        rank=rank,
    )


# ---------------------------------------------------------------------------
# OR-Library graph format
# ---------------------------------------------------------------------------

def _tokenize(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            yield lineno, line


def parse_orlib(text: str) -> Instance:
    """Parse an OR-Library pmed file: ``N E p`` header then ``u v cost`` edges.

    Vertices double as clients and sites, so the distance matrix is the
    all-pairs shortest-path closure of the undirected edge costs.
    """
    lines = _tokenize(text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError("empty file") from None
    parts = header.split()
    if len(parts) != 3:
        raise ParseError(f"header must be 'N E p', got {header!r}", lineno)
    try:
        n, n_edges, p = (int(x) for x in parts)
    except ValueError:
        raise ParseError(f"non-integer header field in {header!r}", lineno) from None
    if n < 1 or n_edges < 0:
        raise ParseError(f"bad header counts N={n} E={n_edges}", lineno)

    w = np.full((n, n), np.inf)
    np.fill_diagonal(w, 0.0)
    count = 0
    for lineno, line in lines:
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"edge line must be 'u v cost', got {line!r}", lineno)
        try:
            u, v, cost = (int(x) for x in parts)
        except ValueError:
            raise ParseError(f"non-integer edge field in {line!r}", lineno) from None
        if not (1 <= u <= n and 1 <= v <= n):
            raise ParseError(f"vertex out of range in {line!r}", lineno)
        if cost < 0:
            raise ParseError(f"negative edge cost in {line!r}", lineno)
        u -= 1
        v -= 1
        if cost < w[u, v]:
            w[u, v] = w[v, u] = cost
        count += 1
    if count != n_edges:
        raise ParseError(f"header announced {n_edges} edges but file has {count}")

    dist = shortest_paths(w)
    return Instance(n, n, p, dist)


def shortest_paths(w: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths (Floyd-Warshall) of a non-negative weight matrix.

    ``inf`` marks absent edges.  Raises :class:`InstanceError` if some pair
    stays unreachable.
    """
    d = np.array(w, dtype=np.float64)
    n = d.shape[0]
    for k in range(n):
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
    if not np.isfinite(d).all():
        bad = int(np.isinf(d).sum())
        raise InstanceError(f"graph is disconnected: {bad} unreachable pairs")
    return d.astype(np.int64)


# ---------------------------------------------------------------------------
# TSPLIB planar coordinates
# ---------------------------------------------------------------------------

def parse_tsplib(text: str, p: int) -> Instance:
    """Parse a TSPLIB file with EUC_2D coordinates.

    Distances are the Euclidean distances rounded *down* to the nearest
    integer (this differs from the TSPLIB nearest-integer rule on purpose:
    the benchmark results this solver reproduces were computed with floored
    distances).
    """
    dimension = None
    ew_type = None
    coords = {}
    in_coords = False
    for lineno, line in _tokenize(text):
        upper = line.upper()
        if in_coords and not line[0].isdigit():
            in_coords = False  # some other section follows the coordinates
        if in_coords:
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"coordinate line must be 'i x y', got {line!r}", lineno)
            try:
                idx = int(parts[0])
                x, y = float(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"bad coordinate field in {line!r}", lineno) from None
            coords[idx] = (x, y)
            continue
        if upper.startswith("NODE_COORD_SECTION"):
            in_coords = True
            continue
        if upper.startswith("EOF"):
            break
        if ":" in line:
            key, _, value = line.partition(":")
            key = key.strip().upper()
            value = value.strip()
            if key == "DIMENSION":
                try:
                    dimension = int(value)
                except ValueError:
                    raise ParseError(f"bad DIMENSION {value!r}", lineno) from None
            elif key == "EDGE_WEIGHT_TYPE":
                ew_type = value.upper()

    if ew_type != "EUC_2D":
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {ew_type!r}; only EUC_2D is handled")
    if dimension is None:
        raise ParseError("missing DIMENSION header")
    if len(coords) != dimension:
        raise ParseError(f"expected {dimension} coordinates, found {len(coords)}")
    try:
        pts = np.array([coords[i] for i in range(1, dimension + 1)], dtype=np.float64)
    except KeyError as exc:
        raise ParseError(f"missing coordinates for node {exc}") from None

    dist = euclidean_floor(pts)
    return Instance(dimension, dimension, p, dist)


def euclidean_floor(pts: np.ndarray) -> np.ndarray:
    """Pairwise floor(Euclidean distance) matrix of 2-D points."""
    n = len(pts)
    if n * n > MAX_DENSE_CELLS:
        raise GuardExceeded(f"{n} nodes exceed the dense-matrix guard")
    dx = pts[:, 0][:, None] - pts[:, 0][None, :]
    dy = pts[:, 1][:, None] - pts[:, 1][None, :]
    return np.floor(np.sqrt(dx * dx + dy * dy)).astype(np.int64)


# ---------------------------------------------------------------------------
# RW random asymmetric matrices
# ---------------------------------------------------------------------------

def generate_rw(n: int, seed: int, p: int = 1) -> Instance:
    """Random n x n matrix with entries uniform in [1, n], independently per cell.

    The matrix is generally asymmetric and the diagonal is drawn like any
    other entry.  The generator is PCG64 so a seed reproduces bit-for-bit
    across platforms.
    """
    if n < 2:
        raise ValueError(f"RW instances need n >= 2, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    dist = rng.integers(1, n + 1, size=(n, n), dtype=np.int64)
    return Instance(n, n, p, dist)


def parse_rw(text: str, p: int) -> Instance:
    """Parse a dense matrix file: first line n, then n rows of n integers."""
    lines = _tokenize(text)
    try:
        lineno, first = next(lines)
        n = int(first.split()[0])
    except StopIteration:
        raise ParseError("empty file") from None
    except ValueError:
        raise ParseError("first line must be the matrix size", 1) from None
    if n < 1:
        raise ParseError(f"bad matrix size {n}", lineno)
    rows = []
    for lineno, line in lines:
        try:
            row = [int(x) for x in line.split()]
        except ValueError:
            raise ParseError(f"non-integer matrix entry in {line!r}", lineno) from None
        if len(row) != n:
            raise ParseError(f"expected {n} entries, got {len(row)}", lineno)
        rows.append(row)
        if len(rows) == n:
            break
    if len(rows) != n:
        raise ParseError(f"expected {n} matrix rows, found {len(rows)}")
    return Instance(n, n, p, np.asarray(rows, dtype=np.int64))


def write_rw(inst: Instance) -> str:
    out = [str(inst.n_sites)]
    for row in inst.dist:
        out.append(" ".join(str(int(v)) for v in row))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Format dispatch
# ---------------------------------------------------------------------------

FORMATS = ("orlib", "tsplib", "rw", "native")


def load_instance(path: str, fmt: str, p: int | None = None) -> Instance:
    """Read an instance file in one of the supported formats.

    ``p`` is required for formats that do not embed it (tsplib, rw); for
    orlib it must match the header when given.  Native dumps embed ``p`` but
    accept an override.
    """
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        text = fh.read()
    if fmt == "orlib":
        inst = parse_orlib(text)
        if p is not None and p != inst.p:
            raise InstanceError(f"--p {p} contradicts the header p={inst.p}")
        return inst
    if fmt == "tsplib":
        if p is None:
            raise InstanceError("tsplib files do not embed p; pass --p")
        return parse_tsplib(text, p)
    if fmt == "rw":
        if p is None:
            raise InstanceError("rw files do not embed p; pass --p")
        return parse_rw(text, p)
    if fmt == "native":
        inst = Instance.from_json(text)
        return inst.with_p(p) if p is not None else inst
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
