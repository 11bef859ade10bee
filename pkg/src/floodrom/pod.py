"""Snapshot matrices and proper-orthogonal-decomposition bases.

Bases are computed with the method of snapshots: the eigendecomposition of
the smaller Gram matrix (X^T X when there are fewer columns than rows,
X X^T otherwise) yields singular values and the leading left singular
vectors.  Columns are sign-normalized (largest-magnitude entry positive)
and re-orthonormalized with a QR polish so the orthonormality guarantee
holds even for deeply truncated, ill-conditioned spectra.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import RankError

RANK_TOLERANCE = 1e-12  # singular values <= tol * sigma_1 count as zero
ORTHONORMALITY_TOL = 1e-10

LINEAGE_KINDS = ("universal", "local", "adaptive", "residual")


@dataclass(frozen=True)
class Provenance:
    """Where a snapshot matrix came from."""

    scenario: str = ""
    wells_fingerprint: str = ""
    recording_stride: int = 0
    seed: int = 0


@dataclass(frozen=True)
class SnapshotMatrix:
    """n-by-m matrix whose columns are flattened pressure states."""

    data: np.ndarray
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim != 2 or d.shape[1] < 1:
            raise ValueError(f"snapshot matrix must be 2-D with >= 1 column, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("snapshot matrix contains non-finite entries")
        object.__setattr__(self, "data", d)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]


def build_snapshot_matrix(states, provenance: Provenance | None = None) -> SnapshotMatrix:
    """Stack state vectors as columns, unmodified (no mean-centering)."""
    states = list(states)
    if not states:
        raise ValueError("no states given")
    first = np.asarray(states[0], dtype=float)
    for k, s in enumerate(states):
        s = np.asarray(s)
        if s.shape != first.shape or s.ndim != 1:
            raise ValueError(
                f"state {k} has shape {s.shape}, expected {first.shape} (ragged input)"
            )
    data = np.column_stack([np.asarray(s, dtype=float) for s in states])
    return SnapshotMatrix(data, provenance or Provenance())


@dataclass(frozen=True)
class Lineage:
    """Basis ancestry: how and from what data a basis was built."""

    kind: str
    config: str = ""       # scenario/config identifier (non-adaptive kinds)
    seed: int = 0
    base_hash: str = ""    # adaptive: content hash of the basis that was extended
    r_res: int = 0         # adaptive: number of appended residual components
    n_snapshots: int = 0   # adaptive: snapshots used for the residual step

    def __post_init__(self):
        if self.kind not in LINEAGE_KINDS:
            raise ValueError(f"lineage kind must be one of {LINEAGE_KINDS}, got {self.kind!r}")

    def to_line(self) -> str:
        if self.kind == "adaptive":
            return f"adaptive {self.base_hash} {self.r_res} {self.n_snapshots} {self.seed}"
        return f"{self.kind} {self.config or '-'} {self.seed}"

    @classmethod
    def from_line(cls, line: str) -> "Lineage":
        tok = line.split()
        if not tok:
            raise ValueError("empty lineage line")
        kind = tok[0]
        if kind == "adaptive":
            if len(tok) != 5:
                raise ValueError(f"malformed adaptive lineage line: {line!r}")
            return cls(kind, base_hash=tok[1], r_res=int(tok[2]),
                       n_snapshots=int(tok[3]), seed=int(tok[4]))
        if len(tok) != 3:
            raise ValueError(f"malformed lineage line: {line!r}")
        config = "" if tok[1] == "-" else tok[1]
        return cls(kind, config=config, seed=int(tok[2]))


@dataclass(frozen=True)
class PodBasis:
    """Orthonormal basis with its singular-value spectrum and lineage.

    ``U`` is n-by-r with orthonormal columns.  ``singular_values`` has at
    least r entries; its tail (beyond r) preserves the discarded spectrum so
    truncation-energy identities can be checked.  For adaptive bases the
    spectrum is the concatenation of the base block and the residual block,
    each nonincreasing on its own.
    """

    U: np.ndarray
    singular_values: np.ndarray
    lineage: Lineage

    def __post_init__(self):
        u = np.ascontiguousarray(np.asarray(self.U, dtype=float))
        sv = np.ascontiguousarray(np.asarray(self.singular_values, dtype=float))
        if u.ndim != 2 or u.shape[1] < 1:
            raise ValueError(f"basis must be a 2-D matrix with >= 1 column, got shape {u.shape}")
        if sv.ndim != 1 or sv.size < u.shape[1]:
            raise ValueError(
                f"need at least {u.shape[1]} singular values, got {sv.size}"
            )
        if np.any(sv < 0):
            raise ValueError("singular values must be nonnegative")
        if self.lineage.kind != "adaptive" and np.any(np.diff(sv) > 0):
            raise ValueError("singular values must be nonincreasing")
        gram_defect = np.abs(u.T @ u - np.eye(u.shape[1])).max()
        if gram_defect > ORTHONORMALITY_TOL:
            raise ValueError(
                f"basis columns are not orthonormal (defect {gram_defect:.3e})"
            )
        u.flags.writeable = False
        sv.flags.writeable = False
        object.__setattr__(self, "U", u)
        object.__setattr__(self, "singular_values", sv)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def r(self) -> int:
        return self.U.shape[1]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.U.tobytes())
        h.update(self.singular_values.tobytes())
        h.update(self.lineage.to_line().encode())
        return h.hexdigest()[:12]


def _sign_normalize(u: np.ndarray) -> np.ndarray:
    """Flip column signs so each column's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def _polish(u: np.ndarray) -> np.ndarray:
    """QR re-orthonormalization preserving span and column orientation."""
    q, rmat = np.linalg.qr(u)
    d = np.sign(np.diag(rmat))
    d[d == 0] = 1.0
    return q * d


def singular_spectrum(X: SnapshotMatrix) -> np.ndarray:
    """All singular values of a snapshot matrix (method of snapshots)."""
    A = X.data
    n, m = A.shape
    gram = A.T @ A if m < n else A @ A.T
    w = np.linalg.eigvalsh(gram)[::-1]
    return np.sqrt(np.clip(w, 0.0, None))[: min(n, m)]


def numerical_rank(singular_values: np.ndarray, tol: float = RANK_TOLERANCE) -> int:
    sv = np.asarray(singular_values, dtype=float)
    if sv.size == 0 or sv[0] <= 0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


def compute_pod_basis(
    X: SnapshotMatrix, r: int, lineage: Lineage | None = None
) -> PodBasis:
    """Leading-r POD basis of a snapshot matrix via the method of snapshots.

    Raises RankError (reporting the achievable count) when r exceeds the
    numerical rank: singular values below 1e-12 * sigma_1 are never used.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    A = X.data
    n, m = A.shape
    if m < n:
        gram = A.T @ A
        w, v = np.linalg.eigh(gram)
        w = w[::-1]
        v = v[:, ::-1]
        sv = np.sqrt(np.clip(w, 0.0, None))
        rank = numerical_rank(sv)
        if r > rank:
            raise RankError(r, rank)
        u = (A @ v[:, :r]) / sv[:r]
    else:
        gram = A @ A.T
        w, uf = np.linalg.eigh(gram)
        w = w[::-1]
        uf = uf[:, ::-1]
        sv = np.sqrt(np.clip(w, 0.0, None))[:m]
        rank = numerical_rank(sv)
        if r > rank:
            raise RankError(r, rank)
        u = uf[:, :r]
    u = _sign_normalize(_polish(u))
    if lineage is None:
        prov = X.provenance
        lineage = Lineage(
            "local",
            config=prov.scenario or prov.wells_fingerprint,
            seed=prov.seed,
        )
    return PodBasis(u, sv, lineage)


def project(basis: PodBasis, s: np.ndarray) -> np.ndarray:
    """Reduced coordinates U^T s."""
    s = np.asarray(s, dtype=float)
    if s.shape != (basis.n,):
        raise ValueError(f"state has shape {s.shape}, basis expects ({basis.n},)")
    return basis.U.T @ s


def reconstruct(basis: PodBasis, s_r: np.ndarray) -> np.ndarray:
    """Full-space representation U s_r."""
    s_r = np.asarray(s_r, dtype=float)
    if s_r.shape != (basis.r,):
        raise ValueError(f"reduced vector has shape {s_r.shape}, basis expects ({basis.r},)")
    return basis.U @ s_r


def energy_spectrum(basis: PodBasis) -> np.ndarray:
    """Cumulative normalized energy: sum_{i<=k} sigma_i^2 / sum sigma_i^2."""
    sv = basis.singular_values
    total = float(np.sum(sv**2))
    if total <= 0:
        raise ValueError("all singular values are zero")
    return np.cumsum(sv**2) / total


def identity_basis(n: int) -> PodBasis:
    """Trivial full-space basis (U = I_n); useful as an exactness oracle."""
    return PodBasis(np.eye(n), np.ones(n), Lineage("local", config="identity"))


# ---------------------------------------------------------------------------
# persistence


def save_basis(path, basis: PodBasis) -> None:
    """Write a basis: header ``n r``, r sigma lines, U row-major, lineage line."""
    with open(path, "w") as f:
        f.write(f"{basis.n} {basis.r}\n")
        for k in range(basis.r):
            f.write(f"{basis.singular_values[k]:.17g}\n")
        for row in basis.U:
            f.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        f.write(basis.lineage.to_line() + "\n")


def load_basis(path) -> PodBasis:
    with open(path) as f:
        lines = [ln for ln in (raw.strip() for raw in f) if ln]
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"{path}: expected 'n r' header")
    n, r = int(head[0]), int(head[1])
    if len(lines) != 1 + r + n + 1:
        raise ValueError(
            f"{path}: expected {1 + r + n + 1} lines for n={n}, r={r}, found {len(lines)}"
        )
    sv = np.array([float(lines[1 + k]) for k in range(r)])
    u = np.array([[float(v) for v in lines[1 + r + i].split()] for i in range(n)])
    if u.shape != (n, r):
        raise ValueError(f"{path}: matrix block has shape {u.shape}, expected ({n}, {r})")
    lineage = Lineage.from_line(lines[-1])
    return PodBasis(u, sv, lineage)


def save_snapshots(path, X: SnapshotMatrix) -> None:
    """Write a snapshot matrix: header ``n m``, then one line per column."""
    with open(path, "w") as f:
        f.write(f"{X.n} {X.m}\n")
        for col in X.data.T:
            f.write(" ".join(f"{v:.17g}" for v in col) + "\n")


def load_snapshots(path) -> SnapshotMatrix:
    with open(path) as f:
        head = f.readline().split()
        if len(head) != 2:
            raise ValueError(f"{path}: expected 'n m' header")
        n, m = int(head[0]), int(head[1])
        values = np.array([float(t) for t in f.read().split()])
    if values.size != n * m:
        raise ValueError(f"{path}: expected {n * m} values, found {values.size}")
    return SnapshotMatrix(values.reshape(m, n).T)
