"""Closed-form eigen-analysis of 3x3 Hermitian coherency matrices and the
entropy / anisotropy / alpha features derived from it.

Eigenvalue estimates come from the trigonometric solution of the
characteristic cubic plus one guarded Newton step.  The most isolated
estimate yields a null vector of ``T - lambda I`` (cross products of its
rows, inverse iteration when they are near-parallel); the other two follow
from an exact 2x2 problem in its orthogonal complement, so the basis is
unitary to machine precision even near double roots.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .polsar import CoherencyField

HERMITIAN_TOL = 1e-9
DEGENERATE_TOL = 1e-12
ZERO_POWER = 1e-30
_WEAK_CROSS = 1e-8
_CHUNK = 65536

FEATURE_KINDS = {
    "HAA3": ["entropy", "anisotropy", "alpha_norm"],
    "T6": ["T11", "T22", "T33", "ReT12", "ReT13", "ReT23"],
    "T9": ["T11", "T22", "T33", "ReT12", "ImT12", "ReT13", "ImT13", "ReT23", "ImT23"],
}
FEATURE_KINDS["HAAT12"] = FEATURE_KINDS["HAA3"] + FEATURE_KINDS["T9"]
_KIND_ALIASES = {"HAα3": "HAA3", "HAαT12": "HAAT12", "HAALPHA3": "HAA3"}


@dataclass(frozen=True)
class EigenFeatures:
    """Per-pixel eigen-analysis results.

    ``lam`` is ``(H, W, 3)`` sorted descending, ``evec[..., :, i]`` is the
    unit eigenvector of ``lam[..., i]`` (``None`` when reloaded from disk),
    ``alpha`` and ``alpha_i`` are in degrees and ``valid`` is ``False`` on
    zero-power pixels.
    """

    lam: np.ndarray
    evec: np.ndarray | None
    p: np.ndarray
    entropy: np.ndarray
    anisotropy: np.ndarray
    alpha: np.ndarray
    alpha_i: np.ndarray
    valid: np.ndarray

    @property
    def height(self) -> int:
        return self.lam.shape[0]

    @property
    def width(self) -> int:
        return self.lam.shape[1]


def _det3(m):
    return (m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
            - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
            + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])).real


def _charpoly(t, lam):
    """``det(T - lam I)`` and its derivative in ``lam``."""
    d = np.arange(3)
    m = t.copy()
    m[:, d, d] -= lam[:, None]
    a, b, c = m[:, 0, 0].real, m[:, 1, 1].real, m[:, 2, 2].real
    minors = (a * b - np.abs(m[:, 0, 1]) ** 2 + a * c - np.abs(m[:, 0, 2]) ** 2
              + b * c - np.abs(m[:, 1, 2]) ** 2)
    return _det3(m), -minors


def _eigvals(t):
    """Descending eigenvalues of a batch ``(n, 3, 3)`` of Hermitian matrices."""
    d = np.arange(3)
    diag = t[:, d, d].real
    mu = diag.sum(axis=1) / 3.0
    b = t.copy()
    b[:, d, d] -= mu[:, None]
    p = np.sqrt(np.sum(np.abs(b) ** 2, axis=(1, 2)) / 6.0)
    safe = np.where(p > 0, p, 1.0)
    r = np.clip(_det3(b) / (2.0 * safe ** 3), -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    l1 = mu + 2.0 * p * np.cos(phi)
    l3 = mu + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    l2 = 3.0 * mu - l1 - l3
    lam = np.stack([l1, l2, l3], axis=1)
    for i in range(3):
        f, df = _charpoly(t, lam[:, i])
        ok = df != 0
        step = np.where(ok, f / np.where(ok, df, 1.0), 0.0)
        trial = lam[:, i] - step
        f_new, _ = _charpoly(t, trial)
        better = ok & np.isfinite(trial) & (np.abs(f_new) < np.abs(f))
        lam[:, i] = np.where(better, trial, lam[:, i])
    return -np.sort(-lam, axis=1)


def _null_vector(t, lam, scale):
    """Unit null vector of ``T - lam I`` for each matrix of the batch."""
    n = t.shape[0]
    d = np.arange(3)
    m = t.copy()
    m[:, d, d] -= lam[:, None]
    rows = [m[:, 0, :], m[:, 1, :], m[:, 2, :]]
    cands = np.stack([np.cross(rows[0], rows[1]), np.cross(rows[0], rows[2]),
                      np.cross(rows[1], rows[2])], axis=1)
    norms = np.linalg.norm(cands, axis=2)
    best = np.argmax(norms, axis=1)
    vec = cands[np.arange(n), best]
    vnorm = norms[np.arange(n), best]
    fro2 = np.sum(np.abs(m) ** 2, axis=(1, 2))
    weak = vnorm <= _WEAK_CROSS * np.maximum(fro2, np.finfo(float).tiny)
    if np.any(weak):
        vec[weak] = _inverse_iteration(t[weak], lam[weak], scale[weak], vec[weak])
        vnorm = np.linalg.norm(vec, axis=1)
    return vec / vnorm[:, None]


def _inverse_iteration(t, lam, scale, start, steps=3):
    d = np.arange(3)
    shift = lam + 1e-10 * scale
    m = t.copy()
    m[:, d, d] -= shift[:, None]
    x = start + np.ones(3) / np.sqrt(3.0)
    x = x / np.linalg.norm(x, axis=1)[:, None]
    for _ in range(steps):
        try:
            x = np.linalg.solve(m, x[..., None])[..., 0]
        except np.linalg.LinAlgError:
            m[:, d, d] -= 1e-12 * scale[:, None]
            x = np.linalg.solve(m, x[..., None])[..., 0]
        x = x / np.linalg.norm(x, axis=1)[:, None]
    return x


def _canonical_complement(a):
    """First canonical vector whose residual against ``a`` is substantial,
    orthogonalized and normalized (Gram-Schmidt)."""
    resid = 1.0 - np.abs(a) ** 2
    k = np.argmax(resid > 0.5, axis=1)
    n = a.shape[0]
    e = np.zeros_like(a)
    e[np.arange(n), k] = 1.0
    b = e - a * np.conj(a[np.arange(n), k])[:, None]
    return b / np.linalg.norm(b, axis=1)[:, None]


def _fix_phase(v):
    """Rotate so the largest-magnitude component is real and positive."""
    n = v.shape[0]
    k = np.argmax(np.abs(v), axis=1)
    lead = v[np.arange(n), k]
    return v * (np.conj(lead) / np.abs(lead))[:, None]


def _pair_rotation(k11, k22, k12, tol):
    """Eigen-decompose the 2x2 Hermitian blocks ``[[k11, k12], [conj k12, k22]]``.

    Returns ``(hi, lo, v_hi, v_lo)``; blocks whose eigenvalue split is
    within ``tol`` keep the identity basis.
    """
    mean = 0.5 * (k11 + k22)
    d = 0.5 * (k11 - k22)
    r = np.hypot(d, np.abs(k12))
    pos = d >= 0
    v_hi = np.where(pos[:, None],
                    np.stack([r + d, np.conj(k12)], axis=1),
                    np.stack([k12, r - d], axis=1))
    norm = np.linalg.norm(v_hi, axis=1)
    split = (2.0 * r > tol) & (norm > 0)
    v_hi = np.where(split[:, None], v_hi / np.where(norm > 0, norm, 1.0)[:, None],
                    np.array([1.0, 0.0], dtype=np.complex128))
    v_lo = np.stack([-np.conj(v_hi[:, 1]), np.conj(v_hi[:, 0])], axis=1)
    hi = np.where(split, mean + r, k11)
    lo = np.where(split, mean - r, k22)
    return hi, lo, v_hi, v_lo


def _eigsystem(t, est):
    """Refine eigenvalue estimates ``est`` into a full eigen-system.

    The most isolated eigenvalue fixes a null vector ``a``; the remaining
    pair is solved exactly as a 2x2 problem in the orthogonal complement,
    which stays accurate where roots of the cubic lose half their digits.
    """
    n = t.shape[0]
    scale = np.maximum(np.sum(np.abs(est), axis=1), np.finfo(float).tiny)
    tol = DEGENERATE_TOL * scale
    g12 = est[:, 0] - est[:, 1]
    g23 = est[:, 1] - est[:, 2]
    lam = est.copy()
    vecs = np.zeros((n, 3, 3), dtype=np.complex128)
    triple = (g12 <= tol) & (g23 <= tol)
    vecs[triple] = np.eye(3)
    rest = np.flatnonzero(~triple)
    if rest.size == 0:
        return lam, vecs
    t, est, scale, tol = t[rest], est[rest], scale[rest], tol[rest]
    m = rest.size
    idx = np.arange(m)
    iso = np.stack([g12[rest], np.minimum(g12[rest], g23[rest]), g23[rest]], axis=1)
    ia = np.argmax(iso, axis=1)
    a = _null_vector(t, est[idx, ia], scale)
    b0 = _canonical_complement(a)
    c0 = np.conj(np.cross(a, b0))
    ta = np.einsum("nij,nj->ni", t, a)
    tb = np.einsum("nij,nj->ni", t, b0)
    tc = np.einsum("nij,nj->ni", t, c0)
    la = np.einsum("ni,ni->n", np.conj(a), ta).real
    k11 = np.einsum("ni,ni->n", np.conj(b0), tb).real
    k22 = np.einsum("ni,ni->n", np.conj(c0), tc).real
    k12 = np.einsum("ni,ni->n", np.conj(b0), tc)
    hi, lo, v_hi, v_lo = _pair_rotation(k11, k22, k12, tol)
    u_hi = v_hi[:, :1] * b0 + v_hi[:, 1:] * c0
    u_lo = v_lo[:, :1] * b0 + v_lo[:, 1:] * c0
    vals = np.stack([la, hi, lo], axis=1)
    cols = np.stack([_fix_phase(a), _fix_phase(u_hi), _fix_phase(u_lo)], axis=2)
    # stable descending order; ties keep anchor-first order
    order = np.argsort(-vals, axis=1, kind="stable")
    lam[rest] = np.take_along_axis(vals, order, axis=1)
    vecs[rest] = np.take_along_axis(cols, order[:, None, :], axis=2)
    return lam, vecs


def _check_hermitian(t):
    scale = np.maximum(np.abs(np.trace(t, axis1=-2, axis2=-1).real), 1.0)
    dev = np.max(np.abs(t - np.conj(np.swapaxes(t, -1, -2))), axis=(-2, -1))
    if np.any(dev > HERMITIAN_TOL * scale):
        raise ValidationError(f"matrix is not Hermitian (max deviation {dev.max():.3g})")


def eigh3_batch(t, *, threads=1):
    """Eigen-decompose a batch ``(..., 3, 3)`` of Hermitian matrices.

    Returns ``(lam, vecs)`` with ``lam`` of shape ``(..., 3)`` sorted
    descending and ``vecs[..., :, i]`` the eigenvector of ``lam[..., i]``.
    """
    t = np.asarray(t, dtype=np.complex128)
    if t.shape[-2:] != (3, 3):
        raise ValidationError(f"expected (..., 3, 3) matrices, got {t.shape}")
    if not np.all(np.isfinite(t)):
        raise NumericError("non-finite matrix entries")
    _check_hermitian(t)
    lead = t.shape[:-2]
    flat = t.reshape(-1, 3, 3)
    flat = 0.5 * (flat + np.conj(np.swapaxes(flat, 1, 2)))

    def work(chunk):
        return _eigsystem(chunk, _eigvals(chunk))

    chunks = [flat[i:i + _CHUNK] for i in range(0, flat.shape[0], _CHUNK)] or [flat]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    lam = np.concatenate([p[0] for p in parts]).reshape(lead + (3,))
    vecs = np.concatenate([p[1] for p in parts]).reshape(lead + (3, 3))
    return lam, vecs


def eigen_hermitian3(t):
    """Eigenvalues (descending) and orthonormal eigenvectors of one matrix."""
    t = np.asarray(t, dtype=np.complex128)
    if t.shape != (3, 3):
        raise ValidationError(f"expected a 3x3 matrix, got {t.shape}")
    lam, vecs = eigh3_batch(t[None])
    return lam[0], vecs[0]


def h_a_alpha(lam, evec) -> EigenFeatures:
    """Entropy, anisotropy and mean alpha from per-pixel eigen output.

    ``lam`` is ``(..., 3)`` descending and ``evec[..., :, i]`` the matching
    unit eigenvectors.  Zero-power pixels get H = A = alpha = 0, p = 0 and
    are flagged invalid.
    """
    lam = np.asarray(lam, dtype=np.float64)
    clipped = np.maximum(lam, 0.0)
    total = clipped.sum(axis=-1)
    valid = total > ZERO_POWER
    safe = np.where(valid, total, 1.0)
    p = np.where(valid[..., None], clipped / safe[..., None], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    entropy = np.clip(-plogp.sum(axis=-1) / np.log(3.0), 0.0, 1.0)
    l2, l3 = clipped[..., 1], clipped[..., 2]
    den = l2 + l3
    anisotropy = np.where(den > 0, (l2 - l3) / np.where(den > 0, den, 1.0), 0.0)
    first = np.clip(np.abs(evec[..., 0, :]), 0.0, 1.0)
    alpha_i = np.degrees(np.arccos(first))
    alpha = np.clip(np.sum(p * alpha_i, axis=-1), 0.0, 90.0)
    zero = ~valid
    entropy = np.where(zero, 0.0, entropy)
    anisotropy = np.where(zero, 0.0, np.clip(anisotropy, 0.0, 1.0))
    alpha = np.where(zero, 0.0, alpha)
    return EigenFeatures(lam=lam, evec=evec, p=p, entropy=entropy, anisotropy=anisotropy,
                         alpha=alpha, alpha_i=alpha_i, valid=valid)


def decompose(coh: CoherencyField, *, threads=1) -> EigenFeatures:
    lam, vecs = eigh3_batch(coh.t, threads=threads)
    return h_a_alpha(lam, vecs)


def canonical_kind(kind: str) -> str:
    key = _KIND_ALIASES.get(kind, kind).upper()
    if key not in FEATURE_KINDS:
        raise ValidationError(f"unknown feature stack kind {kind!r}; "
                              f"expected one of {sorted(FEATURE_KINDS)}")
    return key


def feature_stack(coh: CoherencyField, eig: EigenFeatures, kind: str):
    """Real multi-channel raster ``(C, H, W)`` and its channel names.

    Alpha is exported divided by 90 so every H/A/alpha channel lies in [0, 1].
    """
    kind = canonical_kind(kind)
    if (coh.height, coh.width) != (eig.height, eig.width):
        raise ValidationError(f"coherency is {coh.width}x{coh.height} but eigen features "
                              f"are {eig.width}x{eig.height}")
    t = coh.t
    source = {
        "entropy": eig.entropy,
        "anisotropy": eig.anisotropy,
        "alpha_norm": eig.alpha / 90.0,
        "T11": t[..., 0, 0].real, "T22": t[..., 1, 1].real, "T33": t[..., 2, 2].real,
        "ReT12": t[..., 0, 1].real, "ImT12": t[..., 0, 1].imag,
        "ReT13": t[..., 0, 2].real, "ImT13": t[..., 0, 2].imag,
        "ReT23": t[..., 1, 2].real, "ImT23": t[..., 1, 2].imag,
    }
    names = FEATURE_KINDS[kind]
    return np.stack([source[n] for n in names]), list(names)


def reassemble_t9(stack) -> np.ndarray:
    """Rebuild ``(H, W, 3, 3)`` coherency matrices from a T9 stack."""
    s = np.asarray(stack)
    if s.shape[0] != 9:
        raise ValidationError(f"T9 stack needs 9 channels, got {s.shape[0]}")
    t11, t22, t33, r12, i12, r13, i13, r23, i23 = s
    t = np.zeros(s.shape[1:] + (3, 3), dtype=np.complex128)
    t[..., 0, 0], t[..., 1, 1], t[..., 2, 2] = t11, t22, t33
    t[..., 0, 1] = r12 + 1j * i12
    t[..., 0, 2] = r13 + 1j * i13
    t[..., 1, 2] = r23 + 1j * i23
    t[..., 1, 0] = np.conj(t[..., 0, 1])
    t[..., 2, 0] = np.conj(t[..., 0, 2])
    t[..., 2, 1] = np.conj(t[..., 1, 2])
    return t


EIGEN_CHANNELS = ["lambda1", "lambda2", "lambda3", "entropy", "anisotropy", "alpha_deg",
                  "alpha1_deg", "alpha2_deg", "alpha3_deg", "valid"]


def eigen_to_stack(eig: EigenFeatures) -> np.ndarray:
    return np.stack([eig.lam[..., 0], eig.lam[..., 1], eig.lam[..., 2], eig.entropy,
                     eig.anisotropy, eig.alpha, eig.alpha_i[..., 0], eig.alpha_i[..., 1],
                     eig.alpha_i[..., 2], eig.valid.astype(np.float64)])


def eigen_from_stack(stack) -> EigenFeatures:
    s = np.asarray(stack, dtype=np.float64)
    lam = np.moveaxis(s[0:3], 0, -1)
    valid = s[9] > 0.5
    total = np.maximum(lam, 0.0).sum(axis=-1)
    p = np.where(valid[..., None], np.maximum(lam, 0.0) / np.where(valid, total, 1.0)[..., None],
                 0.0)
    return EigenFeatures(lam=lam, evec=None, p=p, entropy=s[3], anisotropy=s[4], alpha=s[5],
                         alpha_i=np.moveaxis(s[6:9], 0, -1), valid=valid)
