"""Truncated matrix model of the spectral triple of the standard Podles sphere.

The Hilbert space ``H_+ (+) H_-`` is cut off at ``l <= L + 1/2``.  The basis
is ordered by chirality (+ then -), then ``l`` ascending, then ``m``
ascending.  Shift terms leaving the truncated space are dropped, so algebra
identities hold exactly only between interior vectors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import NamedTuple, TextIO

import numpy as np
from scipy import sparse

from .errors import DomainError, ParameterError
from .qspec import QParams, eigenvalues_full, multiplicity, q_number

L_MAX = 60
GENERATORS = ("A", "B", "B*")
ORDERING = "chirality(+,-);l ascending;m ascending"


def _qn(n: int, q: float) -> float:
    return q_number(n, q) if n else 0.0


def _alpha(two_l: int, q: float, chirality: int) -> tuple[float, float, float]:
    """``(alpha^+_l, alpha^0_l, alpha^-_l)`` with ``alpha^-_l = -q^(2l) alpha^+_(l-1)``."""

    def a_plus(tl: int) -> float:
        if tl < 1:
            return 0.0
        e = -(tl / 2) - (2 if chirality > 0 else 1)
        return q ** e / math.sqrt(_qn(tl + 2, q) * (_qn(2 * tl + 4, q) + _qn(2, q) * _qn(tl + 2, q)))

    num = (q - 1 / q) * _qn((two_l - 1) // 2, q) * _qn((two_l + 3) // 2, q)
    num += q if chirality > 0 else -1 / q
    a0 = num / (math.sqrt(q) * _qn(two_l, q) * _qn(two_l + 2, q))
    am = -q ** two_l * a_plus(two_l - 2)
    return a_plus(two_l), a0, am


def _sqrt(x: float) -> float:
    return math.sqrt(x) if x > 0 else 0.0


@dataclass(frozen=True)
class TruncatedRep:
    """Finite realisation of the algebra, Dirac operator, grading and real structure.

    Attributes
    ----------
    L : int
        Truncation; ``l`` runs over ``1/2, ..., L + 1/2``.
    params : QParams
    w_phase : float
        Argument of the Dirac constant ``w = |w| e^(i w_phase)``.
    chirality, two_l, two_m : ndarray
        Labels of the basis vectors.
    A, B, Bstar : ndarray
        Generator matrices ``pi(A)``, ``pi(B)``, ``pi(B*)``.
    D : ndarray
        Dirac operator ``[[0, conj(w) D], [w D, 0]]``.
    abs_d : ndarray
        Diagonal of ``|D|``.
    gamma : ndarray
        Diagonal of the grading.
    F : ndarray
        Sign ``(1/|w|)[[0, conj(w)], [w, 0]]``.
    J_perm, J_phase : ndarray
        ``J e_j = J_phase[j] e_(J_perm[j])`` followed by complex conjugation.
    """

    L: int
    params: QParams
    w_phase: float
    chirality: np.ndarray = field(repr=False)
    two_l: np.ndarray = field(repr=False)
    two_m: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    Bstar: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    abs_d: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    J_perm: np.ndarray = field(repr=False)
    J_phase: np.ndarray = field(repr=False)
    J_conjugate: bool = True

    @property
    def dim(self) -> int:
        return len(self.two_l)

    def pi(self, generator: str) -> np.ndarray:
        """Matrix of a generator ``"A"``, ``"B"`` or ``"B*"``."""
        try:
            return {"A": self.A, "B": self.B, "B*": self.Bstar}[generator]
        except KeyError:
            raise DomainError(f"unknown generator {generator!r}; expected one of {GENERATORS}") from None

    def word(self, word: str) -> np.ndarray:
        """Product of generators, e.g. ``"AB*"``; ``""`` or ``"1"`` is the identity."""
        return self.word_sparse(word).toarray()

    def word_sparse(self, word: str) -> sparse.csr_matrix:
        """Sparse form of :meth:`word`; generators shift ``l`` and ``m`` by at most one."""
        out = sparse.identity(self.dim, dtype=complex, format="csr")
        for tok in parse_word(word):
            out = out @ sparse.csr_matrix(self.pi(tok))
        return out

    def interior(self, depth: int = 2) -> np.ndarray:
        """Mask of basis vectors with ``l <= L + 1/2 - depth``."""
        return self.two_l <= 2 * self.L + 1 - 2 * depth

    def apply_J(self, vec: np.ndarray) -> np.ndarray:
        """Apply the antiunitary ``J`` to a vector."""
        out = np.zeros(self.dim, dtype=complex)
        out[self.J_perm] = self.J_phase * np.conj(vec)
        return out

    def J_unitary(self) -> np.ndarray:
        """Unitary part ``U`` of ``J = U K`` (``K`` complex conjugation)."""
        U = np.zeros((self.dim, self.dim), dtype=complex)
        U[self.J_perm, np.arange(self.dim)] = self.J_phase
        return U

    def J_conj(self, X: np.ndarray) -> np.ndarray:
        """``J X J^-1 = U conj(X) U^-1``."""
        # U is a phased permutation, so the conjugation is a reindexing
        out = np.empty_like(X, dtype=complex)
        out[np.ix_(self.J_perm, self.J_perm)] = (self.J_phase[:, None] * np.conj(X)
                                                 * np.conj(self.J_phase)[None, :])
        return out


def parse_word(word: str) -> list[str]:
    """Split a generator word such as ``"AB*B"`` into tokens."""
    word = word.replace(" ", "")
    if word in ("", "1"):
        return []
    toks = re.findall(r"B\*|A|B", word)
    if "".join(toks) != word:
        raise DomainError(f"cannot parse generator word {word!r}")
    return toks


def build_rep(L: int, params: QParams, w_phase: float = 0.0) -> TruncatedRep:
    """Realise the spectral triple on the span of ``|l,m>_(+/-)``, ``l <= L + 1/2``.

    Parameters
    ----------
    L : int
        Truncation, ``4 <= L <= 60``.
    params : QParams
    w_phase : float
        Argument of ``w``; spectra depend only on ``|w|``.
    """
    if not (isinstance(L, (int, np.integer)) and 4 <= L <= L_MAX):
        raise ParameterError(f"L={L} must be an integer in [4, {L_MAX}]")
    q = params.q
    labels = [(c, tl, tm) for c in (1, -1) for tl in range(1, 2 * L + 2, 2) for tm in range(-tl, tl + 1, 2)]
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    A = np.zeros((n, n))
    B = np.zeros((n, n))
    Bs = np.zeros((n, n))
    alphas = {(c, tl): _alpha(tl, q, c) for c in (1, -1) for tl in range(1, 2 * L + 4, 2)}

    def put(M, c, tl, tm, col, value):
        j = index.get((c, tl, tm))
        if j is not None:
            M[j, col] += value

    for i, (c, tl, tm) in enumerate(labels):
        ap, a0, am = alphas[(c, tl)]
        lpm = (tl + tm) // 2  # l + m
        lmm = (tl - tm) // 2  # l - m
        half_lpm = (tm + tl) / 2.0
        m = tm / 2.0
        l = tl / 2.0
        put(A, c, tl + 2, tm, i, -q ** (half_lpm + 0.5) * _sqrt(_qn(lmm + 1, q) * _qn(lpm + 1, q)) * ap)
        a0v = (_qn(lmm + 1, q) * _qn(lpm, q) - q * q * _qn(lmm, q) * _qn(lpm + 1, q)) * a0
        put(A, c, tl, tm, i, a0v / (math.sqrt(q) * (1 + q * q)) + 1.0 / (1 + q * q))
        put(A, c, tl - 2, tm, i, q ** (m - l - 0.5) * _sqrt(_qn(lmm, q) * _qn(lpm, q)) * am)

        put(B, c, tl + 2, tm + 2, i, q ** m * _sqrt(_qn(lpm + 1, q) * _qn(lpm + 2, q)) * ap)
        put(B, c, tl, tm + 2, i, q ** m * _sqrt(_qn(lpm + 1, q) * _qn(lmm, q)) * a0)
        put(B, c, tl - 2, tm + 2, i, q ** m * _sqrt(_qn(lmm, q) * _qn(lmm - 1, q)) * am)

        am_next = alphas[(c, tl + 2)][2]
        ap_prev = alphas[(c, tl - 2)][0] if tl > 1 else 0.0
        put(Bs, c, tl + 2, tm - 2, i, q ** (m - 1) * _sqrt(_qn(lmm + 2, q) * _qn(lmm + 1, q)) * am_next)
        put(Bs, c, tl, tm - 2, i, q ** (m - 1) * _sqrt(_qn(lpm, q) * _qn(lmm + 1, q)) * a0)
        put(Bs, c, tl - 2, tm - 2, i, q ** (m - 1) * _sqrt(_qn(lpm, q) * _qn(lpm - 1, q)) * ap_prev)

    chir = np.array([lab[0] for lab in labels])
    two_l = np.array([lab[1] for lab in labels])
    two_m = np.array([lab[2] for lab in labels])
    d = np.array([_qn((tl + 1) // 2, q) for tl in two_l])
    w = params.w_abs * complex(math.cos(w_phase), math.sin(w_phase))
    half = n // 2
    D = np.zeros((n, n), dtype=complex)
    D[:half, half:] = np.conj(w) * np.diag(d[:half])
    D[half:, :half] = w * np.diag(d[half:])
    F = np.zeros((n, n), dtype=complex)
    F[:half, half:] = np.conj(w) / abs(w) * np.eye(half)
    F[half:, :half] = w / abs(w) * np.eye(half)
    perm = np.array([index[(-c, tl, -tm)] for (c, tl, tm) in labels])
    phase = np.array([1j ** (tm % 4) for (_, _, tm) in labels])
    mats = [A.astype(complex), B.astype(complex), Bs.astype(complex), D, F]
    for arr in mats + [chir, two_l, two_m, d, perm, phase]:
        arr.setflags(write=False)
    return TruncatedRep(L, params, float(w_phase), chir, two_l, two_m, mats[0], mats[1], mats[2], D,
                        params.w_abs * d, chir.astype(float), F, perm, phase)


def _restricted_max(X, mask: np.ndarray | None) -> float:
    if sparse.issparse(X):
        X = X.toarray()
    if mask is not None:
        X = X[np.ix_(mask, mask)]
    return float(np.max(np.abs(X))) if X.size else 0.0


def check_relations(rep: TruncatedRep, interior: bool = True) -> dict[str, float]:
    """Maximal residuals of the defining relations.

    Keys: ``"A=A*"``, ``"B*=B^dagger"``, ``"AB-q2BA"``, ``"AB*-q-2B*A"``,
    ``"BB*-q-2A(1-A)"``, ``"B*B-A(1-q2A)"``.  With ``interior=True`` only
    matrix elements between vectors with ``l <= L - 3/2`` are compared.
    """
    q2 = rep.params.q ** 2
    A, B, Bs = (sparse.csr_matrix(X) for X in (rep.A, rep.B, rep.Bstar))
    eye = sparse.identity(rep.dim, format="csr")
    mask = rep.interior(2) if interior else None
    return {
        "A=A*": _restricted_max(A - A.conj().T, mask),
        "B*=B^dagger": _restricted_max(Bs - B.conj().T, mask),
        "AB-q2BA": _restricted_max(A @ B - q2 * B @ A, mask),
        "AB*-q-2B*A": _restricted_max(A @ Bs - Bs @ A / q2, mask),
        "BB*-q-2A(1-A)": _restricted_max(B @ Bs - A @ (eye - A) / q2, mask),
        "B*B-A(1-q2A)": _restricted_max(Bs @ B - A @ (eye - q2 * A), mask),
    }


def spectrum_residual(rep: TruncatedRep) -> float:
    """Max relative deviation of the eigenvalues of the built ``D`` in absolute value
    from ``eigenvalue_full(k)`` repeated ``multiplicity(k)`` times, ``k <= L``."""
    ev = np.sort(np.abs(np.linalg.eigvalsh(rep.D)))
    ref = np.repeat(eigenvalues_full(rep.L + 1, rep.params),
                    [multiplicity(k) for k in range(rep.L + 1)])
    if ev.shape != ref.shape:
        return float("inf")
    return float(np.max(np.abs(ev - ref) / ref))


def check_real_structure(rep: TruncatedRep) -> dict[str, float]:
    """Residuals of the real-structure and sign identities.

    Keys: ``"J^2+1"``, ``"Jgamma+gammaJ"``, ``"DJ-JD"``, ``"D-F|D|"``, ``"Fa-aF"``
    (maximum over the generators) and ``"[a;JbJ^-1]"`` (commutator with the
    opposite algebra on the interior window, maximum over generator pairs).
    """
    U = sparse.csr_matrix(rep.J_unitary())
    G = sparse.diags(rep.gamma)
    D = sparse.csr_matrix(rep.D)
    F = sparse.csr_matrix(rep.F)

    def mx(X) -> float:
        X = sparse.csr_matrix(X)
        return float(abs(X).max()) if X.nnz else 0.0

    res = {
        "J^2+1": mx(U @ U.conj() + sparse.identity(rep.dim)),
        "Jgamma+gammaJ": mx(U @ G.conj() + G @ U),
        "DJ-JD": mx(D @ U - U @ D.conj()),
        "D-F|D|": mx(D - F @ sparse.diags(rep.abs_d)),
    }
    res["Fa-aF"] = max(mx(F @ X - X @ F) for X in (sparse.csr_matrix(rep.pi(g)) for g in GENERATORS))
    mask = rep.interior(2)
    opp = 0.0
    for a in GENERATORS:
        for b in GENERATORS:
            X = sparse.csr_matrix(rep.pi(a))
            Y = sparse.csr_matrix(rep.J_conj(rep.pi(b)))
            opp = max(opp, _restricted_max(X @ Y - Y @ X, mask))
    res["[a;JbJ^-1]"] = opp
    return res


def shift_components(rep: TruncatedRep, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``X`` into the parts raising, keeping and lowering ``l``."""
    dl = rep.two_l[:, None] - rep.two_l[None, :]
    return np.where(dl > 0, X, 0), np.where(dl == 0, X, 0), np.where(dl < 0, X, 0)


class DeltaPowerResult(NamedTuple):
    """Iterated commutator with ``|D|`` and its growth along ``l``.

    Attributes
    ----------
    matrix : ndarray
        ``delta^n(pi(a))``.
    slope : float
        Least-squares slope of ``log max_m |<l+1,m| X |l,m>|`` against ``l``.
    slope_m_half : float
        The same slope at fixed ``m = 1/2``.
    max_element : float
        Largest entry on the interior window.
    """

    matrix: np.ndarray
    slope: float
    slope_m_half: float
    max_element: float


def delta_power(rep: TruncatedRep, generator: str, n: int) -> DeltaPowerResult:
    """``delta^n(pi(a))`` with ``delta = [|D|, .]`` and its growth report.

    The slope is fitted over ``L/3 <= l <= L - 1/2`` (the raising elements up to
    the cutoff); ``delta^n(a)`` of order ``n - 1`` shows slope ``(n-1) log(1/q)``.
    """
    if n not in (0, 1, 2, 3):
        raise DomainError(f"n={n} not in {{0, 1, 2, 3}}")
    X = rep.pi(generator)
    diff = rep.abs_d[:, None] - rep.abs_d[None, :]
    X = X * diff ** n
    ls, sup, half = [], [], []
    for tl in range(1, 2 * rep.L, 2):
        if tl < 2 * (rep.L // 3) + 1:
            continue
        cols = np.nonzero(rep.two_l == tl)[0]
        vals, vhalf = [], None
        for j in cols:
            rows = np.nonzero((rep.two_l == tl + 2) & (rep.chirality == rep.chirality[j]))[0]
            v = np.max(np.abs(X[rows, j]))
            vals.append(v)
            if rep.two_m[j] == 1 and rep.chirality[j] == 1:
                i = rows[rep.two_m[rows] == rep.two_m[j] + (2 if generator == "B" else -2 if generator == "B*" else 0)]
                vhalf = float(np.abs(X[i[0], j])) if len(i) else None
        ls.append(tl / 2)
        sup.append(max(vals))
        half.append(vhalf if vhalf else np.nan)
    ls = np.array(ls)
    slope = float(np.polyfit(ls, np.log(sup), 1)[0])
    half = np.array(half)
    ok = np.isfinite(half) & (half > 0)
    slope_half = float(np.polyfit(ls[ok], np.log(half[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    maxel = _restricted_max(X, rep.interior(2))
    return DeltaPowerResult(X, slope, slope_half, maxel)


def commutation_probe(rep: TruncatedRep, generator: str | np.ndarray, z: complex) -> float:
    """Max column norm of ``B(a,z) = (|D|^z a - a |D|^z) |D|^(1-z)`` on the interior window."""
    X = rep.pi(generator) if isinstance(generator, str) else np.asarray(generator)
    d = rep.abs_d.astype(complex)
    dz = d ** complex(z)
    Bz = (dz[:, None] - dz[None, :]) * X * (d ** (1 - complex(z)))[None, :]
    mask = rep.interior(2)
    Bz = Bz[np.ix_(mask, mask)]
    return float(np.max(np.linalg.norm(Bz, axis=0))) if Bz.size else 0.0


@dataclass(frozen=True)
class OneForm:
    """Self-adjoint one-form ``eps Herm(sum c pi(a)[D, pi(b)])`` at a truncation.

    Attributes
    ----------
    terms : tuple of (str, str, complex)
        ``(a_word, b_word, coefficient)``.
    matrix : ndarray
    epsilon : float
    x_norm : float
        Estimate of ``||X D^-2||`` with ``X = D A + A D + A^2``.
    """

    terms: tuple
    matrix: np.ndarray = field(repr=False)
    epsilon: float
    x_norm: float


def _spectral_norm(M, iters: int = 2000, tol: float = 1e-12) -> float:
    v = np.ones(M.shape[1], dtype=complex) / math.sqrt(M.shape[1])
    est = 0.0
    for _ in range(iters):
        w = M.conj().T @ (M @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        new = math.sqrt(nrm)
        if abs(new - est) <= tol * new:
            return new
        est = new
    return est


def one_form(rep: TruncatedRep, terms, epsilon: float) -> OneForm:
    """Build ``eps Herm(sum_i c_i pi(a_i) [D, pi(b_i)])`` and the norm of ``X D^-2``."""
    if not epsilon > 0:
        raise DomainError(f"epsilon={epsilon} must be positive")
    terms = tuple((str(a), str(b), complex(c)) for a, b, c in terms)
    D = sparse.csr_matrix(rep.D)
    S = sparse.csr_matrix((rep.dim, rep.dim), dtype=complex)
    for a, b, c in terms:
        Pb = rep.word_sparse(b)
        S = S + c * (rep.word_sparse(a) @ (D @ Pb - Pb @ D))
    Amat = epsilon * 0.5 * (S + S.conj().T)
    X = D @ Amat + Amat @ D + Amat @ Amat
    Minv2 = X @ sparse.diags(1.0 / rep.abs_d ** 2)
    dense = Amat.toarray()
    dense.setflags(write=False)
    return OneForm(terms, dense, float(epsilon), _spectral_norm(sparse.csr_matrix(Minv2)))


def fluctuated_spectrum(rep: TruncatedRep, form: OneForm | None = None) -> np.ndarray:
    """Eigenvalues of ``D + A`` (``D`` alone when ``form`` is None)."""
    M = rep.D if form is None else rep.D + form.matrix
    return np.linalg.eigvalsh(M)


def fluctuated_trace(rep: TruncatedRep, form: OneForm | None, t, tol: float = 1e-14,
                     spectrum: np.ndarray | None = None):
    """``sum_i exp(-t |lambda_i|)`` over the spectrum of ``D + A``.

    ``t`` may be a scalar or an array.  A precomputed ``spectrum`` skips the
    eigendecomposition.

    Raises
    ------
    DomainError
        If ``exp(-t lambda_max) >= tol`` for the truncated ``|D|``, i.e. the
        cutoff is too small for the requested ``t``.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0):
        raise DomainError("fluctuated_trace needs t > 0")
    lam_max = float(np.max(rep.abs_d))
    if math.exp(-float(ts.min()) * lam_max) >= tol:
        raise DomainError(f"truncation L={rep.L} inadequate for t={ts.min()}: exp(-t*lambda_max) >= {tol}; "
                          "increase L")
    ev = fluctuated_spectrum(rep, form) if spectrum is None else spectrum
    absev = np.sort(np.abs(ev))
    out = np.array([math.fsum(np.exp(-tt * absev)) for tt in ts])
    return float(out[0]) if np.ndim(t) == 0 else out


def dump_matrix(rep: TruncatedRep, name: str, stream: TextIO, matrix: np.ndarray | None = None):
    """Write a matrix as row-major CSV with interleaved real and imaginary parts.

    The first line is a comment header recording ``L``, ``q``, ``|w|``, the
    phase of ``w`` and the basis ordering.
    """
    if matrix is None:
        mats = {"A": rep.A, "B": rep.B, "B*": rep.Bstar, "D": rep.D, "F": rep.F,
                "gamma": np.diag(rep.gamma).astype(complex), "absD": np.diag(rep.abs_d).astype(complex)}
        if name not in mats:
            raise DomainError(f"unknown matrix {name!r}; expected one of {sorted(mats)}")
        matrix = mats[name]
    stream.write(f"# L={rep.L},q={rep.params.q!r},w_abs={rep.params.w_abs!r},w_phase={rep.w_phase!r},"
                 f"dim={rep.dim},matrix={name},ordering={ORDERING}\n")
    for row in matrix:
        stream.write(",".join(f"{v.real:.17g},{v.imag:.17g}" for v in row) + "\n")


def load_matrix(stream: TextIO) -> tuple[np.ndarray, dict[str, str]]:
    """Inverse of :func:`dump_matrix`."""
    header = stream.readline()
    if not header.startswith("# "):
        raise DomainError("matrix dump lacks its header line")
    meta = {}
    body, _, order = header[2:].strip().partition(",ordering=")
    for item in body.split(","):
        k, _, v = item.partition("=")
        meta[k] = v
    meta["ordering"] = order
    rows = [np.array(line.split(","), dtype=float) for line in stream if line.strip()]
    data = np.array(rows)
    return data[:, 0::2] + 1j * data[:, 1::2], meta
