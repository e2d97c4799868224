"""Learnable vocoder features (MCEP, BAP) and the utterance-level evaluation set.

The mel-cepstrum convention used throughout is

    log sp(w) = c0 + 2 * sum_{m>=1} c_m cos(m * warp(w))

so ``c0`` carries the log gain (adding ``log 4`` to it scales sp by 4) and
``warp = 0`` gives the plain real cepstrum of ``log sp``.  Frequency warping
is the first-order all-pass substitution, applied as a cached linear map.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
import scipy.signal as sg
from scipy.fft import dct
from scipy.linalg import solve_toeplitz
from scipy.stats import kurtosis, skew

from .errors import (
    ContainerFormatError,
    EmptySignal,
    KindMismatch,
    NonPositiveEnvelope,
    RangeViolation,
    SchemaMismatch,
    TooShort,
)
from .signal_core import Waveform, frame_signal, get_window, power_spectrum, stft

MCEP_ORDER = 38
MCEP_DIM = MCEP_ORDER + 1
BAP_DIM = 24
DEFAULT_WARP = 0.42
BAP_FLOOR_DB = -60.0
KIND_DIMS = {"mcep": MCEP_DIM, "bap": BAP_DIM, "raw": None}

SCHEMA_VERSION = "eval-v1"
CORR_SCHEMA = "corr-v1"
LTAS_BANDS = 64
LTAS_FLOOR_DB = -80.0
N_MFCC = 13
N_MEL_FILTERS = 26
MFCC_WIN = 0.025
MFCC_HOP = 0.010
MFCC_FLOOR = 1e-10
CORR_LAGS = (1, 3, 5, 10)
CORR_MFCC_TRACKS = 6
EMS_CENTRES = tuple(125.0 * 2 ** k for k in range(7))   # octave bands, 125 Hz .. 8 kHz
EMS_CUTOFF = 20.0
EMS_RATE = 100

MFCC_STATS = ("mean", "std", "skew", "kurt")


@dataclass
class FeatureSequence:
    data: np.ndarray
    kind: str
    frame_shift: float = 0.005
    source_id: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.kind not in KIND_DIMS:
            raise KindMismatch(f"unknown feature kind {self.kind!r}")
        want = KIND_DIMS[self.kind]
        if self.data.ndim != 2 or (want is not None and self.data.shape[0] != want):
            raise KindMismatch(
                f"{self.kind} needs {want} rows, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature sequence has non-finite entries")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# mel-cepstrum


def mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_inv(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def freqt(c: np.ndarray, order: int, alpha: float) -> np.ndarray:
    """All-pass frequency warping of causal cepstra along the last axis."""
    c = np.asarray(c, dtype=np.float64)
    m1 = c.shape[-1] - 1
    lead = c.shape[:-1]
    g = np.zeros(lead + (order + 1,))
    beta = 1.0 - alpha * alpha
    for i in range(m1, -1, -1):
        d = g.copy()
        g[..., 0] = c[..., i] + alpha * d[..., 0]
        if order >= 1:
            g[..., 1] = beta * d[..., 0] + alpha * d[..., 1]
        for j in range(2, order + 1):
            g[..., j] = d[..., j - 1] + alpha * (d[..., j] - g[..., j - 1])
    return g


@lru_cache(maxsize=32)
def warp_matrix(n_in: int, n_out: int, alpha: float) -> np.ndarray:
    """Linear map from symmetric cepstrum (c0 full weight) to warped cepstrum."""
    basis = np.eye(n_in)
    basis[0, 0] = 0.5
    m = freqt(basis, n_out - 1, alpha)
    m[:, 0] *= 2.0
    m.setflags(write=False)
    return m


def sp_to_mcep(sp: np.ndarray, order: int = MCEP_ORDER, warp: float = DEFAULT_WARP,
               frame_shift: float = 0.005, source_id: str = "") -> FeatureSequence:
    """F x B envelope frames to a (order+1) x F mel-cepstral sequence."""
    sp = np.atleast_2d(np.asarray(sp, dtype=np.float64))
    if order + 1 != MCEP_DIM:
        raise ValueError(f"mcep order must be {MCEP_ORDER}")
    if not 0.0 <= warp < 0.6:
        raise ValueError("warp must lie in [0, 0.6)")
    if np.any(~np.isfinite(sp)) or np.any(sp <= 0):
        raise NonPositiveEnvelope("sp must be strictly positive; floor it first")
    fft_size = 2 * (sp.shape[1] - 1)
    cep = np.fft.irfft(np.log(sp), fft_size, axis=1)[:, :fft_size // 2 + 1]
    mc = cep @ warp_matrix(cep.shape[1], order + 1, float(warp))
    return FeatureSequence(mc.T, "mcep", frame_shift, source_id)


def mcep_to_sp(m: FeatureSequence, fft_size: int = 1024, warp: float = DEFAULT_WARP) -> np.ndarray:
    if m.kind != "mcep":
        raise KindMismatch(f"mcep_to_sp needs an mcep sequence, got {m.kind}")
    half = fft_size // 2
    cep = m.data.T @ warp_matrix(m.dim, half + 1, float(-warp))
    full = np.concatenate([cep, cep[:, half - 1:0:-1]], axis=1)
    return np.exp(np.fft.rfft(full, fft_size, axis=1).real)


# ---------------------------------------------------------------------------
# band aperiodicity


@lru_cache(maxsize=32)
def bap_band_edges(sample_rate: int = 16000, n_bands: int = BAP_DIM) -> np.ndarray:
    return mel_inv(np.linspace(0.0, mel(sample_rate / 2.0), n_bands + 1))


@lru_cache(maxsize=32)
def bap_band_index(fft_size: int, sample_rate: int = 16000, n_bands: int = BAP_DIM) -> np.ndarray:
    """Band id (0..n_bands-1) of every rfft bin."""
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    idx = np.searchsorted(bap_band_edges(sample_rate, n_bands), freqs, side="right") - 1
    idx = np.clip(idx, 0, n_bands - 1)
    if np.unique(idx).size != n_bands:
        raise ValueError(f"fft_size {fft_size} too small for {n_bands} aperiodicity bands")
    idx.setflags(write=False)
    return idx


def ap_to_bap(ap: np.ndarray, sample_rate: int = 16000, frame_shift: float = 0.005,
              source_id: str = "") -> FeatureSequence:
    ap = np.atleast_2d(np.asarray(ap, dtype=np.float64))
    if np.any(~np.isfinite(ap)) or np.any(ap < 0) or np.any(ap > 1):
        raise RangeViolation("aperiodicity must lie in [0, 1]")
    fft_size = 2 * (ap.shape[1] - 1)
    idx = bap_band_index(fft_size, sample_rate)
    with np.errstate(divide="ignore"):
        db = np.maximum(20.0 * np.log10(ap), BAP_FLOOR_DB)
    counts = np.bincount(idx, minlength=BAP_DIM)
    sums = np.zeros((ap.shape[0], BAP_DIM))
    for b in range(BAP_DIM):
        sums[:, b] = db[:, idx == b].sum(axis=1)
    return FeatureSequence((sums / counts).T, "bap", frame_shift, source_id)


def bap_to_ap(b: FeatureSequence, fft_size: int = 1024, sample_rate: int = 16000) -> np.ndarray:
    if b.kind != "bap":
        raise KindMismatch(f"bap_to_ap needs a bap sequence, got {b.kind}")
    idx = bap_band_index(fft_size, sample_rate)
    ap = 10.0 ** (b.data.T[:, idx] / 20.0)
    return np.clip(ap, 0.001, 0.999)


# ---------------------------------------------------------------------------
# FSEQ container

_FSEQ_HEADER = struct.Struct("<4sBIId")
_KIND_CODES = {"mcep": 0, "bap": 1}


def feature_sequence_to_bytes(f: FeatureSequence) -> bytes:
    if f.kind not in _KIND_CODES:
        raise KindMismatch(f"FSEQ containers hold mcep or bap sequences, not {f.kind!r}")
    head = _FSEQ_HEADER.pack(b"FSEQ", _KIND_CODES[f.kind], f.dim, f.n_frames, float(f.frame_shift))
    return head + np.asarray(f.data, dtype="<f8").tobytes(order="F")


def feature_sequence_from_bytes(data: bytes, source_id: str = "") -> FeatureSequence:
    if len(data) < _FSEQ_HEADER.size:
        raise ContainerFormatError("truncated FSEQ header")
    magic, code, dim, n_frames, shift = _FSEQ_HEADER.unpack_from(data)
    if magic != b"FSEQ":
        raise ContainerFormatError(f"bad magic {magic!r}")
    kinds = {v: k for k, v in _KIND_CODES.items()}
    if code not in kinds:
        raise ContainerFormatError(f"unknown kind code {code}")
    body = data[_FSEQ_HEADER.size:]
    if len(body) != 8 * dim * n_frames:
        raise ContainerFormatError("FSEQ body size does not match header")
    arr = np.frombuffer(body, dtype="<f8").reshape((dim, n_frames), order="F")
    return FeatureSequence(arr.astype(np.float64), kinds[code], shift, source_id)


# ---------------------------------------------------------------------------
# evaluation features


@lru_cache(maxsize=16)
def mel_filterbank(n_filters: int, fft_size: int, sample_rate: int,
                   f_lo: float = 0.0, f_hi: Optional[float] = None) -> np.ndarray:
    f_hi = sample_rate / 2.0 if f_hi is None else f_hi
    pts = mel_inv(np.linspace(mel(f_lo), mel(f_hi), n_filters + 2))
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    fb = np.zeros((n_filters, freqs.size))
    for j in range(n_filters):
        lo, mid, hi = pts[j], pts[j + 1], pts[j + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        fb[j] = np.maximum(0.0, np.minimum(up, down))
    fb.setflags(write=False)
    return fb


def mfcc(w: Waveform, n_coeffs: int = N_MFCC, n_filters: int = N_MEL_FILTERS) -> np.ndarray:
    """T x n_coeffs MFCC matrix: 25 ms Hamming frames every 10 ms, 512-point FFT."""
    if len(w) == 0:
        raise EmptySignal("mfcc of an empty signal")
    win = int(round(MFCC_WIN * w.sample_rate))
    s = stft(w, 512, MFCC_HOP, "hamming", win_length=win)
    power = (np.abs(s.frames) ** 2) / 512
    fb = mel_filterbank(n_filters, 512, w.sample_rate)
    energies = np.maximum(power @ fb.T, MFCC_FLOOR)
    return dct(np.log(energies), type=2, axis=1, norm="ortho")[:, :n_coeffs]


def ltas(w: Waveform, n_bands: int = LTAS_BANDS, fft_size: int = 1024) -> np.ndarray:
    """Long-term average spectrum pooled into ``n_bands`` equal-width bands (dB)."""
    if len(w) == 0:
        raise EmptySignal("ltas of an empty signal")
    hop = int(round(MFCC_HOP * w.sample_rate))
    frames = frame_signal(w.samples, hop, fft_size)
    p = power_spectrum(frames, get_window("hann", fft_size), fft_size).mean(axis=0)
    groups = np.array_split(np.arange(p.size), n_bands)
    band = np.array([p[g].mean() for g in groups])
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(band)
    return np.maximum(db, LTAS_FLOOR_DB)


def lpc(frame: np.ndarray, order: int) -> Optional[np.ndarray]:
    """Autocorrelation-method LPC polynomial [1, a1, ..., ap] or None if degenerate."""
    r = np.correlate(frame, frame, mode="full")[frame.size - 1:frame.size + order]
    if r[0] <= 1e-12:
        return None
    r = r.copy()
    r[0] *= 1.0 + 1e-9
    try:
        a = solve_toeplitz(r[:order], -r[1:order + 1])
    except np.linalg.LinAlgError:
        return None
    return np.concatenate([[1.0], a])


def formant_tracks(w: Waveform, voiced: Optional[np.ndarray] = None, order: int = 18,
                   max_bandwidth: float = 400.0) -> np.ndarray:
    """T x 3 (F1, F2, F3) tracks on the MFCC frame grid.

    Unvoiced frames, or frames with fewer than three qualifying roots, carry the
    previous value forward; leading gaps take the first estimate.
    """
    sr = w.sample_rate
    hop = int(round(MFCC_HOP * sr))
    win = int(round(MFCC_WIN * sr))
    x = np.append(w.samples[0], w.samples[1:] - 0.97 * w.samples[:-1]) if len(w) else w.samples
    frames = frame_signal(x, hop, win) * get_window("hamming", win)
    n = frames.shape[0]
    if voiced is None:
        voiced = np.ones(n, dtype=bool)
    out = np.full((n, 3), np.nan)
    for i in range(n):
        if not voiced[i]:
            continue
        a = lpc(frames[i], order)
        if a is None:
            continue
        roots = np.roots(a)
        roots = roots[np.imag(roots) > 0]
        freq = np.angle(roots) * sr / (2 * np.pi)
        bw = -(sr / np.pi) * np.log(np.maximum(np.abs(roots), 1e-12))
        ok = (bw < max_bandwidth) & (freq > 90.0) & (freq < sr / 2 - 50.0)
        cand = np.sort(freq[ok])
        if cand.size >= 3:
            out[i] = cand[:3]
    valid = ~np.isnan(out[:, 0])
    if not np.any(valid):
        return np.tile([500.0, 1500.0, 2500.0], (n, 1))
    last = out[np.argmax(valid)].copy()
    for i in range(n):
        if valid[i]:
            last = out[i]
        else:
            out[i] = last
    return out


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if den <= 1e-12 * max(a.size, 1):
        return 0.0
    return float(np.dot(a, b) / den)


def corr_structure(tracks: np.ndarray, lags: Sequence[int] = CORR_LAGS,
                   cross_lag0: bool = True) -> np.ndarray:
    """Lagged Pearson correlations for every track pair (i <= j).

    ``tracks`` is n_tracks x T.  Row order: for i, for j >= i, for each lag
    (lag 0 first when i < j and ``cross_lag0``), corr(track_i[t], track_j[t + lag]).
    Zero-variance tracks give 0.
    """
    tracks = np.atleast_2d(np.asarray(tracks, dtype=np.float64))
    n, t = tracks.shape
    if t < 2 * max(lags):
        raise TooShort(f"need at least {2 * max(lags)} frames, got {t}")
    out = []
    for i in range(n):
        for j in range(i, n):
            use = ([0] if (cross_lag0 and i < j) else []) + list(lags)
            for lag in use:
                out.append(_pearson(tracks[i, :t - lag], tracks[j, lag:]))
    return np.asarray(out)


def corr_structure_size(n_tracks: int, n_lags: int = len(CORR_LAGS), cross_lag0: bool = True) -> int:
    pairs = n_tracks * (n_tracks + 1) // 2
    cross = n_tracks * (n_tracks - 1) // 2
    return pairs * n_lags + (cross if cross_lag0 else 0)


def ems(w: Waveform) -> np.ndarray:
    """Per octave band: (peak modulation Hz, peak level dB re total, 3-6 Hz energy ratio)."""
    sr = w.sample_rate
    if len(w) < sr:
        raise TooShort("envelope modulation spectrum needs at least 1 s")
    lp = sg.butter(4, EMS_CUTOFF, btype="lowpass", fs=sr, output="sos")
    step = sr // EMS_RATE
    feats = []
    nyq = sr / 2.0
    for fc in EMS_CENTRES:
        lo, hi = fc / np.sqrt(2.0), min(fc * np.sqrt(2.0), nyq * 0.98)
        bp = sg.butter(4, [lo, hi], btype="bandpass", fs=sr, output="sos")
        band = sg.sosfiltfilt(bp, w.samples)
        env = sg.sosfiltfilt(lp, np.abs(band))[::step]
        feats.extend(_modulation_summary(env, EMS_RATE))
    return np.asarray(feats)


def _modulation_summary(env: np.ndarray, rate: float):
    nfft = 1 << int(np.ceil(np.log2(max(env.size, rate / 0.02))))
    win = np.hanning(env.size)
    freqs = np.arange(nfft // 2 + 1) * rate / nfft
    total_spec = np.abs(np.fft.rfft(env * win, nfft)) ** 2
    ac_spec = np.abs(np.fft.rfft((env - env.mean()) * win, nfft)) ** 2
    in_range = freqs <= EMS_CUTOFF
    total = total_spec[in_range].sum()
    if total <= 1e-30:
        return [0.0, -120.0, 0.0]
    search = (freqs >= 0.5) & in_range
    k = np.argmax(np.where(search, ac_spec, -1.0))
    peak_db = 10.0 * np.log10(ac_spec[k] / total + 1e-12)
    ratio = total_spec[(freqs >= 3.0) & (freqs <= 6.0)].sum() / total
    return [float(freqs[k]), float(peak_db), float(ratio)]


def ems_size() -> int:
    return 3 * len(EMS_CENTRES)


def _moments(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        sk = skew(x, axis=0)
        ku = kurtosis(x, axis=0)
    flat = std < 1e-10
    sk = np.where(flat | ~np.isfinite(sk), 0.0, sk)
    ku = np.where(flat | ~np.isfinite(ku), 0.0, ku)
    return np.stack([mean, std, sk, ku], axis=1).reshape(-1)


@dataclass
class EvalFeatureVector:
    ltas: np.ndarray
    mfcc_stats: np.ndarray
    corr_struct: np.ndarray
    ems: Optional[np.ndarray] = None
    include_rhythm: bool = False
    schema_version: str = SCHEMA_VERSION

    @property
    def vector(self) -> np.ndarray:
        blocks = [self.ltas, self.mfcc_stats, self.corr_struct]
        if self.include_rhythm:
            blocks.append(self.ems)
        return np.concatenate(blocks)


def eval_feature_names(include_rhythm: bool) -> List[str]:
    """Column names of the eval vector, in schema order."""
    names = [f"ltas_{b:02d}" for b in range(LTAS_BANDS)]
    names += [f"mfcc{c:02d}_{s}" for c in range(N_MFCC) for s in MFCC_STATS]
    tracks = [f"mfcc{c:02d}" for c in range(1, CORR_MFCC_TRACKS + 1)] + ["f1", "f2", "f3"]
    for i, a in enumerate(tracks):
        for j in range(i, len(tracks)):
            lags = ([0] if i < j else []) + list(CORR_LAGS)
            names += [f"corr_{a}_{tracks[j]}_lag{lag}" for lag in lags]
    if include_rhythm:
        for fc in EMS_CENTRES:
            names += [f"ems_{int(fc)}_{s}" for s in ("peak_hz", "peak_db", "e3to6")]
    return names


def assemble_eval_vector(w: Waveform, include_rhythm: bool = False,
                         f0: Optional[np.ndarray] = None) -> EvalFeatureVector:
    """Fixed-order utterance vector: LTAS | MFCC stats | correlation structure [| EMS]."""
    from .vocoder import estimate_f0

    if len(w) == 0:
        raise EmptySignal("eval features of an empty signal")
    m = mfcc(w)
    if f0 is None:
        f0 = estimate_f0(w)
    # f0 tracks use the 5 ms vocoder grid
    step = int(round(MFCC_HOP / 0.005))
    voiced = (np.asarray(f0)[::step] > 0)[:m.shape[0]]
    if voiced.size < m.shape[0]:
        voiced = np.pad(voiced, (0, m.shape[0] - voiced.size))
    formants = formant_tracks(w, voiced)
    tracks = np.vstack([m[:, 1:CORR_MFCC_TRACKS + 1].T, formants.T])
    vec = EvalFeatureVector(
        ltas=ltas(w),
        mfcc_stats=_moments(m),
        corr_struct=corr_structure(tracks),
        ems=ems(w) if include_rhythm else None,
        include_rhythm=include_rhythm,
    )
    return vec


def write_eval_csv(path, ids: Sequence[str], vectors: np.ndarray, include_rhythm: bool) -> None:
    names = eval_feature_names(include_rhythm)
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vectors.shape[1] != len(names):
        raise SchemaMismatch(f"vectors have {vectors.shape[1]} columns, schema has {len(names)}")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["schema_version", SCHEMA_VERSION, CORR_SCHEMA,
                     "rhythm" if include_rhythm else "no_rhythm"])
        wr.writerow(["utterance_id"] + names)
        for uid, row in zip(ids, vectors):
            wr.writerow([uid] + [repr(float(v)) for v in row])


def read_eval_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["schema_version", SCHEMA_VERSION]:
        raise SchemaMismatch(f"{path}: missing or unknown schema header")
    include_rhythm = len(rows[0]) > 3 and rows[0][3] == "rhythm"
    if rows[1][1:] != eval_feature_names(include_rhythm):
        raise SchemaMismatch(f"{path}: column names do not match {SCHEMA_VERSION}")
    ids = [r[0] for r in rows[2:]]
    vectors = np.array([[float(v) for v in r[1:]] for r in rows[2:]]).reshape(len(ids), -1)
    return ids, vectors, include_rhythm
