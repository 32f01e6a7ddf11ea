"""Signal-processing layer: STFT analysis/synthesis, Griffin-Lim phase
reconstruction, mel filterbank + mel-cepstral distortion, YIN pitch tracking,
energy-based voiced/unvoiced detection, and mono 16-bit WAV I/O.

Frame parameters are fixed at n_fft=1024 / hop=256 / Hann so the 513 spectrum
bins line up with the acoustic model's frequency width.
"""

import math
import wave
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import as_strided

SAMPLE_RATE = 22050
N_FFT = 1024
HOP = 256
N_BINS = N_FFT // 2 + 1


@dataclass
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.isfinite(self.samples).all():
            raise ValueError("audio contains non-finite samples")


@dataclass
class Spectrogram:
    mags: np.ndarray
    n_fft: int = N_FFT
    hop: int = HOP

    def __post_init__(self):
        self.mags = np.asarray(self.mags)
        if self.mags.ndim != 2 or self.mags.shape[0] != self.n_fft // 2 + 1:
            raise ValueError(f"expected ({self.n_fft // 2 + 1}, T) magnitudes, "
                             f"got {self.mags.shape}")
        if np.any(self.mags < 0):
            raise ValueError("magnitudes must be non-negative")

    @property
    def n_frames(self):
        return self.mags.shape[1]


@dataclass
class F0Track:
    f0_hz: np.ndarray
    voiced: np.ndarray

    def __post_init__(self):
        self.f0_hz = np.asarray(self.f0_hz, dtype=np.float64)
        self.voiced = np.asarray(self.voiced, dtype=bool)
        if self.f0_hz.shape != self.voiced.shape:
            raise ValueError("f0 and voicing tracks must have equal length")
        if np.any((self.f0_hz > 0) != self.voiced):
            raise ValueError("voiced flags must match positive f0 exactly")


@dataclass
class MelConfig:
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 11025.0
    cepstral_order: int = 13
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.fmax > self.sample_rate / 2:
            raise ValueError("fmax above Nyquist")
        if self.n_mels >= N_BINS:
            raise ValueError("n_mels must be below the spectrum bin count")


def _as_samples(a):
    return a.samples if isinstance(a, AudioBuffer) else np.asarray(a, dtype=np.float64)


def _as_mags(s):
    return s.mags if isinstance(s, Spectrogram) else np.asarray(s)


def hann_window(n=N_FFT):
    # periodic variant, required for clean overlap-add at hop = n/4
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _frames(samples, frame_length, hop):
    half = frame_length // 2
    padded = np.pad(samples, half, mode="reflect")
    n_frames = 1 + len(samples) // hop
    s = padded.strides[0]
    return as_strided(padded, shape=(n_frames, frame_length), strides=(hop * s, s))


def stft_complex(a):
    samples = _as_samples(a)
    if len(samples) < N_FFT:
        raise ValueError(f"audio must hold at least {N_FFT} samples, got {len(samples)}")
    frames = _frames(samples, N_FFT, HOP) * hann_window()
    return np.fft.rfft(frames, axis=1).T


def stft(a):
    """Magnitude spectrogram (513, T) with T = 1 + len//hop, centered frames."""
    return Spectrogram(np.abs(stft_complex(a)))


def istft(mags, phase, length=None):
    """Overlap-add inverse with window-squared normalization.

    Returns (T-1)*hop samples (the span with full analysis coverage), or
    ``length`` samples when given.
    """
    mags = _as_mags(mags)
    phase = np.asarray(phase)
    if mags.shape != phase.shape:
        raise ValueError(f"magnitude/phase shape mismatch: {mags.shape} vs {phase.shape}")
    spec = (mags * np.exp(1j * phase)).T
    frames = np.fft.irfft(spec, n=N_FFT, axis=1)
    win = hann_window()
    n_frames = frames.shape[0]
    total = (n_frames - 1) * HOP + N_FFT
    acc = np.zeros(total)
    wsq = np.zeros(total)
    for t in range(n_frames):
        start = t * HOP
        acc[start:start + N_FFT] += frames[t] * win
        wsq[start:start + N_FFT] += win * win
    half = N_FFT // 2
    out = acc[half:total - half]
    norm = wsq[half:total - half]
    out = np.where(norm > 1e-10, out / np.maximum(norm, 1e-10), 0.0)
    if length is not None:
        out = out[:length]
    return out


def spectral_convergence(candidate_mags, target_mags):
    denom = np.linalg.norm(target_mags)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(candidate_mags - target_mags) / denom)


def griffin_lim(mags, iters=60, seed=0, return_convergence=False):
    """Alternating-projection phase reconstruction from seeded random phase.

    The returned waveform is peak-normalized to 0.95.  With iters=0 the
    random-phase inversion is returned as-is.
    """
    mags = _as_mags(mags).astype(np.float64)
    rng = np.random.default_rng(seed)
    history = []
    if not np.any(mags > 0):
        audio = np.zeros((mags.shape[1] - 1) * HOP)
        return (audio, np.zeros(iters)) if return_convergence else audio
    phase = rng.uniform(-np.pi, np.pi, size=mags.shape)
    audio = istft(mags, phase)
    for _ in range(iters):
        rebuilt = stft_complex(audio)
        rebuilt = rebuilt[:, :mags.shape[1]]
        history.append(spectral_convergence(np.abs(rebuilt), mags))
        phase = np.angle(rebuilt)
        audio = istft(mags, phase)
    peak = np.max(np.abs(audio))
    if peak > 0:
        audio = audio * (0.95 / peak)
    if return_convergence:
        return audio, np.asarray(history)
    return audio


def mel_filterbank(cfg=None):
    """(n_mels, 513) triangular filterbank, area-normalized per band."""
    cfg = cfg or MelConfig()

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    mel_pts = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_freqs = np.arange(N_BINS) * cfg.sample_rate / N_FFT
    fb = np.zeros((cfg.n_mels, N_BINS))
    for m in range(cfg.n_mels):
        lo, mid, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (bin_freqs - lo) / max(mid - lo, 1e-10)
        down = (hi - bin_freqs) / max(hi - mid, 1e-10)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
        fb[m] *= 2.0 / (hi - lo)
    return fb


def mel_spectrogram(s, cfg=None, log=True):
    """Mel-band energies of a linear magnitude spectrogram.

    With log=True (the display/cepstral path) values are log(max(x, 1e-5)).
    """
    cfg = cfg or MelConfig()
    mel = mel_filterbank(cfg) @ _as_mags(s)
    if log:
        mel = np.log(np.maximum(mel, 1e-5))
    return mel


def _dct_rows(n, orders):
    rows = np.empty((len(orders), n))
    grid = (2.0 * np.arange(n) + 1.0) * np.pi / (2.0 * n)
    for r, k in enumerate(orders):
        scale = math.sqrt(1.0 / n) if k == 0 else math.sqrt(2.0 / n)
        rows[r] = scale * np.cos(grid * k)
    return rows


def mel_cepstra(s, cfg=None):
    """Orthonormal DCT-II cepstra c1..c_order of the log-mel spectrogram."""
    cfg = cfg or MelConfig()
    logmel = mel_spectrogram(s, cfg, log=True)
    dct = _dct_rows(cfg.n_mels, range(1, cfg.cepstral_order + 1))
    return dct @ logmel


def mcd_from_cepstra(c_ref, c_syn):
    """dB distortion between two (order, T) cepstral matrices."""
    diff = np.asarray(c_ref) - np.asarray(c_syn)
    per_frame = np.sqrt(2.0 * np.sum(diff * diff, axis=0))
    return float((10.0 / math.log(10.0)) * per_frame.mean())


def mcd(ref, syn, cfg=None):
    """Mel-cepstral distortion in dB, frames trimmed to the shorter input."""
    cfg = cfg or MelConfig()
    ref_m = _as_mags(stft(ref) if isinstance(ref, AudioBuffer) else ref)
    syn_m = _as_mags(stft(syn) if isinstance(syn, AudioBuffer) else syn)
    n = min(ref_m.shape[1], syn_m.shape[1])
    if n < 1:
        raise ValueError("need at least one frame on both sides")
    return mcd_from_cepstra(mel_cepstra(ref_m[:, :n], cfg), mel_cepstra(syn_m[:, :n], cfg))


def yin_f0(a, fmin=60.0, fmax=1200.0, threshold=0.15, frame_length=2048,
           hop=HOP, sample_rate=SAMPLE_RATE):
    """YIN pitch track via the cumulative-mean-normalized difference function.

    One estimate per spectrogram frame; frames with no dip below the
    threshold (or with negligible energy) are unvoiced with f0 = 0.
    """
    if fmin >= fmax:
        raise ValueError(f"fmin must be below fmax, got {fmin} >= {fmax}")
    samples = _as_samples(a)
    tau_max = int(sample_rate / fmin)
    tau_min = max(2, int(sample_rate / fmax))
    window = frame_length - tau_max
    if window < 2 * tau_max:
        raise ValueError("frame_length too short for fmin: needs >= 3 periods")

    frames = _frames(samples, frame_length, hop)
    n_frames = frames.shape[0]
    nfft = 1 << (frame_length - 1).bit_length()

    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    rms = np.sqrt(np.mean(frames * frames, axis=1))
    rms_gate = 1e-4 * max(rms.max(), 1e-12)

    spec_all = np.fft.rfft(frames, n=nfft, axis=1)
    spec_head = np.fft.rfft(frames[:, :window], n=nfft, axis=1)
    corr = np.fft.irfft(spec_all * np.conj(spec_head), n=nfft, axis=1)[:, :tau_max + 1]

    sq = frames * frames
    csum = np.cumsum(sq, axis=1)
    e0 = csum[:, window - 1]

    taus = np.arange(1, tau_max + 1)
    for t in range(n_frames):
        if rms[t] <= rms_gate:
            continue
        e_tau = csum[t, taus + window - 1] - csum[t, taus - 1]
        d = e0[t] + e_tau - 2.0 * corr[t, 1:tau_max + 1]
        d = np.maximum(d, 0.0)
        cumulative = np.cumsum(d)
        cmnd = np.ones(tau_max + 1)
        nz = cumulative > 0
        cmnd[1:][nz] = d[nz] * taus[nz] / cumulative[nz]

        tau = _first_dip(cmnd, tau_min, tau_max, threshold)
        if tau is None:
            continue
        tau_refined = _parabolic_min(cmnd, tau)
        f0[t] = sample_rate / tau_refined
        voiced[t] = True
    return F0Track(f0_hz=f0, voiced=voiced)


def _first_dip(cmnd, tau_min, tau_max, threshold):
    tau = tau_min
    while tau <= tau_max:
        if cmnd[tau] < threshold:
            while tau + 1 <= tau_max and cmnd[tau + 1] < cmnd[tau]:
                tau += 1
            return tau
        tau += 1
    return None


def _parabolic_min(values, i):
    if i <= 0 or i >= len(values) - 1:
        return float(i)
    a, b, c = values[i - 1], values[i], values[i + 1]
    denom = a - 2.0 * b + c
    if abs(denom) < 1e-12:
        return float(i)
    shift = 0.5 * (a - c) / denom
    return float(i) + float(np.clip(shift, -1.0, 1.0))


def vuv_detect(a, rel_db_threshold=-40.0, smooth_frames=5):
    """Per-frame voicing mask from frame RMS relative to the utterance peak.

    Gain-invariant by construction; a width-``smooth_frames`` median filter
    removes single-frame glitches.
    """
    samples = _as_samples(a)
    if len(samples) == 0:
        raise ValueError("empty audio")
    frames = _frames(samples, N_FFT, HOP)
    rms = np.sqrt(np.mean(frames * frames, axis=1))
    peak = rms.max()
    if peak <= 0:
        return np.zeros(len(rms), dtype=bool)
    rel_db = 20.0 * np.log10(np.maximum(rms, 1e-12) / peak)
    mask = rel_db > rel_db_threshold
    return median_filter_bool(mask, smooth_frames)


def median_filter_bool(mask, width):
    if width <= 1:
        return mask.astype(bool)
    if width % 2 == 0:
        raise ValueError("median filter width must be odd")
    half = width // 2
    padded = np.pad(mask.astype(np.int8), half, mode="edge")
    s = padded.strides[0]
    windows = as_strided(padded, shape=(len(mask), width), strides=(s, s))
    return windows.sum(axis=1) > half


def resample(samples, sr_in, sr_out=SAMPLE_RATE):
    """Windowed-sinc rate conversion (64-tap Kaiser, beta 8.6)."""
    samples = np.asarray(samples, dtype=np.float64)
    if sr_in == sr_out:
        return samples.copy()
    taps = 64
    half = taps // 2
    beta = 8.6
    cutoff = 0.5 * min(1.0, sr_out / sr_in) * 0.945

    n_out = int(round(len(samples) * sr_out / sr_in))
    t = np.arange(n_out) * (sr_in / sr_out)
    k0 = np.floor(t).astype(np.int64) - (half - 1)
    padded = np.pad(samples, taps)
    out = np.zeros(n_out)
    i0_beta = np.i0(beta)
    for j in range(taps):
        idx = k0 + j
        u = t - idx
        win_arg = 1.0 - (u / half) ** 2
        w = np.where(win_arg > 0, np.i0(beta * np.sqrt(np.maximum(win_arg, 0.0))), 0.0)
        out += padded[idx + taps] * 2.0 * cutoff * np.sinc(2.0 * cutoff * u) * (w / i0_beta)
    return out


def read_wav(path):
    """Read a mono 16-bit PCM RIFF file, resampling to 22050 Hz if needed."""
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono audio, got {fh.getnchannels()} channels")
        if fh.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM, got {8 * fh.getsampwidth()}-bit")
        sr = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if sr != SAMPLE_RATE:
        samples = np.clip(resample(samples, sr, SAMPLE_RATE), -1.0, 1.0)
    return AudioBuffer(samples=samples, sample_rate=SAMPLE_RATE)


def write_wav(path, audio):
    """Write mono 16-bit PCM at 22050 Hz (input resampled when necessary)."""
    if isinstance(audio, AudioBuffer):
        samples, sr = audio.samples, audio.sample_rate
    else:
        samples, sr = np.asarray(audio, dtype=np.float64), SAMPLE_RATE
    if sr != SAMPLE_RATE:
        samples = resample(samples, sr, SAMPLE_RATE)
    pcm = np.round(np.clip(samples, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(SAMPLE_RATE)
        fh.writeframes(pcm.tobytes())
