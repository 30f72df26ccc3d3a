"""Log-mel spectrogram frontend: 10-second mono audio -> [1, 128, 1000].

Defaults assume 32 kHz audio with a 320-sample hop so a 10-second clip
maps to exactly 1000 frames. The mel scale is Slaney-style (linear below
1 kHz, logarithmic above) with unnormalized triangular filters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .tensor import Tensor

CLIP_SECONDS = 10.0
LOG_EPS = 1e-5

__all__ = ["MelConfig", "stft_magnitude", "mel_filterbank", "log_mel", "load_wav",
           "CLIP_SECONDS", "LOG_EPS"]


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 32000
    n_fft: int = 1024
    win_length: int = 800
    hop_length: int = 320
    n_mels: int = 128
    f_min: float = 0.0
    f_max: float = 16000.0

    def __post_init__(self):
        if self.n_mels != 128:
            raise ValueError(f"n_mels must be 128, got {self.n_mels}")
        if self.win_length > self.n_fft:
            raise ValueError("win_length must not exceed n_fft")
        if not 0 <= self.f_min < self.f_max <= self.sample_rate / 2:
            raise ValueError(
                f"need f_min < f_max <= sample_rate/2, got {self.f_min}, {self.f_max}"
            )
        if self.clip_samples % self.hop_length:
            raise ValueError("a 10-second clip must be an integer number of hops")
        if self.num_frames != 1000:
            raise ValueError(
                f"10 s / hop must give 1000 frames, got {self.num_frames}"
            )

    @property
    def clip_samples(self) -> int:
        return int(round(CLIP_SECONDS * self.sample_rate))

    @property
    def num_frames(self) -> int:
        return self.clip_samples // self.hop_length

    @property
    def num_bins(self) -> int:
        return self.n_fft // 2 + 1


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _window(cfg: MelConfig) -> np.ndarray:
    w = _hann_periodic(cfg.win_length)
    if cfg.win_length == cfg.n_fft:
        return w
    out = np.zeros(cfg.n_fft)
    left = (cfg.n_fft - cfg.win_length) // 2
    out[left : left + cfg.win_length] = w
    return out


def _fit_clip(audio: np.ndarray, cfg: MelConfig) -> np.ndarray:
    n = cfg.clip_samples
    if audio.size >= n:
        return audio[:n]
    return np.pad(audio, (0, n - audio.size))


def stft_magnitude(audio, cfg: MelConfig = MelConfig()) -> Tensor:
    """Hann-windowed, centered magnitude STFT, exactly 1000 frames.

    Audio is zero-padded or truncated to 10 s; frame t is centered on
    sample t * hop_length via reflect padding.
    """
    a = np.asarray(audio, dtype=np.float64).reshape(-1)
    if a.size == 0:
        raise ValueError("empty audio")
    a = _fit_clip(a, cfg)
    half = cfg.n_fft // 2
    padded = np.pad(a, (half, half), mode="reflect")
    idx = np.arange(cfg.num_frames)[:, None] * cfg.hop_length + np.arange(cfg.n_fft)[None, :]
    frames = padded[idx] * _window(cfg)[None, :]
    mag = np.abs(np.fft.rfft(frames, axis=1))
    return Tensor(mag.T.astype(np.float32))


def _hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3.0
    log_step = np.log(6.4) / 27.0
    mel = f / f_sp
    above = f >= 1000.0
    mel = np.where(above, 15.0 + np.log(np.maximum(f, 1e-12) / 1000.0) / log_step, mel)
    return mel


def _mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3.0
    log_step = np.log(6.4) / 27.0
    hz = m * f_sp
    above = m >= 15.0
    return np.where(above, 1000.0 * np.exp(log_step * (m - 15.0)), hz)


def mel_filter_edges(cfg: MelConfig) -> np.ndarray:
    """The n_mels + 2 mel-spaced edge frequencies in Hz."""
    mels = np.linspace(_hz_to_mel(cfg.f_min), _hz_to_mel(cfg.f_max), cfg.n_mels + 2)
    return _mel_to_hz(mels)


def mel_filterbank(cfg: MelConfig = MelConfig()) -> Tensor:
    """Triangular mel filters, rows [n_mels, n_fft//2 + 1], all non-negative."""
    edges = mel_filter_edges(cfg)
    bin_freqs = np.arange(cfg.num_bins) * cfg.sample_rate / cfg.n_fft
    lo = edges[:-2][:, None]
    center = edges[1:-1][:, None]
    hi = edges[2:][:, None]
    up = (bin_freqs[None, :] - lo) / np.maximum(center - lo, 1e-12)
    down = (hi - bin_freqs[None, :]) / np.maximum(hi - center, 1e-12)
    fb = np.maximum(0.0, np.minimum(up, down))
    return Tensor(fb.astype(np.float32))


def log_mel(audio, cfg: MelConfig = MelConfig()) -> Tensor:
    """log(mel power + 1e-5), shaped [1, 128, 1000]."""
    mag = stft_magnitude(audio, cfg).data.astype(np.float64)
    fb = mel_filterbank(cfg).data.astype(np.float64)
    mel_power = fb @ (mag * mag)
    out = np.log(mel_power + LOG_EPS)
    return Tensor(out.astype(np.float32)[None, :, :])


def load_wav(path, cfg: MelConfig = MelConfig()) -> np.ndarray:
    """Read a PCM WAV as mono float64 at cfg.sample_rate.

    16/32-bit integer and 32/64-bit float formats are accepted; stereo is
    averaged to mono; sample-rate mismatches use linear resampling.
    """
    rate, data = wavfile.read(path)
    a = np.asarray(data)
    if a.ndim == 2:
        a = a.mean(axis=1)
    if a.dtype == np.int16:
        a = a / 32768.0
    elif a.dtype == np.int32:
        a = a / 2147483648.0
    elif a.dtype == np.uint8:
        a = (a.astype(np.float64) - 128.0) / 128.0
    a = a.astype(np.float64)
    if rate != cfg.sample_rate:
        n_out = int(round(a.size * cfg.sample_rate / rate))
        t_in = np.arange(a.size) / rate
        t_out = np.arange(n_out) / cfg.sample_rate
        a = np.interp(t_out, t_in, a)
    return a
