"""Per-word delivery features from audio and word timestamps.

Each time-aligned word becomes one 14-D vector:

  0  pitch mean (Hz, voiced frames in the word span)
  1  pitch std (Hz)
  2  pitch slope (Hz/s, least-squares over voiced frames)
  3  intensity mean (dB)
  4  intensity std (dB)
  5  word duration (s)
  6  preceding pause duration (s)
  7  long-pause flag (preceding pause > 0.5 s)
  8  local speech rate (words/s over the +-2-word window)
  9  local articulation rate (syllables/s over in-word time in the window)
  10 voiced fraction of frames in the word span
  11 energy peak (max frame dB in the word span)
  12 normalized word position (0 first word .. 1 last word)
  13 silence ratio over the +-2-word window

Frame analysis uses a 40 ms window with a 10 ms hop. Pitch comes from the
normalized autocorrelation searched over 75-500 Hz with parabolic peak
interpolation; a frame is voiced when the peak exceeds 0.55 and the frame
is not silent. Silence is energy below 35 dB under the signal peak, a
relative gate so that scaling the waveform by a positive constant moves
only the intensity dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

from .errors import AlignmentError, MediaError
from .text import syllable_count

DIM = 14
FRAME_S = 0.040
HOP_S = 0.010
PITCH_MIN_HZ = 75.0
PITCH_MAX_HZ = 500.0
VOICING_THRESHOLD = 0.55
LONG_PAUSE_S = 0.5
SILENCE_REL_DB = -35.0
RATE_WINDOW = 2  # words on each side for rate / silence-ratio windows

_DB_FLOOR = -120.0

ACOUSTIC_DIMS = (0, 1, 2, 3, 4, 10, 11)
TIMING_DIMS = (5, 6, 7, 8, 9, 12, 13)


@dataclass(frozen=True)
class DeliveryFeatures:
    vectors: np.ndarray  # W x 14 float32
    words: tuple[str, ...]
    has_audio: bool
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[1] != DIM:
            raise ValueError(f"delivery vectors must be Wx{DIM}")
        if self.vectors.shape[0] != len(self.words):
            raise ValueError("one vector per word required")


def load_wav(path) -> tuple[np.ndarray, int]:
    """Mono float64 samples in [-1, 1] plus sample rate."""
    try:
        rate, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise MediaError(f"cannot read WAV {path}: {exc}") from exc
    return _to_float(data), int(rate)


def _to_float(samples: np.ndarray) -> np.ndarray:
    x = np.asarray(samples)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if np.issubdtype(x.dtype, np.integer):
        info = np.iinfo(x.dtype)
        return x.astype(np.float64) / max(abs(info.min), info.max)
    return x.astype(np.float64)


def _frame_analysis(samples: np.ndarray, rate: int):
    """Per-frame (time, f0 or nan, dB, is_silent) arrays."""
    win = max(int(round(FRAME_S * rate)), 2)
    hop = max(int(round(HOP_S * rate)), 1)
    n_frames = max(1 + (len(samples) - win) // hop, 0)
    if n_frames == 0:
        raise MediaError("audio shorter than one analysis frame")

    lag_min = max(int(rate / PITCH_MAX_HZ), 1)
    lag_max = min(int(np.ceil(rate / PITCH_MIN_HZ)), win - 2)
    if lag_max <= lag_min:
        raise MediaError(f"sample rate {rate} too low for pitch analysis")

    times = np.empty(n_frames)
    f0 = np.full(n_frames, np.nan)
    db = np.empty(n_frames)
    rms = np.empty(n_frames)

    for i in range(n_frames):
        frame = samples[i * hop : i * hop + win]
        frame = frame - frame.mean()
        r = float(np.sqrt(np.mean(frame**2)))
        rms[i] = r
        db[i] = 20.0 * np.log10(r) if r > 0 else _DB_FLOOR
        times[i] = (i * hop + win / 2.0) / rate
        if r <= 0:
            continue
        ac = np.correlate(frame, frame, mode="full")[win - 1 :]
        if ac[0] <= 0:
            continue
        ac = ac / ac[0]
        seg = ac[lag_min : lag_max + 1]
        k = int(np.argmax(seg)) + lag_min
        if ac[k] < VOICING_THRESHOLD:
            continue
        lag = float(k)
        if 0 < k < len(ac) - 1:
            denom = ac[k - 1] - 2 * ac[k] + ac[k + 1]
            if denom < 0:
                lag += 0.5 * (ac[k - 1] - ac[k + 1]) / denom
        f0[i] = rate / lag

    peak_db = db.max()
    if peak_db <= _DB_FLOOR:
        raise MediaError("audio is silent")
    silent = db < peak_db + SILENCE_REL_DB
    f0[silent] = np.nan  # silence cannot be voiced
    return times, f0, db, silent


def _check_timestamps(word_timestamps, duration_s: float | None):
    if not word_timestamps:
        raise AlignmentError("no word timestamps")
    prev_end = 0.0
    for word, start, end in word_timestamps:
        if start < prev_end - 1e-9 or end < start:
            raise AlignmentError(
                f"timestamps for {word!r} overlap or run backwards"
            )
        prev_end = end
    if duration_s is not None and prev_end > duration_s + FRAME_S:
        raise AlignmentError(
            f"timestamps extend to {prev_end:.3f}s beyond "
            f"{duration_s:.3f}s of audio"
        )


def _timing_columns(word_timestamps) -> np.ndarray:
    """The seven timing-derived columns, shared by both extraction modes."""
    n = len(word_timestamps)
    out = np.zeros((n, DIM), dtype=np.float64)
    for i, (word, start, end) in enumerate(word_timestamps):
        duration = end - start
        pause = 0.0 if i == 0 else max(start - word_timestamps[i - 1][2], 0.0)
        lo = max(i - RATE_WINDOW, 0)
        hi = min(i + RATE_WINDOW, n - 1)
        span = word_timestamps[hi][2] - word_timestamps[lo][1]
        n_words = hi - lo + 1
        in_word = sum(word_timestamps[j][2] - word_timestamps[j][1] for j in range(lo, hi + 1))
        syllables = sum(syllable_count(word_timestamps[j][0]) for j in range(lo, hi + 1))
        out[i, 5] = duration
        out[i, 6] = pause
        out[i, 7] = 1.0 if pause > LONG_PAUSE_S else 0.0
        out[i, 8] = n_words / span if span > 0 else 0.0
        out[i, 9] = syllables / in_word if in_word > 0 else 0.0
        out[i, 12] = i / (n - 1) if n > 1 else 0.0
        out[i, 13] = max(span - in_word, 0.0) / span if span > 0 else 0.0
    return out


def delivery_features(
    audio: np.ndarray, rate: int, word_timestamps
) -> DeliveryFeatures:
    """Acoustic + timing delivery features for time-aligned words.

    ``audio`` is mono PCM (integer samples are rescaled to [-1, 1]).
    Raises AlignmentError for bad timestamps and MediaError for audio the
    frame analysis cannot use. Fully unvoiced words get zero pitch
    statistics and voiced fraction 0.
    """
    samples = _to_float(audio)
    if samples.size == 0:
        raise MediaError("empty audio")
    duration_s = len(samples) / rate
    _check_timestamps(word_timestamps, duration_s)
    times, f0, db, silent = _frame_analysis(samples, rate)

    vectors = _timing_columns(word_timestamps)
    for i, (word, start, end) in enumerate(word_timestamps):
        in_word = (times >= start) & (times < end)
        if not in_word.any():
            # word shorter than a hop: take the nearest frame
            in_word = np.zeros_like(in_word)
            in_word[int(np.argmin(np.abs(times - (start + end) / 2)))] = True
        word_f0 = f0[in_word]
        voiced = ~np.isnan(word_f0)
        if voiced.any():
            vf0 = word_f0[voiced]
            vectors[i, 0] = vf0.mean()
            vectors[i, 1] = vf0.std()
            if vf0.size >= 2:
                t = times[in_word][voiced]
                vectors[i, 2] = np.polyfit(t, vf0, 1)[0]
        vectors[i, 3] = db[in_word].mean()
        vectors[i, 4] = db[in_word].std()
        vectors[i, 10] = voiced.mean()
        vectors[i, 11] = db[in_word].max()

        # silence ratio over the word window, refined with frame energy
        n = len(word_timestamps)
        lo = max(i - RATE_WINDOW, 0)
        hi = min(i + RATE_WINDOW, n - 1)
        in_window = (times >= word_timestamps[lo][1]) & (times < word_timestamps[hi][2])
        if in_window.any():
            vectors[i, 13] = silent[in_window].mean()

    return DeliveryFeatures(
        vectors=vectors.astype(np.float32),
        words=tuple(w for w, _, _ in word_timestamps),
        has_audio=True,
        metadata={"sample_rate": int(rate), "duration_s": duration_s},
    )


def delivery_features_from_transcript(word_timestamps) -> DeliveryFeatures:
    """Degraded audio-free mode: timing-derived columns only.

    Pitch, intensity, voicing, and energy-peak columns stay zero and the
    metadata records the missing-audio mask so downstream consumers can
    tell planted zeros from measured ones.
    """
    _check_timestamps(word_timestamps, None)
    vectors = _timing_columns(word_timestamps)
    return DeliveryFeatures(
        vectors=vectors.astype(np.float32),
        words=tuple(w for w, _, _ in word_timestamps),
        has_audio=False,
        metadata={"acoustic_dims_masked": list(ACOUSTIC_DIMS)},
    )
