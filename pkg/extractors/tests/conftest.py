import wave

import cv2
import numpy as np
import pytest

RATE = 16000


def write_wav(path, seconds, freq=None, rate=RATE, channels=1, signal=None):
    n = int(round(rate * seconds))
    if signal is not None:
        sig = np.asarray(signal)[:n]
    elif freq is None:
        sig = np.zeros(n)
    else:
        sig = 0.2 * np.sin(2 * np.pi * freq * np.arange(n) / rate)
    pcm = np.clip(sig * 32767, -32768, 32767).astype("<i2")
    if channels > 1:
        pcm = np.repeat(pcm[:, None], channels, axis=1)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(pcm.tobytes())
    return path


def write_frames(dirpath, count, seed=0, size=(48, 72)):
    dirpath.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(count):
        img = rng.integers(0, 256, size=size, dtype=np.uint8)
        cv2.imwrite(str(dirpath / f"frame{i:04d}.png"), img)
    return dirpath


@pytest.fixture
def tone_wav(tmp_path):
    return write_wav(tmp_path / "tone.wav", 10.0, freq=440.0)


@pytest.fixture
def frames_dir(tmp_path):
    return write_frames(tmp_path / "frames", 10)
