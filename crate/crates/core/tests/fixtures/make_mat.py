"""Regenerates the MAT fixtures with scipy (run from the repo root)."""
import numpy as np
from scipy.io import savemat

core = "crates/core/tests/fixtures"
cli = "crates/cli/tests/fixtures"

small = np.arange(24, dtype=np.float64).reshape(3, 8) * 0.5 - 3.0
names = np.empty(3, dtype=object)
names[:] = ["Fz", "Cz", "Pz"]
savemat(f"{core}/small.mat", {"data": small, "fs": 250.0, "ch_names": names}, format="5")
savemat(f"{core}/small_compressed.mat", {"data": small, "fs": 250.0, "ch_names": names},
        format="5", do_compression=True)
savemat(f"{core}/transposed.mat", {"X": small.T.copy(), "srate": 128.0,
                                     "labels": np.array(["Fz", "Cz", "Pz"])}, format="5")
savemat(f"{core}/no_rate.mat", {"eeg": small.astype(np.float32)}, format="5")
savemat(f"{core}/int16.mat", {"eeg": (small * 2).astype(np.int16), "fs": np.array([[512]], dtype=np.uint16)},
        format="5")

rng = np.random.default_rng(7)
fs, n = 256.0, 2560
t = np.arange(n) / fs
for i, name in enumerate(["mat_a", "mat_b"]):
    rows = []
    for ch in range(4):
        alpha = 20e-6 * np.sin(2 * np.pi * 10.0 * t + 0.7 * ch + i)
        rows.append(alpha + 5e-6 * rng.standard_normal(n))
    names = np.empty(4, dtype=object)
    names[:] = ["Cz", "C3", "C4", "Pz"]
    savemat(f"{cli}/{name}.mat", {"data": np.array(rows), "fs": fs, "ch_names": names},
            format="5", do_compression=True)
