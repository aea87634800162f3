"""Synthetic two-group cohorts with a known connectivity difference.

Group A subjects carry elevated cross-channel autoregressive coupling (a
directed ring at lag 1) relative to group B, on top of shared per-channel
dynamics.  The contrast shows up in all three feature domains, which makes
these cohorts a full-pipeline ground truth.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .eeg_io import CohortManifest, EegRecording, ManifestEntry, save_manifest, save_recording_csv
from .seeding import derive_rng
from .var_model import companion_spectral_radius, simulate_var


def synthetic_subject(
    subject_id: str,
    label: str,
    strong_coupling: bool,
    seed: int,
    channels: int = 16,
    samples: int = 1536,
    rate: float = 128.0,
) -> EegRecording:
    """One subject's recording from seeded VAR(2) dynamics."""
    rng = derive_rng(seed, "subject", subject_id)
    n = channels
    coeffs = np.zeros((2, n, n))
    coeffs[0] += np.diag(0.35 + 0.03 * rng.standard_normal(n))
    coeffs[1] += np.diag(0.15 + 0.03 * rng.standard_normal(n))
    base = 0.30 if strong_coupling else 0.05
    ring = np.clip(base + 0.02 * rng.standard_normal(n), 0.0, None)
    for i in range(n):
        coeffs[0, i, (i + 1) % n] += ring[i]
    radius = companion_spectral_radius(coeffs)
    if radius >= 0.95:
        coeffs *= 0.95 / radius
    return simulate_var(
        coeffs, np.eye(n), samples, derive_rng(seed, "noise", subject_id),
        rate=rate, subject_id=subject_id, label=label,
    )


def make_synthetic_cohort(
    out_dir: str | Path,
    seed: int,
    n_group_a: int = 45,
    n_group_b: int = 39,
    channels: int = 16,
    samples: int = 1536,
    rate: float = 128.0,
    class_names: tuple[str, str] = ("SZ", "HC"),
) -> Path:
    """Write recordings plus a manifest; returns the manifest path.

    Group A (first class name) is the strongly coupled group.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    specs = [(class_names[0], True, i) for i in range(n_group_a)] + [
        (class_names[1], False, i) for i in range(n_group_b)
    ]
    for label, strong, i in specs:
        sid = f"{label.lower()}{i:03d}"
        rec = synthetic_subject(sid, label, strong, seed, channels, samples, rate)
        fname = f"{sid}.csv"
        save_recording_csv(rec, out_dir / fname)
        entries.append(ManifestEntry(path=fname, subject_id=sid, label=label))
    manifest = CohortManifest(entries=tuple(entries), class_names=class_names)
    manifest_path = out_dir / "manifest.csv"
    save_manifest(manifest, manifest_path)
    return manifest_path
