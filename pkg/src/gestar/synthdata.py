"""Synthetic multimodal gesture dataset generator.

No real sensor recordings are used anywhere: every sample is synthesized
from a parametric 2-D stroke template plus a participant profile, at the
scale of a realistic corpus (defaults mirror a 10k-sample / 200-participant
/ 40%-motor-impaired / 15-class layout, shrunk to desk size).

Construction notes:

* Each gesture class owns a waypoint polyline. The polyline is resampled
  into a closed loop and smoothed to its first three Fourier harmonics.
  Sampled at 64 Hz over a 64-sample window, an unimpaired stroke therefore
  lives entirely on exact DFT bins at 1..3 Hz, while simulated tremor lives
  in the physiological 4-12 Hz band: the two are exactly separable in the
  spectrum, which the tests exploit.
* Motor impairment is modeled as a slower, smaller, shakier stroke: the
  template is traversed at ``speed_factor`` (so the window captures only
  part of it), scaled by ``amplitude_scale``, and a tremor sinusoid is
  injected into the accelerometer and (attenuated) into the rasterized
  trajectory.
* The accelerometer channel is the second difference of the stroke
  trajectory converted to units of g; EMG electrodes respond to stroke
  speed with direction-tuned gains; the visual channel rasterizes the
  trajectory, dimmed by the lighting context.

Every sample derives its own seed from (master seed, sample index), so
generation is order-independent and fully reproducible.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError, ValidationError
from .rng import derive_seed, rng_for

N_CLASSES = 15
N_HARMONICS = 3
STROKE_RADIUS = 0.22  # max template deflection in frame units
PHYS_SCALE_M = 0.25  # meters spanned by one frame unit
GRAVITY = 9.81
INK = 0.35  # intensity deposited per rasterized trajectory point
TREMOR_BAND_HZ = (4.0, 12.0)
VISUAL_WOBBLE_PER_G = 0.02  # frame units of jitter per g of tremor amplitude


# ---------------------------------------------------------------------------
# stroke templates


def _resample_closed(waypoints: list[tuple[float, float]], n: int = 256) -> np.ndarray:
    pts = np.asarray(waypoints, dtype=np.float64)
    closed = np.vstack([pts, pts[:1]])
    seg = np.diff(closed, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    u = np.linspace(0.0, cum[-1], n, endpoint=False)
    x = np.interp(u, cum, closed[:, 0])
    y = np.interp(u, cum, closed[:, 1])
    return np.stack([x, y], axis=1)


def _fourier_fit(path: np.ndarray, n_harmonics: int = N_HARMONICS) -> np.ndarray:
    """Truncated Fourier loop coefficients, centered and scaled to the stroke box.

    Returns ``coeffs[axis, 0|1, m]`` for cosine/sine amplitude of harmonic m
    (m = 1..n_harmonics; the constant term is dropped so templates are
    centered at the origin).
    """
    n = len(path)
    idx = np.arange(n)
    coeffs = np.zeros((2, 2, n_harmonics + 1))
    for m in range(1, n_harmonics + 1):
        c = np.cos(2.0 * np.pi * m * idx / n)
        s = np.sin(2.0 * np.pi * m * idx / n)
        for ax in range(2):
            coeffs[ax, 0, m] = 2.0 / n * float((path[:, ax] * c).sum())
            coeffs[ax, 1, m] = 2.0 / n * float((path[:, ax] * s).sum())
    reach = np.abs(coeffs).sum(axis=(1, 2)).max()  # bound on per-axis deflection
    if reach > 0:
        coeffs *= STROKE_RADIUS / reach
    return coeffs


def _eval_loop(coeffs: np.ndarray, progress: np.ndarray) -> np.ndarray:
    """Continuous template position for loop progress values (1.0 = full loop)."""
    out = np.zeros((len(progress), 2))
    for m in range(1, coeffs.shape[2]):
        ang = 2.0 * np.pi * m * progress
        c, s = np.cos(ang), np.sin(ang)
        for ax in range(2):
            out[:, ax] += coeffs[ax, 0, m] * c + coeffs[ax, 1, m] * s
    return out


def _circle_points(cx, cy, rx, ry, n=12, start=0.0, sweep=2.0 * math.pi):
    ang = start + sweep * np.arange(n) / n
    return [(cx + rx * math.cos(a), cy + ry * math.sin(a)) for a in ang]


def _eight_points(n=16, flip=False):
    theta = 2.0 * np.pi * np.arange(n) / n
    x = 0.5 + 0.40 * np.sin(theta)
    y = 0.5 + 0.32 * np.sin(theta) * np.cos(theta)
    return list(zip(y, x)) if flip else list(zip(x, y))


TEMPLATE_WAYPOINTS: dict[str, list[tuple[float, float]]] = {
    "circle": _circle_points(0.5, 0.5, 0.35, 0.35),
    "ellipse_wide": _circle_points(0.5, 0.5, 0.42, 0.18),
    "ellipse_tall": _circle_points(0.5, 0.5, 0.18, 0.42),
    "sweep_right": [(0.10, 0.50), (0.90, 0.50)],
    "sweep_up": [(0.50, 0.10), (0.50, 0.90)],
    "slash_up": [(0.15, 0.15), (0.85, 0.85)],
    "slash_down": [(0.15, 0.85), (0.85, 0.15)],
    "square": [(0.20, 0.20), (0.80, 0.20), (0.80, 0.80), (0.20, 0.80)],
    "triangle": [(0.50, 0.85), (0.15, 0.20), (0.85, 0.20)],
    "figure_eight": _eight_points(),
    "eight_sideways": _eight_points(flip=True),
    "vee": [(0.15, 0.80), (0.50, 0.20), (0.85, 0.80)],
    "caret": [(0.15, 0.20), (0.50, 0.80), (0.85, 0.20)],
    "zigzag": [(0.10, 0.30), (0.37, 0.70), (0.63, 0.30), (0.90, 0.70)],
    "arc_over": _circle_points(0.5, 0.35, 0.35, 0.35, n=7, start=0.0, sweep=math.pi),
}

TEMPLATE_NAMES = list(TEMPLATE_WAYPOINTS)
TEMPLATE_COEFFS = np.stack(
    [_fourier_fit(_resample_closed(wps)) for wps in TEMPLATE_WAYPOINTS.values()]
)


# ---------------------------------------------------------------------------
# specs, profiles, samples


@dataclass
class DatasetSpec:
    n_samples: int = 1_000
    n_participants: int = 40
    impaired_fraction: float = 0.4
    n_classes: int = N_CLASSES
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    n_clients: int = 10
    # sensor geometry
    series_len: int = 64
    sample_rate_hz: float = 64.0
    frame_size: int = 32
    n_electrodes: int = 8
    # noise levels, balanced so no single modality suffices on its own
    accel_noise_g: float = 0.08
    emg_noise: float = 0.02
    visual_noise: float = 0.04

    def __post_init__(self):
        self.split_fractions = tuple(float(f) for f in self.split_fractions)
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ParameterError(f"split fractions must sum to 1, got {self.split_fractions}")
        if not 0.0 <= self.impaired_fraction <= 1.0:
            raise ParameterError(f"impaired fraction must be in [0, 1], got {self.impaired_fraction}")
        if self.n_samples < self.n_participants:
            raise ParameterError("need at least one sample per participant")

    @classmethod
    def desk(cls, seed: int = 0) -> "DatasetSpec":
        return cls(seed=seed)

    @classmethod
    def paper_scale(cls, seed: int = 0) -> "DatasetSpec":
        return cls(n_samples=10_000, n_participants=200, n_clients=100, seed=seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split_fractions"] = list(self.split_fractions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        return cls(**d)


@dataclass(frozen=True)
class ParticipantProfile:
    participant_id: int
    impaired: bool
    tremor_amplitude_g: float
    tremor_freq_hz: float
    speed_factor: float
    amplitude_scale: float

    def __post_init__(self):
        if not self.impaired:
            if self.tremor_amplitude_g != 0.0 or self.speed_factor != 1.0 or self.amplitude_scale != 1.0:
                raise ValidationError("unimpaired profiles must be identity profiles")
        if self.tremor_amplitude_g < 0:
            raise ValidationError("tremor amplitude must be >= 0")
        if not TREMOR_BAND_HZ[0] <= self.tremor_freq_hz <= TREMOR_BAND_HZ[1]:
            raise ValidationError(f"tremor frequency outside {TREMOR_BAND_HZ}: {self.tremor_freq_hz}")
        if not 0.0 < self.speed_factor <= 1.0 or not 0.0 < self.amplitude_scale <= 1.0:
            raise ValidationError("speed factor and amplitude scale must be in (0, 1]")


@dataclass
class GestureSample:
    label: int
    frame: np.ndarray  # [F, F] in [0, 1]
    accel: np.ndarray  # [T, 3] in g
    emg: np.ndarray  # [T, E] normalized envelopes
    context: np.ndarray  # [lighting, fatigue]
    participant_id: int


def generate_participant(seed: int, impaired: bool, participant_id: int | None = None) -> ParticipantProfile:
    """Draw one profile; impairment parameters are uniform over fixed ranges."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    pid = int(participant_id) if participant_id is not None else int(seed) & 0x7FFFFFFF
    if not impaired:
        return ParticipantProfile(pid, False, 0.0, 8.0, 1.0, 1.0)
    return ParticipantProfile(
        participant_id=pid,
        impaired=True,
        tremor_amplitude_g=float(rng.uniform(0.05, 0.3)),
        tremor_freq_hz=float(rng.uniform(*TREMOR_BAND_HZ)),
        speed_factor=float(rng.uniform(0.4, 0.9)),
        amplitude_scale=float(rng.uniform(0.5, 0.9)),
    )


def _rasterize(points01: np.ndarray, frame_size: int) -> np.ndarray:
    """Bilinear splat of trajectory points onto the frame; clipped to [0, 1]."""
    img = np.zeros((frame_size, frame_size))
    xy = np.clip(points01, 0.0, 1.0) * (frame_size - 1)
    x, y = xy[:, 0], xy[:, 1]
    x0, y0 = np.floor(x).astype(int), np.floor(y).astype(int)
    fx, fy = x - x0, y - y0
    x1 = np.minimum(x0 + 1, frame_size - 1)
    y1 = np.minimum(y0 + 1, frame_size - 1)
    np.add.at(img, (y0, x0), INK * (1 - fx) * (1 - fy))
    np.add.at(img, (y0, x1), INK * fx * (1 - fy))
    np.add.at(img, (y1, x0), INK * (1 - fx) * fy)
    np.add.at(img, (y1, x1), INK * fx * fy)
    return np.clip(img, 0.0, 1.0)


def generate_sample(
    profile: ParticipantProfile, label: int, seed: int, spec: DatasetSpec | None = None
) -> GestureSample:
    """Synthesize one multimodal sample; bit-deterministic in its arguments."""
    if not 0 <= int(label) < N_CLASSES:
        raise ParameterError(f"label must be in [0, {N_CLASSES - 1}], got {label}")
    spec = spec if spec is not None else DatasetSpec()
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    t_len, fs, f_sz, n_el = spec.series_len, spec.sample_rate_hz, spec.frame_size, spec.n_electrodes

    # per-sample stroke variation: small rotation, harmonic jitter, center shift;
    # the jitter is wide enough that accel alone cannot separate all classes
    coeffs = TEMPLATE_COEFFS[label].copy()
    theta = rng.uniform(-0.26, 0.26)
    jitter = 1.0 + rng.uniform(-0.35, 0.35, size=N_HARMONICS)
    coeffs[:, :, 1:] *= jitter[None, None, :]
    coeffs *= profile.amplitude_scale
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    center = 0.5 + rng.uniform(-0.03, 0.03, size=2)

    # trajectory over t = -1 .. T (extra endpoints for clean second differences);
    # slow participants cover only speed_factor of the loop inside the window
    t_idx = np.arange(-1, t_len + 1)
    progress = profile.speed_factor * t_idx / t_len
    pos = _eval_loop(coeffs, progress) @ rot.T + center  # [T+2, 2]

    # accelerometer: second difference of the physical trajectory, in g
    pos_m = pos * PHYS_SCALE_M
    acc_xy = (pos_m[2:] - 2.0 * pos_m[1:-1] + pos_m[:-2]) * fs * fs / GRAVITY
    accel = np.zeros((t_len, 3))
    accel[:, :2] = acc_xy
    t_sec = np.arange(t_len) / fs
    tremor_phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
    if profile.tremor_amplitude_g > 0.0:
        amp, freq = profile.tremor_amplitude_g, profile.tremor_freq_hz
        for ax, gain in enumerate((1.0, 0.8, 0.5)):
            accel[:, ax] += gain * amp * np.sin(2.0 * np.pi * freq * t_sec + tremor_phase[ax])
    if spec.accel_noise_g > 0.0:
        accel += rng.normal(0.0, spec.accel_noise_g, size=accel.shape)

    # context drives frame brightness and correlates with impairment
    lighting = float(rng.uniform(0.2, 1.0))
    fatigue = float(rng.uniform(0.35, 0.95) if profile.impaired else rng.uniform(0.05, 0.55))

    # visual: rasterized trajectory with tremor wobble, lighting dimming, noise
    pos_v = pos[1:-1].copy()
    if profile.tremor_amplitude_g > 0.0:
        wob = VISUAL_WOBBLE_PER_G * profile.tremor_amplitude_g
        for ax in range(2):
            pos_v[:, ax] += wob * np.sin(
                2.0 * np.pi * profile.tremor_freq_hz * t_sec + tremor_phase[ax]
            )
    frame = _rasterize(pos_v, f_sz) * (0.35 + 0.65 * lighting)
    if spec.visual_noise > 0.0:
        frame = frame + rng.normal(0.0, spec.visual_noise, size=frame.shape)
    frame = np.clip(frame, 0.0, 1.0)

    # EMG: direction-tuned speed envelopes with stable per-participant gains
    vel = (pos[2:] - pos[:-2]) * 0.5  # [T, 2]
    speed = np.hypot(vel[:, 0], vel[:, 1])
    speed_norm = speed / (speed.max() + 1e-9)
    direction = np.where(speed[:, None] > 1e-12, vel / (speed[:, None] + 1e-12), 0.0)
    elec = np.arange(n_el)
    pref = np.stack([np.cos(2 * np.pi * elec / n_el), np.sin(2 * np.pi * elec / n_el)], axis=1)
    tuning = np.maximum(direction @ pref.T, 0.0)  # [T, E]
    gains = 1.0 + 0.15 * np.cos(2 * np.pi * elec / n_el + 0.7 * profile.participant_id)
    act = (0.25 + 0.75 * tuning) * speed_norm[:, None] * gains[None, :]
    kernel = np.ones(4) / 4.0
    emg = np.stack([np.convolve(act[:, e], kernel, mode="same") for e in range(n_el)], axis=1)
    if profile.tremor_amplitude_g > 0.0:
        phases_e = tremor_phase[0] + 2 * np.pi * elec / n_el
        ripple = np.abs(
            np.sin(2.0 * np.pi * profile.tremor_freq_hz * t_sec[:, None] + phases_e[None, :])
        )
        emg = emg + 0.4 * profile.tremor_amplitude_g * ripple
    if spec.emg_noise > 0.0:
        emg = emg + rng.normal(0.0, spec.emg_noise, size=emg.shape)

    return GestureSample(
        label=int(label),
        frame=frame,
        accel=accel,
        emg=emg,
        context=np.array([lighting, fatigue]),
        participant_id=profile.participant_id,
    )


# ---------------------------------------------------------------------------
# dataset assembly, splits, partitions


@dataclass
class Split:
    train_participants: list[int]
    val_participants: list[int]
    test_participants: list[int]
    train_indices: list[int]
    val_indices: list[int]
    test_indices: list[int]

    def to_dict(self) -> dict:
        return {
            "train": {"participants": self.train_participants, "samples": self.train_indices},
            "val": {"participants": self.val_participants, "samples": self.val_indices},
            "test": {"participants": self.test_participants, "samples": self.test_indices},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Split":
        return cls(
            train_participants=list(d["train"]["participants"]),
            val_participants=list(d["val"]["participants"]),
            test_participants=list(d["test"]["participants"]),
            train_indices=list(d["train"]["samples"]),
            val_indices=list(d["val"]["samples"]),
            test_indices=list(d["test"]["samples"]),
        )


@dataclass
class ClientPartition:
    client_id: int
    sample_indices: list[int]
    participant_ids: list[int]


@dataclass
class Dataset:
    spec: DatasetSpec
    profiles: list[ParticipantProfile]
    samples: list[GestureSample]
    split: Split
    partitions: list[ClientPartition]

    def profile_of(self, participant_id: int) -> ParticipantProfile:
        return self._profile_map[participant_id]

    def __post_init__(self):
        self._profile_map = {p.participant_id: p for p in self.profiles}

    def samples_at(self, indices) -> list[GestureSample]:
        return [self.samples[i] for i in indices]


def _largest_remainder(total: int, fractions: tuple[float, ...]) -> list[int]:
    ideal = [total * f for f in fractions]
    counts = [int(math.floor(v)) for v in ideal]
    leftover = total - sum(counts)
    remainders = sorted(
        range(len(fractions)), key=lambda i: (ideal[i] - counts[i], i), reverse=True
    )
    for i in remainders[:leftover]:
        counts[i] += 1
    return counts


def split_dataset(profiles: list[ParticipantProfile], spec: DatasetSpec, samples_by_pid: dict[int, list[int]]) -> Split:
    """Participant-level split, stratified by impairment, with exact global sizes."""
    fractions = spec.split_fractions
    total_counts = _largest_remainder(len(profiles), fractions)
    if min(total_counts) < 1:
        raise ParameterError(f"degenerate split: participant counts {total_counts}")
    rng = rng_for(spec.seed, "split")
    impaired = [p.participant_id for p in profiles if p.impaired]
    unimpaired = [p.participant_id for p in profiles if not p.impaired]
    rng.shuffle(impaired)
    rng.shuffle(unimpaired)
    imp_counts = _largest_remainder(len(impaired), fractions)
    # repair stratum quotas so the global sizes hold exactly
    for i in range(3):
        imp_counts[i] = min(imp_counts[i], total_counts[i])
    deficit = len(impaired) - sum(imp_counts)
    i = 0
    while deficit > 0:
        if imp_counts[i % 3] < total_counts[i % 3]:
            imp_counts[i % 3] += 1
            deficit -= 1
        i += 1
    unimp_counts = [total_counts[i] - imp_counts[i] for i in range(3)]
    buckets: list[list[int]] = [[], [], []]
    pos = 0
    for i in range(3):
        buckets[i].extend(impaired[pos : pos + imp_counts[i]])
        pos += imp_counts[i]
    pos = 0
    for i in range(3):
        buckets[i].extend(unimpaired[pos : pos + unimp_counts[i]])
        pos += unimp_counts[i]
    buckets = [sorted(b) for b in buckets]

    def indices_for(pids: list[int]) -> list[int]:
        out: list[int] = []
        for pid in pids:
            out.extend(samples_by_pid[pid])
        return sorted(out)

    return Split(
        train_participants=buckets[0],
        val_participants=buckets[1],
        test_participants=buckets[2],
        train_indices=indices_for(buckets[0]),
        val_indices=indices_for(buckets[1]),
        test_indices=indices_for(buckets[2]),
    )


def partition_clients(dataset: Dataset, n_clients: int, seed: int) -> list[ClientPartition]:
    """Round-robin participants onto clients; participant-level non-IID."""
    train_pids = list(dataset.split.train_participants)
    if n_clients < 1 or n_clients > len(train_pids):
        raise ParameterError(
            f"client count must be in [1, {len(train_pids)}] (training participants), got {n_clients}"
        )
    rng = rng_for(seed, "partition")
    shuffled = list(train_pids)
    rng.shuffle(shuffled)
    owners: list[list[int]] = [[] for _ in range(n_clients)]
    for i, pid in enumerate(shuffled):
        owners[i % n_clients].append(pid)
    samples_by_pid: dict[int, list[int]] = {}
    for idx in dataset.split.train_indices:
        samples_by_pid.setdefault(dataset.samples[idx].participant_id, []).append(idx)
    partitions = []
    for cid, pids in enumerate(owners):
        indices = sorted(i for pid in pids for i in samples_by_pid[pid])
        partitions.append(
            ClientPartition(client_id=cid, sample_indices=indices, participant_ids=sorted(pids))
        )
    return partitions


def partition_iid(dataset: Dataset, n_clients: int, seed: int) -> list[ClientPartition]:
    """Sample-level IID partition; evaluation-only mode that deliberately
    ignores the participant-locality rule of :func:`partition_clients`."""
    if n_clients < 1 or n_clients > len(dataset.split.train_indices):
        raise ParameterError(f"client count out of range: {n_clients}")
    rng = rng_for(seed, "partition-iid")
    indices = list(dataset.split.train_indices)
    rng.shuffle(indices)
    partitions = []
    for cid in range(n_clients):
        chunk = sorted(indices[cid::n_clients])
        pids = sorted({dataset.samples[i].participant_id for i in chunk})
        partitions.append(ClientPartition(client_id=cid, sample_indices=chunk, participant_ids=pids))
    return partitions


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """Full dataset: profiles, samples, stratified split, default partitions."""
    n_imp = int(round(spec.n_participants * spec.impaired_fraction))
    impaired_ids = set(
        rng_for(spec.seed, "impairment").choice(spec.n_participants, size=n_imp, replace=False).tolist()
    )
    profiles = [
        generate_participant(
            derive_seed(spec.seed, "participant", pid), pid in impaired_ids, participant_id=pid
        )
        for pid in range(spec.n_participants)
    ]
    per_participant = spec.n_samples // spec.n_participants
    extra = spec.n_samples - per_participant * spec.n_participants
    samples: list[GestureSample] = []
    samples_by_pid: dict[int, list[int]] = {p.participant_id: [] for p in profiles}
    index = 0
    for pid in range(spec.n_participants):
        count = per_participant + (1 if pid < extra else 0)
        for _ in range(count):
            label = index % spec.n_classes  # balanced within +-1 per class
            sample = generate_sample(
                profiles[pid], label, derive_seed(spec.seed, "sample", index), spec
            )
            samples.append(sample)
            samples_by_pid[pid].append(index)
            index += 1
    split = split_dataset(profiles, spec, samples_by_pid)
    dataset = Dataset(spec=spec, profiles=profiles, samples=samples, split=split, partitions=[])
    dataset.partitions = partition_clients(dataset, spec.n_clients, spec.seed)
    return dataset


# ---------------------------------------------------------------------------
# classical reference baseline (generator sanity diagnostics)


def accel_statistics(samples: list[GestureSample]) -> np.ndarray:
    """Per-sample accel summary features for the nearest-centroid baseline."""
    feats = []
    for s in samples:
        a = s.accel
        feats.append(
            np.concatenate(
                [a.mean(axis=0), a.std(axis=0), [np.abs(a).mean(), float((a * a).sum())]]
            )
        )
    return np.asarray(feats)


class NearestCentroidBaseline:
    """Nearest class centroid over z-scored accel statistics."""

    def fit(self, samples: list[GestureSample]) -> "NearestCentroidBaseline":
        feats = accel_statistics(samples)
        self.mu = feats.mean(axis=0)
        self.sigma = feats.std(axis=0) + 1e-9
        z = (feats - self.mu) / self.sigma
        labels = np.asarray([s.label for s in samples])
        self.centroids = np.stack(
            [z[labels == c].mean(axis=0) if np.any(labels == c) else np.zeros(z.shape[1]) for c in range(N_CLASSES)]
        )
        return self

    def predict(self, samples: list[GestureSample]) -> np.ndarray:
        z = (accel_statistics(samples) - self.mu) / self.sigma
        dists = ((z[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(dists, axis=1)

    def accuracy(self, samples: list[GestureSample]) -> float:
        if not samples:
            return float("nan")
        pred = self.predict(samples)
        labels = np.asarray([s.label for s in samples])
        return float((pred == labels).mean())
