"""Tabular Q-learning over a simulated adaptive-interface loop.

The interface is described by menu size, interaction mode, and visual
contrast (18 configurations). The agent's state combines the user's
inferred capability bucket (from rolling gesture-recognition accuracy over
the last few interactions) with the current configuration: 54 states. An
action replaces the whole configuration.

Real users are replaced by :class:`SimulatedUser`: a latent preference
table maps (true capability, configuration) to mean completion time,
success probability, and feedback score. The table deliberately favors
the accessibility configuration (large menus, hybrid input, high contrast)
for low-capability users, which is the behavior the trained policy is
expected to discover.

Capability inference uses the gesture recognizer: each user's recognition
accuracy is measured once on their held-out samples, and per-step
correctness is drawn against it. Constants here (capability thresholds
0.6/0.85, reward shape, preference slopes) are modeling choices, not
measured values.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ParameterError, ValidationError
from .rng import rng_for
from .synthdata import ParticipantProfile

MENU_SIZES = ("small", "medium", "large")
MODES = ("gesture", "voice", "hybrid")
CONTRASTS = ("low", "high")
CAPABILITIES = ("low", "medium", "high")

N_ACTIONS = len(MENU_SIZES) * len(MODES) * len(CONTRASTS)  # 18
N_STATES = len(CAPABILITIES) * N_ACTIONS  # 54

CAPABILITY_THRESHOLDS = (0.6, 0.85)  # rolling accuracy cut points
STATIC_LATENCY_MS = 300.0  # declared modeling constant for the static row


@dataclass(frozen=True)
class InterfaceConfig:
    menu_size: str
    mode: str
    contrast: str

    def __post_init__(self):
        if self.menu_size not in MENU_SIZES:
            raise ValidationError(f"unknown menu size {self.menu_size!r}")
        if self.mode not in MODES:
            raise ValidationError(f"unknown interaction mode {self.mode!r}")
        if self.contrast not in CONTRASTS:
            raise ValidationError(f"unknown contrast {self.contrast!r}")

    @property
    def index(self) -> int:
        return (
            MENU_SIZES.index(self.menu_size) * len(MODES) * len(CONTRASTS)
            + MODES.index(self.mode) * len(CONTRASTS)
            + CONTRASTS.index(self.contrast)
        )

    @classmethod
    def from_index(cls, index: int) -> "InterfaceConfig":
        if not 0 <= index < N_ACTIONS:
            raise ParameterError(f"action index out of range: {index}")
        menu, rest = divmod(index, len(MODES) * len(CONTRASTS))
        mode, contrast = divmod(rest, len(CONTRASTS))
        return cls(MENU_SIZES[menu], MODES[mode], CONTRASTS[contrast])


ALL_CONFIGS = tuple(InterfaceConfig.from_index(i) for i in range(N_ACTIONS))
DEFAULT_STATIC_CONFIG = InterfaceConfig("medium", "gesture", "high")
ACCESSIBLE_CONFIG = InterfaceConfig("large", "hybrid", "high")


@dataclass(frozen=True)
class UserState:
    capability: str
    config: InterfaceConfig

    def __post_init__(self):
        if self.capability not in CAPABILITIES:
            raise ValidationError(f"unknown capability bucket {self.capability!r}")

    @property
    def index(self) -> int:
        return CAPABILITIES.index(self.capability) * N_ACTIONS + self.config.index

    @classmethod
    def from_index(cls, index: int) -> "UserState":
        if not 0 <= index < N_STATES:
            raise ParameterError(f"state index out of range: {index}")
        cap, cfg = divmod(index, N_ACTIONS)
        return cls(CAPABILITIES[cap], InterfaceConfig.from_index(cfg))


def bucket_from_accuracy(accuracy: float) -> str:
    if accuracy < CAPABILITY_THRESHOLDS[0]:
        return "low"
    if accuracy < CAPABILITY_THRESHOLDS[1]:
        return "medium"
    return "high"


@dataclass
class RLHyperparams:
    lr: float = 0.1
    lr_schedule: str = "visit_decay"  # per-cell 1/(1+n) sample averaging, or "constant"
    # near-myopic discount: an action replaces the whole configuration, so
    # long-horizon credit is minimal and a large discount only adds bootstrap
    # noise that swamps the small per-action reward margins
    discount: float = 0.05
    epsilon0: float = 0.3
    epsilon_decay: float = 0.995
    epsilon_min: float = 0.25  # floor keeps rare (state, action) cells sampled
    episode_length: int = 30
    w_time: float = 0.25
    w_feedback: float = 0.75
    accuracy_window: int = 10

    def __post_init__(self):
        if not 0.0 < self.lr <= 1.0:
            raise ParameterError(f"learning rate must be in (0, 1], got {self.lr}")
        if self.lr_schedule not in ("constant", "visit_decay"):
            raise ParameterError(f"unknown lr schedule {self.lr_schedule!r}")
        if not 0.0 <= self.discount < 1.0:
            raise ParameterError(f"discount must be in [0, 1), got {self.discount}")
        for eps in (self.epsilon0, self.epsilon_min):
            if not 0.0 <= eps <= 1.0:
                raise ParameterError(f"epsilon must be in [0, 1], got {eps}")
        if self.w_time < 0 or self.w_feedback < 0:
            raise ParameterError("reward weights must be >= 0")
        if self.episode_length < 1 or self.accuracy_window < 1:
            raise ParameterError("episode length and accuracy window must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RLHyperparams":
        return cls(**d)


class QTable:
    """Dense (state, action) value table; exactly 54 x 18 entries."""

    def __init__(self, values: np.ndarray | None = None):
        if values is None:
            values = np.zeros((N_STATES, N_ACTIONS))
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (N_STATES, N_ACTIONS):
            raise ValidationError(f"Q table must be {N_STATES}x{N_ACTIONS}, got {values.shape}")
        self.values = values

    def greedy_action(self, state_index: int) -> int:
        return int(np.argmax(self.values[state_index]))

    def copy(self) -> "QTable":
        return QTable(self.values.copy())

    def export_csv(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["capability", "state_menu", "state_mode", "state_contrast",
                 "action_menu", "action_mode", "action_contrast", "q_value"]
            )
            for s in range(N_STATES):
                st = UserState.from_index(s)
                for a in range(N_ACTIONS):
                    ac = InterfaceConfig.from_index(a)
                    writer.writerow(
                        [st.capability, st.config.menu_size, st.config.mode, st.config.contrast,
                         ac.menu_size, ac.mode, ac.contrast, f"{self.values[s, a]:.6g}"]
                    )

    def export_json(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "states": N_STATES,
            "actions": N_ACTIONS,
            "values": [[float(v) for v in row] for row in self.values],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load_json(cls, path: Path | str) -> "QTable":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(np.asarray(payload["values"], dtype=np.float64))


# ---------------------------------------------------------------------------
# core update rules


def compute_reward(time_s: float, success: bool, feedback: float, hp: RLHyperparams) -> float:
    """Bounded reward: time term linear in the 30 s budget, plus feedback."""
    if time_s < 0:
        raise ParameterError(f"completion time must be >= 0, got {time_s}")
    time_term = max(0.0, 1.0 - time_s / 30.0) * (1.0 if success else 0.0)
    return hp.w_time * time_term + hp.w_feedback * float(feedback)


def q_update(
    q: QTable | np.ndarray,
    state: UserState | int,
    action: InterfaceConfig | int,
    reward: float,
    next_state: UserState | int,
    hp_or_lr,
    discount: float | None = None,
    terminal: bool = False,
):
    """Temporal-difference update toward reward plus discounted best next value.

    Mutates exactly one cell of the table and returns the table.
    """
    values = q.values if isinstance(q, QTable) else q
    s = state.index if isinstance(state, UserState) else int(state)
    a = action.index if isinstance(action, InterfaceConfig) else int(action)
    s_next = next_state.index if isinstance(next_state, UserState) else int(next_state)
    if isinstance(hp_or_lr, RLHyperparams):
        lr, gamma = hp_or_lr.lr, hp_or_lr.discount
    else:
        lr, gamma = float(hp_or_lr), float(discount)
    bootstrap = 0.0 if terminal else gamma * float(values[s_next].max())
    values[s, a] += lr * (reward + bootstrap - values[s, a])
    return q


def select_action(q: QTable | np.ndarray, state: UserState | int, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy with deterministic lowest-index tie-breaking."""
    if not 0.0 <= epsilon <= 1.0:
        raise ParameterError(f"epsilon must be in [0, 1], got {epsilon}")
    values = q.values if isinstance(q, QTable) else q
    s = state.index if isinstance(state, UserState) else int(state)
    n_actions = values.shape[1]
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    return int(np.argmax(values[s]))


# ---------------------------------------------------------------------------
# simulated users


def config_accessibility(config: InterfaceConfig) -> float:
    """How much a configuration helps constrained motor input, in [0, 1]."""
    menu = {"small": 0.0, "medium": 0.5, "large": 1.0}[config.menu_size]
    mode = {"gesture": 0.0, "voice": 0.6, "hybrid": 1.0}[config.mode]
    contrast = {"low": 0.0, "high": 1.0}[config.contrast]
    return 0.4 * menu + 0.35 * mode + 0.25 * contrast


# per-capability response curves: (success base, success slope),
# (time base s, time drop s), (feedback base, feedback slope)
_RESPONSE = {
    "low": ((0.30, 0.60), (29.0, 18.0), (0.15, 0.80)),
    "medium": ((0.55, 0.38), (22.0, 12.0), (0.35, 0.55)),
    "high": ((0.82, 0.15), (12.0, 6.0), (0.60, 0.35)),
}
TIME_NOISE_S = 1.5
FEEDBACK_NOISE = 0.05


def build_preference_table() -> np.ndarray:
    """Latent table [capability, action] -> (mean time s, success prob, feedback)."""
    table = np.zeros((len(CAPABILITIES), N_ACTIONS, 3))
    for ci, cap in enumerate(CAPABILITIES):
        (sb, ss), (tb, td), (fb, fs) = _RESPONSE[cap]
        for a, cfg in enumerate(ALL_CONFIGS):
            g = config_accessibility(cfg)
            table[ci, a] = (tb - td * g, sb + ss * g, fb + fs * g)
    return table


PREFERENCE_TABLE = build_preference_table()


def latent_capability(profile: ParticipantProfile) -> str:
    if not profile.impaired:
        return "high"
    return "low" if profile.speed_factor < 0.65 else "medium"


@dataclass
class SimulatedUser:
    profile: ParticipantProfile
    capability: str
    recognition_accuracy: float
    seed: int
    preferences: np.ndarray = field(default_factory=build_preference_table, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.recognition_accuracy <= 1.0:
            raise ValidationError("recognition accuracy must be in [0, 1]")
        if (self.preferences[:, :, 1] < 0).any() or (self.preferences[:, :, 1] > 1).any():
            raise ValidationError("success probabilities must be in [0, 1]")
        if (self.preferences[:, :, 0] <= 0).any():
            raise ValidationError("mean completion times must be positive")


def make_user(profile: ParticipantProfile, recognition_accuracy: float, seed: int) -> SimulatedUser:
    return SimulatedUser(
        profile=profile,
        capability=latent_capability(profile),
        recognition_accuracy=float(recognition_accuracy),
        seed=int(seed),
    )


def simulate_outcome(user: SimulatedUser, action_index: int, rng: np.random.Generator):
    """Draw (time_s, success, feedback) from the user's latent preferences."""
    cap_idx = CAPABILITIES.index(user.capability)
    mean_time, p_success, mean_fb = user.preferences[cap_idx, action_index]
    time_s = max(0.5, float(rng.normal(mean_time, TIME_NOISE_S)))
    success = bool(rng.random() < p_success)
    feedback = float(np.clip(rng.normal(mean_fb, FEEDBACK_NOISE), 0.0, 1.0))
    return time_s, success, feedback


# ---------------------------------------------------------------------------
# episodes


@dataclass
class TransitionRecord:
    state_index: int
    action_index: int
    reward: float
    next_state_index: int
    time_s: float
    success: bool
    feedback: float
    latency_ms: float


def _initial_window(user: SimulatedUser, hp: RLHyperparams, rng: np.random.Generator) -> list[bool]:
    return [bool(rng.random() < user.recognition_accuracy) for _ in range(hp.accuracy_window)]


def step_episode(
    user: SimulatedUser,
    q: QTable,
    state: UserState,
    hp: RLHyperparams,
    rng: np.random.Generator,
    epsilon: float,
    window: list[bool],
    learn: bool = True,
    forced_action: int | None = None,
    fixed_latency_ms: float | None = None,
    visit_counts: np.ndarray | None = None,
) -> tuple[TransitionRecord, UserState]:
    """One interaction: act, observe the simulated outcome, update, move on."""
    t0 = time.perf_counter()
    if forced_action is None:
        action = select_action(q, state, epsilon, rng)
    else:
        action = int(forced_action)
    next_config = InterfaceConfig.from_index(action)  # applying the action
    latency_ms = (time.perf_counter() - t0) * 1000.0
    if fixed_latency_ms is not None:
        latency_ms = float(fixed_latency_ms)

    time_s, success, feedback = simulate_outcome(user, action, rng)
    reward = compute_reward(time_s, success, feedback, hp)

    window.append(bool(rng.random() < user.recognition_accuracy))
    if len(window) > hp.accuracy_window:
        window.pop(0)
    accuracy = sum(window) / len(window)
    next_state = UserState(bucket_from_accuracy(accuracy), next_config)

    if learn:
        lr = hp.lr
        if hp.lr_schedule == "visit_decay" and visit_counts is not None:
            lr = 1.0 / (1.0 + visit_counts[state.index, action])
            visit_counts[state.index, action] += 1
        q_update(q, state, action, reward, next_state, lr, hp.discount)
    record = TransitionRecord(
        state_index=state.index,
        action_index=action,
        reward=reward,
        next_state_index=next_state.index,
        time_s=time_s,
        success=success,
        feedback=feedback,
        latency_ms=latency_ms,
    )
    return record, next_state


def run_episode(
    user: SimulatedUser,
    q: QTable,
    hp: RLHyperparams,
    rng: np.random.Generator,
    epsilon: float,
    learn: bool = True,
    forced_action: int | None = None,
    fixed_latency_ms: float | None = None,
    visit_counts: np.ndarray | None = None,
) -> tuple[list[TransitionRecord], float]:
    window = _initial_window(user, hp, rng)
    accuracy = sum(window) / len(window)
    state = UserState(bucket_from_accuracy(accuracy), DEFAULT_STATIC_CONFIG)
    records = []
    total = 0.0
    for _ in range(hp.episode_length):
        record, state = step_episode(
            user, q, state, hp, rng, epsilon, window,
            learn=learn, forced_action=forced_action, fixed_latency_ms=fixed_latency_ms,
            visit_counts=visit_counts,
        )
        records.append(record)
        total += record.reward
    return records, total


def train_policy(
    users: list[SimulatedUser],
    hp: RLHyperparams,
    n_episodes: int,
    seed: int,
    q: QTable | None = None,
) -> tuple[QTable, list[float]]:
    """Episodes over the user population with decaying exploration."""
    if not users:
        raise ParameterError("train_policy needs at least one simulated user")
    q = q if q is not None else QTable()
    counts = np.zeros((N_STATES, N_ACTIONS), dtype=np.int64) if hp.lr_schedule == "visit_decay" else None
    rng = rng_for(seed, "train-policy")
    epsilon = hp.epsilon0
    curves = []
    for _ in range(int(n_episodes)):
        user = users[int(rng.integers(len(users)))]
        _, episode_return = run_episode(user, q, hp, rng, epsilon, learn=True, visit_counts=counts)
        curves.append(episode_return)
        epsilon = max(hp.epsilon_min, epsilon * hp.epsilon_decay)
    return q, curves


@dataclass
class PolicyEvaluation:
    records_by_user: dict[int, list[TransitionRecord]]
    satisfaction_by_user: dict[int, float]

    def all_records(self) -> list[TransitionRecord]:
        out = []
        for pid in sorted(self.records_by_user):
            out.extend(self.records_by_user[pid])
        return out


def evaluate_policy(
    users: list[SimulatedUser],
    q: QTable,
    hp: RLHyperparams,
    episodes_per_user: int,
    seed: int,
    static_config: InterfaceConfig | None = None,
) -> PolicyEvaluation:
    """Frozen-policy rollouts (greedy), or a fixed configuration when
    ``static_config`` is given; the static variant charges the declared
    constant latency instead of a measured one."""
    records_by_user: dict[int, list[TransitionRecord]] = {}
    satisfaction: dict[int, float] = {}
    forced = static_config.index if static_config is not None else None
    fixed_latency = STATIC_LATENCY_MS if static_config is not None else None
    for user in sorted(users, key=lambda u: u.profile.participant_id):
        pid = user.profile.participant_id
        rng = rng_for(seed, "eval-policy", pid)
        recs: list[TransitionRecord] = []
        for _ in range(int(episodes_per_user)):
            episode, _ = run_episode(
                user, q, hp, rng, epsilon=0.0,
                learn=False, forced_action=forced, fixed_latency_ms=fixed_latency,
            )
            recs.extend(episode)
        records_by_user[pid] = recs
        satisfaction[pid] = float(np.mean([r.feedback for r in recs])) if recs else 0.0
    return PolicyEvaluation(records_by_user=records_by_user, satisfaction_by_user=satisfaction)


# ---------------------------------------------------------------------------
# diagnostic MDP (exact-convergence testbed for the update rule)


@dataclass
class DiagnosticMdp:
    """Small deterministic MDP: known rewards, cyclic transitions."""

    rewards: np.ndarray  # [S, A]
    transitions: np.ndarray  # [S, A] -> next state
    discount: float = 0.9

    @property
    def n_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_actions(self) -> int:
        return self.rewards.shape[1]


def default_diagnostic_mdp() -> DiagnosticMdp:
    rewards = np.array([[0.0, 1.0], [2.0, 0.0], [0.0, 3.0]])
    transitions = np.array([[0, 1], [1, 2], [2, 0]])  # action 0 stays, action 1 advances
    return DiagnosticMdp(rewards=rewards, transitions=transitions)


def q_learning_mdp(
    mdp: DiagnosticMdp,
    lr: float,
    epsilon: float,
    episodes: int,
    episode_length: int,
    seed: int,
) -> np.ndarray:
    """Epsilon-greedy tabular learning on the diagnostic MDP.

    With lr=1 on a deterministic MDP this is asynchronous value iteration
    and converges to the exact fixed point once every pair is visited
    enough.
    """
    q = np.zeros((mdp.n_states, mdp.n_actions))
    rng = rng_for(seed, "mdp")
    for ep in range(int(episodes)):
        state = ep % mdp.n_states  # cycling starts guarantee coverage
        for _ in range(int(episode_length)):
            action = select_action(q, state, epsilon, rng)
            nxt = int(mdp.transitions[state, action])
            q_update(q, state, action, float(mdp.rewards[state, action]), nxt, lr, mdp.discount)
            state = nxt
    return q
