"""Progressive distillation schedule and the episode-length curation loop.

The schedule follows a teacher-probability gate max(1 - max((t - kappa) /
epsilon, 0), 0) per round t: pure teacher through kappa, linear annealing
over epsilon rounds, pure student after. The action-imitation loss weight w
follows the same expression (its outer min against 1 is redundant but kept
literal), and the reward objective switches from imitation to trajectory
tracking at round t_imit. The simulator executes the schedule over stub
policies and a stub environment; no network update happens, the blended
objective w * L + (1 - w) * J is only computed and logged.

Filtering: compute the mean episode length sigma over retained clips, drop
clips whose own mean sits strictly below sigma, and repeat until nothing
moves. The longest clip can never fall below the mean, so the retained set
stays non-empty and sigma never decreases.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DataError

TEACHER = "teacher"
STUDENT = "student"
IMITATION = "imitation"
TRAJECTORY = "trajectory"

RNG_ALGORITHM = "numpy-pcg64"


@dataclass(frozen=True)
class ScheduleConfig:
    epsilon: float  # annealing span, rounds
    kappa: float  # pure-teacher span, rounds
    t_imit: int  # reward-switch round
    horizon: int  # steps per round
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise DataError("epsilon must be positive")
        if self.kappa < 0 or self.t_imit < 0:
            raise DataError("kappa and t_imit must be nonnegative")
        if self.horizon < 1:
            raise DataError("horizon must be >= 1")


def dagger_gate(t: float, cfg: ScheduleConfig) -> float:
    """Teacher-execution probability at round t."""
    if t < 0:
        raise DataError("round index must be nonnegative")
    return max(1.0 - max((t - cfg.kappa) / cfg.epsilon, 0.0), 0.0)


def loss_weight(t: float, cfg: ScheduleConfig) -> float:
    """Imitation-loss weight w at round t; the outer clamp at 1 is redundant
    but implemented as written."""
    if t < 0:
        raise DataError("round index must be nonnegative")
    return min(max(1.0 - max((t - cfg.kappa) / cfg.epsilon, 0.0), 0.0), 1.0)


def select_source(u: float, gate: float) -> str:
    """Teacher iff u <= gate (boundary inclusive)."""
    if not 0.0 <= u < 1.0:
        raise DataError("u must lie in [0, 1)")
    return TEACHER if u <= gate else STUDENT


def reward_mode(t: float, cfg: ScheduleConfig) -> str:
    """Imitation reward strictly before t_imit, trajectory reward after."""
    if t < 0:
        raise DataError("round index must be nonnegative")
    return IMITATION if t < cfg.t_imit else TRAJECTORY


@dataclass(frozen=True)
class Transition:
    round: int
    step: int
    state: float
    next_state: float
    action: float  # student proposal
    expert_action: float  # teacher action
    source: str  # which action was executed


@dataclass(frozen=True)
class RoundRecord:
    round: int
    gate: float
    weight: float
    teacher_fraction: float
    reward_mode: str
    action_loss: float  # J = mean |a - a_e| over the round
    objective: float  # L from the stub objective
    blended: float  # w * L + (1 - w) * J


@dataclass(frozen=True)
class ScheduleLog:
    rng_algorithm: str
    seed: int
    config: ScheduleConfig
    rounds: tuple[RoundRecord, ...]
    transitions: tuple[Transition, ...]


def point_mass_env(state: float, action: float, dt: float = 0.1) -> float:
    """1-D kinematic point mass: the action pushes the state directly."""
    return state + dt * action


def pd_teacher(target: float = 1.0, gain: float = 1.0) -> Callable[[float], float]:
    """Proportional push toward a target position."""
    return lambda state: gain * (target - state)


def lazy_student(target: float = 1.0, gain: float = 0.4) -> Callable[[float], float]:
    """Weaker proportional controller standing in for the untrained policy."""
    return lambda state: gain * (target - state)


def _default_imitation_objective(transitions: list[Transition]) -> float:
    return float(np.mean([abs(tr.action - tr.expert_action) for tr in transitions]))


def _default_trajectory_objective(transitions: list[Transition]) -> float:
    # stub trajectory error: mean distance of visited states from the origin
    return float(np.mean([abs(tr.next_state) for tr in transitions]))


def run_schedule(
    teacher: Callable[[float], float],
    student: Callable[[float], float],
    env: Callable[[float, float], float],
    cfg: ScheduleConfig,
    rounds: int,
    initial_state: float = 0.0,
    imitation_objective: Callable[[list[Transition]], float] | None = None,
    trajectory_objective: Callable[[list[Transition]], float] | None = None,
) -> ScheduleLog:
    """Execute the distillation schedule over stub policies.

    Per round: reset the environment, then for each of the horizon steps draw
    one uniform sample, query both policies at the current state, execute the
    teacher's action iff u <= gate, and store the transition. After the round,
    log the gate, the loss weight, the realized teacher fraction, the reward
    mode, and the blended objective value. Bit-deterministic for a fixed seed
    (one generator, one draw per step, algorithm recorded in the log header).
    """
    if rounds < 1:
        raise DataError("need at least one round")
    imitation_objective = imitation_objective or _default_imitation_objective
    trajectory_objective = trajectory_objective or _default_trajectory_objective
    rng = np.random.Generator(np.random.PCG64(cfg.seed))

    records: list[RoundRecord] = []
    transitions: list[Transition] = []
    for t in range(rounds):
        gate = dagger_gate(t, cfg)
        w = loss_weight(t, cfg)
        mode = reward_mode(t, cfg)
        state = initial_state
        teacher_steps = 0
        round_transitions: list[Transition] = []
        for h in range(1, cfg.horizon + 1):
            u = float(rng.random())
            expert_action = float(teacher(state))
            action = float(student(state))
            source = select_source(u, gate)
            executed = expert_action if source == TEACHER else action
            next_state = float(env(state, executed))
            tr = Transition(
                round=t,
                step=h,
                state=state,
                next_state=next_state,
                action=action,
                expert_action=expert_action,
                source=source,
            )
            round_transitions.append(tr)
            if source == TEACHER:
                teacher_steps += 1
            state = next_state
        action_loss = float(
            np.mean([abs(tr.action - tr.expert_action) for tr in round_transitions])
        )
        objective = (
            imitation_objective(round_transitions)
            if mode == IMITATION
            else trajectory_objective(round_transitions)
        )
        records.append(
            RoundRecord(
                round=t,
                gate=gate,
                weight=w,
                teacher_fraction=teacher_steps / cfg.horizon,
                reward_mode=mode,
                action_loss=action_loss,
                objective=objective,
                blended=w * objective + (1.0 - w) * action_loss,
            )
        )
        transitions.extend(round_transitions)
    return ScheduleLog(
        rng_algorithm=RNG_ALGORITHM,
        seed=cfg.seed,
        config=cfg,
        rounds=tuple(records),
        transitions=tuple(transitions),
    )


# ---------------------------------------------------------------------------
# episode-length filtering


@dataclass(frozen=True)
class ClipStats:
    clip_id: str
    episode_lengths: tuple[float, ...]

    def __post_init__(self):
        if not self.episode_lengths:
            raise DataError(f"clip {self.clip_id!r} has no episode lengths")

    @property
    def mean_length(self) -> float:
        return float(np.mean(self.episode_lengths))


@dataclass(frozen=True)
class FilterState:
    clips: tuple[ClipStats, ...]
    removed: frozenset[str] = frozenset()
    sigma: float = 0.0
    iteration: int = 0
    sigma_history: tuple[float, ...] = field(default_factory=tuple)

    @property
    def retained(self) -> tuple[ClipStats, ...]:
        return tuple(c for c in self.clips if c.clip_id not in self.removed)


def make_filter_state(stats) -> FilterState:
    """Build the initial state from {clip_id: [lengths]} or ClipStats list."""
    if isinstance(stats, dict):
        clips = tuple(ClipStats(str(k), tuple(float(x) for x in v)) for k, v in stats.items())
    else:
        clips = tuple(stats)
    if not clips:
        raise DataError("need at least one clip")
    ids = [c.clip_id for c in clips]
    if len(set(ids)) != len(ids):
        raise DataError("clip ids must be unique")
    sigma = float(np.mean([c.mean_length for c in clips]))
    return FilterState(clips=clips, sigma=sigma, sigma_history=(sigma,))


def filter_step(state: FilterState) -> FilterState:
    """One curation pass: drop retained clips with mean length strictly below
    the current mean, then recompute it."""
    retained = state.retained
    if not retained:
        raise DataError("no retained clips")
    sigma = float(np.mean([c.mean_length for c in retained]))
    to_remove = {c.clip_id for c in retained if c.mean_length < sigma}
    survivors = [c for c in retained if c.clip_id not in to_remove]
    assert survivors, "the longest clip can never fall below the mean"
    new_sigma = float(np.mean([c.mean_length for c in survivors]))
    return replace(
        state,
        removed=state.removed | to_remove,
        sigma=new_sigma,
        iteration=state.iteration + 1,
        sigma_history=state.sigma_history + (new_sigma,),
    )


def filter_until_converged(state: FilterState) -> FilterState:
    """Iterate filter_step until no clip is removed; sigma never decreases and
    the loop ends within the initial clip count. Already-converged input comes
    back unchanged."""
    while True:
        retained = state.retained
        sigma = float(np.mean([c.mean_length for c in retained]))
        if not any(c.mean_length < sigma for c in retained):
            return state
        state = filter_step(state)
