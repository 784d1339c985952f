"""One DDPG learner: actor/critic with target twins, FIFO replay buffer,
decaying Gaussian exploration noise, and the actor-critic learn step.

An agent is a single-writer state machine; two agents sharing a market
are stepped sequentially inside an episode.  Independent runs
parallelize freely with independent seeded generators.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .env import AuctionConfig, MemoryMode, state_dim, unit_to_price, price_to_unit
from .errors import ConfigurationError, ValidationError
from .nn import (
    Activation,
    AdamState,
    DenseLayer,
    Mode,
    Network,
    NormScheme,
    adam_step,
    soft_update,
)

HIDDEN_1 = 400
HIDDEN_2 = 300


@dataclass
class Hyperparams:
    """All learning knobs; defaults follow the reference configuration."""

    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    discount: float = 0.99
    soft_update_rate: float = 1e-3
    buffer_capacity: int = 50_000
    batch_size: int = 128
    noise_mean: float = 0.0
    noise_std: float = 0.1
    noise_regulation: float = 10.0
    noise_decay: float = 0.999
    noise_floor: float = 0.01
    normalization: NormScheme = NormScheme.LAYER
    memory_mode: MemoryMode = MemoryMode.MEMORYLESS
    episodes: int = 15_000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 <= self.discount < 1.0:
            raise ConfigurationError("discount must lie in [0, 1)")
        if not 0.0 < self.soft_update_rate <= 1.0:
            raise ConfigurationError("soft_update_rate must lie in (0, 1]")
        if self.lr_actor <= 0 or self.lr_critic <= 0:
            raise ConfigurationError("learning rates must be positive")
        if self.batch_size < 1 or self.buffer_capacity < 1:
            raise ConfigurationError("batch size and buffer capacity must be >= 1")
        if self.batch_size > self.buffer_capacity:
            raise ConfigurationError("batch_size cannot exceed buffer_capacity")
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be non-negative")
        if self.noise_floor < 0:
            raise ConfigurationError("noise_floor must be non-negative")
        if not 0.0 < self.noise_decay <= 1.0:
            raise ConfigurationError("noise_decay must lie in (0, 1]")
        if self.episodes < 0:
            raise ConfigurationError("episodes must be non-negative")
        if not isinstance(self.normalization, NormScheme):
            self.normalization = NormScheme[str(self.normalization).upper()]
        if not isinstance(self.memory_mode, MemoryMode):
            self.memory_mode = MemoryMode(str(self.memory_mode).lower())

    def with_overrides(self, **kwargs) -> "Hyperparams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: float
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO store with uniform without-replacement sampling."""

    def __init__(self, capacity: int, state_width: int):
        if capacity < 1:
            raise ConfigurationError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._states = np.empty((capacity, state_width))
        self._actions = np.empty((capacity, 1))
        self._rewards = np.empty((capacity, 1))
        self._next_states = np.empty((capacity, state_width))
        self._head = 0   # next write slot
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, state, action: float, reward: float, next_state) -> None:
        i = self._head
        self._states[i] = state
        self._actions[i, 0] = action
        self._rewards[i, 0] = reward
        self._next_states[i] = next_state
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def entries(self) -> list[Transition]:
        """Stored transitions, oldest first (test/introspection helper)."""
        if self._size < self.capacity:
            order = range(self._size)
        else:
            order = [(self._head + k) % self.capacity for k in range(self.capacity)]
        return [Transition(self._states[i].copy(), float(self._actions[i, 0]),
                           float(self._rewards[i, 0]), self._next_states[i].copy())
                for i in order]

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if batch_size > self._size:
            raise ValidationError("batch size exceeds buffer size")
        # Floyd-style partial shuffle: uniform without replacement, O(batch).
        chosen = np.empty(batch_size, dtype=np.int64)
        picked = {}
        n = self._size
        for k in range(batch_size):
            j = int(rng.integers(k, n))
            chosen[k] = picked.get(j, j)
            picked[j] = picked.get(k, k)
        return chosen

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_indices(batch_size, rng)
        return (self._states[idx], self._actions[idx],
                self._rewards[idx], self._next_states[idx])


@dataclass
class NoiseProcess:
    """Gaussian exploration noise with a multiplicative per-episode decay."""

    mean: float
    std: float
    scale: float
    decay: float
    floor: float

    def __post_init__(self):
        self.scale = max(self.scale, self.floor)

    def sample(self, rng: np.random.Generator) -> float:
        return self.scale * rng.normal(self.mean, self.std)


def decay_noise(noise: NoiseProcess) -> NoiseProcess:
    """scale <- max(floor, scale * decay); called once per episode."""
    noise.scale = max(noise.floor, noise.scale * noise.decay)
    return noise


def scale_action_to_price(action: float, config: AuctionConfig) -> float:
    """Affine map of a normalized action in [-1, 1] to a price offer."""
    if not -1.0 <= action <= 1.0:
        raise ValidationError(f"action {action} outside [-1, 1]")
    return unit_to_price(config, action)


def price_to_action(price: float, config: AuctionConfig) -> float:
    """Inverse of :func:`scale_action_to_price`."""
    if not config.price_floor <= price <= config.price_cap:
        raise ValidationError(f"price {price} outside offer range")
    return price_to_unit(config, price)


def build_actor(state_width: int, norm: NormScheme, rng) -> Network:
    layers = [
        DenseLayer(state_width, HIDDEN_1, Activation.RELU, norm, rng, "actor layer 1"),
        DenseLayer(HIDDEN_1, HIDDEN_2, Activation.RELU, norm, rng, "actor layer 2"),
        DenseLayer(HIDDEN_2, 1, Activation.TANH, NormScheme.NONE, rng, "actor output"),
    ]
    return Network(layers)


def build_critic(state_width: int, norm: NormScheme, rng) -> Network:
    # The action joins the signal at the second layer's input.
    layers = [
        DenseLayer(state_width, HIDDEN_1, Activation.RELU, norm, rng, "critic layer 1"),
        DenseLayer(HIDDEN_1 + 1, HIDDEN_2, Activation.RELU, norm, rng, "critic layer 2"),
        DenseLayer(HIDDEN_2, 1, Activation.LINEAR, NormScheme.NONE, rng, "critic output"),
    ]
    return Network(layers, inject_at=1, inject_dim=1)


class DDPGAgent:
    """Independent learner owning its actor/critic pairs and replay buffer."""

    def __init__(self, config: AuctionConfig, hp: Hyperparams,
                 rng: np.random.Generator):
        hp.validate()
        self.config = config
        self.hp = hp
        self.rng = rng
        width = state_dim(hp.memory_mode)
        self.actor = build_actor(width, hp.normalization, rng)
        self.critic = build_critic(width, hp.normalization, rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.adam_actor = AdamState(self.actor.parameters(), hp.lr_actor)
        self.adam_critic = AdamState(self.critic.parameters(), hp.lr_critic)
        self.buffer = ReplayBuffer(hp.buffer_capacity, width)
        self.noise = NoiseProcess(hp.noise_mean, hp.noise_std,
                                  hp.noise_regulation, hp.noise_decay,
                                  hp.noise_floor)
        # With a constant state and per-row normalization the batched
        # actor/target passes reduce exactly to single-row algebra.
        self._const_state = (hp.memory_mode == MemoryMode.MEMORYLESS
                             and hp.normalization != NormScheme.BATCH)
        self._neg_one = np.array([[-1.0]])

    def act(self, state, explore: bool) -> float:
        """Deterministic actor output, plus scaled Gaussian noise when
        exploring; always clamped to [-1, 1]."""
        a = float(self.actor.forward(state, mode=Mode.EVAL)[0, 0])
        if explore:
            a += self.noise.sample(self.rng)
        return min(1.0, max(-1.0, a))

    def learn_step(self):
        """One actor-critic update from a uniformly sampled batch.

        Returns (critic_loss, actor_objective), or None as the skip
        signal while the buffer holds fewer than batch_size transitions.
        """
        hp = self.hp
        if len(self.buffer) < hp.batch_size:
            return None
        states, actions, rewards, next_states = self.buffer.sample(
            hp.batch_size, self.rng)

        # Bootstrapped critic target from the target twins only.
        if self._const_state:
            row = states[:1]
            a_next = self.actor_target.forward(row, mode=Mode.EVAL)
            q_next = self.critic_target.forward(row, inject=a_next,
                                                mode=Mode.EVAL)[0, 0]
        else:
            a_next = self.actor_target.forward(next_states, mode=Mode.EVAL)
            q_next = self.critic_target.forward(next_states, inject=a_next,
                                                mode=Mode.EVAL)
        y = rewards + hp.discount * q_next

        # Critic regression toward y.
        q = self.critic.forward(states, inject=actions, mode=Mode.TRAIN)
        diff = q - y
        critic_loss = float(np.mean(diff * diff))
        upstream = diff * (2.0 / diff.shape[0])
        critic_grads = self.critic.backward(upstream)
        adam_step(self.critic.parameters(), critic_grads.flat(), self.adam_critic)

        # Actor ascends the critic's view of its own actions: gradients
        # flow through the critic's action input, parameters untouched.
        if self._const_state:
            row = states[:1]
            a_pi = self.actor.forward(row, mode=Mode.TRAIN)
            q_pi = self.critic.forward(row, inject=a_pi, mode=Mode.TRAIN)
            actor_objective = float(q_pi[0, 0])
            d_action = self.critic.backward(self._neg_one,
                                            want_param_grads=False).inject_grad
        else:
            a_pi = self.actor.forward(states, mode=Mode.TRAIN)
            q_pi = self.critic.forward(states, inject=a_pi, mode=Mode.TRAIN)
            actor_objective = float(np.mean(q_pi))
            up = np.full_like(q_pi, -1.0 / q_pi.shape[0])
            d_action = self.critic.backward(up, want_param_grads=False).inject_grad
        actor_grads = self.actor.backward(d_action)
        adam_step(self.actor.parameters(), actor_grads.flat(), self.adam_actor)

        soft_update(self.actor_target, self.actor, hp.soft_update_rate)
        soft_update(self.critic_target, self.critic, hp.soft_update_rate)
        return critic_loss, actor_objective
