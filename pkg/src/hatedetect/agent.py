"""Candidate-selection policy trained with episodic policy gradients.

The policy scores each candidate row of the decision-state matrix with a
small feed-forward net and softmaxes the scores into a distribution over
candidates.  Selection is epsilon-greedy during training; the terminal
reward is the drop in classification loss between the before-walk and
after-walk predictions, scaled up when the before-walk prediction was
wrong, zero when the walk was not needed and did not hurt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autograd as ag
from .layers import init_weight
from .model import STATE_DIM
from .optim import Adam

POLICY_HIDDEN = 128


@dataclass
class PolicyParams:
    w1: ag.Node
    b1: ag.Node
    w2: ag.Node
    b2: ag.Node

    def nodes(self) -> list[ag.Node]:
        return [self.w1, self.b1, self.w2, self.b2]


def init_policy(rng: np.random.Generator, state_dim: int = STATE_DIM,
                hidden: int = POLICY_HIDDEN) -> PolicyParams:
    return PolicyParams(
        w1=init_weight(rng, hidden, state_dim),
        b1=ag.Node(np.zeros(hidden)),
        w2=init_weight(rng, 1, hidden),
        b2=ag.Node(np.zeros(1)),
    )


def policy_forward(policy: PolicyParams, states: np.ndarray) -> ag.Node:
    """Distribution over the n candidate rows of states, as a graph node."""
    h = ag.tanh(ag.linear(states, policy.w1, policy.b1))
    scores = ag.reshape(ag.linear(h, policy.w2, policy.b2), (states.shape[0],))
    return ag.softmax(scores)


def policy_forward_np(policy: PolicyParams, states: np.ndarray) -> np.ndarray:
    h = np.tanh(states @ policy.w1.data.T + policy.b1.data)
    scores = (h @ policy.w2.data.T + policy.b2.data).reshape(states.shape[0])
    return ag.softmax_np(scores)


def select_action(policy: PolicyParams, states: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> tuple[int, float, bool]:
    """Epsilon-greedy pick over candidates, with replacement across steps.

    With probability epsilon the action is uniform over all candidates,
    otherwise the policy's argmax.  Returns (index, log pi(index),
    explored); the log-probability is under the current policy either
    way, exploratory or not.
    """
    probs = policy_forward_np(policy, states)
    explored = bool(rng.random() < epsilon)
    if explored:
        action = int(rng.integers(states.shape[0]))
    else:
        action = int(np.argmax(probs))
    return action, float(np.log(max(probs[action], ag.CE_CLAMP))), explored


@dataclass
class EpisodeTrace:
    """Per-step record of an episode: the state each action was chosen
    from (None under uniform selection, which never builds one), the
    action, its log-probability at selection time, whether it was an
    exploratory draw, and the running prediction after reading the chosen
    post.  The episode-level fields y_prime (prediction before the walk),
    y_final (after the last step), and label are filled by the caller."""
    states: list[Optional[np.ndarray]] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)
    explored: list[bool] = field(default_factory=list)
    preds: list[np.ndarray] = field(default_factory=list)
    chosen_ids: list[str] = field(default_factory=list)
    y_prime: Optional[np.ndarray] = None
    y_final: Optional[np.ndarray] = None
    label: Optional[int] = None

    def record(self, state: Optional[np.ndarray], action: int, log_prob: float,
               explored: bool, pred: np.ndarray, post_id: str) -> None:
        self.states.append(state)
        self.actions.append(action)
        self.log_probs.append(log_prob)
        self.explored.append(explored)
        self.preds.append(pred)
        self.chosen_ids.append(post_id)

    def __len__(self) -> int:
        return len(self.actions)


def compute_reward(y_prior: np.ndarray, y_final: np.ndarray, label: int,
                   alpha: float) -> float:
    """Terminal reward for one episode.

    q is the loss drop from the before-walk to the after-walk prediction.
    The reward is alpha * q when the before-walk argmax was wrong, q when
    only the after-walk argmax is wrong, and 0 when both are right.
    """
    q = ag.cross_entropy_np(y_prior, label) - ag.cross_entropy_np(y_final, label)
    if int(np.argmax(y_prior)) != label:
        return alpha * q
    if int(np.argmax(y_final)) != label:
        return q
    return 0.0


def reinforce_update(policy: PolicyParams, trace: EpisodeTrace, reward: float,
                     optimizer: Adam) -> float | None:
    """One policy-gradient step on an episode.

    Minimizes -reward * sum_i log pi(a_i | s_i), re-forwarding the stored
    states through the current policy (parameters have not moved since the
    episode ran, so these match the recorded log-probs).  A zero reward
    skips the step entirely, leaving parameters and optimizer state
    untouched.
    """
    if reward == 0.0 or not trace.actions:
        return None
    optimizer.zero_grad()
    terms = []
    for state, action in zip(trace.states, trace.actions):
        probs = policy_forward(policy, state)
        terms.append(ag.log(ag.gather(probs, action)))
    loss = ag.scale(ag.nsum(terms) if len(terms) > 1 else terms[0], -reward)
    ag.backward(loss)
    optimizer.step()
    return float(loss.data)


def epsilon_schedule(step: int, total_steps: int, start: float = 0.1,
                     end: float = 0.01) -> float:
    """Linear decay from start to end over total_steps episode slots."""
    if total_steps <= 1:
        return end
    frac = min(max(step / (total_steps - 1), 0.0), 1.0)
    return start + (end - start) * frac
