"""Multi-objective loss, clipped adaptive optimizer, staged protocol,
noise-aware training, and the barren-plateau diagnostic."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import autograd as ag, qsim
from .autograd import Tensor
from .complexity import shannon_entropy
from .errors import InvalidInputError
from .model import AqcfModel, StageFlags


@dataclass
class LossWeights:
    lambda_reg: float = 0.01
    lambda_fusion: float = 0.01
    tau_grad: float = 1e-3
    tau_var: float = 0.01  # hinge threshold for the expectation-variance surrogate
    beta_entropy: float = 1.0
    beta_usage: float = 1.0
    lambda_target: float = 0.4

    def __post_init__(self):
        for name in ("lambda_reg", "lambda_fusion", "tau_grad", "tau_var",
                     "beta_entropy", "beta_usage", "lambda_target"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be non-negative")


def task_loss(logits: Tensor, label: int) -> Tensor:
    return ag.cross_entropy_with_logits(logits, label)


def quantum_reg(quantum_param_grads, tau_grad: float) -> float:
    """Hinge penalty on the previous step's gradient RMS (zero when healthy)."""
    grads = np.asarray(quantum_param_grads, dtype=np.float64)
    rms = float(np.sqrt(np.mean(grads ** 2))) if grads.size else 0.0
    gap = max(0.0, tau_grad - rms)
    return gap * gap


def quantum_output_reg(quantum_outputs: Tensor, tau_var: float) -> Tensor:
    """Differentiable surrogate: hinge on the variance of circuit expectations."""
    var = ag.variance(quantum_outputs)
    gap = ag.relu(tau_var - var)
    return ag.square(gap)


def binary_entropy(lam: Tensor) -> Tensor:
    return -(lam * ag.log(lam)) - ((1.0 - lam) * ag.log(1.0 - lam))


def fusion_reg(lambdas: Sequence[Tensor], weights: LossWeights) -> Tensor:
    """Entropy balance plus a hinge on mean quantum usage above the target."""
    for lam in lambdas:
        v = float(lam.data)
        if not 0.0 < v < 1.0:
            raise InvalidInputError(f"fusion weight must be strictly inside (0,1), got {v}")
    neg_entropy = ag.mean(ag.stack([-binary_entropy(lam) for lam in lambdas]))
    mean_lam = ag.mean(ag.stack(list(lambdas)))
    usage = ag.square(ag.relu(mean_lam - weights.lambda_target))
    return weights.beta_entropy * neg_entropy + weights.beta_usage * usage


def total_loss(task: Tensor, quantum: Tensor, fusion: Tensor, weights: LossWeights) -> Tensor:
    for name, part in (("task", task), ("quantum", quantum), ("fusion", fusion)):
        if not np.isfinite(float(part.data)):
            raise InvalidInputError(f"{name} loss component is not finite")
    return task + weights.lambda_reg * quantum + weights.lambda_fusion * fusion


# -- optimizer ----------------------------------------------------------


@dataclass
class OptimizerSettings:
    base_lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    g_max: float = 1.0
    total_steps: int = 1000  # cosine annealing horizon


class ClippedAdam:
    """Adam with bias correction, per-coordinate update clipping, and cosine
    annealing of the learning rate over the configured horizon."""

    def __init__(self, params: Dict[str, Tensor], settings: OptimizerSettings):
        self.params = params
        self.settings = settings
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.t = 0

    def learning_rate(self) -> float:
        s = self.settings
        progress = min(self.t / max(s.total_steps, 1), 1.0)
        return s.base_lr * 0.5 * (1.0 + np.cos(np.pi * progress))

    def step(self, trainable: Optional[set] = None):
        s = self.settings
        lr = self.learning_rate()
        self.t += 1
        for name, p in self.params.items():
            if p.grad is None or (trainable is not None and name not in trainable):
                continue
            g = p.grad
            self.m[name] = s.beta1 * self.m[name] + (1.0 - s.beta1) * g
            self.v[name] = s.beta2 * self.v[name] + (1.0 - s.beta2) * g * g
            m_hat = self.m[name] / (1.0 - s.beta1 ** self.t)
            v_hat = self.v[name] / (1.0 - s.beta2 ** self.t)
            update = np.clip(m_hat / (np.sqrt(v_hat) + s.epsilon), -s.g_max, s.g_max)
            p.data -= lr * update

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


# -- staged protocol ----------------------------------------------------


@dataclass
class StageSchedule:
    total_epochs: int
    l_max: int
    fractions: Tuple[float, float, float] = (0.2, 0.3, 0.5)

    def boundaries(self) -> Tuple[float, float]:
        b1 = self.fractions[0] * self.total_epochs
        b2 = (self.fractions[0] + self.fractions[1]) * self.total_epochs
        if not 0 <= b1 <= b2 <= self.total_epochs:
            raise InvalidInputError("stage boundaries must be non-decreasing")
        return b1, b2


def stage_config(epoch: float, schedule: StageSchedule) -> StageFlags:
    """Stage flags for a (possibly fractional) epoch position."""
    if epoch < 0:
        raise InvalidInputError("epoch must be >= 0")
    b1, b2 = schedule.boundaries()
    if epoch < b1:
        return StageFlags(stage=1, quantum_enabled=False, lambda_override=0.0,
                          trainable_groups=("classical",))
    if epoch < b2:
        progress = (epoch - b1) / max(b2 - b1, 1e-12)
        ramp = int(round(2 + (schedule.l_max - 2) * progress))
        ramp = int(np.clip(ramp, 1, schedule.l_max))
        return StageFlags(stage=2, quantum_enabled=True, lambda_override=0.5,
                          max_depth=ramp, trainable_groups=("classical", "quantum"))
    return StageFlags(stage=3, quantum_enabled=True,
                      trainable_groups=("classical", "quantum", "fusion"))


# -- barren-plateau diagnostic ------------------------------------------


@dataclass
class PlateauCell:
    n_qubits: int
    depth: int
    grad_variance: Optional[float]  # None marks a cell with no parameter to probe
    samples: int


def _random_layered_circuit(n_q: int, depth: int, rng: np.random.Generator):
    """Alternating RY/RZ rotation layers, each followed by a full CNOT chain."""
    gates = []
    for layer in range(depth):
        kind = "RY" if layer % 2 == 0 else "RZ"
        for q in range(n_q):
            gates.append(qsim.Gate(kind, q, angle=rng.uniform(0.0, 2.0 * np.pi)))
        for q in range(n_q - 1):
            gates.append(qsim.Gate("CNOT", q + 1, control=q))
    return gates


def plateau_diagnostic(n_q_values: Sequence[int], depth_values: Sequence[int],
                       samples: int, rng: np.random.Generator) -> List[PlateauCell]:
    """Empirical Var[d<Z_1>/d theta_1] per (n_q, depth) cell via parameter shift."""
    if samples < 30:
        raise InvalidInputError("plateau diagnostic needs at least 30 samples per cell")
    cells = []
    for n_q in n_q_values:
        for depth in depth_values:
            if depth < 1:
                cells.append(PlateauCell(n_q, depth, None, 0))
                continue
            x = np.zeros(n_q)
            grads = np.empty(samples)
            for s in range(samples):
                gates = _random_layered_circuit(n_q, depth, rng)
                grads[s] = qsim.param_shift_grad(x, gates, 0, 0)
            cells.append(PlateauCell(n_q, depth, float(grads.var()), samples))
    return cells


# -- training loop ------------------------------------------------------


@dataclass
class TrainSettings:
    epochs: int = 6
    batch_size: int = 32
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    stage_fractions: Tuple[float, float, float] = (0.2, 0.3, 0.5)
    noise_epsilon: float = 0.01  # exact-damping depolarization during stages 2-3
    depth_aux_weight: float = 1.0


@dataclass
class StepRecord:
    step: int
    epoch: int
    stage: int
    loss: float
    task_loss: float
    quantum_loss: float
    fusion_loss: float
    mean_lambda: float
    mean_depth: float
    grad_rms: float

    def to_dict(self):
        return dict(self.__dict__)


def train(model: AqcfModel, examples: Sequence[Tuple[np.ndarray, int]],
          settings: TrainSettings,
          on_step: Optional[Callable[[StepRecord], None]] = None,
          on_epoch: Optional[Callable[[int], None]] = None) -> List[StepRecord]:
    """Run the staged protocol over tokenized (ids, label) examples."""
    if not examples:
        raise InvalidInputError("training requires a non-empty dataset")
    rng = np.random.default_rng(settings.seed)
    params = model.parameters()
    groups = model.parameter_groups()
    steps_per_epoch = max(1, int(np.ceil(len(examples) / settings.batch_size)))
    opt_settings = settings.optimizer
    opt_settings.total_steps = max(opt_settings.total_steps,
                                   steps_per_epoch * settings.epochs)
    optimizer = ClippedAdam(params, opt_settings)
    schedule = StageSchedule(settings.epochs, model.cfg.l_max, settings.stage_fractions)
    d = model.cfg.d_model
    log_d = np.log(d)

    history: List[StepRecord] = []
    prev_quantum_rms = settings.weights.tau_grad  # first step: zero penalty
    step = 0
    for epoch in range(settings.epochs):
        order = rng.permutation(len(examples))
        for start in range(0, len(examples), settings.batch_size):
            stage = stage_config(epoch, schedule)
            noise = None
            if stage.stage >= 2 and settings.noise_epsilon > 0.0:
                noise = qsim.NoiseConfig(epsilon=settings.noise_epsilon, mode="exact")
            batch = [examples[i] for i in order[start:start + settings.batch_size]]

            optimizer.zero_grad()
            task_terms, lam_tensors, surrogate_terms = [], [], []
            lam_values, depth_values = [], []
            for ids, label in batch:
                logits, trace = model.forward(ids, mode="train", rng=rng,
                                              noise=noise, stage=stage)
                task_terms.append(task_loss(logits, label))
                lam_values.append(trace.lam)
                depth_values.extend(trace.depths)
                if stage.lambda_override is None:
                    lam_tensors.append(trace.lam_t)
                if trace.quantum_outputs is not None:
                    surrogate_terms.append(
                        quantum_output_reg(trace.quantum_outputs, settings.weights.tau_var))
                    if trace.depth_fractions and trace.input_entropies:
                        targets = Tensor(np.array(trace.input_entropies) / log_d)
                        fracs = ag.stack(trace.depth_fractions)
                        surrogate_terms.append(
                            settings.depth_aux_weight * ag.mean(ag.square(fracs - targets)))

            task_mean = ag.mean(ag.stack(task_terms))
            quantum_term = Tensor(quantum_reg([prev_quantum_rms], settings.weights.tau_grad))
            if surrogate_terms:
                acc = surrogate_terms[0]
                for term in surrogate_terms[1:]:
                    acc = acc + term
                quantum_term = quantum_term + acc * (1.0 / len(batch))
            fusion_term = fusion_reg(lam_tensors, settings.weights) if lam_tensors else Tensor(0.0)
            loss = total_loss(task_mean, quantum_term, fusion_term, settings.weights)
            loss.backward()

            quantum_grads = np.concatenate(
                [p.grad.reshape(-1) for p in groups["quantum"].values()
                 if p.grad is not None] or [np.zeros(1)])
            grad_rms = float(np.sqrt(np.mean(quantum_grads ** 2)))
            prev_quantum_rms = grad_rms

            trainable = set()
            for g in stage.trainable_groups:
                trainable.update(groups[g].keys())
            optimizer.step(trainable)
            if stage.quantum_enabled:
                model.apply_memory_updates()

            record = StepRecord(
                step=step, epoch=epoch, stage=stage.stage,
                loss=float(loss.data), task_loss=float(task_mean.data),
                quantum_loss=float(quantum_term.data), fusion_loss=float(fusion_term.data),
                mean_lambda=float(np.mean(lam_values)),
                mean_depth=float(np.mean(depth_values)) if depth_values else 0.0,
                grad_rms=grad_rms)
            history.append(record)
            if on_step is not None:
                on_step(record)
            step += 1
        if on_epoch is not None:
            on_epoch(epoch)
    return history
