"""
Dynamic adversarial training: warm-start the enhancer, then alternate
enhancer descent with generator ascent.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from autodiff.optim import OptimizerState, optimizer_step
from autodiff.tensor import Tensor, backward, no_grad
from config import Config, TrainConfig, parse_train_config
from degradation.compose import compose, random_one_hot_weights, uniform_weights
from losses.objectives import loss_generator, loss_total
from networks.classifier import DegradationClassifier
from networks.enhancer import DualInteractionNet, parameter_census
from services.progress_service import EpochSummary, ProgressService
from storage.checkpoint import Checkpoint, save_checkpoint
from storage.manifest import ImagePair
from storage.runlog import RunLog
from utils.errors import DivergenceError, GraphError, NonFiniteError, ShapeError
from utils.helpers import check_finite, derive_seed, global_norm, iterate_batches

logger = logging.getLogger(__name__)


@dataclass
class StepResult:
    """Scalars of one optimizer step."""

    loss: float
    grad_norm: float
    weights: np.ndarray
    objective: Optional[float] = None
    batch_psnr: Optional[float] = None


@dataclass
class TrainResult:
    enhancer: DualInteractionNet
    run_log: RunLog
    epoch_losses: List[float] = field(default_factory=list)


def stack_pairs(pairs: Sequence[ImagePair]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Training inputs and targets as (N, 1, H, W) arrays.

    Pairs without a degraded image train on (clean, clean); corruption then
    comes only from the generator.
    """
    if not pairs:
        raise ValueError("training set is empty")
    shape = pairs[0].clean.shape
    for pair in pairs:
        if pair.clean.shape != shape:
            raise ShapeError(f"{pair.name}: shape {pair.clean.shape} differs from {shape}; batches need one size")
    targets = np.stack([p.clean for p in pairs])[:, None]
    inputs = np.stack([p.degraded if p.degraded is not None else p.clean for p in pairs])[:, None]
    return inputs, targets


class TrainerService:
    """Owns both networks, their optimizers and the training schedule."""

    def __init__(self, cfg: TrainConfig):
        cfg.validate()
        self.cfg = cfg
        self.classifier = DegradationClassifier(
            cfg.steps, cfg.bank.n_ops, np.random.default_rng(derive_seed(cfg.seed, 'classifier'))
        )
        self.enhancer = DualInteractionNet(
            np.random.default_rng(derive_seed(cfg.seed, 'enhancer')),
            width=cfg.width,
            time_steps=cfg.time_steps,
            tau=cfg.tau,
            v_th=cfg.v_th,
        )
        self.enhancer_opt = OptimizerState('adam', cfg.gamma_e)
        self.generator_opt = OptimizerState('sgd', cfg.gamma_g)
        self.iteration = 0
        self.epoch = 0
        self.initial_loss: Optional[float] = None
        self.divergent_epochs = 0
        self.check_disjoint()

    def check_disjoint(self) -> None:
        """No parameter may be updated by both optimizers."""
        theta = {id(p) for p in self.classifier.parameters()}
        omega = {id(p) for p in self.enhancer.parameters()}
        shared = theta & omega
        if shared:
            raise GraphError(f"{len(shared)} parameter(s) shared between generator and enhancer")
        logger.debug(
            f"Parameter census: generator {self.classifier.num_parameters()}, "
            f"enhancer {parameter_census(self.enhancer)['total']}"
        )

    # Generation

    def generator_weights(self, x: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        """(B, N_s, N_ops) mixture weights under the configured strategy."""
        batch = x.shape[0]
        n_ops = self.cfg.bank.n_ops
        if self.cfg.strategy == 'proposed':
            return self.classifier(x)
        if self.cfg.strategy == 'average':
            return Tensor(uniform_weights(batch, self.cfg.steps, n_ops))
        if rng is None:
            raise ValueError("the 'all' strategy needs a selection generator")
        return Tensor(random_one_hot_weights(batch, self.cfg.steps, n_ops, rng))

    def generate(self, x: Tensor, stripe_seed: int,
                 rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, Tensor]:
        weights = self.generator_weights(x, rng)
        return compose(x, weights, self.cfg.bank, stripe_seed), weights

    # Single steps

    def enhancer_update(self, x_hat: Tensor, y: Tensor) -> StepResult:
        """One Adam descent step on the enhancer for an already degraded batch."""
        self.enhancer.train()
        y_hat = self.enhancer(x_hat)
        loss = loss_total(y_hat, y, self.cfg.loss_weights)
        check_finite(loss.data, "enhancement loss")
        mse = float(np.mean((y_hat.data.astype(np.float64) - y.data) ** 2))
        backward(loss)
        grad_norm = global_norm(p.grad for p in self.enhancer.parameters())
        optimizer_step(self.enhancer_opt, self.enhancer.named_parameters(), 'descent')
        return StepResult(
            loss=loss.item(),
            grad_norm=grad_norm,
            weights=np.zeros(0),
            batch_psnr=10.0 * np.log10(1.0 / mse) if mse > 0 else None,
        )

    def descent_step(self, x: np.ndarray, y: np.ndarray, stripe_seed: int,
                     rng: Optional[np.random.Generator] = None) -> StepResult:
        """Degrade with the fixed generator, then update the enhancer."""
        x_t, y_t = Tensor(x), Tensor(y)
        with no_grad():
            x_hat, weights = self.generate(x_t, stripe_seed, rng)
        result = self.enhancer_update(x_hat, y_t)
        result.weights = weights.data
        return result

    def ascent_step(self, x: np.ndarray, y: np.ndarray, stripe_seed: int) -> StepResult:
        """
        One SGD step on the generator that raises the enhancement loss.

        The enhancer is frozen for the step: no gradients and no running
        statistic updates.
        """
        x_t, y_t = Tensor(x), Tensor(y)
        self.enhancer.requires_grad_(False).set_track_stats(False)
        try:
            weights = self.classifier(x_t)
            x_hat = compose(x_t, weights, self.cfg.bank, stripe_seed)
            y_hat = self.enhancer(x_hat)
            objective = loss_generator(y_hat, y_t, x_hat, x_t, self.cfg.loss_weights, self.cfg.lambda_reg)
            check_finite(objective.data, "generator objective")
            with no_grad():
                proximity = loss_total(Tensor(x_hat.data, _raw=True), x_t, self.cfg.loss_weights).item()
            backward(objective)
            grad_norm = global_norm(p.grad for p in self.classifier.parameters())
            optimizer_step(self.generator_opt, self.classifier.named_parameters(), 'descent')
        finally:
            self.enhancer.requires_grad_(True).set_track_stats(True)
        return StepResult(
            loss=self.cfg.lambda_reg * proximity - objective.item(),
            grad_norm=grad_norm,
            weights=weights.data,
            objective=objective.item(),
        )

    def enhancement_loss(self, x: np.ndarray, y: np.ndarray, stripe_seed: int) -> float:
        """L(N_E(N_G(x)), y) with both networks as `ascent_step` sees them, no updates."""
        self.enhancer.set_track_stats(False)
        try:
            with no_grad():
                x_t = Tensor(x)
                x_hat, _ = self.generate(x_t, stripe_seed, np.random.default_rng(stripe_seed))
                return loss_total(self.enhancer(x_hat), Tensor(y), self.cfg.loss_weights).item()
        finally:
            self.enhancer.set_track_stats(True)

    # Schedule

    def warm_start(self, pairs: Sequence[ImagePair], run_log: Optional[RunLog] = None) -> DualInteractionNet:
        """Supervised epochs against the frozen generator."""
        inputs, targets = stack_pairs(pairs)
        log = run_log if run_log is not None else RunLog()
        self._run_epochs(inputs, targets, self.epoch, self.cfg.resolved_warm_epochs, log, None, [])
        return self.enhancer

    def train(
        self,
        pairs: Sequence[ImagePair],
        run_log: Optional[RunLog] = None,
        checkpoint_path: Optional[str] = None,
        resume_from: Optional[Checkpoint] = None,
        epochs: Optional[int] = None,
    ) -> TrainResult:
        """
        Full schedule: warm epochs, then alternating descent and ascent.

        Raises DivergenceError when the epoch loss stays above
        `divergence_factor` times the first epoch's loss for
        `divergence_patience` consecutive epochs. `epochs` caps how many
        epochs this call runs; a later call or a resume continues the schedule.
        """
        if resume_from is not None:
            self.restore(resume_from)
        if self.cfg.train_subset is not None:
            pairs = list(pairs)[:self.cfg.train_subset]
        inputs, targets = stack_pairs(pairs)
        log = run_log if run_log is not None else RunLog()
        losses: List[float] = []
        logger.info(
            f"Training {self.cfg.strategy} strategy on {len(pairs)} image(s): epochs {self.epoch + 1}.."
            f"{self.cfg.total_epochs}, warm {self.cfg.resolved_warm_epochs}, batch {self.cfg.batch_size}"
        )
        stop = self.cfg.total_epochs if epochs is None else min(self.cfg.total_epochs, self.epoch + epochs)
        self._run_epochs(inputs, targets, self.epoch, stop, log, checkpoint_path, losses)
        return TrainResult(self.enhancer, log, losses)

    def _run_epochs(self, inputs: np.ndarray, targets: np.ndarray, start: int, stop: int, run_log: RunLog,
                    checkpoint_path: Optional[str], losses: List[float]) -> None:
        cfg = self.cfg
        warm = cfg.resolved_warm_epochs
        n = inputs.shape[0]
        batches = -(-n // cfg.batch_size)
        for epoch in range(start, stop):
            phase = 'warm' if epoch < warm else 'adversarial'
            order = np.random.default_rng(derive_seed(cfg.seed, 'shuffle', epoch)).permutation(n)
            epoch_losses: List[float] = []
            objectives: List[float] = []
            weight_means: List[np.ndarray] = []
            pbar = tqdm(total=batches, leave=False, unit='batch', desc=f"Epoch {epoch + 1}/{cfg.total_epochs}",
                        disable=not Config.SHOW_PROGRESS)
            for index, batch in enumerate(iterate_batches(order, cfg.batch_size)):
                self.iteration += 1
                x, y = inputs[batch], targets[batch]
                stripe_seed = derive_seed(cfg.seed, 'stripe', epoch, index)
                selection = np.random.default_rng(derive_seed(cfg.seed, 'select', epoch, index))
                try:
                    step = self.descent_step(x, y, stripe_seed, selection)
                    scalars = {'loss': step.loss, 'enhancer_grad_norm': step.grad_norm}
                    if step.batch_psnr is not None:
                        scalars['batch_psnr'] = step.batch_psnr
                    weights = step.weights
                    if phase == 'adversarial' and cfg.strategy == 'proposed' \
                            and self.iteration % cfg.ascent_every == 0:
                        ascent = self.ascent_step(x, y, stripe_seed)
                        scalars['generator_objective'] = ascent.objective
                        scalars['generator_loss'] = ascent.loss
                        scalars['generator_grad_norm'] = ascent.grad_norm
                        objectives.append(ascent.objective)
                        weights = ascent.weights
                except NonFiniteError as e:
                    raise NonFiniteError(f"epoch {epoch + 1}, batch {index}: {e}") from e

                mean_weights = weights.reshape(-1, weights.shape[-1]).mean(axis=0)
                weight_means.append(mean_weights)
                for op, value in enumerate(mean_weights):
                    scalars[f"weight_op{op}"] = float(value)
                run_log.log(self.iteration, epoch + 1, phase, **scalars)
                epoch_losses.append(step.loss)
                pbar.set_postfix(loss=f"{step.loss:.4f}")
                pbar.update(1)
            pbar.close()

            epoch_loss = float(np.mean(epoch_losses))
            losses.append(epoch_loss)
            self.epoch = epoch + 1
            self.check_divergence(epoch_loss)

            summary = EpochSummary(
                epoch=self.epoch,
                total_epochs=cfg.total_epochs,
                phase=phase,
                loss=epoch_loss,
                generator_objective=float(np.mean(objectives)) if objectives else None,
                warm_epochs=warm,
                mean_weights=np.mean(weight_means, axis=0),
            )
            logger.info(ProgressService.format_epoch_message(summary))
            if checkpoint_path:
                save_checkpoint(checkpoint_path, self.checkpoint())

    def check_divergence(self, epoch_loss: float) -> None:
        if self.initial_loss is None:
            self.initial_loss = epoch_loss
            return
        if epoch_loss > self.cfg.divergence_factor * self.initial_loss:
            self.divergent_epochs += 1
        else:
            self.divergent_epochs = 0
        if self.divergent_epochs >= self.cfg.divergence_patience:
            message = (
                f"training diverged: epoch loss {epoch_loss:.4g} exceeded {self.cfg.divergence_factor:g}x the "
                f"initial {self.initial_loss:.4g} for {self.divergent_epochs} consecutive epochs (epoch {self.epoch})"
            )
            logger.error(message)
            raise DivergenceError(message)

    # Persistence

    def checkpoint(self) -> Checkpoint:
        tensors: Dict[str, np.ndarray] = {}
        for name, p in self.classifier.named_parameters():
            tensors[f"theta/{name}"] = p.data
        for name, value in self.enhancer.state_dict().items():
            tensors[f"omega/{name}"] = value
        for name in sorted(self.enhancer_opt.adam_m):
            tensors[f"opt/enhancer/m/{name}"] = self.enhancer_opt.adam_m[name]
            tensors[f"opt/enhancer/v/{name}"] = self.enhancer_opt.adam_v[name]
        return Checkpoint(
            tensors=tensors,
            seed=self.cfg.seed,
            iteration=self.iteration,
            epoch=self.epoch,
            config_text=self.cfg.to_text(),
            optimizers={'enhancer': self.enhancer_opt.scalars(), 'generator': self.generator_opt.scalars()},
            extra={'initial_loss': self.initial_loss, 'divergent_epochs': self.divergent_epochs},
        )

    def restore(self, ckpt: Checkpoint) -> None:
        theta = ckpt.section('theta')
        self.classifier.load_state_dict(theta)
        self.enhancer.load_state_dict(ckpt.section('omega'))
        self.enhancer_opt.adam_m = dict(ckpt.section('opt/enhancer/m'))
        self.enhancer_opt.adam_v = dict(ckpt.section('opt/enhancer/v'))
        self.enhancer_opt.step_count = int(ckpt.optimizers.get('enhancer', {}).get('step_count', 0))
        self.generator_opt.step_count = int(ckpt.optimizers.get('generator', {}).get('step_count', 0))
        self.iteration = ckpt.iteration
        self.epoch = ckpt.epoch
        self.initial_loss = ckpt.extra.get('initial_loss')
        self.divergent_epochs = int(ckpt.extra.get('divergent_epochs', 0))
        logger.info(f"Restored training state at epoch {self.epoch}, iteration {self.iteration}")

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> 'TrainerService':
        trainer = cls(parse_train_config(ckpt.config_text, source='checkpoint'))
        trainer.restore(ckpt)
        return trainer


def load_enhancer(ckpt: Checkpoint) -> DualInteractionNet:
    """Rebuild the enhancer described by a checkpoint's config echo."""
    cfg = parse_train_config(ckpt.config_text, source='checkpoint')
    enhancer = DualInteractionNet(np.random.default_rng(0), width=cfg.width, time_steps=cfg.time_steps,
                                  tau=cfg.tau, v_th=cfg.v_th)
    enhancer.load_state_dict(ckpt.section('omega'))
    return enhancer


def _held_out_summary(enhancer: DualInteractionNet, test_pairs: Sequence[ImagePair], spec: str, seed: int,
                      columns: Sequence[str]) -> Dict[str, float]:
    from services.evaluation_service import EvaluationService

    report = EvaluationService.evaluate(enhancer, test_pairs, spec, seed=seed)
    return {name: report.mean(name) for name in columns}


def ablate_strategies(train_pairs: Sequence[ImagePair], test_pairs: Sequence[ImagePair],
                      cfg: TrainConfig) -> Dict[str, Dict[str, Dict[str, float]]]:
    """
    Train one model per strategy under the same budget and seed, and score
    each on every held-out corruption.

    Returns `{strategy: {spec_name: {metric: mean}}}`.
    """
    table: Dict[str, Dict[str, Dict[str, float]]] = {}
    for strategy in Config.STRATEGIES:
        trainer = TrainerService(replace(cfg, strategy=strategy))
        result = trainer.train(train_pairs)
        table[strategy] = {
            name: _held_out_summary(result.enhancer, test_pairs, spec, cfg.seed, ('SSIM', 'PSNR', 'VIF', 'QABF'))
            for name, spec in Config.ABLATION_SPECS.items()
        }
        logger.info(f"Strategy {strategy}: " + ", ".join(
            f"{name} SSIM {scores['SSIM']:.4f}" for name, scores in table[strategy].items()))
    return table


def ablate_data_usage(train_pairs: Sequence[ImagePair], test_pairs: Sequence[ImagePair], cfg: TrainConfig,
                      sizes: Sequence[int] = Config.DATA_USAGE_SIZES) -> Dict[int, Dict[str, float]]:
    """Train the proposed strategy on the first k images for each k and score stripe removal."""
    table: Dict[int, Dict[str, float]] = {}
    for size in sizes:
        if size > len(train_pairs):
            logger.warning(f"Skipping data size {size}: only {len(train_pairs)} training image(s)")
            continue
        trainer = TrainerService(replace(cfg, strategy='proposed', train_subset=size))
        result = trainer.train(train_pairs)
        table[size] = _held_out_summary(result.enhancer, test_pairs, Config.DATA_USAGE_SPEC, cfg.seed,
                                        ('MI', 'VIF', 'SD', 'QABF', 'EN'))
        logger.info(f"Data size {size}: VIF {table[size]['VIF']:.4f}, QABF {table[size]['QABF']:.4f}")
    return table
