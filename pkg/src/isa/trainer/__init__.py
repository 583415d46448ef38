from .policy import MLPActorCritic, TabularActorCritic, act, action_probs, make_policy
from .ppo import Batch, PPOConfig, TrainingDiverged, clipped_surrogate, gae, update_policy
from .runner import VARIANTS, TrainConfig, Trainer, TrainResult, oracle_success, random_policy_success, run_training
