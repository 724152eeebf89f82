from .gae import Trajectory, AdvantageTable, gae, gae_arrays
from .losses import ppo_policy_loss, critic_loss
from .trainer import PPOResult, assign_rewards, collect_rollouts, ppo_train
from .sft import supervised_finetune, nll_loss
