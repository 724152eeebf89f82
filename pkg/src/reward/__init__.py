from .types import PreferencePair, DOMAIN_TAGS, SOURCE_TAGS
from .training import RMTrainResult, bt_loss, pair_scores, pairwise_accuracy, train_reward_model, batch_loss
