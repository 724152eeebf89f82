from .tasks import SyntheticTask, Constraint, generate_tasks, gold_response, TASK_KINDS
from .verifiers import verify, has_verifier, answer_span
from .gold import gold_reward, judge_score
from .pairs import PairBuildResult, build_pairs, label_by_verifier, label_by_judge
from .filtering import length_filter, length_ratio
from .cleaning import CleaningReport, Threshold, clean_dataset, corrupt_samples, task_samples
from . import io, vocab
