from .decoding import generate, sample_token, token_distribution
from .best_of_n import ScoredCandidate, BestOfNResult, best_of_n, select_best
