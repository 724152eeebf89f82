from .tensor import Tensor, Graph, as_tensor, current_graph
from . import ops
from .optim import AdamState, sgd_adam_step, global_norm
