"""Minimal differentiable-computation kit used by the extractor and abstractor."""

from .autograd import (
    NoAdmissibleAction,
    Parameter,
    ShapeError,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    default_dtype,
    div,
    embedding_lookup,
    exp,
    getitem,
    layer_norm,
    log,
    log_softmax,
    lstm_cell,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    set_default_dtype,
    sigmoid,
    softmax,
    square,
    stack,
    sub,
    tanh,
    transpose,
    tsum,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .module import Module, normal_init, uniform_init, xavier_init
from .optim import Adam, AdamState, LrSchedule, adam_step, clip_global_norm, global_grad_norm, lr_at
from .rng import make_rng, split
