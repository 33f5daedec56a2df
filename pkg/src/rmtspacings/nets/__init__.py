"""Small ReLU networks with exact curvature, SGD training and data loading."""

from rmtspacings.nets.data import (
    Dataset,
    load_csv_dataset,
    load_splits,
    make_gaussian_classification,
    one_hot,
    split_indices,
)
from rmtspacings.nets.mlp import (
    MlpSpec,
    forward,
    gauss_newton,
    gradient,
    hessian_exact,
    init_weights,
    load_weights,
    loss,
    output_jacobian,
    save_weights,
)
from rmtspacings.nets.train import TrainConfig, TrainResult, train_sgd

__all__ = [
    "Dataset",
    "MlpSpec",
    "TrainConfig",
    "TrainResult",
    "forward",
    "gauss_newton",
    "gradient",
    "hessian_exact",
    "init_weights",
    "load_csv_dataset",
    "load_splits",
    "load_weights",
    "loss",
    "make_gaussian_classification",
    "one_hot",
    "output_jacobian",
    "save_weights",
    "split_indices",
    "train_sgd",
]
