"""Minimal reverse-mode neural-network engine on numpy arrays."""

from .architectures import CNN2_FLAT, MLP_HIDDEN, build_paper_architectures
from .layers import Conv2d, Dense, Dropout, Flatten, MaxPool, Parameter, Relu
from .losses import LOSSES, huber, l1, mse, rmse
from .network import (LayerSpec, Network, NetworkSpec, export_train_log,
                      load_network, network_from_dict, network_to_dict,
                      save_network, train_network, validate_spec)
from .optim import OPTIMIZERS, Adam, RmsProp, Sgd, make_optimizer

__all__ = [
    "Adam", "CNN2_FLAT", "Conv2d", "Dense", "Dropout", "Flatten", "LOSSES",
    "LayerSpec", "MLP_HIDDEN", "MaxPool", "Network", "NetworkSpec",
    "OPTIMIZERS", "Parameter", "Relu", "RmsProp", "Sgd",
    "build_paper_architectures", "export_train_log", "huber", "l1",
    "load_network", "make_optimizer", "mse", "network_from_dict",
    "network_to_dict", "rmse", "save_network", "train_network", "validate_spec",
]
