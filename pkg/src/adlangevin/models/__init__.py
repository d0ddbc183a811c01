"""Force models: oscillators, the cut-off spring fluid and minibatch Bayesian models."""

from .bayes import GaussianMeanModel, LogisticModel
from .data import DATASET_SPECS, LOGISTIC_TRUE_BETA, Dataset, generate_synthetic_data, load_dataset, save_dataset
from .oscillators import Cosine, Harmonic, InjectedNoise
from .pendulum import PendulumSystem

__all__ = [
    "Cosine",
    "DATASET_SPECS",
    "Dataset",
    "GaussianMeanModel",
    "Harmonic",
    "InjectedNoise",
    "LOGISTIC_TRUE_BETA",
    "LogisticModel",
    "PendulumSystem",
    "generate_synthetic_data",
    "load_dataset",
    "save_dataset",
]
