from .models import MLP, LinearRegression, SoftmaxRegression, build_model
from .tasks import ClientData, FederatedDataset, TaskSpec, generate_task, power_law_cdf, sample_power_law
from .training import (
    CodecConfig,
    FedConfig,
    ServerState,
    TrainingTrace,
    evaluate,
    local_train,
    run_training,
    server_update,
)

__all__ = [
    "MLP",
    "LinearRegression",
    "SoftmaxRegression",
    "build_model",
    "ClientData",
    "FederatedDataset",
    "TaskSpec",
    "generate_task",
    "power_law_cdf",
    "sample_power_law",
    "CodecConfig",
    "FedConfig",
    "ServerState",
    "TrainingTrace",
    "evaluate",
    "local_train",
    "run_training",
    "server_update",
]
