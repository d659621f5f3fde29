"""Python bindings for the energy-demand learning simulator."""

from ._core import (
    ClusterAssignment,
    DataError,
    EncodingSchema,
    Error,
    InfeasibleError,
    Network,
    NumericalError,
    RoundReport,
    ShapeError,
    StalenessError,
    StationInfo,
    TrainResult,
    TransactionRecord,
    assign_clusters,
    build_schema,
    constrained_kmeans,
    encode_features,
    forward,
    knn_baseline,
    load_model,
    loss_and_gradient,
    message_bytes,
    parse_stations,
    parse_transactions,
    predict,
    record_bytes,
    regression_network,
    rmse,
    split_train_test,
    synth_generate,
    train,
)

__version__ = "0.1.0"
