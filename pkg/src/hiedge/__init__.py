"""Hierarchical-inference offload tooling: traces, the binary offload
decider, exit gating, the analytic cost model, QoS-constrained threshold
optimization, and a TCP offload emulator."""

from .costs import DeviceProfile, EvalReport, LRConfusion, accuracy_decomposed, \
    accuracy_direct, evaluate, expected_energy, expected_latency
from .gate import GateStats, Mode, Policy, Routing, RoutingBatch, exit_fractions, \
    route, route_trace
from .lr import Decision, DegenerateTrainingError, LRModel, LRTrainConfig, \
    ScoreReport, constant_accept_f1, extract_features, loss_and_grad, lr_labels, \
    predict, score, train
from .optimize import GridSpec, Objective, OptimizeResult, ParetoAxes, QoSRule, \
    QoSSpec, StrategyChoice, compare_strategies, optimize, pareto, qos_from_context, sweep
from .trace import SampleRecord, SynthConfig, Trace, TraceError, \
    TraceValidationError, device_prediction, generate_synthetic, load_trace, save_trace
from .wire import BenchStats, ConstantPredictor, DelayModel, LookupPredictor, \
    OffloadClient, OffloadError, Predictor, TracePredictor, WireServer, bench, \
    offload, serve

__version__ = "0.1.0"
