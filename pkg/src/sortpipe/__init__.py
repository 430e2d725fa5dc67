"""sortpipe: bit-exact fixed-point CNN inference emulation, analytic FPGA
resource/latency estimation, detection-to-sorting pipeline timing, and
calibration / rejection analytics over prediction logs."""

from .calibration import (
    PredictionLog,
    PredictionRow,
    apply_temperature,
    comparator_decision,
    ece,
    fit_temperature,
    load_prediction_log,
    mce,
    nll,
    parse_prediction_log,
    rejection_sweep,
    reliability_bins,
    save_prediction_log,
)
from .errors import (
    LogFormatError,
    RateError,
    SchemaError,
    ShapeError,
    SortpipeError,
    WeightFormatError,
)
from .hw import (
    DeviceBudget,
    HwModelParams,
    HwPlan,
    LayerHwConfig,
    check_budget,
    estimate_layer,
    estimate_network,
    layer_workload,
    multiclass_scaling,
    pareto_sweep,
    parse_device,
    parse_hw_plan,
    utilization,
)
from .model import (
    LayerSpec,
    ModelConfig,
    TensorShape,
    WeightSet,
    forward_float,
    infer_shapes,
    layer_param_count,
    load_image,
    load_weights,
    param_count,
    parse_model_config,
    random_weights,
    save_image,
    save_weights,
    softmax,
)
from .pipeline import (
    FrameTrace,
    PipelineStages,
    SortingContext,
    after_exposure_latency,
    compare_platforms,
    parse_stages,
    render_trace,
    simulate_stream,
    sorting_feasibility,
    throughput_fps,
    total_latency,
)
from .quantize import (
    QuantFormat,
    QuantPlan,
    QuantizedWeightSet,
    agreement_rate,
    forward_fixed,
    parse_quant_plan,
    quantize_array,
    quantize_value,
    quantize_weights,
    uniform_plan,
)

__version__ = "0.1.0"
