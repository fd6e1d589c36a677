from .tensor import FxpKernel, FxpTensor, PartialOfm, quantize, quantize_kernel, requantize
from .kernels import (add, avg_pool2d, channel_shuffle, channel_split, channel_split_conv, combine_partials,
                      concat, conv2d, depthwise_conv2d, grouped_conv2d, max_pool2d)
from .stream import (LineBuffer, stream_conv2d, stream_conv_accumulate, stream_depthwise_accumulate,
                     stream_depthwise_conv2d)
from .executor import (execute_graph, execute_graph_trace, execute_plan, execute_plan_trace, first_mismatch,
                       random_tensor, random_weight_store)
from .tensor_io import load_tensor, load_weight_store, save_tensor, save_weight_store
