#pragma once

// Convenience umbrella header for the whole library.

#include "hwf/attention.hpp"
#include "hwf/checkpoint.hpp"
#include "hwf/common.hpp"
#include "hwf/config_file.hpp"
#include "hwf/eval.hpp"
#include "hwf/flops.hpp"
#include "hwf/grad_check.hpp"
#include "hwf/image.hpp"
#include "hwf/metrics.hpp"
#include "hwf/model.hpp"
#include "hwf/model_config.hpp"
#include "hwf/ops.hpp"
#include "hwf/rng.hpp"
#include "hwf/tensor.hpp"
#include "hwf/threading.hpp"
#include "hwf/training.hpp"
#include "hwf/window_ops.hpp"
