#pragma once

#include "quantsr/accounting.hpp"
#include "quantsr/adam.hpp"
#include "quantsr/binary_io.hpp"
#include "quantsr/checkpoint.hpp"
#include "quantsr/config.hpp"
#include "quantsr/dataset.hpp"
#include "quantsr/deploy.hpp"
#include "quantsr/distill.hpp"
#include "quantsr/imaging.hpp"
#include "quantsr/int_kernel.hpp"
#include "quantsr/network.hpp"
#include "quantsr/network_io.hpp"
#include "quantsr/ops.hpp"
#include "quantsr/quantizers.hpp"
#include "quantsr/schedule.hpp"
#include "quantsr/tensor.hpp"
#include "quantsr/trainer.hpp"
