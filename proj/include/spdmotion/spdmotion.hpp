// Umbrella header.
#pragma once

#include "spdmotion/io.hpp"
#include "spdmotion/metrics.hpp"
#include "spdmotion/network.hpp"
#include "spdmotion/network_grad.hpp"
#include "spdmotion/online.hpp"
#include "spdmotion/rng.hpp"
#include "spdmotion/skeleton.hpp"
#include "spdmotion/spd_ops.hpp"
#include "spdmotion/synthetic.hpp"
#include "spdmotion/training.hpp"
