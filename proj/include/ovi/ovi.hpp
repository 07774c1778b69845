#pragma once

// Umbrella header for the overloaded-vehicle identification lab: traffic
// simulation, quasi-static beam response synthesis, dataset assembly, the
// temporal convolutional classifier with baselines, and the evaluation
// studies.

#include "ovi/beam.hpp"
#include "ovi/common.hpp"
#include "ovi/config.hpp"
#include "ovi/io.hpp"
#include "ovi/metrics.hpp"
#include "ovi/model.hpp"
#include "ovi/nn.hpp"
#include "ovi/pipeline.hpp"
#include "ovi/studies.hpp"
#include "ovi/traffic.hpp"
