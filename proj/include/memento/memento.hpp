#pragma once

#include "memento/error.hpp"
#include "memento/rng.hpp"
#include "memento/sample.hpp"
#include "memento/sample_io.hpp"
#include "memento/distance.hpp"
#include "memento/density.hpp"
#include "memento/batching.hpp"
#include "memento/predictor.hpp"
#include "memento/selection.hpp"
#include "memento/baselines.hpp"
#include "memento/workload.hpp"
#include "memento/harness.hpp"
