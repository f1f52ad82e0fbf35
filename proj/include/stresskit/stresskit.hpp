#pragma once

// Umbrella header.

#include "stresskit/clustering.hpp"
#include "stresskit/config.hpp"
#include "stresskit/contention_oracle.hpp"
#include "stresskit/design_space.hpp"
#include "stresskit/error.hpp"
#include "stresskit/interference_model.hpp"
#include "stresskit/pipeline.hpp"
#include "stresskit/profile_store.hpp"
#include "stresskit/regression/forest.hpp"
#include "stresskit/regression/metrics.hpp"
#include "stresskit/regression/tree.hpp"
#include "stresskit/stressor_model.hpp"
