#pragma once

// Umbrella header: binary-observation matrix completion by nuclear-norm
// constrained maximum likelihood, plus the experiment harness around it.

#include "bitmc/experiments.hpp"
#include "bitmc/io.hpp"
#include "bitmc/link.hpp"
#include "bitmc/matrix.hpp"
#include "bitmc/metrics.hpp"
#include "bitmc/objective.hpp"
#include "bitmc/observation.hpp"
#include "bitmc/projection.hpp"
#include "bitmc/rng.hpp"
#include "bitmc/solver.hpp"
#include "bitmc/svd.hpp"
