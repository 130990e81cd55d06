#pragma once

#include "rwnoise/errors.hpp"
#include "rwnoise/graph.hpp"
#include "rwnoise/grid.hpp"
#include "rwnoise/linear_solver.hpp"
#include "rwnoise/metrics.hpp"
#include "rwnoise/neighborhood.hpp"
#include "rwnoise/noise_models.hpp"
#include "rwnoise/parallel.hpp"
#include "rwnoise/quadrature.hpp"
#include "rwnoise/rng.hpp"
#include "rwnoise/seeding.hpp"
#include "rwnoise/synth.hpp"
#include "rwnoise/trajectory.hpp"
