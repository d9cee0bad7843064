#pragma once

#include "wonham/numerics.hpp"
#include "wonham/model.hpp"
#include "wonham/model_io.hpp"
#include "wonham/analysis.hpp"
#include "wonham/rng.hpp"
#include "wonham/paths.hpp"
#include "wonham/filter.hpp"
#include "wonham/dual.hpp"
#include "wonham/stats.hpp"
#include "wonham/experiments.hpp"
#include "wonham/report.hpp"
