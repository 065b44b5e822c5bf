#pragma once

#include "analytics.hpp"
#include "config.hpp"
#include "dynamics.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "lattice.hpp"
#include "output.hpp"
#include "predictor.hpp"
#include "random.hpp"
#include "version.hpp"
