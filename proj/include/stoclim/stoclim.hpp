// stoclim.hpp: umbrella header

#pragma once

#include "stoclim/core.hpp"
#include "stoclim/operator_core.hpp"
#include "stoclim/density_matrix.hpp"
#include "stoclim/bath.hpp"
#include "stoclim/generator.hpp"
#include "stoclim/evolution.hpp"
#include "stoclim/glauber.hpp"
#include "stoclim/experiments.hpp"
