#pragma once

#include "kpds/diagnostics.hpp"
#include "kpds/exact_solutions.hpp"
#include "kpds/harness.hpp"
#include "kpds/integrators.hpp"
#include "kpds/io.hpp"
#include "kpds/models.hpp"
#include "kpds/phi_engine.hpp"
#include "kpds/spectral_grid.hpp"
