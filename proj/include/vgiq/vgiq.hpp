#pragma once

// Umbrella header.
#include "vgiq/dataio.hpp"
#include "vgiq/error.hpp"
#include "vgiq/evaluate.hpp"
#include "vgiq/evolve.hpp"
#include "vgiq/geo.hpp"
#include "vgiq/gpr.hpp"
#include "vgiq/kernels.hpp"
#include "vgiq/maps.hpp"
#include "vgiq/rng.hpp"
#include "vgiq/run_config.hpp"
