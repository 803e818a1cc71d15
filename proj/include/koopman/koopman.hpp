#pragma once

#include "adaptive.hpp"
#include "bench.hpp"
#include "data.hpp"
#include "edmd.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "fnsim.hpp"
#include "kernels.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace koopman {
inline constexpr const char* version = "0.1.0";
}
