#pragma once

// Everything except the command layer (cli.hpp), which also needs spdlog.

#include "core.hpp"
#include "graph.hpp"
#include "io.hpp"
#include "palm.hpp"
#include "parallel.hpp"
#include "prox.hpp"
#include "rng.hpp"
#include "simbench.hpp"
#include "tuning.hpp"
