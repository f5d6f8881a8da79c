#pragma once

#include <vector>

#include "apisim/config.hpp"
#include "apisim/core.hpp"

namespace apisim {

/// Fixture catalog for desk runs: 30 APIs over 12 tools in 6 categories,
/// every API with at least one required parameter so written calls vary.
std::vector<ApiDocument> make_demo_catalog();

/// End-to-end desk run against deterministic mocks: probe -> collect ->
/// filter -> synthesize -> rationale -> split -> export, then serves the
/// gateway, replays the OOD splits through it (three rounds), runs every
/// metric, and writes report.json plus all pipeline artifacts under
/// config.paths.out_dir. Returns 0 iff every invariant check passed; any
/// failure (a corrupt cache store included) is named on stderr.
int run_demo(const AppConfig& config, Logger logger = {});

}  // namespace apisim
