#pragma once

#include <string>
#include <vector>

#include "semcom/experiment.hpp"

namespace semcom {

// Renders one SVG per (metric, channel) present in the records: the metric
// versus SNR with one seed-averaged series per scheme. Returns warnings for
// series that were omitted because they carried no points. Output is
// byte-deterministic for identical input.
std::vector<std::string> write_plots(const std::vector<ExperimentRecord>& records,
                                     const std::string& outdir);

}  // namespace semcom
