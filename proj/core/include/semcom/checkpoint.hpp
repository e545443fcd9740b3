#pragma once

#include <string>
#include <utility>

#include "semcom/semcodec.hpp"

namespace semcom {

// Versioned binary container: a header with the model dimensions followed by
// name -> (shape, raw 64-bit data) records. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams& params);

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path);

}  // namespace semcom
