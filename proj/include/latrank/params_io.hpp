#pragma once

#include <string>

#include "latrank/models.hpp"

namespace latrank {

// Parameter bundles as a JSON document: one object per model family with
// named fields and full-precision numbers.  Node-indexed arrays are plain
// JSON arrays; the immhp form lists per-pair objects with 1-based ids.
std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);

void write_params_file(const ModelParams& params, const std::string& path);
ModelParams read_params_file(const std::string& path);

}  // namespace latrank
