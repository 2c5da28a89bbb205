#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "ioev/nn/param.hpp"

namespace ioev::nn {

// Self-describing container:
//   "IOEVCKPT" | u32 version | str kind | str config-json | u32 count |
//   count × (str name | u32 rows | u32 cols | rows*cols f64, column-major)
struct Checkpoint {
    std::string kind;
    nlohmann::json config;
    std::vector<std::pair<std::string, Matrix>> tensors;
};

std::string encode_checkpoint(const std::string& kind, const nlohmann::json& config, const ParamSet& params);
Checkpoint decode_checkpoint(const std::string& bytes);
// Copies tensors into params by name; every parameter must be present with matching shape.
void restore_params(const Checkpoint& ckpt, const ParamSet& params);

}  // namespace ioev::nn
