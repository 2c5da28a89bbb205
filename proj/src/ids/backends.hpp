#pragma once

#include <memory>
#include <string>

#include "ioev/ids/detector.hpp"

namespace ioev::ids::detail {

std::unique_ptr<ClassifierBackend> train_mlp(const nn::Matrix& x, const std::vector<int>& labels,
                                             const std::vector<double>& weights, const DetectorConfig& cfg,
                                             uint64_t seed);
std::unique_ptr<ClassifierBackend> train_lstm(const nn::Matrix& x, const std::vector<int>& labels,
                                              const std::vector<double>& weights, const DetectorConfig& cfg,
                                              uint64_t seed);

std::unique_ptr<ClassifierBackend> load_neural(const std::string& bytes);
std::unique_ptr<ClassifierBackend> load_gbdt(const std::string& bytes);

}  // namespace ioev::ids::detail
