#pragma once

#include "cablelab/gnn/model.hpp"
#include "cablelab/gnn/train.hpp"

#include <string>

namespace cablelab::io {

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const gnn::GnnModel& model, const std::string& path);
gnn::GnnModel load_checkpoint(const std::string& path);

void save_mlp_baseline(const gnn::MlpBaseline& baseline, const std::string& path);
gnn::MlpBaseline load_mlp_baseline(const std::string& path);

}  // namespace cablelab::io
