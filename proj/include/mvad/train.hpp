#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvad/model.hpp"
#include "mvad/tape.hpp"

namespace mvad {

struct AdamState {
  ModelParams m;  // first moments, parameter-shaped
  ModelParams v;  // second moments
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(const ModelParams& shape);
};

// Standard Adam update with bias correction; step counter advances by one.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss_total = 0.0;
  double loss_structure_mean = 0.0;
  double loss_attribute = 0.0;
  std::vector<double> attn_weights;
  double wall_ms = 0.0;
};

struct TrainReport {
  HyperParams hp;
  std::vector<EpochRecord> epochs;
  std::uint64_t final_params_checksum = 0;
  bool diverged = false;
};

// Glorot-initializes from the seed's "init" stream and runs full-batch Adam
// for hp.epochs steps. On divergence throws NumericError, leaving the epochs
// completed so far in the report.
ModelParams train(const MultiViewNetwork& network, const HyperParams& hp, TrainReport& report);

void save_train_report(const std::string& path, const TrainReport& report);

void save_checkpoint(const std::string& path, const ModelParams& params, const HyperParams& hp,
                     std::size_t n, std::size_t d);

struct Checkpoint {
  ModelParams params;
  HyperParams hp;
  std::size_t n = 0;
  std::size_t d = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mvad
