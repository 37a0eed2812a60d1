#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iucl/autodiff.hpp"
#include "iucl/constraints.hpp"
#include "iucl/core.hpp"
#include "iucl/grid.hpp"
#include "iucl/losses.hpp"
#include "iucl/metrics.hpp"
#include "iucl/synthdata.hpp"

namespace iucl {

struct ModelConfig {
  std::size_t grid = 8;          // cells per side
  std::size_t feature_dim = 16;  // per-cell saliency feature
  std::size_t query_dim = 32;
  std::size_t queries = kMaxQueries;
  std::size_t head_hidden = 32;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& config);

// Parameter tensors in declaration order:
//   cell_w, cell_b, enc1_w, enc1_b, enc2_w, enc2_b, queries, embed_w,
//   cls1_w, cls1_b, cls2_w, cls2_b, box1_w, box1_b, box2_w, box2_b
struct ModelParams {
  ModelConfig config;
  std::vector<Tensor> tensors;

  // Weights and biases uniform in +-1/sqrt(fan_in); queries N(0,1) * 0.1.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  static const std::vector<std::string>& names();

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// One generator input. The saliency grid is pooled to config.grid cells.
struct ModelInput {
  Grid saliency;                         // grid x grid
  Tensor noise;                          // 4 x grid x grid
  std::optional<PartialLayout> partial;  // absent disables injection
};

// Pools the saliency raster and draws the attribute's noise field.
ModelInput make_input(const ModelConfig& config, const Grid& saliency, AttributeKind attr,
                      std::uint64_t noise_seed, std::optional<PartialLayout> partial = std::nullopt);

struct ForwardVars {
  PredictionVars pred;
  ad::Var query_in;  // Q x d queries after partial injection
};

// Records the forward pass on `tape`; `params` are the tape handles of the
// parameter tensors in declaration order. Throws ShapeError.
ForwardVars forward(ad::Tape& tape, std::span<const ad::Var> params, const ModelConfig& config,
                    const ModelInput& input);

PredictionBatch forward(const ModelParams& params, const ModelInput& input);

// The Q x d query vectors fed to the heads.
Tensor query_inputs(const ModelParams& params, const ModelInput& input);

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  LossWeights weights;
  bool random_mask = true;
  // Share of steps where a sample is fed without its partial layout.
  double partial_dropout = 0.5;
  // Share of steps where a sample's attribute is replaced by Unspecified.
  double unspecified_rate = 0.1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: IUCL_THREADS or hardware concurrency
};

struct EpochRecord {
  double l_rec = 0.0;
  double l_ac = 0.0;
  double l_ad = 0.0;
  double l_plrm = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_totals;  // batch-mean total loss per step
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Adam over batch means of the total loss; the learning rate drops by 10x
// after ceil(2/3 * epochs) epochs. Deterministic in config.seed.
TrainResult train(const ModelConfig& model, std::span<const Sample> data, const TrainConfig& config);

std::string history_to_json(const TrainHistory& h);

// Argmax category per query; None rows and boxes under 1e-4 area dropped,
// remaining edges clamped to the canvas.
Layout decode(const PredictionBatch& pred);

enum class EvalMode { Attribute, Partial, CoordinatesOnly };

struct EvalProtocol {
  EvalMode mode = EvalMode::Attribute;
  AttributeKind attr = AttributeKind::Unspecified;  // Attribute mode only
  std::uint64_t seed = 0;
};

// Attribute mode generates with the given attribute and no partial layout.
// The partial modes use each sample's own attribute and a random partial
// layout drawn from its ground truth, and fill in R_plc.
MetricReport evaluate(const ModelParams& params, std::span<const Sample> data,
                      const EvalProtocol& protocol);

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);
std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(std::string_view bytes);

// Worker count from IUCL_THREADS, else hardware concurrency (at least 1).
std::size_t default_threads();

}  // namespace iucl
