#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bargan/models.hpp"
#include "bargan/pianoroll.hpp"
#include "bargan/tensor.hpp"

namespace bargan {

// Raised when training hits a non-finite loss or an inconsistent state.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  ModelVariant variant = ModelVariant::preset(1);
  NetworkDims dims;
  int epochs = 20;
  int batch_size = 64;
  std::uint64_t seed = 1;
  AdamHyper adam;
  float label_smooth = 0.9f;  // one-sided smoothing target for real data
  int checkpoint_every = 0;   // iterations between periodic saves, 0 = final only
  long max_iterations = 0;    // stop after this many iterations, 0 = run all epochs
  // apply the monophonic output layer during training (straight-through);
  // switching it off defers the layer to sampling time
  bool monophonize_in_training = true;
  std::string checkpoint_path;  // where train() saves checkpoints (empty = keep in memory)
  std::string metrics_path;     // where train() flushes the metrics log (empty = keep in memory)
};

struct MetricsRow {
  long step = 0;
  float d_loss = 0.0f;
  float g_adv = 0.0f;
  float fm_data = 0.0f;     // unweighted data-mean matching term
  float fm_feature = 0.0f;  // unweighted feature-mean matching term
  float d_real = 0.0f;
  float d_fake = 0.0f;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;  // one row per iteration (g columns averaged over the two g steps)
  long d_steps = 0;
  long g_steps = 0;

  void write_tsv(const std::string& path) const;
};

struct Checkpoint {
  MidiNetModel model;
  std::vector<AdamState> d_opt_states;
  std::vector<AdamState> g_opt_states;
  AdamHyper adam;
  long step = 0;
  int epoch = 0;
  // config echo
  int batch_size = 0;
  int epochs = 0;
  std::uint64_t seed = 0;
  float label_smooth = 0.9f;
};

// Binary format: magic "MNCK", version u16, tensor count u32, then per
// tensor a u16 name length, the name bytes, a u8 rank, u32 dims and the
// little-endian 32-bit float payload. Optimizer moments and scalar
// metadata ride along as reserved-name tensors.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
// expected_variant_id 0 accepts whatever the file holds
Checkpoint load_checkpoint(const std::string& path, int expected_variant_id = 0);

struct Batch {
  TensorPtr real;   // B x 1 x 128 x 16 current bars
  TensorPtr prev;   // B x 1 x 128 x 16 previous bars (zero rows for leading bars)
  TensorPtr chord;  // B x 13, null when the variant ignores chords
};

Batch make_batch(const std::vector<TrainingTriple>& triples,
                 const std::vector<std::uint32_t>& indices, bool with_chord);

struct DStepMetrics {
  float d_loss = 0.0f;
  float d_real = 0.0f;
  float d_fake = 0.0f;
};

struct GStepMetrics {
  float g_adv = 0.0f;
  float fm_data = 0.0f;
  float fm_feature = 0.0f;
  float total = 0.0f;
};

// One discriminator update: real bars against the smoothed target, a
// detached generated batch against zero; sums the two cross-entropies.
// Touches only discriminator parameters.
DStepMetrics d_step(MidiNetModel& model, AdamOptimizer& d_opt, const Batch& batch,
                    const TrainConfig& config, Rng& rng);

// One generator+conditioner update: adversarial term toward 1 plus the
// two weighted feature-matching terms. Discriminator parameters stay
// frozen.
GStepMetrics g_step(MidiNetModel& model, AdamOptimizer& g_opt, const Batch& batch,
                    const TrainConfig& config, Rng& rng);

// Loss evaluation with no parameter updates, for diagnostics and tests.
GStepMetrics evaluate_g_loss(const MidiNetModel& model, const Batch& batch, const TensorPtr& z,
                             float lambda1, float lambda2, bool monophonize_fake = true);

struct TrainResult {
  Checkpoint checkpoint;
  MetricsLog log;
};

// Per iteration: one d_step then two g_steps on the same real batch with
// fresh noise each. Fully reproducible for a fixed seed/config/dataset.
TrainResult train(const std::vector<TrainingTriple>& dataset, const TrainConfig& config);

}  // namespace bargan
