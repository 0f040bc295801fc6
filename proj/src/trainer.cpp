#include "bargan/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace bargan {

void MetricsLog::write_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open metrics log for writing: " + path);
  out << "# d_steps=" << d_steps << " g_steps=" << g_steps << "\n";
  out << "# step\td_loss\tg_adv\tfm1\tfm2\td_real\td_fake\n";
  for (const auto& r : rows) {
    out << r.step << '\t' << r.d_loss << '\t' << r.g_adv << '\t' << r.fm_data << '\t'
        << r.fm_feature << '\t' << r.d_real << '\t' << r.d_fake << '\n';
  }
  if (!out) throw std::runtime_error("failed writing metrics log: " + path);
}

// ---- checkpoint io ----

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'N', 'C', 'K'};
constexpr std::uint16_t kCheckpointVersion = 1;

void put_u16le(std::ofstream& out, std::uint16_t v) {
  out.put(static_cast<char>(v & 0xff));
  out.put(static_cast<char>(v >> 8));
}

void put_u32le(std::ofstream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32le(std::ofstream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32le(out, bits);
}

struct RawTensor {
  std::vector<int> shape;
  std::vector<float> values;
};

void write_entry(std::ofstream& out, const std::string& name, const std::vector<int>& shape,
                 const std::vector<float>& values) {
  put_u16le(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  out.put(static_cast<char>(shape.size()));
  for (int d : shape) put_u32le(out, static_cast<std::uint32_t>(d));
  for (float v : values) put_f32le(out, v);
}

std::uint16_t get_u16le(std::ifstream& in) {
  const int a = in.get(), b = in.get();
  if (b < 0) throw std::runtime_error("truncated checkpoint");
  return static_cast<std::uint16_t>(a | (b << 8));
}

std::uint32_t get_u32le(std::ifstream& in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int byte = in.get();
    if (byte < 0) throw std::runtime_error("truncated checkpoint");
    v |= static_cast<std::uint32_t>(byte) << (8 * i);
  }
  return v;
}

float get_f32le(std::ifstream& in) {
  const std::uint32_t bits = get_u32le(in);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

std::vector<float> seed_to_floats(std::uint64_t seed) {
  std::vector<float> out(4);
  for (int i = 0; i < 4; ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<float>((seed >> (16 * i)) & 0xffff);
  }
  return out;
}

std::uint64_t seed_from_floats(const std::vector<float>& v) {
  std::uint64_t seed = 0;
  for (int i = 0; i < 4 && i < static_cast<int>(v.size()); ++i) {
    seed |= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v[static_cast<std::size_t>(i)]) &
                                       0xffff)
            << (16 * i);
  }
  return seed;
}

const RawTensor& expect(const std::map<std::string, RawTensor>& entries, const std::string& name) {
  auto it = entries.find(name);
  if (it == entries.end()) throw std::runtime_error("checkpoint missing tensor '" + name + "'");
  return it->second;
}

void write_adam_states(std::ofstream& out, const char* tag,
                       const std::vector<TensorPtr>& params,
                       const std::vector<AdamState>& states,
                       const std::map<const Tensor*, std::string>& names) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string base = std::string("adam.") + tag + "." + names.at(params[i].get());
    const auto& st = states[i];
    std::vector<float> m = st.m, v = st.v;
    if (m.empty()) m.assign(params[i]->values.size(), 0.0f);
    if (v.empty()) v.assign(params[i]->values.size(), 0.0f);
    write_entry(out, base + ".m", params[i]->shape, m);
    write_entry(out, base + ".v", params[i]->shape, v);
    write_entry(out, base + ".t", {1}, {static_cast<float>(st.step)});
  }
}

void read_adam_states(const std::map<std::string, RawTensor>& entries, const char* tag,
                      const std::vector<TensorPtr>& params,
                      const std::map<const Tensor*, std::string>& names,
                      std::vector<AdamState>& states) {
  states.assign(params.size(), AdamState{});
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string base = std::string("adam.") + tag + "." + names.at(params[i].get());
    const auto& m = expect(entries, base + ".m");
    const auto& v = expect(entries, base + ".v");
    const auto& t = expect(entries, base + ".t");
    if (m.values.size() != params[i]->values.size() ||
        v.values.size() != params[i]->values.size()) {
      throw std::runtime_error("checkpoint optimizer state size mismatch for " + base);
    }
    states[i].m = m.values;
    states[i].v = v.values;
    states[i].step = static_cast<std::int64_t>(t.values.at(0));
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);

  const auto named = ckpt.model.named_params();
  std::map<const Tensor*, std::string> names;
  for (const auto& [name, t] : named) names[t.get()] = name;

  const auto d_params = ckpt.model.d_params();
  const auto g_params = ckpt.model.g_and_cond_params();
  const std::uint32_t entry_count = static_cast<std::uint32_t>(
      named.size() + 3 * (d_params.size() + g_params.size()) + 7);

  out.write(kCheckpointMagic, 4);
  put_u16le(out, kCheckpointVersion);
  put_u32le(out, entry_count);

  const auto& v = ckpt.model.variant;
  write_entry(out, "meta.variant", {12},
              {static_cast<float>(v.id), static_cast<float>(v.g_filters),
               static_cast<float>(v.cond_filters), v.twod_layers[0] ? 1.0f : 0.0f,
               v.twod_layers[1] ? 1.0f : 0.0f, v.twod_layers[2] ? 1.0f : 0.0f,
               v.twod_layers[3] ? 1.0f : 0.0f, v.use_chord ? 1.0f : 0.0f,
               v.d_sees_prev ? 1.0f : 0.0f, v.lambda1, v.lambda2, 0.0f});
  const auto& dm = ckpt.model.dims;
  write_entry(out, "meta.dims", {8},
              {static_cast<float>(dm.noise_len), static_cast<float>(dm.fc1),
               static_cast<float>(dm.reshape_channels), static_cast<float>(dm.d_conv1_filters),
               static_cast<float>(dm.d_conv2_filters), static_cast<float>(dm.d_fc),
               static_cast<float>(dm.roll_h), static_cast<float>(dm.roll_w)});
  write_entry(out, "meta.counters", {2},
              {static_cast<float>(ckpt.step), static_cast<float>(ckpt.epoch)});
  write_entry(out, "meta.adam", {4},
              {ckpt.adam.lr, ckpt.adam.beta1, ckpt.adam.beta2, ckpt.adam.eps});
  write_entry(out, "meta.train", {3},
              {static_cast<float>(ckpt.batch_size), static_cast<float>(ckpt.epochs),
               ckpt.label_smooth});
  write_entry(out, "meta.seed", {4}, seed_to_floats(ckpt.seed));
  write_entry(out, "meta.version", {1}, {static_cast<float>(kCheckpointVersion)});

  for (const auto& [name, t] : named) write_entry(out, name, t->shape, t->values);
  write_adam_states(out, "d", d_params, ckpt.d_opt_states, names);
  write_adam_states(out, "g", g_params, ckpt.g_opt_states, names);

  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path, int expected_variant_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kCheckpointMagic, 4)) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  }
  const std::uint16_t version = get_u16le(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32le(in);

  std::map<std::string, RawTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = get_u16le(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int rank = in.get();
    if (!in || rank < 0 || rank > 4) throw std::runtime_error("corrupt checkpoint entry header");
    RawTensor raw;
    std::int64_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      raw.shape.push_back(static_cast<int>(get_u32le(in)));
      numel *= raw.shape.back();
    }
    raw.values.resize(static_cast<std::size_t>(numel));
    for (auto& f : raw.values) f = get_f32le(in);
    entries[name] = std::move(raw);
  }

  const auto& vm = expect(entries, "meta.variant").values;
  ModelVariant variant;
  variant.id = static_cast<int>(vm.at(0));
  variant.g_filters = static_cast<int>(vm.at(1));
  variant.cond_filters = static_cast<int>(vm.at(2));
  for (int i = 0; i < 4; ++i) {
    variant.twod_layers[static_cast<std::size_t>(i)] = vm.at(static_cast<std::size_t>(3 + i)) != 0.0f;
  }
  variant.use_chord = vm.at(7) != 0.0f;
  variant.d_sees_prev = vm.at(8) != 0.0f;
  variant.lambda1 = vm.at(9);
  variant.lambda2 = vm.at(10);

  if (expected_variant_id != 0 && variant.id != expected_variant_id) {
    throw std::runtime_error("checkpoint holds variant " + std::to_string(variant.id) +
                             ", expected variant " + std::to_string(expected_variant_id) +
                             " (parameter shapes are incompatible)");
  }

  const auto& dv = expect(entries, "meta.dims").values;
  NetworkDims dims;
  dims.noise_len = static_cast<int>(dv.at(0));
  dims.fc1 = static_cast<int>(dv.at(1));
  dims.reshape_channels = static_cast<int>(dv.at(2));
  dims.d_conv1_filters = static_cast<int>(dv.at(3));
  dims.d_conv2_filters = static_cast<int>(dv.at(4));
  dims.d_fc = static_cast<int>(dv.at(5));
  dims.roll_h = static_cast<int>(dv.at(6));
  dims.roll_w = static_cast<int>(dv.at(7));

  Checkpoint ckpt;
  Rng scratch(0);
  ckpt.model = MidiNetModel::init(variant, dims, scratch);
  for (auto& [name, tensor] : ckpt.model.named_params()) {
    const auto& raw = expect(entries, name);
    if (raw.shape != tensor->shape) {
      throw std::runtime_error("checkpoint shape mismatch for '" + name + "': file has " +
                               shape_str(raw.shape) + ", model expects " +
                               shape_str(tensor->shape));
    }
    tensor->values = raw.values;
    tensor->zero_grad();
  }

  std::map<const Tensor*, std::string> names;
  for (const auto& [name, t] : ckpt.model.named_params()) names[t.get()] = name;
  read_adam_states(entries, "d", ckpt.model.d_params(), names, ckpt.d_opt_states);
  read_adam_states(entries, "g", ckpt.model.g_and_cond_params(), names, ckpt.g_opt_states);

  const auto& counters = expect(entries, "meta.counters").values;
  ckpt.step = static_cast<long>(counters.at(0));
  ckpt.epoch = static_cast<int>(counters.at(1));
  const auto& adam = expect(entries, "meta.adam").values;
  ckpt.adam.lr = adam.at(0);
  ckpt.adam.beta1 = adam.at(1);
  ckpt.adam.beta2 = adam.at(2);
  ckpt.adam.eps = adam.at(3);
  const auto& train_echo = expect(entries, "meta.train").values;
  ckpt.batch_size = static_cast<int>(train_echo.at(0));
  ckpt.epochs = static_cast<int>(train_echo.at(1));
  ckpt.label_smooth = train_echo.at(2);
  ckpt.seed = seed_from_floats(expect(entries, "meta.seed").values);
  return ckpt;
}

// ---- batches ----

Batch make_batch(const std::vector<TrainingTriple>& triples,
                 const std::vector<std::uint32_t>& indices, bool with_chord) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const int B = static_cast<int>(indices.size());
  Batch batch;
  batch.real = Tensor::zeros({B, 1, kNumPitches, kStepsPerBar});
  batch.prev = Tensor::zeros({B, 1, kNumPitches, kStepsPerBar});
  if (with_chord) batch.chord = Tensor::zeros({B, kChordDims});

  const std::size_t plane = static_cast<std::size_t>(kNumPitches) * kStepsPerBar;
  for (int b = 0; b < B; ++b) {
    const auto& t = triples.at(indices[static_cast<std::size_t>(b)]);
    for (int s = 0; s < kStepsPerBar; ++s) {
      const int cur = t.cur.active_pitch(s);
      if (cur >= 0) {
        batch.real->values[static_cast<std::size_t>(b) * plane +
                           static_cast<std::size_t>(cur) * kStepsPerBar + s] = 1.0f;
      }
      const int prev = t.prev.active_pitch(s);
      if (prev >= 0) {
        batch.prev->values[static_cast<std::size_t>(b) * plane +
                           static_cast<std::size_t>(prev) * kStepsPerBar + s] = 1.0f;
      }
    }
    if (with_chord) {
      if (!chordvec_present(t.chord)) {
        throw TrainingError("triple without a chord in a chord-conditioned run");
      }
      for (int i = 0; i < kChordDims; ++i) {
        batch.chord->values[static_cast<std::size_t>(b) * kChordDims +
                            static_cast<std::size_t>(i)] =
            t.chord[static_cast<std::size_t>(i)] ? 1.0f : 0.0f;
      }
    }
  }
  return batch;
}

// ---- steps ----

namespace {

float mean_value(const TensorPtr& t) {
  float acc = 0.0f;
  for (float v : t->values) acc += v;
  return acc / static_cast<float>(t->numel());
}

void zero_all_grads(const MidiNetModel& model) {
  for (const auto& p : model.all_params()) p->zero_grad();
}

TensorPtr generate_fake(Tape* tape, const MidiNetModel& model, const Batch& batch,
                        const TensorPtr& z, bool apply_monophonize) {
  std::array<TensorPtr, 4> maps;
  const std::array<TensorPtr, 4>* maps_ptr = nullptr;
  if (model.variant.has_twod()) {
    maps = conditioner_forward(tape, model.c, model.dims, batch.prev);
    maps_ptr = &maps;
  }
  auto fake = generator_forward(tape, model.g, model.variant, model.dims, z, batch.chord, maps_ptr);
  if (apply_monophonize) fake = monophonize(tape, fake);
  return fake;
}

struct GLossParts {
  TensorPtr loss;
  TensorPtr adv;
  TensorPtr fm_data;
  TensorPtr fm_feature;
};

GLossParts build_g_loss(Tape* tape, const MidiNetModel& model, const Batch& batch,
                        const TensorPtr& z, float lambda1, float lambda2,
                        bool apply_monophonize) {
  auto fake = generate_fake(tape, model, batch, z, apply_monophonize);
  auto d_fake = discriminator_forward(tape, model.d, model.variant, model.dims, fake, batch.chord,
                                      model.variant.d_sees_prev ? batch.prev : nullptr);
  auto adv =
      sigmoid_cross_entropy(tape, d_fake.logit, Tensor::full(d_fake.logit->shape, 1.0f));

  // batch-statistics targets from the real bars are constants here
  auto d_real = discriminator_forward(nullptr, model.d, model.variant, model.dims, batch.real,
                                      batch.chord, model.variant.d_sees_prev ? batch.prev : nullptr);
  auto fm_data = l2_diff(tape, mean_over_batch(nullptr, batch.real), mean_over_batch(tape, fake));
  auto fm_feature = l2_diff(tape, mean_over_batch(nullptr, d_real.features),
                            mean_over_batch(tape, d_fake.features));

  auto loss =
      add(tape, adv, add(tape, scale(tape, fm_data, lambda1), scale(tape, fm_feature, lambda2)));
  return {loss, adv, fm_data, fm_feature};
}

}  // namespace

DStepMetrics d_step(MidiNetModel& model, AdamOptimizer& d_opt, const Batch& batch,
                    const TrainConfig& config, Rng& rng) {
  zero_all_grads(model);
  const int B = batch.real->dim(0);
  auto z = noise_batch(rng, B, model.dims.noise_len);

  // the generated batch is detached: only D parameters learn here
  auto fake = generate_fake(nullptr, model, batch, z, config.monophonize_in_training);

  Tape tape;
  const TensorPtr d_prev = model.variant.d_sees_prev ? batch.prev : nullptr;
  auto real_out =
      discriminator_forward(&tape, model.d, model.variant, model.dims, batch.real, batch.chord, d_prev);
  auto fake_out =
      discriminator_forward(&tape, model.d, model.variant, model.dims, fake, batch.chord, d_prev);
  auto loss = add(&tape,
                  sigmoid_cross_entropy(&tape, real_out.logit,
                                        Tensor::full(real_out.logit->shape, config.label_smooth)),
                  sigmoid_cross_entropy(&tape, fake_out.logit,
                                        Tensor::zeros(fake_out.logit->shape)));
  tape.backward(loss);
  d_opt.step();

  DStepMetrics m;
  m.d_loss = loss->item();
  m.d_real = mean_value(real_out.prob);
  m.d_fake = mean_value(fake_out.prob);
  if (!std::isfinite(m.d_loss)) throw TrainingError("non-finite discriminator loss");
  return m;
}

GStepMetrics g_step(MidiNetModel& model, AdamOptimizer& g_opt, const Batch& batch,
                    const TrainConfig& config, Rng& rng) {
  zero_all_grads(model);
  const int B = batch.real->dim(0);
  auto z = noise_batch(rng, B, model.dims.noise_len);

  Tape tape;
  auto parts = build_g_loss(&tape, model, batch, z, model.variant.lambda1, model.variant.lambda2,
                            config.monophonize_in_training);
  tape.backward(parts.loss);
  g_opt.step();

  GStepMetrics m;
  m.g_adv = parts.adv->item();
  m.fm_data = parts.fm_data->item();
  m.fm_feature = parts.fm_feature->item();
  m.total = parts.loss->item();
  if (!std::isfinite(m.total)) throw TrainingError("non-finite generator loss");
  return m;
}

GStepMetrics evaluate_g_loss(const MidiNetModel& model, const Batch& batch, const TensorPtr& z,
                             float lambda1, float lambda2, bool monophonize_fake) {
  auto parts = build_g_loss(nullptr, model, batch, z, lambda1, lambda2, monophonize_fake);
  GStepMetrics m;
  m.g_adv = parts.adv->item();
  m.fm_data = parts.fm_data->item();
  m.fm_feature = parts.fm_feature->item();
  m.total = parts.loss->item();
  return m;
}

TrainResult train(const std::vector<TrainingTriple>& dataset, const TrainConfig& config) {
  if (dataset.size() < static_cast<std::size_t>(config.batch_size)) {
    throw TrainingError("dataset smaller than one batch");
  }
  if (config.label_smooth <= 0.5f || config.label_smooth > 1.0f) {
    throw TrainingError("label_smooth must lie in (0.5, 1]");
  }
  if (config.variant.use_chord && !dataset_has_chords(dataset)) {
    throw TrainingError("variant needs chords but the dataset has none");
  }

  Rng rng(config.seed);
  MidiNetModel model = MidiNetModel::init(config.variant, config.dims, rng);
  AdamOptimizer d_opt(model.d_params(), config.adam);
  AdamOptimizer g_opt(model.g_and_cond_params(), config.adam);

  MetricsLog log;
  auto make_ckpt = [&](long step, int epoch) {
    Checkpoint ckpt;
    ckpt.model = model;
    ckpt.d_opt_states = d_opt.states();
    ckpt.g_opt_states = g_opt.states();
    ckpt.adam = config.adam;
    ckpt.step = step;
    ckpt.epoch = epoch;
    ckpt.batch_size = config.batch_size;
    ckpt.epochs = config.epochs;
    ckpt.seed = config.seed;
    ckpt.label_smooth = config.label_smooth;
    return ckpt;
  };
  auto flush_metrics = [&] {
    if (!config.metrics_path.empty()) log.write_tsv(config.metrics_path);
  };

  long iter = 0;
  bool stop = false;
  int epoch = 0;
  for (; epoch < config.epochs && !stop; ++epoch) {
    const auto batches = epoch_batches(dataset.size(), config.batch_size, rng);
    for (const auto& indices : batches) {
      Batch batch = make_batch(dataset, indices, config.variant.use_chord);
      DStepMetrics dm;
      GStepMetrics gm1, gm2;
      try {
        dm = d_step(model, d_opt, batch, config, rng);
        log.d_steps += 1;
        gm1 = g_step(model, g_opt, batch, config, rng);
        log.g_steps += 1;
        gm2 = g_step(model, g_opt, batch, config, rng);
        log.g_steps += 1;
      } catch (const TrainingError& e) {
        flush_metrics();
        throw TrainingError(std::string(e.what()) + " at iteration " + std::to_string(iter));
      }
      log.rows.push_back(MetricsRow{iter, dm.d_loss, 0.5f * (gm1.g_adv + gm2.g_adv),
                                    0.5f * (gm1.fm_data + gm2.fm_data),
                                    0.5f * (gm1.fm_feature + gm2.fm_feature), dm.d_real,
                                    dm.d_fake});
      ++iter;
      if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
          iter % config.checkpoint_every == 0) {
        try {
          save_checkpoint(make_ckpt(iter, epoch), config.checkpoint_path);
        } catch (const std::exception&) {
          flush_metrics();
          throw;
        }
      }
      if (config.max_iterations > 0 && iter >= config.max_iterations) {
        stop = true;
        break;
      }
    }
  }

  TrainResult result;
  result.checkpoint = make_ckpt(iter, epoch);
  result.log = std::move(log);
  if (!config.checkpoint_path.empty()) {
    try {
      save_checkpoint(result.checkpoint, config.checkpoint_path);
    } catch (const std::exception&) {
      if (!config.metrics_path.empty()) result.log.write_tsv(config.metrics_path);
      throw;
    }
  }
  if (!config.metrics_path.empty()) result.log.write_tsv(config.metrics_path);
  return result;
}

}  // namespace bargan
