#include "iucl/genmodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <random>
#include <thread>

#include "iucl/adam.hpp"
#include "iucl/rng.hpp"
#include "json.hpp"

namespace iucl {

using ad::Tape;
using ad::Var;

void validate(const ModelConfig& c) {
  if (c.grid == 0 || c.feature_dim == 0 || c.query_dim == 0 || c.head_hidden == 0)
    throw ValidationError("model dimensions must be at least 1");
  if (c.queries != kMaxQueries) throw ValidationError("model must have exactly 10 queries");
}

namespace {

enum Param : std::size_t {
  kCellW, kCellB, kEnc1W, kEnc1B, kEnc2W, kEnc2B, kQueries, kEmbedW,
  kCls1W, kCls1B, kCls2W, kCls2B, kBox1W, kBox1B, kBox2W, kBox2B, kNumParams
};

constexpr std::size_t kCellInputs = 3;  // saliency, x, y

std::vector<Tensor::Shape> param_shapes(const ModelConfig& c) {
  const std::size_t f = c.feature_dim, d = c.query_dim, h = c.head_hidden, q = c.queries;
  return {{kCellInputs, f}, {f}, {f + 4, d}, {d}, {d, d}, {d}, {q, d}, {kFlatWidth, d},
          {2 * d, h}, {h}, {h, kNumCategories}, {kNumCategories},
          {2 * d, h}, {h}, {h, kBoxDims}, {kBoxDims}};
}

}  // namespace

const std::vector<std::string>& ModelParams::names() {
  static const std::vector<std::string> n = {
      "cell_w", "cell_b", "enc1_w", "enc1_b", "enc2_w", "enc2_b", "queries", "embed_w",
      "cls1_w", "cls1_b", "cls2_w", "cls2_b", "box1_w", "box1_b", "box2_w", "box2_b"};
  return n;
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  ModelParams p{config, {}};
  std::mt19937_64 rng(seed);
  const auto shapes = param_shapes(config);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    Tensor t(shapes[i]);
    if (i == kQueries) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (double& v : t.storage()) v = 0.1 * normal(rng);
    } else {
      // A bias shares the fan-in of the weight declared just before it.
      const std::size_t fan_in = shapes[i].size() == 2 ? shapes[i][0] : shapes[i - 1][0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& v : t.storage()) v = u(rng);
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

ModelInput make_input(const ModelConfig& config, const Grid& saliency, AttributeKind attr,
                      std::uint64_t noise_seed, std::optional<PartialLayout> partial) {
  ModelInput in;
  in.saliency = (saliency.h == config.grid && saliency.w == config.grid)
                    ? saliency
                    : downsample(saliency, config.grid, config.grid);
  in.noise = sample_noise(NoiseSpec::for_attribute(attr, config.grid, config.grid), noise_seed);
  in.partial = std::move(partial);
  return in;
}

ForwardVars forward(Tape& tape, std::span<const Var> p, const ModelConfig& c, const ModelInput& in) {
  if (p.size() != kNumParams) throw ShapeError("forward expects 16 parameter tensors");
  const std::size_t g = c.grid, cells = g * g, q = c.queries;
  if (in.saliency.h != g || in.saliency.w != g)
    throw ShapeError("saliency must be pooled to " + std::to_string(g) + "x" + std::to_string(g));
  if (in.noise.shape() != Tensor::Shape{4, g, g})
    throw ShapeError("noise must be 4x" + std::to_string(g) + "x" + std::to_string(g) + ", got " +
                     shape_string(in.noise.shape()));

  Tensor cell_in({cells, kCellInputs});
  Tensor noise_rows({cells, 4});
  for (std::size_t y = 0; y < g; ++y)
    for (std::size_t x = 0; x < g; ++x) {
      const std::size_t i = y * g + x;
      cell_in.at(i, 0) = in.saliency.at(y, x);
      cell_in.at(i, 1) = (static_cast<double>(x) + 0.5) / static_cast<double>(g);
      cell_in.at(i, 2) = (static_cast<double>(y) + 0.5) / static_cast<double>(g);
      for (std::size_t ch = 0; ch < 4; ++ch) noise_rows.at(i, ch) = in.noise[ch * cells + i];
    }

  Var feat = ad::relu(ad::add_row(ad::matmul(tape.constant(std::move(cell_in)), p[kCellW]), p[kCellB]));
  Var cell = ad::concat_cols(feat, tape.constant(std::move(noise_rows)));
  Var enc = ad::relu(ad::add_row(ad::matmul(cell, p[kEnc1W]), p[kEnc1B]));
  Var ctx = ad::relu(ad::add_row(ad::matmul(ad::mean_rows(enc), p[kEnc2W]), p[kEnc2B]));

  Var queries = p[kQueries];
  if (in.partial && in.partial->present_count() > 0) {
    if (in.partial->rows() != q) throw ShapeError("partial layout must have one row per query");
    // Rows without presence are all zero, so they add nothing.
    queries = ad::add(queries, ad::matmul(tape.constant(in.partial->masked_values()), p[kEmbedW]));
  }
  Var ctx_rows = ad::matmul(tape.constant(Tensor({q, 1}, 1.0)), ctx);
  Var head_in = ad::concat_cols(ctx_rows, queries);

  Var cls_h = ad::relu(ad::add_row(ad::matmul(head_in, p[kCls1W]), p[kCls1B]));
  Var logits = ad::add_row(ad::matmul(cls_h, p[kCls2W]), p[kCls2B]);
  Var box_h = ad::relu(ad::add_row(ad::matmul(head_in, p[kBox1W]), p[kBox1B]));
  Var boxes = ad::sigmoid(ad::add_row(ad::matmul(box_h, p[kBox2W]), p[kBox2B]));
  return {{logits, ad::softmax(logits), boxes}, queries};
}

namespace {

std::vector<Var> constants(Tape& tape, const ModelParams& params) {
  std::vector<Var> v;
  for (const Tensor& t : params.tensors) v.push_back(tape.constant(t));
  return v;
}

}  // namespace

PredictionBatch forward(const ModelParams& params, const ModelInput& input) {
  Tape tape;
  const auto p = constants(tape, params);
  const ForwardVars f = forward(tape, p, params.config, input);
  return {f.pred.probs.value(), f.pred.boxes.value(), f.pred.logits.value()};
}

Tensor query_inputs(const ModelParams& params, const ModelInput& input) {
  Tape tape;
  const auto p = constants(tape, params);
  return forward(tape, p, params.config, input).query_in.value();
}

std::size_t default_threads() {
  if (const char* env = std::getenv("IUCL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- training

namespace {

struct SampleGrad {
  std::vector<Tensor> grads;
  LossReport report;
};

struct StepItem {
  const Sample* sample;
  const Grid* pooled;
  std::uint64_t seed;
};

SampleGrad sample_gradient(const ModelParams& params, const StepItem& item, const TrainConfig& cfg) {
  std::mt19937_64 rng(item.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Sample& s = *item.sample;

  AttributeKind attr = s.attribute;
  if (u(rng) < cfg.unspecified_rate) attr = AttributeKind::Unspecified;
  const bool use_partial = s.partial.present_count() > 0 && !(u(rng) < cfg.partial_dropout);
  const std::uint64_t noise_seed = rng();
  const std::uint64_t mask_seed = rng();

  ModelInput in;
  in.saliency = *item.pooled;
  in.noise = sample_noise(NoiseSpec::for_attribute(attr, params.config.grid, params.config.grid), noise_seed);
  std::optional<RandomMask> mask;
  if (use_partial) {
    if (cfg.random_mask) {
      mask = sample_random_mask(s.partial, mask_seed);
      in.partial = apply_mask(s.partial, *mask);
    } else {
      in.partial = s.partial;
    }
  }

  Tape tape;
  std::vector<Var> p;
  for (const Tensor& t : params.tensors) p.push_back(tape.leaf(t));
  const ForwardVars f = forward(tape, p, params.config, in);
  const LossParts parts = compute_losses(f.pred, s.layout, attr, use_partial ? &s.partial : nullptr,
                                         mask ? &*mask : nullptr, cfg.weights);
  const Var total = total_loss(parts, cfg.weights);
  tape.backward(total);
  SampleGrad out;
  out.report = make_report(parts, total);
  for (const Var& v : p) out.grads.push_back(tape.grad(v));
  return out;
}

}  // namespace

TrainResult train(const ModelConfig& model, std::span<const Sample> data, const TrainConfig& cfg) {
  validate(model);
  if (data.empty()) throw EmptySetError("training needs at least one sample");
  if (cfg.batch_size == 0) throw ValidationError("batch size must be at least 1");

  TrainResult result{ModelParams::init(model, mix_seed(cfg.seed, 0)), {}};
  ModelParams& params = result.params;
  if (cfg.epochs == 0) return result;

  std::vector<Grid> pooled;
  pooled.reserve(data.size());
  for (const Sample& s : data) pooled.push_back(downsample(s.saliency, model.grid, model.grid));

  AdamState adam(AdamConfig{cfg.lr}, params.tensors);
  const std::size_t decay_at = (2 * cfg.epochs + 2) / 3;
  const std::size_t threads = cfg.threads ? cfg.threads : default_threads();
  std::vector<std::size_t> order(data.size());
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch >= decay_at ? cfg.lr * 0.1 : cfg.lr;
    adam.set_lr(lr);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffler(mix_seed(cfg.seed, 1, epoch));
    std::shuffle(order.begin(), order.end(), shuffler);

    EpochRecord rec;
    rec.lr = lr;
    std::size_t steps_in_epoch = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<StepItem> items;
      for (std::size_t k = start; k < end; ++k)
        items.push_back({&data[order[k]], &pooled[order[k]], mix_seed(cfg.seed, 2 + step, k - start)});

      std::vector<SampleGrad> grads(items.size());
      try {
        const std::size_t workers = std::min(threads, items.size());
        if (workers <= 1) {
          for (std::size_t k = 0; k < items.size(); ++k) grads[k] = sample_gradient(params, items[k], cfg);
        } else {
          std::vector<std::exception_ptr> errors(workers);
          std::vector<std::thread> pool;
          for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
              try {
                for (std::size_t k = w; k < items.size(); k += workers)
                  grads[k] = sample_gradient(params, items[k], cfg);
              } catch (...) {
                errors[w] = std::current_exception();
              }
            });
          for (auto& t : pool) t.join();
          for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        }
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("training step " + std::to_string(step) + ": " + e.what());
      }

      // Summed in sample order so the result does not depend on threading.
      const double inv = 1.0 / static_cast<double>(items.size());
      std::vector<Tensor> g = std::move(grads[0].grads);
      for (std::size_t k = 1; k < grads.size(); ++k)
        for (std::size_t i = 0; i < g.size(); ++i)
          for (std::size_t j = 0; j < g[i].size(); ++j) g[i][j] += grads[k].grads[i][j];
      for (Tensor& t : g)
        for (double& v : t.storage()) v *= inv;
      for (const Tensor& t : g)
        if (!t.all_finite()) throw NonFiniteError("training step " + std::to_string(step) + ": non-finite gradient");
      adam.step(params.tensors, g);

      double step_total = 0.0;
      for (const SampleGrad& sg : grads) {
        rec.l_rec += sg.report.l_rec * inv;
        rec.l_ac += sg.report.l_ac * inv;
        rec.l_ad += sg.report.l_ad * inv;
        rec.l_plrm += sg.report.l_plrm * inv;
        step_total += sg.report.total * inv;
      }
      rec.total += step_total;
      result.history.step_totals.push_back(step_total);
      ++steps_in_epoch;
    }
    const double n = static_cast<double>(steps_in_epoch);
    rec.l_rec /= n;
    rec.l_ac /= n;
    rec.l_ad /= n;
    rec.l_plrm /= n;
    rec.total /= n;
    result.history.epochs.push_back(rec);
  }
  return result;
}

std::string history_to_json(const TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochRecord& r : h.epochs)
    epochs.push_back({{"l_rec", r.l_rec}, {"l_ac", r.l_ac}, {"l_ad", r.l_ad}, {"l_plrm", r.l_plrm},
                      {"total", r.total}, {"lr", r.lr}});
  return nlohmann::json{{"epochs", epochs}, {"step_totals", h.step_totals}}.dump(2);
}

// ---------------------------------------------------------------- decoding and evaluation

Layout decode(const PredictionBatch& pred) {
  Layout out;
  for (std::size_t r = 0; r < pred.queries(); ++r) {
    const Category c = argmax_category(pred.probs.data().subspan(r * kNumCategories, kNumCategories));
    if (c == Category::None) continue;
    const BBox raw{pred.boxes.at(r, 0), pred.boxes.at(r, 1), pred.boxes.at(r, 2), pred.boxes.at(r, 3)};
    const double l = std::max(0.0, raw.left()), rt = std::min(1.0, raw.right());
    const double t = std::max(0.0, raw.top()), b = std::min(1.0, raw.bottom());
    if (rt <= l || b <= t) continue;
    const BBox box = (raw.left() >= 0.0 && raw.right() <= 1.0 && raw.top() >= 0.0 && raw.bottom() <= 1.0)
                         ? raw
                         : BBox::from_edges(l, t, rt, b);
    if (box.area() < 1e-4) continue;
    out.elements.push_back({c, sanitize_box(box)});
  }
  return out;
}

MetricReport evaluate(const ModelParams& params, std::span<const Sample> data, const EvalProtocol& protocol) {
  if (data.empty()) throw EmptySetError("evaluation needs at least one sample");
  std::vector<Layout> layouts(data.size());
  std::vector<Tensor> flats;
  std::vector<PartialLayout> pls;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data[i];
    const std::uint64_t seed = mix_seed(protocol.seed, i);
    ModelInput in;
    if (protocol.mode == EvalMode::Attribute) {
      in = make_input(params.config, s.saliency, protocol.attr, seed);
    } else {
      std::optional<PartialLayout> pl;
      if (!s.layout.empty())
        pl = protocol.mode == EvalMode::Partial ? extract_partial(s.layout, mix_seed(seed, 1))
                                                : coordinates_only_partial(s.layout, mix_seed(seed, 1));
      in = make_input(params.config, s.saliency, s.attribute, seed, pl);
    }
    const PredictionBatch pred = forward(params, in);
    layouts[i] = decode(pred);
    if (in.partial) {
      flats.push_back(flatten(pred));
      pls.push_back(*in.partial);
    }
  }
  std::vector<MetricInput> inputs;
  for (std::size_t i = 0; i < data.size(); ++i)
    inputs.push_back({&layouts[i], &data[i].saliency, &data[i].attention});
  MetricReport rep = summarize(inputs, protocol.mode == EvalMode::Attribute
                                           ? std::optional<AttributeKind>(protocol.attr)
                                           : std::nullopt);
  if (protocol.mode != EvalMode::Attribute) rep.r_plc = r_plc(flats, pls);
  return rep;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
  } else {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

struct Reader {
  std::string_view bytes;
  std::size_t pos = 0;

  template <typename T>
  T get() {
    if (pos + sizeof(T) > bytes.size()) throw FormatError("checkpoint is truncated");
    unsigned char b[sizeof(T)];
    std::memcpy(b, bytes.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
};

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
  std::string out = "IUCL";
  put<std::uint32_t>(out, kCheckpointVersion);
  const ModelConfig& c = params.config;
  for (std::size_t v : {c.grid, c.feature_dim, c.query_dim, c.queries, c.head_hidden})
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
  for (const Tensor& t : params.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.data()) put<double>(out, v);
  }
  return out;
}

ModelParams decode_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, 4) != "IUCL") throw FormatError("not a checkpoint (bad magic)");
  Reader r{bytes, 4};
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  ModelParams p;
  p.config.grid = r.get<std::uint32_t>();
  p.config.feature_dim = r.get<std::uint32_t>();
  p.config.query_dim = r.get<std::uint32_t>();
  p.config.queries = r.get<std::uint32_t>();
  p.config.head_hidden = r.get<std::uint32_t>();
  try {
    validate(p.config);
  } catch (const ValidationError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  const auto shapes = param_shapes(p.config);
  if (count != shapes.size()) throw FormatError("checkpoint has the wrong number of tensors");
  for (std::size_t i = 0; i < count; ++i) {
    const auto rank = r.get<std::uint32_t>();
    Tensor::Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    if (shape != shapes[i])
      throw FormatError("tensor " + ModelParams::names()[i] + " has shape " + shape_string(shape) +
                        ", expected " + shape_string(shapes[i]));
    Tensor t(shape);
    for (double& v : t.storage()) v = r.get<double>();
    if (!t.all_finite()) throw FormatError("tensor " + ModelParams::names()[i] + " is not finite");
    p.tensors.push_back(std::move(t));
  }
  if (r.pos != bytes.size()) throw FormatError("checkpoint has trailing bytes");
  return p;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  write_text_file(path, encode_checkpoint(params));
}

ModelParams load_checkpoint(const std::string& path) { return decode_checkpoint(read_text_file(path)); }

}  // namespace iucl
