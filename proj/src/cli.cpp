#include "iucl/cli.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "iucl/genmodel.hpp"
#include "iucl/gradsuite.hpp"
#include "iucl/render.hpp"
#include "iucl/synthdata.hpp"
#include "json.hpp"

namespace iucl::cli {

namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kAttrChoices = {"text", "underlay", "logo", "embellishment", "unspecified"};

// Writes to --out when given, otherwise to stdout.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_text_file(path, text);
}

struct Common {
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  auto* o = cmd->add_option("--out", c.out, "Output path");
  if (out_required) o->required();
}

int cmd_synth(std::size_t n, const Common& c, std::ostream& out) {
  DatasetSpec spec;
  spec.n_samples = n;
  spec.seed = c.seed;
  const auto samples = generate(spec);
  save_dataset(samples, c.out);
  std::array<std::size_t, kNumCategories> counts{};
  std::size_t total = 0;
  for (const Sample& s : samples)
    for (const Element& e : s.layout.elements) {
      ++counts[index_of(e.category)];
      ++total;
    }
  json freq;
  for (Category cat : kRealCategories)
    freq[std::string(category_name(cat))] = static_cast<double>(counts[index_of(cat)]) / static_cast<double>(total);
  out << json{{"samples", samples.size()}, {"elements", total}, {"category_fraction", freq}}.dump(2) << '\n';
  return 0;
}

int cmd_train(const std::string& data, std::size_t epochs, std::size_t batch, const std::string& ablate,
              const Common& c, std::ostream& out) {
  const auto samples = load_dataset(data);
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch;
  tc.seed = c.seed;
  if (ablate == "lp") tc.weights.eta = 0.0;
  if (ablate == "attr") tc.weights.beta = tc.weights.gamma = 0.0;
  if (ablate == "mask") tc.random_mask = false;
  const TrainResult r = train(ModelConfig{}, samples, tc);
  std::filesystem::create_directories(c.out);
  save_checkpoint(r.params, (std::filesystem::path(c.out) / "model.ckpt").string());
  write_text_file((std::filesystem::path(c.out) / "history.json").string(), history_to_json(r.history) + "\n");
  json summary{{"epochs", r.history.epochs.size()}, {"samples", samples.size()}};
  if (!r.history.epochs.empty()) summary["final_total"] = r.history.epochs.back().total;
  out << summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& attr, bool partial,
             bool coords, const Common& c, std::ostream& out) {
  const int modes = (!attr.empty()) + partial + coords;
  if (modes != 1) throw UsageError("eval needs exactly one of --attr, --partial, --coords-only");
  const ModelParams params = load_checkpoint(ckpt);
  const auto samples = load_dataset(data);
  EvalProtocol p;
  p.seed = c.seed;
  if (!attr.empty()) {
    p.mode = EvalMode::Attribute;
    p.attr = attribute_from_name(attr);
  } else {
    p.mode = partial ? EvalMode::Partial : EvalMode::CoordinatesOnly;
  }
  const MetricReport rep = evaluate(params, samples, p);
  if (c.out.empty()) {
    out << metric_report_to_json(rep) << '\n';
  } else {
    write_text_file(c.out, metric_report_to_json(rep) + "\n");
    out << metric_report_to_text(rep);
  }
  return 0;
}

int cmd_loss(const std::string& pred_path, const std::string& gt_path, const std::string& pl_path,
             const std::string& attr_name, bool use_mask, const Common& c, std::ostream& out) {
  const PredictionBatch pred = prediction_from_json(read_text_file(pred_path));
  const Layout gt = layout_from_json(read_text_file(gt_path));
  std::optional<PartialLayout> pl;
  if (!pl_path.empty()) pl = partial_from_json(read_text_file(pl_path), pred.queries());
  std::optional<RandomMask> mask;
  if (use_mask) {
    if (!pl) throw UsageError("--mask needs --pl");
    mask = sample_random_mask(*pl, c.seed);
  }
  const LossWeights w;
  ad::Tape tape;
  const PredictionVars vars = to_vars(tape, pred, false);
  const LossParts parts = compute_losses(vars, gt, attribute_from_name(attr_name), pl ? &*pl : nullptr,
                                         mask ? &*mask : nullptr, w);
  emit(c.out, report_to_json(make_report(parts, total_loss(parts, w))) + "\n", out);
  return 0;
}

int cmd_gradcheck(std::size_t points, const Common& c, std::ostream& out, std::ostream& err) {
  constexpr double kTolerance = 1e-4;
  const auto entries = loss_gradcheck_suite(c.seed, points);
  json losses;
  bool ok = true;
  for (const auto& e : entries) {
    losses[e.loss] = e.max_rel_error;
    ok = ok && e.max_rel_error < kTolerance;
  }
  emit(c.out, json{{"points", points}, {"tolerance", kTolerance}, {"max_rel_error", losses}, {"pass", ok}}.dump(2) + "\n",
       out);
  if (!ok) {
    err << json{{"error", "gradient check above tolerance"}, {"kind", "GradcheckError"}}.dump() << '\n';
    return 1;
  }
  return 0;
}

int cmd_sample_noise(const std::string& attr_name, std::size_t n, const Common& c, std::ostream& out) {
  if (n == 0) throw UsageError("--n must be at least 1");
  const AttributeKind attr = attribute_from_name(attr_name);
  const Tensor field = sample_noise(NoiseSpec::for_attribute(attr, 1, n), c.seed);
  std::array<double, 4> means{};
  for (std::size_t ch = 0; ch < 4; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += field[ch * n + i];
    means[ch] = s / static_cast<double>(n);
  }
  emit(c.out, json{{"attr", attr_name}, {"n", n}, {"means", means}, {"expected", attribute_mean(attr)}}.dump(2) + "\n",
       out);
  return 0;
}

int cmd_gen(const std::string& ckpt, const std::string& saliency, const std::string& attr_name,
            const std::string& pl_path, const Common& c, std::ostream& out) {
  const ModelParams params = load_checkpoint(ckpt);
  std::optional<PartialLayout> pl;
  if (!pl_path.empty()) pl = partial_from_json(read_text_file(pl_path), params.config.queries);
  const ModelInput in = make_input(params.config, load_grid(saliency), attribute_from_name(attr_name), c.seed, pl);
  emit(c.out, layout_to_json(decode(forward(params, in))) + "\n", out);
  return 0;
}

int cmd_render(const std::string& layout_path, const Common& c, std::ostream& out) {
  emit(c.out, render_svg(layout_from_json(read_text_file(layout_path))), out);
  return 0;
}

void report(std::ostream& err, const std::string& message, const std::string& kind) {
  err << json{{"error", message}, {"kind", kind}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layout generation toolkit with attribute and partial-layout constraints", "iucl"};
  app.require_subcommand(1);

  Common synth_c, train_c, eval_c, loss_c, grad_c, noise_c, gen_c, render_c;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::size_t synth_n = 1000;
  synth->add_option("--n", synth_n, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(synth, synth_c, true);

  auto* trainc = app.add_subcommand("train", "Train the generator");
  std::string train_data, ablate = "none";
  std::size_t epochs = 300, batch = 32;
  trainc->add_option("--data", train_data, "Dataset directory")->required();
  trainc->add_option("--epochs", epochs)->capture_default_str();
  trainc->add_option("--batch", batch)->capture_default_str()->check(CLI::PositiveNumber);
  trainc->add_option("--ablate", ablate, "Disable a training term")
      ->check(CLI::IsMember({"none", "lp", "attr", "mask"}))
      ->capture_default_str();
  add_common(trainc, train_c, true);

  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_attr;
  bool eval_partial = false, eval_coords = false;
  evalc->add_option("--ckpt", eval_ckpt)->required();
  evalc->add_option("--data", eval_data)->required();
  evalc->add_option("--attr", eval_attr, "Attribute protocol")->check(CLI::IsMember(kAttrChoices));
  evalc->add_flag("--partial", eval_partial, "Partial-layout protocol");
  evalc->add_flag("--coords-only", eval_coords, "Coordinates-only partial-layout protocol");
  add_common(evalc, eval_c, false);

  auto* lossc = app.add_subcommand("loss", "Print the loss report for a prediction");
  std::string loss_pred, loss_gt, loss_pl, loss_attr = "unspecified";
  bool loss_mask = false;
  lossc->add_option("--pred", loss_pred)->required();
  lossc->add_option("--gt", loss_gt)->required();
  lossc->add_option("--pl", loss_pl);
  lossc->add_option("--attr", loss_attr)->check(CLI::IsMember(kAttrChoices))->capture_default_str();
  lossc->add_flag("--mask", loss_mask, "Apply a random mask drawn from --seed");
  add_common(lossc, loss_c, false);

  auto* gradc = app.add_subcommand("gradcheck", "Finite-difference check of every loss");
  std::size_t points = 100;
  gradc->add_option("--points", points)->capture_default_str()->check(CLI::PositiveNumber);
  add_common(gradc, grad_c, false);

  auto* noisec = app.add_subcommand("sample-noise", "Empirical noise means for an attribute");
  std::string noise_attr;
  std::size_t noise_n = 100000;
  noisec->add_option("--attr", noise_attr)->required()->check(CLI::IsMember(kAttrChoices));
  noisec->add_option("--n", noise_n)->capture_default_str();
  add_common(noisec, noise_c, false);

  auto* genc = app.add_subcommand("gen", "Generate one layout");
  std::string gen_ckpt, gen_sal, gen_attr = "unspecified", gen_pl;
  genc->add_option("--ckpt", gen_ckpt)->required();
  genc->add_option("--saliency", gen_sal, "Saliency PGM")->required();
  genc->add_option("--attr", gen_attr)->check(CLI::IsMember(kAttrChoices))->capture_default_str();
  genc->add_option("--pl", gen_pl, "Partial layout JSON");
  add_common(genc, gen_c, false);

  auto* renderc = app.add_subcommand("render", "Render a layout as SVG");
  std::string render_layout;
  renderc->add_option("--layout", render_layout)->required();
  add_common(renderc, render_c, false);

  std::vector<const char*> argv = {"iucl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report(err, e.what(), "UsageError");
    return 2;
  }

  try {
    if (*synth) return cmd_synth(synth_n, synth_c, out);
    if (*trainc) return cmd_train(train_data, epochs, batch, ablate, train_c, out);
    if (*evalc) return cmd_eval(eval_ckpt, eval_data, eval_attr, eval_partial, eval_coords, eval_c, out);
    if (*lossc) return cmd_loss(loss_pred, loss_gt, loss_pl, loss_attr, loss_mask, loss_c, out);
    if (*gradc) return cmd_gradcheck(points, grad_c, out, err);
    if (*noisec) return cmd_sample_noise(noise_attr, noise_n, noise_c, out);
    if (*genc) return cmd_gen(gen_ckpt, gen_sal, gen_attr, gen_pl, gen_c, out);
    if (*renderc) return cmd_render(render_layout, render_c, out);
  } catch (const UsageError& e) {
    report(err, e.what(), "UsageError");
    return 2;
  } catch (const Error& e) {
    report(err, e.what(), e.kind());
    return 1;
  } catch (const std::exception& e) {
    report(err, e.what(), "RuntimeError");
    return 1;
  }
  report(err, "no command given", "UsageError");
  return 2;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace iucl::cli
