#include "spoc/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <vector>

#include "spoc/dataset.hpp"
#include "spoc/evaluation.hpp"
#include "spoc/json.hpp"
#include "spoc/network.hpp"
#include "spoc/resampler.hpp"
#include "spoc/seed.hpp"
#include "spoc/stats.hpp"

namespace spoc::cli {
namespace {

constexpr int kManifestVersion = 1;

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string num(std::uint64_t v) { return std::to_string(v); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kFileError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kFileError, "failed writing " + path);
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool verbose = false;
};

struct BalanceOptions {
  double epsilon = 1.96;
  double sigma_ref = 0.36;
  double step_fraction = 0.1;
  std::size_t max_iterations = 100;
  std::size_t floor = 5;
  std::size_t max_rows = 500'000;
};

struct TrainOptions {
  std::string layout = "sbnednn";
  std::size_t hidden_width = 128;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  double lr = 1e-3;
  double ratio = 0.7;
  bool stratified = false;
};

void add_global(CLI::App* cmd, GlobalOptions& g) {
  cmd->add_option("--seed", g.seed, "Base seed; every random stream is derived from it")->capture_default_str();
  cmd->add_flag("-v,--verbose", g.verbose, "Print warnings and progress to stderr");
}

void add_diag(CLI::App* cmd, BalanceOptions& b) {
  cmd->add_option("--epsilon", b.epsilon, "Z-test threshold")->capture_default_str();
  cmd->add_option("--sigma-ref", b.sigma_ref, "Reference scale dividing the max score")->capture_default_str();
}

void add_balance(CLI::App* cmd, BalanceOptions& b) {
  add_diag(cmd, b);
  cmd->add_option("--step-fraction", b.step_fraction, "Fraction of a class resampled per action")
      ->capture_default_str();
  cmd->add_option("--max-iterations", b.max_iterations, "Sampling iteration cap")->capture_default_str();
  cmd->add_option("--floor", b.floor, "Minimum rows per class under undersampling")->capture_default_str();
  cmd->add_option("--max-rows", b.max_rows, "Stop resampling once the data exceeds this many rows (0 = no cap)")
      ->capture_default_str();
}

void add_train(CLI::App* cmd, TrainOptions& t, bool with_layout) {
  if (with_layout) {
    cmd->add_option("--layout", t.layout, "structure1|structure2|structure3|sbnednn|depth3..depth7")
        ->capture_default_str();
  }
  cmd->add_option("--hidden-width", t.hidden_width, "Width of every hidden Dense layer")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "Maximum training epochs")->capture_default_str();
  cmd->add_option("--patience", t.patience, "Early stop after this many non-improving epochs (0 = off)")
      ->capture_default_str();
  cmd->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--ratio", t.ratio, "Train fraction of the split")->capture_default_str();
  cmd->add_flag("--stratified", t.stratified, "Split per class instead of over all rows");
}

std::vector<std::string> balance_args(const BalanceOptions& b) {
  return {"--epsilon",        num(b.epsilon),        "--sigma-ref", num(b.sigma_ref),
          "--step-fraction",  num(b.step_fraction),  "--max-iterations", num(std::uint64_t{b.max_iterations}),
          "--floor",          num(std::uint64_t{b.floor}), "--max-rows", num(std::uint64_t{b.max_rows})};
}

std::vector<std::string> train_args(const TrainOptions& t, bool with_layout) {
  std::vector<std::string> a;
  if (with_layout) a.insert(a.end(), {"--layout", t.layout});
  a.insert(a.end(), {"--hidden-width", num(std::uint64_t{t.hidden_width}), "--batch-size",
                     num(std::uint64_t{t.batch_size}), "--epochs", num(std::uint64_t{t.epochs}), "--patience",
                     num(std::uint64_t{t.patience}), "--lr", num(t.lr), "--ratio", num(t.ratio)});
  if (t.stratified) a.emplace_back("--stratified");
  return a;
}

resample::BalanceConfig balance_config(const BalanceOptions& b, std::uint64_t seed) {
  resample::BalanceConfig c;
  c.diagnostics.epsilon = b.epsilon;
  c.diagnostics.sigma_ref = b.sigma_ref;
  c.step_fraction = b.step_fraction;
  c.max_iterations = b.max_iterations;
  c.floor = b.floor;
  c.max_rows = b.max_rows;
  c.seed = derive_seed(seed, "balance");
  return c;
}

nn::TrainConfig train_config(const TrainOptions& t, std::uint64_t seed) {
  nn::TrainConfig c;
  c.batch_size = t.batch_size;
  c.epochs = t.epochs;
  c.patience = t.patience;
  c.adam.lr = t.lr;
  c.seed = derive_seed(seed, "train");
  return c;
}

Json manifest(const std::string& command, std::vector<std::string> args, Json config, std::uint64_t seed) {
  Json m;
  m["format_version"] = kManifestVersion;
  m["command"] = command;
  args.insert(args.begin(), command);
  m["args"] = std::move(args);
  m["seed"] = seed;
  m["seed_derivation"] = {{"scheme", kSeedDerivation},
                          {"streams", {"split", "balance", "train", "synth"}},
                          {"train_substreams", {"init", "shuffle"}}};
  m["config"] = std::move(config);
  return m;
}

void report_warnings(const std::vector<std::string>& warnings, const GlobalOptions& g, std::ostream& err) {
  if (!g.verbose) return;
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

Json counts_json(const data::ScoreDataset& ds) {
  Json j = Json::object();
  const auto counts = data::class_counts(ds);
  for (std::size_t c = 0; c < counts.size(); ++c) j[std::string(data::level_name(static_cast<int>(c)))] = counts[c];
  return j;
}

data::ScoreDataset load_input(const std::string& path, const GlobalOptions& g, std::ostream& err) {
  auto loaded = data::load_csv(path);
  if (g.verbose && loaded.dropped_count > 0) {
    err << "dropped " << loaded.dropped_count << " rows with missing values from " << path << '\n';
  }
  return std::move(loaded.dataset);
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string output;
  std::string spec_path;
  std::size_t n = 0;
  std::size_t d = 0;
  double noise = 0.0;
  std::vector<double> proportions;
};

int cmd_synth(const SynthOptions& o, const CLI::App& cmd, const GlobalOptions& g, std::ostream& out) {
  data::SyntheticSpec spec;
  if (!o.spec_path.empty()) {
    std::ifstream in(o.spec_path);
    if (!in) throw Error(ErrorCode::kFileError, "cannot open spec " + o.spec_path);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidSpec, std::string("spec is not valid JSON: ") + e.what());
    }
    spec = data::synthetic_spec_from_json(j);
  }
  if (cmd.count("--n") > 0) spec.n = o.n;
  if (cmd.count("--d") > 0) spec.d = o.d;
  if (cmd.count("--noise") > 0) spec.noise = o.noise;
  if (cmd.count("--proportions") > 0) {
    if (o.proportions.size() != data::kNumLevels) {
      throw Error(ErrorCode::kInvalidSpec, "--proportions needs 6 comma-separated values");
    }
    std::copy(o.proportions.begin(), o.proportions.end(), spec.class_proportions.begin());
  }
  if (cmd.count("--seed") > 0 || o.spec_path.empty()) spec.seed = derive_seed(g.seed, "synth");
  spec.validate();

  const auto ds = data::synthesize_dataset(spec);
  data::write_csv(ds, o.output);

  std::string props;
  for (std::size_t i = 0; i < spec.class_proportions.size(); ++i) {
    props += (i ? "," : "") + num(spec.class_proportions[i]);
  }
  std::vector<std::string> args{"--output", o.output,     "--n",           num(std::uint64_t{spec.n}),
                                "--d",      num(std::uint64_t{spec.d}), "--noise", num(spec.noise),
                                "--proportions", props, "--seed", num(g.seed)};
  Json config;
  config["synthetic_spec"] = data::to_json(spec);
  write_json(o.output + ".manifest.json", manifest("synth", args, config, g.seed));

  Json summary;
  summary["output"] = o.output;
  summary["rows"] = ds.size();
  summary["class_counts"] = counts_json(ds);
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseOptions {
  std::string input;
  std::string output;
  BalanceOptions stats;
};

int cmd_diagnose(const DiagnoseOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto ds = load_input(o.input, g, err);
  stats::DiagnosticsConfig config{o.stats.sigma_ref, o.stats.epsilon};
  const auto diag = stats::diagnose(ds.grades, config);
  const Json j = stats::to_json(diag, config);
  out << j.dump(2) << '\n';
  if (!o.output.empty()) {
    write_json(o.output, j);
    std::vector<std::string> args{"--input", o.input, "--output", o.output, "--epsilon", num(o.stats.epsilon),
                                  "--sigma-ref", num(o.stats.sigma_ref)};
    Json cfg{{"sigma_ref", config.sigma_ref}, {"epsilon", config.epsilon}};
    write_json(o.output + ".manifest.json", manifest("diagnose", args, cfg, g.seed));
  }
  return stats::passes_gaussian_test(diag, config) ? kExitOk : kExitDiagnosisFailed;
}

// ---------------------------------------------------------------- balance

struct BalanceCmdOptions {
  std::string input;
  std::string output;
  BalanceOptions balance;
};

Json balance_summary(const resample::BalanceResult& r, const stats::DiagnosticsConfig& config) {
  Json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["rows"] = r.balanced.size();
  j["class_counts"] = counts_json(r.balanced);
  j["final_diagnostics"] = stats::to_json(r.final_diagnostics, config);
  return j;
}

int cmd_balance(const BalanceCmdOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto ds = load_input(o.input, g, err);
  const auto config = balance_config(o.balance, g.seed);
  const auto result = resample::balance(ds, config);
  report_warnings(result.warnings, g, err);

  data::write_csv(result.balanced, o.output);
  write_json(o.output + ".trace.json", resample::trace_to_json(result));

  std::vector<std::string> args{"--input", o.input, "--output", o.output};
  const auto b = balance_args(o.balance);
  args.insert(args.end(), b.begin(), b.end());
  args.insert(args.end(), {"--seed", num(g.seed)});
  Json cfg{{"sigma_ref", config.diagnostics.sigma_ref}, {"epsilon", config.diagnostics.epsilon},
           {"step_fraction", config.step_fraction},     {"max_iterations", config.max_iterations},
           {"floor", config.floor},                     {"max_rows", config.max_rows},
           {"balance_seed", config.seed},
           {"tiers", {{"lower", {"L1", "L2"}}, {"medium", {"L3", "L4"}}, {"upper", {"L5", "L6"}}}}};
  write_json(o.output + ".manifest.json", manifest("balance", args, cfg, g.seed));

  out << balance_summary(result, config.diagnostics).dump(2) << '\n';
  if (!result.converged) {
    err << "balance did not converge after " << result.iterations << " iterations\n";
    return kExitNonConvergence;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainCmdOptions {
  std::string input;
  std::string output;
  TrainOptions train;
};

int cmd_train(const TrainCmdOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto choice = nn::parse_layout(o.train.layout);
  const auto ds = load_input(o.input, g, err);
  const auto parts = data::split(ds, o.train.ratio, derive_seed(g.seed, "split"), o.train.stratified);
  if (parts.test_empty && g.verbose) err << "warning: test split is empty; no held-out report\n";

  const auto standardizer = data::fit_standardizer(parts.train);
  const Matrix x_train = data::apply_standardizer(standardizer, parts.train);
  const auto spec = nn::make_layout(choice, ds.dim(), data::kNumLevels, o.train.hidden_width);
  const auto tcfg = train_config(o.train, g.seed);
  auto model = nn::train(spec, x_train, parts.train.levels, tcfg);
  model.standardizer = standardizer;

  Json report = nullptr;
  if (!parts.test_empty) {
    const auto predicted = nn::predict(model, parts.test.features);
    report = eval::to_json(eval::evaluate(predicted, parts.test.levels));
  }

  nn::save_model(model, o.output);
  write_text(o.output + ".log.csv", nn::format_training_log(model.log));
  write_json(o.output + ".report.json", report);

  std::vector<std::string> args{"--input", o.input, "--output", o.output};
  const auto t = train_args(o.train, true);
  args.insert(args.end(), t.begin(), t.end());
  args.insert(args.end(), {"--seed", num(g.seed)});
  Json cfg{{"layout", choice.name()},
           {"network", nn::to_json(spec)},
           {"batch_size", tcfg.batch_size},
           {"epochs", tcfg.epochs},
           {"patience", tcfg.patience},
           {"lr", tcfg.adam.lr},
           {"ratio", o.train.ratio},
           {"stratified", o.train.stratified},
           {"split_seed", parts.split_seed},
           {"train_seed", tcfg.seed},
           {"train_rows", parts.train.size()},
           {"test_rows", parts.test.size()}};
  write_json(o.output + ".manifest.json", manifest("train", args, cfg, g.seed));

  Json summary;
  summary["model"] = o.output;
  summary["epochs_run"] = model.log.size();
  summary["final_train_accuracy"] = model.log.empty() ? Json(nullptr) : Json(model.log.back().train_accuracy);
  summary["test_report"] = report;
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::string model;
  std::string input;
  std::string output;
};

int cmd_evaluate(const EvaluateOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto model = nn::load_model(o.model);
  const auto ds = load_input(o.input, g, err);
  const auto predicted = nn::predict(model, ds.features);
  const Json report = eval::to_json(eval::evaluate(predicted, ds.levels, model.network.spec().num_classes));
  out << report.dump(2) << '\n';
  if (!o.output.empty()) {
    write_json(o.output, report);
    std::vector<std::string> args{"--model", o.model, "--input", o.input, "--output", o.output};
    write_json(o.output + ".manifest.json", manifest("evaluate", args, Json::object(), g.seed));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

struct AblateOptions {
  std::string input;
  std::string output;
  std::string ablation;
  bool skip_balance = false;
  BalanceOptions balance;
  TrainOptions train;
};

std::vector<nn::LayoutChoice> ablation_variants(const std::string& kind) {
  if (kind == "bn-layouts") {
    return {{nn::LayoutKind::kStructure1}, {nn::LayoutKind::kStructure2}, {nn::LayoutKind::kStructure3},
            {nn::LayoutKind::kSbnednn}};
  }
  if (kind == "depths") {
    std::vector<nn::LayoutChoice> v;
    for (int k = 3; k <= 7; ++k) v.push_back({nn::LayoutKind::kDepth, k});
    return v;
  }
  throw Error(ErrorCode::kInvalidKind, "unknown ablation '" + kind + "' (expected bn-layouts or depths)");
}

int cmd_ablate(const AblateOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto variants = ablation_variants(o.ablation);
  const auto ds = load_input(o.input, g, err);
  const auto parts = data::split(ds, o.train.ratio, derive_seed(g.seed, "split"), o.train.stratified);
  if (parts.test_empty) throw Error(ErrorCode::kEmptyDataset, "ablation needs a non-empty test split");

  const auto bcfg = balance_config(o.balance, g.seed);
  data::ScoreDataset train_set = parts.train;
  Json balance_info = nullptr;
  if (!o.skip_balance) {
    auto balanced = resample::balance(parts.train, bcfg);
    report_warnings(balanced.warnings, g, err);
    if (!balanced.converged) err << "warning: balancing did not converge; training on the last iterate\n";
    balance_info = balance_summary(balanced, bcfg.diagnostics);
    train_set = std::move(balanced.balanced);
  }

  const auto standardizer = data::fit_standardizer(train_set);
  const Matrix x_train = data::apply_standardizer(standardizer, train_set);
  const Matrix x_test = data::apply_standardizer(standardizer, parts.test);
  const auto tcfg = train_config(o.train, g.seed);

  std::map<std::string, eval::EvaluationReport> reports;
  std::map<std::string, double> seconds;
  std::map<std::string, std::size_t> epochs_run;
  for (const auto& choice : variants) {
    const auto spec = nn::make_layout(choice, ds.dim(), data::kNumLevels, o.train.hidden_width);
    const auto start = std::chrono::steady_clock::now();
    const auto model = nn::train(spec, x_train, train_set.levels, tcfg);
    const auto stop = std::chrono::steady_clock::now();
    const auto name = choice.name();
    seconds[name] = std::chrono::duration<double>(stop - start).count();
    epochs_run[name] = model.log.size();
    reports[name] = eval::evaluate(model.network.predict(x_test), parts.test.levels);
    if (g.verbose) {
      err << name << ": total accuracy " << reports[name].total_accuracy << " in " << seconds[name] << " s\n";
    }
  }

  const auto table = eval::ablation_table(reports);
  write_text(o.output + ".csv", table.csv);
  write_text(o.output + ".txt", table.text);
  Json all = Json::object();
  for (const auto& [name, r] : reports) all[name] = eval::to_json(r);
  write_json(o.output + ".reports.json", all);

  std::string timing = "run,train_seconds,epochs_run\n";
  for (const auto& [name, s] : seconds) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", s);
    timing += name + "," + buf + "," + std::to_string(epochs_run[name]) + "\n";
  }
  write_text(o.output + ".timing.csv", timing);

  std::vector<std::string> args{"--input", o.input, "--output", o.output, "--ablation", o.ablation};
  const auto b = balance_args(o.balance);
  const auto t = train_args(o.train, false);
  args.insert(args.end(), b.begin(), b.end());
  args.insert(args.end(), t.begin(), t.end());
  if (o.skip_balance) args.emplace_back("--skip-balance");
  args.insert(args.end(), {"--seed", num(g.seed)});
  Json cfg{{"ablation", o.ablation},        {"split_seed", parts.split_seed}, {"balance_seed", bcfg.seed},
           {"train_seed", tcfg.seed},       {"balanced", !o.skip_balance},   {"balance", balance_info},
           {"train_rows", train_set.size()}, {"test_rows", parts.test.size()}};
  write_json(o.output + ".manifest.json", manifest("ablate", args, cfg, g.seed));

  out << table.text << '\n' << timing;
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDegenerateInput:
    case ErrorCode::kEmptyDataset:
    case ErrorCode::kEmptyInput:
      return kExitDegenerate;
    case ErrorCode::kDivergence:
      return kExitDivergence;
    default:
      return kExitUsage;
  }
}

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grade-level prediction: distribution diagnosis, Z-gated resampling, BN-embedded MLP"};
  app.name("spoc");
  app.require_subcommand(1);

  GlobalOptions global;

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic learner-record CSV");
  synth_cmd->add_option("--output", synth.output, "Output CSV")->required();
  synth_cmd->add_option("--spec", synth.spec_path, "JSON file {n, d, class_proportions, noise, seed}");
  synth_cmd->add_option("--n", synth.n, "Number of rows");
  synth_cmd->add_option("--d", synth.d, "Number of features");
  synth_cmd->add_option("--noise", synth.noise, "Gaussian noise around class prototypes");
  synth_cmd->add_option("--proportions", synth.proportions, "Six class proportions L1..L6")->delimiter(',');
  add_global(synth_cmd, global);

  DiagnoseOptions diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "Skewness/kurtosis diagnosis of the grade column");
  diag_cmd->add_option("--input", diag.input, "Input CSV")->required();
  diag_cmd->add_option("--output", diag.output, "Also write the diagnostics JSON here");
  add_diag(diag_cmd, diag.stats);
  add_global(diag_cmd, global);

  BalanceCmdOptions bal;
  auto* bal_cmd = app.add_subcommand("balance", "Resample classes until the Z-test passes");
  bal_cmd->add_option("--input", bal.input, "Input CSV")->required();
  bal_cmd->add_option("--output", bal.output, "Balanced CSV")->required();
  add_balance(bal_cmd, bal.balance);
  add_global(bal_cmd, global);

  TrainCmdOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Split, standardize and train a network");
  train_cmd->add_option("--input", tr.input, "Input CSV")->required();
  train_cmd->add_option("--output", tr.output, "Model JSON")->required();
  add_train(train_cmd, tr.train, true);
  add_global(train_cmd, global);

  EvaluateOptions ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Per-class recall and total accuracy of a model on a CSV");
  eval_cmd->add_option("--model", ev.model, "Model JSON")->required();
  eval_cmd->add_option("--input", ev.input, "Input CSV")->required();
  eval_cmd->add_option("--output", ev.output, "Also write the report JSON here");
  add_global(eval_cmd, global);

  AblateOptions ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare BN layouts or network depths");
  ablate_cmd->add_option("--input", ab.input, "Input CSV")->required();
  ablate_cmd->add_option("--output", ab.output, "Output path prefix")->required();
  ablate_cmd->add_option("--ablation", ab.ablation, "bn-layouts|depths")->required();
  ablate_cmd->add_flag("--skip-balance", ab.skip_balance, "Train on the unbalanced training split");
  add_balance(ablate_cmd, ab.balance);
  add_train(ablate_cmd, ab.train, false);
  add_global(ablate_cmd, global);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, *synth_cmd, global, out);
    if (*diag_cmd) return cmd_diagnose(diag, global, out, err);
    if (*bal_cmd) return cmd_balance(bal, global, out, err);
    if (*train_cmd) return cmd_train(tr, global, out, err);
    if (*eval_cmd) return cmd_evaluate(ev, global, out, err);
    if (*ablate_cmd) return cmd_ablate(ab, global, out, err);
  } catch (const Error& e) {
    err << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace spoc::cli
