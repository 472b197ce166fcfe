#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "voxstate/errors.hpp"
#include "voxstate/eval.hpp"
#include "voxstate/metrics.hpp"
#include "voxstate/models.hpp"
#include "voxstate/network.hpp"
#include "voxstate/rng.hpp"
#include "voxstate/synth.hpp"
#include "voxstate/volume_io.hpp"

namespace {

using nlohmann::json;
using namespace voxstate;

/**
 * Binds a command's options so each value resolves in precedence order:
 * explicit command-line flag, then the --config file, then the preset,
 * then the built-in default. Config and preset keys are the long flag
 * names without the leading dashes.
 */
class OptionSet {
 public:
  template <class T>
  CLI::Option* add(CLI::App& app, const std::string& flag, T& value,
                   const std::string& help) {
    CLI::Option* opt = app.add_option(flag, value, help);
    record(opt, flag, value);
    return opt;
  }

  CLI::Option* add_flag(CLI::App& app, const std::string& flag, bool& value,
                        const std::string& help) {
    CLI::Option* opt = app.add_flag(flag, value, help);
    record(opt, flag, value);
    return opt;
  }

  // Overwrites every value the command line left untouched with the
  // matching entry of src.
  void pull(const json& src) {
    for (const Entry& e : entries_) e.pull(src);
  }

  json resolved() const {
    json j;
    for (const Entry& e : entries_) e.push(j);
    return j;
  }

  bool knows(const std::string& key) const {
    for (const Entry& e : entries_)
      if (e.key == key) return true;
    return false;
  }

  // True when the user supplied the value explicitly, by flag or by a
  // config/preset entry.
  bool touched(const std::string& key, const json& src) const {
    for (const Entry& e : entries_)
      if (e.key == key) return e.opt->count() > 0 || src.contains(key);
    throw config_error("internal: untracked option key " + key);
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> pull;
    std::function<void(json&)> push;
  };

  template <class T>
  void record(CLI::Option* opt, const std::string& flag, T& value) {
    const std::string key = flag.substr(flag.find_first_not_of('-'));
    entries_.push_back({key, opt,
                        [opt, key, &value](const json& src) {
                          if (opt->count() == 0 && src.contains(key))
                            value = src.at(key).get<T>();
                        },
                        [key, &value](json& dst) { dst[key] = value; }});
  }

  std::vector<Entry> entries_;
};

json preset_values(const std::string& name) {
  if (name == "paper-a")
    return {{"subjects", 11},     {"runs", 2},
            {"timepoints", 200},  {"latent", 120},
            {"dims", {16, 16, 11}}, {"amplitude", 1.0},
            {"noise", 0.1},       {"shared-mixing", false},
            {"mixed-runs", false}};
  if (name == "paper-b")
    return {{"subjects", 22},     {"runs", 3},
            {"timepoints", 80},   {"latent", 120},
            {"dims", {16, 16, 11}}, {"amplitude", 1.5},
            {"noise", 0.1},       {"shared-mixing", true},
            {"mixed-runs", true}};
  throw config_error("unknown preset: " + name +
                     " (available: paper-a, paper-b)");
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw format_error("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw format_error(path + ": " + e.what());
  }
  if (!j.is_object()) throw format_error(path + ": config root must be an object");
  return j;
}

// Preset entries overlaid with config-file entries; flags still win
// because OptionSet::pull skips options the command line set.
json merged_sources(const OptionSet& opts, const std::string& config_path,
                    const std::string& preset = "") {
  json merged = preset.empty() ? json::object() : preset_values(preset);
  json file = load_config_file(config_path);
  for (const auto& [k, v] : file.items()) {
    if (!opts.knows(k))
      throw config_error(config_path + ": unknown config key '" + k + "'");
    merged[k] = v;
  }
  return merged;
}

void resolve(OptionSet& opts, const json& src, const std::string& config_path) {
  try {
    opts.pull(src);
  } catch (const json::exception& e) {
    throw config_error(config_path + ": " + e.what());
  }
}

void make_out_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec)
    throw format_error("cannot create output directory " + path + ": " +
                       ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw format_error("write failed: " + path);
}

void echo_config(const std::string& out_dir, const std::string& command,
                 const OptionSet& opts, const std::string& out,
                 const std::string& config_path) {
  json j = opts.resolved();
  j["command"] = command;
  j["out"] = out;
  if (!config_path.empty()) j["config"] = config_path;
  write_text(out_dir + "/config.json", j.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  const std::string manifest = dir + "/manifest.jsonl";
  if (!std::filesystem::exists(manifest))
    throw format_error("missing manifest: " + manifest);
  Dataset d;
  for (const ManifestEntry& e : read_manifest(manifest)) {
    VolumeSeries s = read_volume_file(resolve_manifest_path(manifest, e.path));
    s.subject_id = e.subject_id;
    s.run_id = e.run_id;
    d.runs.push_back(std::move(s));
  }
  d.mask = read_mask_file(dir + "/mask.bmsk");
  return d;
}

VolumeDims dims_from(const std::vector<std::size_t>& v) {
  if (v.size() != 3)
    throw config_error("--dims needs exactly three extents (x y z)");
  return VolumeDims{static_cast<std::uint32_t>(v[0]),
                    static_cast<std::uint32_t>(v[1]),
                    static_cast<std::uint32_t>(v[2])};
}

void check_threads(int threads) {
  if (threads < 1) throw config_error("--threads must be at least 1");
}

struct CommonArgs {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  int threads = 1;
};

void add_common(CLI::App& cmd, OptionSet& opts, CommonArgs& c,
                bool out_required) {
  opts.add(cmd, "--seed", c.seed, "Master random seed");
  CLI::Option* out =
      cmd.add_option("--out", c.out, "Output directory for artifacts");
  if (out_required) out->required();
  cmd.add_option("--config", c.config,
                 "JSON config file; explicit flags override its entries");
  opts.add(cmd, "--threads", c.threads,
           "Compute threads (kernels are single-threaded; higher values "
           "are accepted for interface stability)");
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  CommonArgs common;
  std::string preset;
  std::size_t subjects = 11, runs = 2, timepoints = 200, latent = 120;
  std::vector<std::size_t> dims{16, 16, 11};
  double amplitude = 1.0, noise = 0.1;
  bool shared_mixing = false, mixed_runs = false;
  OptionSet opts;
};

void setup_gen(CLI::App& cmd, GenArgs& a) {
  add_common(cmd, a.opts, a.common, true);
  cmd.add_option("--preset", a.preset,
                 "Named dataset geometry: paper-a or paper-b");
  a.opts.add(cmd, "--subjects", a.subjects, "Number of subjects");
  a.opts.add(cmd, "--runs", a.runs, "Runs per subject");
  a.opts.add(cmd, "--timepoints", a.timepoints, "Timepoints per run");
  a.opts.add(cmd, "--latent", a.latent, "Latent signal dimensions");
  a.opts.add(cmd, "--dims", a.dims, "Volume extents x y z")
      ->expected(3)
      ->delimiter(',');
  a.opts.add(cmd, "--amplitude", a.amplitude, "Class signal amplitude");
  a.opts.add(cmd, "--noise", a.noise, "Gaussian noise sigma");
  a.opts.add_flag(cmd, "--shared-mixing", a.shared_mixing,
                  "One mixing matrix shared by all subjects");
  a.opts.add_flag(cmd, "--mixed-runs", a.mixed_runs,
                  "Uneven run counts across subjects");
}

int run_gen(GenArgs& a) {
  json src = merged_sources(a.opts, a.common.config, a.preset);
  resolve(a.opts, src, a.common.config);
  check_threads(a.common.threads);

  SynthSpec spec;
  spec.n_subjects = a.subjects;
  spec.runs_per_subject = a.runs;
  spec.timepoints_per_run = a.timepoints;
  spec.n_voxels_latent = a.latent;
  spec.dims = dims_from(a.dims);
  spec.class_signal_amplitude = a.amplitude;
  spec.noise_sigma = a.noise;
  spec.shared_mixing = a.shared_mixing;
  spec.mixed_runs = a.mixed_runs;
  spec.seed = a.common.seed;

  SynthResult res = synth_generate(spec);

  make_out_dir(a.common.out);
  std::vector<ManifestEntry> entries;
  for (const VolumeSeries& s : res.runs) {
    const std::string fname = s.subject_id + "_" + s.run_id + ".bvol";
    write_volume_file(a.common.out + "/" + fname, s);
    entries.push_back({s.subject_id, s.run_id, fname});
  }
  write_manifest(a.common.out + "/manifest.jsonl", entries);
  write_mask_file(a.common.out + "/mask.bmsk", res.truth.mask);
  write_ground_truth(a.common.out + "/truth.json", res.truth);
  echo_config(a.common.out, "gen", a.opts, a.common.out, a.common.config);

  std::size_t total = 0;
  for (const VolumeSeries& s : res.runs) total += s.n_timepoints();
  std::cout << "wrote " << res.runs.size() << " runs, " << total
            << " volumes, " << res.truth.mask.n_kept() << " in-mask voxels to "
            << a.common.out << "\n";
  return 0;
}

// -------------------------------------------------------------- run-a

struct RunAArgs {
  CommonArgs common;
  std::string data;
  std::size_t voxels = 300, q = 3, ref = 0;
  bool identity = false;
  std::size_t epochs = 500, batch = 32;
  double early_stop = 0.0;
  std::vector<std::size_t> filters{64, 128, 128, 128, 128, 64};
  std::size_t kernel = 10;
  std::vector<std::size_t> fc{1024, 512, 256, 128, 64, 32, 3};
  double conv_dropout = 0.25, fc_dropout = 0.5;
  std::size_t fc_dropout_layers = 2;
  double weight_decay = 5e-2, lr = 4.5e-3, lr_decay = 0.2;
  std::size_t patience = 50;
  std::size_t expected_flatten = 15744;
  OptionSet opts;
};

void setup_run_a(CLI::App& cmd, RunAArgs& a) {
  add_common(cmd, a.opts, a.common, true);
  cmd.add_option("--data", a.data, "Dataset directory (manifest.jsonl, mask.bmsk)")
      ->required();
  a.opts.add(cmd, "--voxels", a.voxels, "Voxels kept by the F-score screen");
  a.opts.add(cmd, "--q", a.q, "Refinement passes over the common space");
  a.opts.add(cmd, "--ref", a.ref,
             "Reference subject index within each fold's training set");
  a.opts.add_flag(cmd, "--identity", a.identity,
                  "Skip rotational alignment (ablation)");
  a.opts.add(cmd, "--epochs", a.epochs, "Maximum training epochs");
  a.opts.add(cmd, "--batch", a.batch, "Minibatch size");
  a.opts.add(cmd, "--early-stop-loss", a.early_stop,
             "Stop an epoch loop once mean loss reaches this (0 = off)");
  a.opts.add(cmd, "--filters", a.filters, "Filters per conv block")
      ->delimiter(',');
  a.opts.add(cmd, "--kernel", a.kernel, "Conv kernel length");
  a.opts.add(cmd, "--fc", a.fc, "Dense head widths, last = classes")
      ->delimiter(',');
  a.opts.add(cmd, "--conv-dropout", a.conv_dropout, "Dropout after conv blocks");
  a.opts.add(cmd, "--fc-dropout", a.fc_dropout, "Dropout after early dense layers");
  a.opts.add(cmd, "--fc-dropout-layers", a.fc_dropout_layers,
             "How many leading dense layers get dropout");
  a.opts.add(cmd, "--weight-decay", a.weight_decay, "L2 coefficient on weights");
  a.opts.add(cmd, "--lr", a.lr, "Initial learning rate");
  a.opts.add(cmd, "--lr-decay", a.lr_decay, "Plateau decay factor");
  a.opts.add(cmd, "--patience", a.patience, "Epochs without improvement before decay");
  a.opts.add(cmd, "--expected-flatten", a.expected_flatten,
             "Assert this flatten width (default: derived, 0 disables)");
}

ModelAConfig model_a_from(const RunAArgs& a, const json& src) {
  ModelAConfig m;
  m.input_len = a.voxels;
  m.conv_filters = a.filters;
  m.kernel = a.kernel;
  m.fc_widths = a.fc;
  m.n_classes = a.fc.empty() ? 0 : a.fc.back();
  m.conv_dropout = a.conv_dropout;
  m.fc_dropout = a.fc_dropout;
  m.fc_dropout_layers = a.fc_dropout_layers;
  m.weight_decay = a.weight_decay;
  m.lr0 = a.lr;
  m.lr_decay = a.lr_decay;
  m.patience = a.patience;
  if (a.opts.touched("expected-flatten", src)) {
    m.expected_flatten = a.expected_flatten;
  } else {
    // The default assertion only holds for the default topology.
    const ModelAConfig def;
    const bool stock = m.input_len == def.input_len &&
                       m.conv_filters == def.conv_filters &&
                       m.kernel == def.kernel;
    m.expected_flatten = stock ? def.expected_flatten : 0;
  }
  return m;
}

int run_run_a(RunAArgs& a) {
  json src = merged_sources(a.opts, a.common.config);
  resolve(a.opts, src, a.common.config);
  check_threads(a.common.threads);

  PipelineAOptions opt;
  opt.n_voxels = a.voxels;
  opt.q_passes = a.q;
  opt.ref_subject = a.ref;
  opt.identity_alignment = a.identity;
  opt.model = model_a_from(a, src);
  opt.max_epochs = a.epochs;
  opt.batch_size = a.batch;
  opt.early_stop_loss = a.early_stop;
  opt.artifact_dir = a.common.out;

  make_out_dir(a.common.out);
  Dataset data = load_dataset(a.data);

  const auto t0 = std::chrono::steady_clock::now();
  PipelineAResult r = run_pipeline_a(data, opt, a.common.seed);
  const auto t1 = std::chrono::steady_clock::now();

  json s;
  s["pipeline"] = "a";
  s["identity-alignment"] = a.identity;
  s["n_folds"] = r.folds.size();
  s["mean_accuracy"] = r.mean_accuracy;
  s["sd_accuracy"] = r.sd_accuracy;
  json conf = json::array();
  for (std::size_t i = 0; i < r.pooled_confusion.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < r.pooled_confusion.cols(); ++j)
      row.push_back(r.pooled_confusion(i, j));
    conf.push_back(row);
  }
  s["pooled_confusion"] = conf;
  json folds = json::array();
  json train_seconds = json::array();
  for (const FoldResult& f : r.folds) {
    folds.push_back({{"held_out_subject", f.held_out_subject},
                     {"accuracy", f.metrics.accuracy},
                     {"n_test", f.predictions.y_true.size()},
                     {"epochs", f.epoch_loss.size()},
                     {"final_loss",
                      f.epoch_loss.empty() ? 0.0 : f.epoch_loss.back()}});
    train_seconds.push_back(f.train_seconds);
  }
  s["folds"] = folds;
  s["timing"] = {
      {"total_seconds", std::chrono::duration<double>(t1 - t0).count()},
      {"train_seconds", train_seconds}};
  write_text(a.common.out + "/summary.json", s.dump(2) + "\n");
  echo_config(a.common.out, "run-a", a.opts, a.common.out, a.common.config);

  std::cout << "mean accuracy " << r.mean_accuracy << " (sd " << r.sd_accuracy
            << ") over " << r.folds.size() << " folds\n";
  return 0;
}

// -------------------------------------------------------------- run-b

struct RunBArgs {
  CommonArgs common;
  std::string data;
  std::string model_preset = "tiny";
  std::size_t repeats = 3, epochs = 500, batch = 32;
  double early_stop = 0.0;
  bool group_by_run = false;
  std::size_t stem = 8, stem_kernel = 7, stem_stride = 2, stem_pad = 3;
  std::vector<std::size_t> blocks{1, 1, 1, 1};
  std::vector<std::size_t> mids{4, 8, 16, 32};
  std::vector<std::size_t> strides{1, 2, 2, 2};
  std::size_t expansion = 2, penultimate = 1000;
  double weight_decay = 2e-4, lr = 5e-4, lr_decay = 0.3;
  std::size_t patience = 30;
  OptionSet opts;
};

void setup_model_b(CLI::App& cmd, RunBArgs& a, OptionSet& opts) {
  cmd.add_option("--model-preset", a.model_preset,
                 "Volumetric model size: tiny or full")
      ->check(CLI::IsMember({"tiny", "full"}));
  opts.add(cmd, "--stem", a.stem, "Stem conv filters");
  opts.add(cmd, "--stem-kernel", a.stem_kernel, "Stem kernel extent");
  opts.add(cmd, "--stem-stride", a.stem_stride, "Stem stride");
  opts.add(cmd, "--stem-pad", a.stem_pad, "Stem zero padding");
  opts.add(cmd, "--blocks", a.blocks, "Bottleneck blocks per stage")
      ->delimiter(',');
  opts.add(cmd, "--mids", a.mids, "Bottleneck mid-channels per stage")
      ->delimiter(',');
  opts.add(cmd, "--strides", a.strides, "First-block stride per stage")
      ->delimiter(',');
  opts.add(cmd, "--expansion", a.expansion, "Bottleneck expansion factor");
  opts.add(cmd, "--penultimate", a.penultimate, "Width of the first dense layer");
  opts.add(cmd, "--weight-decay", a.weight_decay, "L2 coefficient on weights");
  opts.add(cmd, "--lr", a.lr, "Initial learning rate");
  opts.add(cmd, "--lr-decay", a.lr_decay, "Plateau decay factor");
  opts.add(cmd, "--patience", a.patience, "Epochs without improvement before decay");
}

void setup_run_b(CLI::App& cmd, RunBArgs& a) {
  add_common(cmd, a.opts, a.common, true);
  cmd.add_option("--data", a.data, "Dataset directory (manifest.jsonl, mask.bmsk)")
      ->required();
  a.opts.add(cmd, "--repeats", a.repeats, "Independent training repeats");
  a.opts.add(cmd, "--epochs", a.epochs, "Maximum training epochs");
  a.opts.add(cmd, "--batch", a.batch, "Minibatch size");
  a.opts.add(cmd, "--early-stop-loss", a.early_stop,
             "Stop an epoch loop once mean loss reaches this (0 = off)");
  a.opts.add_flag(cmd, "--group-by-run", a.group_by_run,
                  "Keep each run's samples within one split");
  setup_model_b(cmd, a, a.opts);
}

ModelBConfig model_b_from(const RunBArgs& a, const OptionSet& opts,
                          const json& src) {
  ModelBConfig m =
      a.model_preset == "tiny" ? ModelBConfig::tiny() : ModelBConfig{};
  if (opts.touched("stem", src)) m.stem_filters = a.stem;
  if (opts.touched("stem-kernel", src)) m.stem_kernel = a.stem_kernel;
  if (opts.touched("stem-stride", src)) m.stem_stride = a.stem_stride;
  if (opts.touched("stem-pad", src)) m.stem_pad = a.stem_pad;
  if (opts.touched("blocks", src)) m.stage_blocks = a.blocks;
  if (opts.touched("mids", src)) m.stage_mids = a.mids;
  if (opts.touched("strides", src)) m.stage_strides = a.strides;
  if (opts.touched("expansion", src)) m.expansion = a.expansion;
  if (opts.touched("penultimate", src)) m.penultimate = a.penultimate;
  if (opts.touched("weight-decay", src)) m.weight_decay = a.weight_decay;
  if (opts.touched("lr", src)) m.lr0 = a.lr;
  if (opts.touched("lr-decay", src)) m.lr_decay = a.lr_decay;
  if (opts.touched("patience", src)) m.patience = a.patience;
  return m;
}

int run_run_b(RunBArgs& a) {
  json src = merged_sources(a.opts, a.common.config);
  resolve(a.opts, src, a.common.config);
  check_threads(a.common.threads);

  PipelineBOptions opt;
  opt.model = model_b_from(a, a.opts, src);
  opt.repeats = a.repeats;
  opt.max_epochs = a.epochs;
  opt.batch_size = a.batch;
  opt.early_stop_loss = a.early_stop;
  opt.group_by_run = a.group_by_run;
  opt.artifact_dir = a.common.out;

  make_out_dir(a.common.out);
  Dataset data = load_dataset(a.data);

  const auto t0 = std::chrono::steady_clock::now();
  PipelineBResult r = run_pipeline_b(data, opt, a.common.seed);
  const auto t1 = std::chrono::steady_clock::now();

  json s;
  s["pipeline"] = "b";
  s["model-preset"] = a.model_preset;
  s["n_samples"] = r.n_samples;
  s["n_train"] = r.n_train;
  s["n_val"] = r.n_val;
  s["n_test"] = r.n_test;
  s["mean_accuracy"] = r.mean_accuracy;
  s["sd_accuracy"] = r.sd_accuracy;
  json reps = json::array();
  json train_seconds = json::array();
  for (const RepeatResult& rr : r.repeats) {
    reps.push_back({{"accuracy", rr.test_metrics.accuracy},
                    {"val_accuracy", rr.val_accuracy},
                    {"epochs", rr.epoch_loss.size()},
                    {"final_loss",
                     rr.epoch_loss.empty() ? 0.0 : rr.epoch_loss.back()}});
    train_seconds.push_back(rr.train_seconds);
  }
  s["repeats"] = reps;
  s["timing"] = {
      {"total_seconds", std::chrono::duration<double>(t1 - t0).count()},
      {"train_seconds", train_seconds}};
  write_text(a.common.out + "/summary.json", s.dump(2) + "\n");
  echo_config(a.common.out, "run-b", a.opts, a.common.out, a.common.config);

  std::cout << "mean test accuracy " << r.mean_accuracy << " (sd "
            << r.sd_accuracy << ") over " << r.repeats.size()
            << " repeats, split " << r.n_train << "/" << r.n_val << "/"
            << r.n_test << "\n";
  return 0;
}

// --------------------------------------------------------------- bench

struct BenchArgs {
  CommonArgs common;
  std::string model;
  std::string checkpoint;
  std::size_t n = 0;
  std::vector<std::size_t> dims{16, 16, 11};
  // Temporal-model shape knobs, mirrored from run-a.
  std::size_t voxels = 300, kernel = 10;
  std::vector<std::size_t> filters{64, 128, 128, 128, 128, 64};
  std::vector<std::size_t> fc{1024, 512, 256, 128, 64, 32, 3};
  OptionSet opts;
  RunBArgs b;  // volumetric knobs share the run-b defaults
};

void setup_bench(CLI::App& cmd, BenchArgs& a) {
  add_common(cmd, a.opts, a.common, false);
  cmd.add_option("--model", a.model, "Which classifier to time: a or b")
      ->required()
      ->check(CLI::IsMember({"a", "b"}));
  cmd.add_option("--checkpoint", a.checkpoint,
                 "Load weights from this network file");
  a.opts.add(cmd, "--n", a.n,
             "Batch size to time (default 600 for model a, 64 for b)");
  a.opts.add(cmd, "--dims", a.dims, "Volume extents x y z for model b")
      ->expected(3)
      ->delimiter(',');
  a.opts.add(cmd, "--voxels", a.voxels, "Input length for model a");
  a.opts.add(cmd, "--filters", a.filters, "Filters per conv block (model a)")
      ->delimiter(',');
  a.opts.add(cmd, "--kernel", a.kernel, "Conv kernel length (model a)");
  a.opts.add(cmd, "--fc", a.fc, "Dense head widths (model a)")
      ->delimiter(',');
  setup_model_b(cmd, a.b, a.opts);
}

int run_bench(BenchArgs& a) {
  json src = merged_sources(a.opts, a.common.config);
  resolve(a.opts, src, a.common.config);
  check_threads(a.common.threads);

  const std::size_t n =
      a.opts.touched("n", src) ? a.n : (a.model == "a" ? 600 : 64);

  Rng master(a.common.seed);
  Rng init = master.derive(1);
  nn::Network net;
  std::vector<std::size_t> sample_shape;
  if (a.model == "a") {
    ModelAConfig cfg;
    cfg.input_len = a.voxels;
    cfg.conv_filters = a.filters;
    cfg.kernel = a.kernel;
    cfg.fc_widths = a.fc;
    cfg.n_classes = a.fc.empty() ? 0 : a.fc.back();
    const ModelAConfig def;
    const bool stock = cfg.input_len == def.input_len &&
                       cfg.conv_filters == def.conv_filters &&
                       cfg.kernel == def.kernel;
    cfg.expected_flatten = stock ? def.expected_flatten : 0;
    net = build_model_a(cfg, init);
    sample_shape = {1, 1, cfg.input_len};
  } else {
    ModelBConfig cfg = model_b_from(a.b, a.opts, src);
    const VolumeDims dims = dims_from(a.dims);
    net = build_model_b(cfg, dims, init);
    sample_shape = {1, cfg.in_channels, dims.nz, dims.ny, dims.nx};
  }
  if (!a.checkpoint.empty()) read_network_file(a.checkpoint, net);

  double single_mean = 0.0, single_sd = 0.0, batch_total = 0.0,
         batch_per_sample = 0.0;
  if (n > 0) {
    const std::size_t sample_size = nn::Tensor::shape_product(sample_shape);
    Rng data = master.derive(2);
    std::vector<double> inputs(n * sample_size);
    for (double& v : inputs) v = data.normal();

    nn::Tensor sample(sample_shape);
    std::vector<double> lat(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(inputs.begin() + i * sample_size,
                inputs.begin() + (i + 1) * sample_size, sample.data.begin());
      lat[i] = predict(net, sample).latency_ms;
    }
    for (double v : lat) single_mean += v;
    single_mean /= static_cast<double>(n);
    if (n > 1) {
      for (double v : lat) single_sd += (v - single_mean) * (v - single_mean);
      single_sd = std::sqrt(single_sd / static_cast<double>(n - 1));
    }

    std::vector<std::size_t> batch_shape = sample_shape;
    batch_shape[0] = n;
    nn::Tensor batch(batch_shape);
    batch.data = inputs;
    const auto t0 = std::chrono::steady_clock::now();
    nn::Tensor out = net.forward(batch, nn::Mode::kEval);
    nn::Tensor probs = nn::softmax(out);
    const auto t1 = std::chrono::steady_clock::now();
    batch_total = std::chrono::duration<double, std::milli>(t1 - t0).count();
    batch_per_sample = batch_total / static_cast<double>(n);
  }

  json rep;
  rep["model"] = a.model;
  rep["n"] = n;
  if (!a.checkpoint.empty()) rep["checkpoint"] = a.checkpoint;
  rep["timing"] = {{"single_mean_ms", single_mean},
                   {"single_sd_ms", single_sd},
                   {"batch_total_ms", batch_total},
                   {"batch_per_sample_ms", batch_per_sample}};
  const std::string text = rep.dump(2) + "\n";
  std::cout << text;
  if (!a.common.out.empty()) {
    make_out_dir(a.common.out);
    write_text(a.common.out + "/bench.json", text);
  }
  return 0;
}

// ------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string predictions;
  std::string out;
  std::string roc;
  std::size_t classes = 0;
};

void setup_metrics(CLI::App& cmd, MetricsArgs& a) {
  cmd.add_option("--predictions", a.predictions,
                 "Stored predictions JSON (y_true, y_pred, scores)")
      ->required();
  cmd.add_option("--out", a.out, "Where to write the metrics JSON")->required();
  cmd.add_option("--roc", a.roc, "Also write ROC points to this CSV");
  cmd.add_option("--classes", a.classes,
                 "Class count (default: inferred from the file)");
}

int run_metrics(MetricsArgs& a) {
  PredictionSet p = read_predictions_json(a.predictions);
  std::size_t n_classes = a.classes;
  if (n_classes == 0) {
    if (!p.scores.empty()) {
      n_classes = p.scores.front().size();
    } else {
      for (std::size_t v : p.y_true) n_classes = std::max(n_classes, v + 1);
      for (std::size_t v : p.y_pred) n_classes = std::max(n_classes, v + 1);
      n_classes = std::max<std::size_t>(n_classes, 2);
    }
  }
  MetricsReport r = compute_metrics(p.y_true, p.y_pred, n_classes, p.scores);
  write_text(a.out, metrics_json_string(r));
  if (!a.roc.empty()) write_roc_csv(a.roc, r.roc);
  std::cout << "accuracy " << r.accuracy << " over " << p.y_true.size()
            << " samples, " << n_classes << " classes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxstate: brain-state decoding over volumetric time series"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen_cmd =
      app.add_subcommand("gen", "Generate a synthetic dataset");
  setup_gen(*gen_cmd, gen_args);

  RunAArgs a_args;
  CLI::App* a_cmd = app.add_subcommand(
      "run-a", "Alignment pipeline: voxel screen, shared space, temporal net");
  setup_run_a(*a_cmd, a_args);

  RunBArgs b_args;
  CLI::App* b_cmd = app.add_subcommand(
      "run-b", "Volumetric pipeline: residual 3D net on raw volumes");
  setup_run_b(*b_cmd, b_args);

  BenchArgs bench_args;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Time single-sample and batched inference");
  setup_bench(*bench_cmd, bench_args);

  MetricsArgs metrics_args;
  CLI::App* metrics_cmd = app.add_subcommand(
      "metrics", "Recompute a metrics report from stored predictions");
  setup_metrics(*metrics_cmd, metrics_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen_args);
    if (a_cmd->parsed()) return run_run_a(a_args);
    if (b_cmd->parsed()) return run_run_b(b_args);
    if (bench_cmd->parsed()) return run_bench(bench_args);
    if (metrics_cmd->parsed()) return run_metrics(metrics_args);
  } catch (const numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const format_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
