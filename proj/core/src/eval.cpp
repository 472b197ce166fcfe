#include "voxstate/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "voxstate/hyperalign.hpp"
#include "voxstate/network.hpp"

namespace voxstate {

using nn::Mode;
using nn::Network;
using nn::Tensor;

namespace {

Tensor gather_samples(const Tensor& x, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> shape = x.shape;
  shape[0] = idx.size();
  Tensor out(shape);
  const std::size_t ss = x.sample_size();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.axis(0))
      throw config_error("gather: sample index " + std::to_string(idx[i]) +
                         " out of range");
    std::memcpy(out.data.data() + i * ss, x.data.data() + idx[i] * ss,
                ss * sizeof(double));
  }
  return out;
}

template <typename T>
std::vector<T> gather_values(const std::vector<T>& v,
                             const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ssq = 0.0;
  for (double x : v) ssq += (x - m) * (x - m);
  return std::sqrt(ssq / static_cast<double>(v.size() - 1));
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw format_error("cannot create directory: " + dir);
}

std::string two_digits(std::size_t v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

// Provenance guard: no stage of a fold may consume a sample tagged with
// the held-out subject.
void assert_fold_clean(const std::vector<std::string>& tags,
                       const std::string& held_out, const char* stage) {
  for (const std::string& t : tags)
    if (t == held_out)
      throw error("fold invariant violated: held-out subject " + held_out +
                  " reached " + stage);
}

struct SubjectData {
  std::string id;
  Matrix rows;              // stacked masked runs, rows = timepoints
  std::vector<int> labels;  // condition per row
};

std::vector<SubjectData> collect_subjects_uniform(const Dataset& data) {
  if (data.runs.empty())
    throw config_error("run_pipeline_a: dataset has no runs");
  data.mask.validate();

  std::vector<std::string> order;
  for (const VolumeSeries& run : data.runs) {
    run.validate();
    if (!(run.dims == data.mask.dims))
      throw config_error("run_pipeline_a: run " + run.subject_id + "/" +
                         run.run_id + " dims do not match the mask");
    if (std::find(order.begin(), order.end(), run.subject_id) == order.end())
      order.push_back(run.subject_id);
  }

  std::vector<SubjectData> subjects;
  std::size_t runs_per_subject = 0, timepoints = 0;
  for (const std::string& id : order) {
    std::vector<const VolumeSeries*> mine;
    for (const VolumeSeries& run : data.runs)
      if (run.subject_id == id) mine.push_back(&run);

    if (subjects.empty()) {
      runs_per_subject = mine.size();
      timepoints = mine.front()->n_timepoints();
    } else if (mine.size() != runs_per_subject) {
      throw config_error("run_pipeline_a: subject " + id + " has " +
                         std::to_string(mine.size()) + " runs, expected " +
                         std::to_string(runs_per_subject));
    }

    SubjectData sd;
    sd.id = id;
    const std::size_t kept = data.mask.n_kept();
    sd.rows = Matrix(runs_per_subject * timepoints, kept);
    std::size_t row = 0;
    for (const VolumeSeries* run : mine) {
      if (run->n_timepoints() != timepoints)
        throw config_error("run_pipeline_a: run " + run->subject_id + "/" +
                           run->run_id + " has " +
                           std::to_string(run->n_timepoints()) +
                           " timepoints, expected " +
                           std::to_string(timepoints));
      Matrix m = apply_mask(*run, data.mask);
      std::memcpy(sd.rows.data() + row * kept, m.data(),
                  m.size() * sizeof(double));
      sd.labels.insert(sd.labels.end(), run->labels.begin(),
                       run->labels.end());
      row += m.rows();
    }
    subjects.push_back(std::move(sd));
  }
  return subjects;
}

Tensor rows_to_tensor(const std::vector<const Matrix*>& mats) {
  std::size_t total = 0;
  for (const Matrix* m : mats) total += m->rows();
  const std::size_t cols = mats.front()->cols();
  Tensor out({total, 1, cols});
  std::size_t row = 0;
  for (const Matrix* m : mats) {
    std::memcpy(out.data.data() + row * cols, m->data(),
                m->size() * sizeof(double));
    row += m->rows();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Splitting and balancing

std::vector<Fold> loocv_folds(
    const std::vector<std::string>& subject_of_sample) {
  if (subject_of_sample.empty())
    throw config_error("loocv_folds: no samples");

  std::vector<std::string> order;
  for (const std::string& s : subject_of_sample)
    if (std::find(order.begin(), order.end(), s) == order.end())
      order.push_back(s);
  if (order.size() < 2)
    throw config_error("loocv_folds: need at least two subjects, got " +
                       std::to_string(order.size()));

  std::vector<Fold> folds;
  for (const std::string& held : order) {
    Fold f;
    f.held_out_subject = held;
    for (std::size_t i = 0; i < subject_of_sample.size(); ++i) {
      if (subject_of_sample[i] == held)
        f.test.push_back(i);
      else
        f.train.push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

std::vector<std::size_t> bootstrap_balance(
    const std::vector<std::size_t>& labels, Rng& rng) {
  if (labels.empty()) throw config_error("bootstrap_balance: no samples");

  const std::size_t n_classes =
      1 + *std::max_element(labels.begin(), labels.end());
  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i)
    members[labels[i]].push_back(i);

  std::size_t majority = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (members[c].empty())
      throw config_error("bootstrap_balance: class " + std::to_string(c) +
                         " has no samples");
    majority = std::max(majority, members[c].size());
  }

  std::vector<std::size_t> out(labels.size());
  std::iota(out.begin(), out.end(), 0);
  for (std::size_t c = 0; c < n_classes; ++c)
    for (std::size_t k = members[c].size(); k < majority; ++k)
      out.push_back(members[c][rng.uniform_below(members[c].size())]);
  return out;
}

SplitIndices split_random(std::size_t n, Rng& rng) {
  if (n < 5)
    throw config_error("split_random: need at least 5 samples, got " +
                       std::to_string(n));
  const std::size_t n_test =
      static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(0.2 * static_cast<double>(n - n_test)));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);

  SplitIndices s;
  s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test),
               perm.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test + n_val),
                 perm.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

// ---------------------------------------------------------------------------
// Training and inference

TrainLog train_network(Network& net, const Tensor& x,
                       const std::vector<std::size_t>& labels,
                       const TrainConfig& cfg, Rng& rng) {
  const std::size_t n = x.axis(0);
  if (n < 2) throw config_error("train_network: need at least 2 samples");
  if (labels.size() != n)
    throw config_error("train_network: " + std::to_string(labels.size()) +
                       " labels for " + std::to_string(n) + " samples");
  if (cfg.batch_size < 2)
    throw config_error("train_network: batch size must be at least 2");
  if (cfg.max_epochs == 0)
    throw config_error("train_network: epoch budget must be positive");

  nn::AdamConfig acfg;
  acfg.lr = cfg.lr0;
  acfg.weight_decay = cfg.weight_decay;
  nn::Adam adam(acfg);
  nn::LrSchedule sched(cfg.lr0, cfg.lr_decay, cfg.patience);
  const auto params = net.params();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainLog log;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bsz = std::min(cfg.batch_size, n - start);
      if (bsz < 2) continue;  // batch statistics need two samples
      const std::vector<std::size_t> batch_idx(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(start + bsz));
      Tensor bx = gather_samples(x, batch_idx);
      const std::vector<std::size_t> by = gather_values(labels, batch_idx);

      net.zero_grads();
      Tensor logits = net.forward(bx, Mode::kTrain, &rng);
      nn::LossResult lr = nn::softmax_cross_entropy(logits, by);
      net.backward(lr.grad);
      adam.step(params);

      loss_sum += lr.loss * static_cast<double>(bsz);
      counted += bsz;
    }
    const double epoch_loss = loss_sum / static_cast<double>(counted);
    adam.lr() = sched.observe(epoch_loss);
    log.epoch_loss.push_back(epoch_loss);
    log.lr_after_epoch.push_back(sched.lr);
    if (cfg.early_stop_loss > 0.0 && epoch_loss <= cfg.early_stop_loss) break;
  }
  return log;
}

EvalOutput evaluate_network(Network& net, const Tensor& x,
                            std::size_t batch_size) {
  if (batch_size == 0)
    throw config_error("evaluate_network: batch size must be positive");
  const std::size_t n = x.axis(0);
  if (n == 0) throw config_error("evaluate_network: no samples");

  EvalOutput out;
  out.predictions.reserve(n);
  out.scores.reserve(n);
  const std::size_t ss = x.sample_size();
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t bsz = std::min(batch_size, n - start);
    std::vector<std::size_t> shape = x.shape;
    shape[0] = bsz;
    Tensor bx(shape);
    std::memcpy(bx.data.data(), x.data.data() + start * ss,
                bsz * ss * sizeof(double));

    Tensor probs = nn::softmax(net.forward(bx, Mode::kEval));
    const std::size_t c = probs.axis(1);
    for (std::size_t i = 0; i < bsz; ++i) {
      const double* row = probs.data.data() + i * c;
      std::size_t best = 0;
      for (std::size_t j = 1; j < c; ++j)
        if (row[j] > row[best]) best = j;
      out.predictions.push_back(best);
      out.scores.emplace_back(row, row + c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline A

PipelineAResult run_pipeline_a(const Dataset& data,
                               const PipelineAOptions& opt,
                               std::uint64_t seed) {
  if (opt.n_voxels == 0)
    throw config_error("run_pipeline_a: n_voxels must be positive");
  if (opt.q_passes == 0)
    throw config_error("run_pipeline_a: q_passes must be positive");
  if (opt.model.input_len != opt.n_voxels)
    throw config_error("run_pipeline_a: model input_len " +
                       std::to_string(opt.model.input_len) +
                       " must equal n_voxels " +
                       std::to_string(opt.n_voxels));
  if (opt.model.n_classes != kNumConditions)
    throw config_error("run_pipeline_a: model must have " +
                       std::to_string(kNumConditions) + " classes");
  opt.model.validate();

  const std::vector<SubjectData> subjects = collect_subjects_uniform(data);
  const std::size_t p = subjects.size();
  if (p < 2)
    throw config_error("run_pipeline_a: need at least two subjects, got " +
                       std::to_string(p));
  if (opt.ref_subject + 1 >= p)
    throw config_error("run_pipeline_a: ref_subject " +
                       std::to_string(opt.ref_subject) +
                       " out of range for " + std::to_string(p - 1) +
                       " training subjects");
  if (opt.n_voxels > subjects[0].rows.cols())
    throw config_error("run_pipeline_a: n_voxels " +
                       std::to_string(opt.n_voxels) + " exceeds the " +
                       std::to_string(subjects[0].rows.cols()) +
                       " masked voxels");

  if (!opt.artifact_dir.empty()) make_dir(opt.artifact_dir);

  Rng master(seed);
  PipelineAResult result;
  result.pooled_confusion = Matrix(kNumConditions, kNumConditions);
  std::vector<double> fold_accuracies;

  for (std::size_t f = 0; f < p; ++f) {
    const SubjectData& held = subjects[f];
    Rng fold_rng = master.derive(f);

    std::vector<const SubjectData*> train_subjects;
    for (std::size_t j = 0; j < p; ++j)
      if (j != f) train_subjects.push_back(&subjects[j]);

    // Voxel screen on pooled training rows only.
    std::size_t pool_rows = 0;
    for (const SubjectData* s : train_subjects) pool_rows += s->rows.rows();
    const std::size_t kept = subjects[0].rows.cols();
    Matrix pooled(pool_rows, kept);
    std::vector<int> pooled_labels;
    std::vector<std::string> pooled_tags;
    pooled_labels.reserve(pool_rows);
    pooled_tags.reserve(pool_rows);
    std::size_t row = 0;
    for (const SubjectData* s : train_subjects) {
      std::memcpy(pooled.data() + row * kept, s->rows.data(),
                  s->rows.size() * sizeof(double));
      pooled_labels.insert(pooled_labels.end(), s->labels.begin(),
                           s->labels.end());
      pooled_tags.insert(pooled_tags.end(), s->labels.size(), s->id);
      row += s->rows.rows();
    }
    assert_fold_clean(pooled_tags, held.id, "the voxel screen");
    const FeatureSelection selection =
        select_top_m(f_scores(pooled, pooled_labels), opt.n_voxels);

    // Column slice for every subject, then the fold-local alignment.
    std::vector<Matrix> aligned_train(train_subjects.size());
    Matrix aligned_test;
    CommonSpace space;
    bool have_space = false;
    if (opt.identity_alignment) {
      for (std::size_t j = 0; j < train_subjects.size(); ++j) {
        aligned_train[j] =
            select_columns(train_subjects[j]->rows, selection.indices);
        frobenius_normalize(aligned_train[j]);
      }
      aligned_test = select_columns(held.rows, selection.indices);
      frobenius_normalize(aligned_test);
    } else {
      std::vector<SubjectMatrix> fit_in;
      fit_in.reserve(train_subjects.size());
      for (const SubjectData* s : train_subjects)
        fit_in.push_back(
            {s->id, select_columns(s->rows, selection.indices)});
      {
        std::vector<std::string> fit_tags;
        for (const SubjectMatrix& s : fit_in) fit_tags.push_back(s.subject_id);
        assert_fold_clean(fit_tags, held.id, "the alignment fit");
      }
      HyperalignOptions hopt;
      hopt.ref_index = opt.ref_subject;
      hopt.q = opt.q_passes;
      space = hyperalign_fit(fit_in, hopt, selection);
      have_space = true;
      for (std::size_t j = 0; j < fit_in.size(); ++j)
        aligned_train[j] = hyperalign_transform(space, fit_in[j]);
      aligned_test = hyperalign_transform(
          space, {held.id, select_columns(held.rows, selection.indices)});
    }

    // Assemble, balance and train.
    std::vector<const Matrix*> train_mats;
    std::vector<std::size_t> train_labels;
    std::vector<std::string> train_tags;
    for (std::size_t j = 0; j < train_subjects.size(); ++j) {
      train_mats.push_back(&aligned_train[j]);
      for (int c : train_subjects[j]->labels)
        train_labels.push_back(static_cast<std::size_t>(c));
      train_tags.insert(train_tags.end(), train_subjects[j]->labels.size(),
                        train_subjects[j]->id);
    }
    assert_fold_clean(train_tags, held.id, "the training batches");
    Tensor train_x = rows_to_tensor(train_mats);

    Rng boot_rng = fold_rng.derive(0);
    const std::vector<std::size_t> balanced =
        bootstrap_balance(train_labels, boot_rng);
    Tensor bx = gather_samples(train_x, balanced);
    const std::vector<std::size_t> by = gather_values(train_labels, balanced);

    Rng init_rng = fold_rng.derive(1);
    Network net = build_model_a(opt.model, init_rng);

    TrainConfig tcfg;
    tcfg.max_epochs = opt.max_epochs;
    tcfg.batch_size = opt.batch_size;
    tcfg.lr0 = opt.model.lr0;
    tcfg.lr_decay = opt.model.lr_decay;
    tcfg.patience = opt.model.patience;
    tcfg.weight_decay = opt.model.weight_decay;
    tcfg.early_stop_loss = opt.early_stop_loss;

    Rng train_rng = fold_rng.derive(2);
    const auto t0 = std::chrono::steady_clock::now();
    TrainLog tl = train_network(net, bx, by, tcfg, train_rng);
    const auto t1 = std::chrono::steady_clock::now();

    // Held-out subject, metrics only.
    std::vector<const Matrix*> test_mats{&aligned_test};
    Tensor test_x = rows_to_tensor(test_mats);
    std::vector<std::size_t> test_labels;
    for (int c : held.labels)
      test_labels.push_back(static_cast<std::size_t>(c));
    EvalOutput eo = evaluate_network(net, test_x);

    FoldResult fr;
    fr.held_out_subject = held.id;
    fr.metrics =
        compute_metrics(test_labels, eo.predictions, kNumConditions, eo.scores);
    fr.predictions = {test_labels, eo.predictions, eo.scores};
    fr.epoch_loss = tl.epoch_loss;
    fr.train_seconds = std::chrono::duration<double>(t1 - t0).count();

    if (!opt.artifact_dir.empty()) {
      const std::string dir = opt.artifact_dir + "/fold_" + two_digits(f);
      make_dir(dir);
      write_feature_selection(dir + "/selection.json", selection);
      if (have_space) write_common_space(dir + "/space.haln", space);
      write_network_file(dir + "/model.nnet", net);
      write_metrics_json(dir + "/metrics.json", fr.metrics);
      write_roc_csv(dir + "/roc.csv", fr.metrics.roc);
      write_predictions_json(dir + "/predictions.json", fr.predictions);
    }

    for (std::size_t i = 0; i < kNumConditions; ++i)
      for (std::size_t j = 0; j < kNumConditions; ++j)
        result.pooled_confusion(i, j) += fr.metrics.confusion(i, j);
    fold_accuracies.push_back(fr.metrics.accuracy);
    result.folds.push_back(std::move(fr));
  }

  result.mean_accuracy = mean_of(fold_accuracies);
  result.sd_accuracy = sample_sd(fold_accuracies);
  return result;
}

// ---------------------------------------------------------------------------
// Pipeline B

namespace {

SplitIndices split_grouped_by_run(const std::vector<std::size_t>& run_of_sample,
                                  std::size_t n_runs, std::size_t n,
                                  Rng& rng) {
  const std::size_t n_test =
      static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(0.2 * static_cast<double>(n - n_test)));

  std::vector<std::size_t> run_order(n_runs);
  std::iota(run_order.begin(), run_order.end(), 0);
  rng.shuffle(run_order);

  std::vector<std::vector<std::size_t>> run_members(n_runs);
  for (std::size_t i = 0; i < run_of_sample.size(); ++i)
    run_members[run_of_sample[i]].push_back(i);

  SplitIndices s;
  for (std::size_t r : run_order) {
    std::vector<std::size_t>* dst;
    if (s.test.size() < n_test)
      dst = &s.test;
    else if (s.val.size() < n_val)
      dst = &s.val;
    else
      dst = &s.train;
    dst->insert(dst->end(), run_members[r].begin(), run_members[r].end());
  }
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

}  // namespace

PipelineBResult run_pipeline_b(const Dataset& data,
                               const PipelineBOptions& opt,
                               std::uint64_t seed) {
  if (opt.repeats == 0)
    throw config_error("run_pipeline_b: repeats must be positive");
  if (opt.model.n_classes != 2)
    throw config_error("run_pipeline_b: model must have 2 classes");
  opt.model.validate();
  if (data.runs.empty())
    throw config_error("run_pipeline_b: dataset has no runs");

  const VolumeDims dims = data.runs[0].dims;
  std::vector<const Volume*> vols;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> run_of_sample;
  for (std::size_t r = 0; r < data.runs.size(); ++r) {
    const VolumeSeries& run = data.runs[r];
    run.validate();
    if (!(run.dims == dims))
      throw config_error("run_pipeline_b: run " + run.subject_id + "/" +
                         run.run_id + " dims differ from the first run");
    for (std::size_t t = 0; t < run.n_timepoints(); ++t) {
      if (run.labels[t] == kNeutral) {
        labels.push_back(0);
      } else if (run.labels[t] == kNegative) {
        labels.push_back(1);
      } else {
        continue;
      }
      vols.push_back(&run.volumes[t]);
      run_of_sample.push_back(r);
    }
  }

  const std::size_t n = vols.size();
  std::size_t n_neutral = 0;
  for (std::size_t y : labels)
    if (y == 0) ++n_neutral;
  if (n_neutral == 0 || n_neutral == n)
    throw config_error(
        "run_pipeline_b: need both neutral and negative samples");

  Rng master(seed);
  Rng split_rng = master.derive(1);
  const SplitIndices split =
      opt.group_by_run
          ? split_grouped_by_run(run_of_sample, data.runs.size(), n, split_rng)
          : split_random(n, split_rng);

  const std::size_t voxels = dims.count();
  Tensor all({n, 1, dims.nz, dims.ny, dims.nx});
  for (std::size_t i = 0; i < n; ++i)
    std::memcpy(all.data.data() + i * voxels, vols[i]->voxels.data(),
                voxels * sizeof(double));

  Tensor train_x = gather_samples(all, split.train);
  Tensor val_x = gather_samples(all, split.val);
  Tensor test_x = gather_samples(all, split.test);
  all = Tensor();
  const std::vector<std::size_t> train_y = gather_values(labels, split.train);
  const std::vector<std::size_t> val_y = gather_values(labels, split.val);
  const std::vector<std::size_t> test_y = gather_values(labels, split.test);

  if (!opt.artifact_dir.empty()) make_dir(opt.artifact_dir);

  PipelineBResult result;
  result.n_samples = n;
  result.n_train = split.train.size();
  result.n_val = split.val.size();
  result.n_test = split.test.size();

  std::vector<double> accuracies;
  for (std::size_t r = 0; r < opt.repeats; ++r) {
    Rng boot_rng = master.derive(100 + 3 * r);
    Rng init_rng = master.derive(101 + 3 * r);
    Rng train_rng = master.derive(102 + 3 * r);

    std::vector<std::size_t> boot(result.n_train);
    for (std::size_t i = 0; i < result.n_train; ++i)
      boot[i] = boot_rng.uniform_below(result.n_train);
    Tensor bx = gather_samples(train_x, boot);
    const std::vector<std::size_t> by = gather_values(train_y, boot);

    Network net = build_model_b(opt.model, dims, init_rng);

    TrainConfig tcfg;
    tcfg.max_epochs = opt.max_epochs;
    tcfg.batch_size = opt.batch_size;
    tcfg.lr0 = opt.model.lr0;
    tcfg.lr_decay = opt.model.lr_decay;
    tcfg.patience = opt.model.patience;
    tcfg.weight_decay = opt.model.weight_decay;
    tcfg.early_stop_loss = opt.early_stop_loss;

    const auto t0 = std::chrono::steady_clock::now();
    TrainLog tl = train_network(net, bx, by, tcfg, train_rng);
    const auto t1 = std::chrono::steady_clock::now();

    EvalOutput test_out = evaluate_network(net, test_x);
    EvalOutput val_out = evaluate_network(net, val_x);

    RepeatResult rr;
    rr.test_metrics = compute_metrics(test_y, test_out.predictions, 2,
                                      test_out.scores);
    rr.test_predictions = {test_y, test_out.predictions, test_out.scores};
    std::size_t val_correct = 0;
    for (std::size_t i = 0; i < val_y.size(); ++i)
      if (val_out.predictions[i] == val_y[i]) ++val_correct;
    rr.val_accuracy =
        static_cast<double>(val_correct) / static_cast<double>(val_y.size());
    rr.epoch_loss = tl.epoch_loss;
    rr.train_seconds = std::chrono::duration<double>(t1 - t0).count();

    if (!opt.artifact_dir.empty()) {
      const std::string dir = opt.artifact_dir + "/repeat_" + two_digits(r);
      make_dir(dir);
      write_network_file(dir + "/model.nnet", net);
      write_metrics_json(dir + "/metrics.json", rr.test_metrics);
      write_roc_csv(dir + "/roc.csv", rr.test_metrics.roc);
      write_predictions_json(dir + "/predictions.json", rr.test_predictions);
    }

    accuracies.push_back(rr.test_metrics.accuracy);
    result.repeats.push_back(std::move(rr));
  }

  result.mean_accuracy = mean_of(accuracies);
  result.sd_accuracy = sample_sd(accuracies);
  return result;
}

}  // namespace voxstate
