#include "crashbench/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "jsonl.hpp"
#include "mathutil.hpp"

namespace crashbench {

void DistillConfig::validate() const {
  if (alpha_hard < 0 || alpha_logit < 0 || alpha_feat < 0) {
    throw ValidationError("distill loss weights must be >= 0");
  }
  if (tau <= 0) throw ValidationError("distill temperature must be > 0");
  if (phase1_steps < 0 || total_steps < 0 || phase1_steps > total_steps) {
    throw ValidationError("need 0 <= phase1_steps <= total_steps");
  }
}

ScalarLoss bce_loss(double student_logit, double hard_label) {
  if (!std::isfinite(student_logit)) {
    throw ValidationError("bce_loss: non-finite logit");
  }
  const double z = student_logit;
  const double y = hard_label;
  // max(z,0) - z*y + log(1 + exp(-|z|))
  const double loss =
      std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  return {loss, stable_sigmoid(z) - y};
}

ScalarLoss kd_loss(double student_logit, double teacher_logit, double tau,
                   bool tau_squared) {
  if (!std::isfinite(student_logit) || !std::isfinite(teacher_logit)) {
    throw ValidationError("kd_loss: non-finite logit");
  }
  if (tau <= 0.0) throw ValidationError("kd_loss: tau must be > 0");
  const double at = teacher_logit / tau;
  const double as = student_logit / tau;
  const double pt = stable_sigmoid(at);
  // KL(pT || pS) with log sigma(x) = -softplus(-x), log(1-sigma(x)) = -softplus(x).
  const double kl = pt * (softplus(-as) - softplus(-at)) +
                    (1.0 - pt) * (softplus(as) - softplus(at));
  const double scale = tau_squared ? tau * tau : 1.0;
  const double grad = scale * (stable_sigmoid(as) - pt) / tau;
  return {scale * kl, grad};
}

FeatLoss feat_loss(const std::vector<std::vector<double>>& student_features,
                   const std::vector<std::vector<double>>& teacher_features) {
  if (student_features.size() != teacher_features.size()) {
    throw ValidationError("feat_loss: pair count mismatch");
  }
  if (student_features.empty()) {
    throw ValidationError("feat_loss: no feature pairs");
  }
  FeatLoss out;
  const double pair_norm = 1.0 / static_cast<double>(student_features.size());
  for (size_t p = 0; p < student_features.size(); ++p) {
    const auto& s = student_features[p];
    const auto& t = teacher_features[p];
    if (s.size() != t.size()) {
      throw ValidationError("feat_loss: width mismatch in pair " +
                            std::to_string(p) + " after projection");
    }
    if (s.empty()) throw ValidationError("feat_loss: empty feature vector");
    const double n = static_cast<double>(s.size());
    double mse = 0.0;
    std::vector<double> grad(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
      const double d = s[i] - t[i];
      mse += d * d;
      grad[i] = 2.0 * d / n * pair_norm;
    }
    out.loss += mse / n * pair_norm;
    out.grads.push_back(std::move(grad));
  }
  return out;
}

LossBreakdown composite_loss(const DistillBatch& batch,
                             const DistillConfig& config, int step) {
  config.validate();
  if (step < 0 || step >= config.total_steps) {
    throw ValidationError("composite_loss: step " + std::to_string(step) +
                          " outside [0," + std::to_string(config.total_steps) +
                          ")");
  }
  if (batch.empty()) throw ValidationError("composite_loss: empty batch");

  LossBreakdown out;
  out.phase = step < config.phase1_steps ? 1 : 2;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const auto& sample : batch) {
    const ScalarLoss bce = bce_loss(sample.student_logit, sample.hard_label);
    const ScalarLoss kd =
        kd_loss(sample.student_logit, sample.teacher_logit, config.tau,
                config.tau_squared_scaling);
    FeatLoss feat;
    const bool have_features = !sample.student_features.empty();
    if (have_features) {
      feat = feat_loss(sample.student_features, sample.teacher_features);
    }
    out.l_bce += bce.loss * inv_n;
    out.l_kd += kd.loss * inv_n;
    out.l_feat += feat.loss * inv_n;

    double dlogit;
    std::vector<std::vector<double>> dfeat;
    if (out.phase == 1) {
      dlogit = (config.alpha_hard * bce.grad + config.alpha_logit * kd.grad) *
               inv_n;
      if (have_features) {
        dfeat = feat.grads;
        for (auto& pair : dfeat) {
          for (double& g : pair) g *= config.alpha_feat * inv_n;
        }
      }
    } else {
      // Phase 2 drops the teacher: pure hard-label BCE, weights ignored.
      dlogit = bce.grad * inv_n;
      if (have_features) {
        dfeat.resize(sample.student_features.size());
        for (size_t p = 0; p < dfeat.size(); ++p) {
          dfeat[p].assign(sample.student_features[p].size(), 0.0);
        }
      }
    }
    out.dtotal_dlogit.push_back(dlogit);
    out.dtotal_dfeat.push_back(std::move(dfeat));
  }

  out.total = out.phase == 1
                  ? config.alpha_hard * out.l_bce +
                        config.alpha_logit * out.l_kd +
                        config.alpha_feat * out.l_feat
                  : out.l_bce;
  return out;
}

// ---------------------------------------------------------------------------
// Toy MLP
// ---------------------------------------------------------------------------

Mlp Mlp::random(const std::vector<int>& sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw ValidationError("Mlp needs >= 2 layer sizes");
  std::mt19937_64 rng(seed);
  Mlp net;
  for (size_t i = 0; i + 1 < sizes.size(); ++i) {
    Layer layer;
    layer.in = sizes[i];
    layer.out = sizes[i + 1];
    const double scale = std::sqrt(1.0 / static_cast<double>(layer.in));
    std::normal_distribution<double> dist(0.0, scale);
    layer.w.resize(static_cast<size_t>(layer.out) * layer.in);
    layer.b.assign(layer.out, 0.0);
    for (double& v : layer.w) v = dist(rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

double Mlp::forward(const double* x, int dim,
                    std::vector<std::vector<double>>* hidden) const {
  if (hidden) hidden->clear();
  std::vector<double> cur(x, x + dim);
  for (size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    if (static_cast<int>(cur.size()) != layer.in) {
      throw ValidationError("Mlp::forward: input width mismatch");
    }
    std::vector<double> next(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      double acc = layer.b[o];
      const double* row = layer.w.data() + static_cast<size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) acc += row[i] * cur[i];
      next[o] = acc;
    }
    const bool last = l + 1 == layers.size();
    if (!last) {
      for (double& v : next) v = std::tanh(v);
      if (hidden) hidden->push_back(next);
    }
    cur = std::move(next);
  }
  return cur[0];
}

FeatureProjection FeatureProjection::orthonormal(int rows, int cols,
                                                 std::uint64_t seed) {
  if (rows > cols) {
    throw ValidationError("orthonormal projection needs rows <= cols");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  FeatureProjection proj;
  proj.rows = rows;
  proj.cols = cols;
  proj.p.resize(static_cast<size_t>(rows) * cols);
  // Gram-Schmidt on Gaussian rows.
  for (int r = 0; r < rows; ++r) {
    std::vector<double> v(cols);
    for (double& x : v) x = dist(rng);
    for (int prev = 0; prev < r; ++prev) {
      const double* u = proj.p.data() + static_cast<size_t>(prev) * cols;
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += v[c] * u[c];
      for (int c = 0; c < cols; ++c) v[c] -= dot * u[c];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw BackendError("degenerate projection row");
    for (int c = 0; c < cols; ++c) {
      proj.p[static_cast<size_t>(r) * cols + c] = v[c] / norm;
    }
  }
  return proj;
}

std::vector<double> FeatureProjection::apply(
    const std::vector<double>& v) const {
  if (static_cast<int>(v.size()) != cols) {
    throw ValidationError("projection width mismatch");
  }
  std::vector<double> out(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* row = p.data() + static_cast<size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

ToyDataset make_toy_dataset(const Mlp& teacher, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ToyDataset data;
  data.x.reserve(n);
  data.y.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::array<double, 2> x = {coord(rng), coord(rng)};
    const double p = stable_sigmoid(teacher.forward(x.data(), 2));
    data.x.push_back(x);
    data.y.push_back(unit(rng) < p ? 1.0 : 0.0);
  }
  return data;
}

namespace {

// Backprop for the toy MLP: dlogit flows from the loss; per-hidden-layer
// feature gradients (already weighted) are injected at their taps.
struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  explicit Gradients(const Mlp& net) {
    for (const auto& layer : net.layers) {
      w.emplace_back(layer.w.size(), 0.0);
      b.emplace_back(layer.b.size(), 0.0);
    }
  }
};

void accumulate_backward(const Mlp& net, const std::array<double, 2>& x,
                         const std::vector<std::vector<double>>& hidden,
                         double dlogit,
                         const std::vector<std::vector<double>>& dfeat,
                         Gradients* grads) {
  const int L = static_cast<int>(net.layers.size());
  // delta holds dLoss/d(pre-activation) of the current layer.
  std::vector<double> delta = {dlogit};
  const std::vector<double> x_vec(x.begin(), x.end());
  for (int l = L - 1; l >= 0; --l) {
    const auto& layer = net.layers[l];
    const std::vector<double>& input = l == 0 ? x_vec : hidden[l - 1];

    auto& gw = grads->w[l];
    auto& gb = grads->b[l];
    for (int o = 0; o < layer.out; ++o) {
      gb[o] += delta[o];
      for (int i = 0; i < layer.in; ++i) {
        gw[static_cast<size_t>(o) * layer.in + i] += delta[o] * input[i];
      }
    }
    if (l == 0) break;

    std::vector<double> prev(layer.in, 0.0);
    for (int i = 0; i < layer.in; ++i) {
      double acc = 0.0;
      for (int o = 0; o < layer.out; ++o) {
        acc += layer.w[static_cast<size_t>(o) * layer.in + i] * delta[o];
      }
      prev[i] = acc;
    }
    // Inject the feature-loss gradient at this hidden activation, then pass
    // through tanh'.
    const auto& h = hidden[l - 1];
    if (!dfeat.empty()) {
      const auto& tap = dfeat[l - 1];
      for (int i = 0; i < layer.in; ++i) prev[i] += tap[i];
    }
    for (int i = 0; i < layer.in; ++i) {
      prev[i] *= 1.0 - h[i] * h[i];
    }
    delta = std::move(prev);
  }
}

}  // namespace

CalibrationStats evaluate_calibration(const Mlp& student, const Mlp& teacher,
                                      const ToyDataset& holdout) {
  CalibrationStats stats;
  const size_t n = holdout.x.size();
  constexpr int kBins = 10;
  std::array<double, kBins> bin_conf{}, bin_pos{};
  std::array<int, kBins> bin_count{};
  double brier = 0.0, gap = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double ps = stable_sigmoid(student.forward(holdout.x[i].data(), 2));
    const double pt = stable_sigmoid(teacher.forward(holdout.x[i].data(), 2));
    const double y = holdout.y[i];
    brier += (ps - y) * (ps - y);
    gap += std::abs(ps - pt);
    int bin = static_cast<int>(ps * kBins);
    bin = std::clamp(bin, 0, kBins - 1);
    bin_conf[bin] += ps;
    bin_pos[bin] += y;
    bin_count[bin] += 1;
  }
  stats.brier = brier / static_cast<double>(n);
  stats.mean_abs_prob_gap = gap / static_cast<double>(n);
  double ece = 0.0;
  for (int b = 0; b < kBins; ++b) {
    if (bin_count[b] == 0) continue;
    const double conf = bin_conf[b] / bin_count[b];
    const double frac = bin_pos[b] / bin_count[b];
    ece += (static_cast<double>(bin_count[b]) / static_cast<double>(n)) *
           std::abs(conf - frac);
  }
  stats.ece = ece;
  return stats;
}

ToyTrainResult train_toy(const Mlp& teacher, Mlp student,
                         const ToyDataset& train, const ToyDataset& holdout,
                         const DistillConfig& config,
                         const TrainOptions& options) {
  config.validate();
  if (train.x.empty()) throw ValidationError("train_toy: empty training set");

  // One fixed projection per feature pair, independent of the training seed.
  const int pairs = std::min(
      {config.feature_pairs, teacher.hidden_layer_count(),
       student.hidden_layer_count()});
  std::vector<FeatureProjection> projections;
  for (int p = 0; p < pairs; ++p) {
    const int t_width = teacher.layers[p].out;
    const int s_width = student.layers[p].out;
    projections.push_back(FeatureProjection::orthonormal(
        s_width, t_width, 0xFEA7000Bull + static_cast<std::uint64_t>(p)));
  }

  std::mt19937_64 batch_rng(options.seed ^ 0xBA7C4E5ull);
  std::uniform_int_distribution<size_t> pick(0, train.x.size() - 1);

  ToyTrainResult result;
  for (int step = 0; step < config.total_steps; ++step) {
    DistillBatch batch;
    std::vector<size_t> indices;
    std::vector<std::vector<std::vector<double>>> hiddens;
    batch.reserve(options.batch_size);
    for (int b = 0; b < options.batch_size; ++b) {
      const size_t idx = pick(batch_rng);
      indices.push_back(idx);
      DistillSample sample;
      std::vector<std::vector<double>> s_hidden, t_hidden;
      sample.student_logit =
          student.forward(train.x[idx].data(), 2, &s_hidden);
      if (!std::isfinite(sample.student_logit)) {
        throw BackendError("train_toy diverged (non-finite logit) at step " +
                           std::to_string(step));
      }
      sample.teacher_logit =
          teacher.forward(train.x[idx].data(), 2, &t_hidden);
      sample.hard_label = train.y[idx];
      for (int p = 0; p < pairs; ++p) {
        sample.student_features.push_back(s_hidden[p]);
        sample.teacher_features.push_back(projections[p].apply(t_hidden[p]));
      }
      hiddens.push_back(std::move(s_hidden));
      batch.push_back(std::move(sample));
    }

    LossBreakdown breakdown;
    if (options.use_kd) {
      breakdown = composite_loss(batch, config, step);
    } else {
      // Hard-label baseline: plain BCE for the whole run.
      breakdown.phase = step < config.phase1_steps ? 1 : 2;
      const double inv_n = 1.0 / static_cast<double>(batch.size());
      for (const auto& sample : batch) {
        const ScalarLoss bce =
            bce_loss(sample.student_logit, sample.hard_label);
        breakdown.l_bce += bce.loss * inv_n;
        breakdown.dtotal_dlogit.push_back(bce.grad * inv_n);
        breakdown.dtotal_dfeat.emplace_back();
      }
      breakdown.total = breakdown.l_bce;
    }
    if (!std::isfinite(breakdown.total)) {
      throw BackendError("train_toy diverged (non-finite loss) at step " +
                         std::to_string(step));
    }
    result.log.push_back({step, breakdown.l_bce, breakdown.l_kd,
                          breakdown.l_feat, breakdown.total, breakdown.phase});

    Gradients grads(student);
    for (size_t b = 0; b < batch.size(); ++b) {
      // Feature taps apply to the first `pairs` hidden layers; deeper layers
      // receive no feature gradient.
      std::vector<std::vector<double>> dfeat;
      if (!breakdown.dtotal_dfeat[b].empty()) {
        dfeat.assign(student.hidden_layer_count(), {});
        for (int l = 0; l < student.hidden_layer_count(); ++l) {
          if (l < pairs) {
            dfeat[l] = breakdown.dtotal_dfeat[b][l];
          } else {
            dfeat[l].assign(student.layers[l].out, 0.0);
          }
        }
      }
      accumulate_backward(student, train.x[indices[b]], hiddens[b],
                          breakdown.dtotal_dlogit[b], dfeat, &grads);
    }

    double lr = options.learning_rate;
    if (options.cosine_decay) {
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                  static_cast<double>(config.total_steps)));
    }
    for (size_t l = 0; l < student.layers.size(); ++l) {
      auto& layer = student.layers[l];
      for (size_t i = 0; i < layer.w.size(); ++i) {
        layer.w[i] -= lr * grads.w[l][i];
      }
      for (size_t i = 0; i < layer.b.size(); ++i) {
        layer.b[i] -= lr * grads.b[l][i];
      }
    }
  }

  result.calibration = evaluate_calibration(student, teacher, holdout);
  result.student = std::move(student);
  return result;
}

KdComparison run_kd_comparison(std::uint64_t seed, const DistillConfig& config,
                               int train_size, int holdout_size,
                               double learning_rate) {
  // Teacher doubles as the ground-truth label process. Output scale is
  // calibrated so logits spread over roughly [-5, 5].
  Mlp teacher = Mlp::random({2, 16, 16, 16, 16, 1}, 0x7EAC4E2ull + seed);
  {
    std::mt19937_64 rng(0xCA11B2A7Eull);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    double sq = 0.0;
    constexpr int kProbe = 512;
    for (int i = 0; i < kProbe; ++i) {
      const std::array<double, 2> x = {coord(rng), coord(rng)};
      const double z = teacher.forward(x.data(), 2);
      sq += z * z;
    }
    const double std_now = std::sqrt(sq / kProbe);
    const double scale = 2.5 / std::max(std_now, 1e-6);
    auto& out = teacher.layers.back();
    for (double& v : out.w) v *= scale;
    for (double& v : out.b) v *= scale;
  }

  const ToyDataset train = make_toy_dataset(teacher, train_size, seed * 2 + 1);
  const ToyDataset holdout =
      make_toy_dataset(teacher, holdout_size, seed * 2 + 2);
  const Mlp student_init = Mlp::random({2, 8, 8, 8, 8, 1}, 0x57CDE47ull + seed);

  TrainOptions opts;
  opts.seed = seed;
  opts.learning_rate = learning_rate;

  TrainOptions hard_opts = opts;
  hard_opts.use_kd = false;

  KdComparison cmp;
  ToyTrainResult kd =
      train_toy(teacher, student_init, train, holdout, config, opts);
  ToyTrainResult hard =
      train_toy(teacher, student_init, train, holdout, config, hard_opts);
  cmp.kd = kd.calibration;
  cmp.hard_only = hard.calibration;
  cmp.kd_log = std::move(kd.log);
  return cmp;
}

void save_distill_log(const std::vector<StepLog>& log,
                      const std::filesystem::path& path) {
  jsonl::Writer w(path);
  for (const auto& s : log) {
    w.write({{"step", s.step},
             {"l_bce", s.l_bce},
             {"l_kd", s.l_kd},
             {"l_feat", s.l_feat},
             {"total", s.total},
             {"phase", s.phase}});
  }
}

}  // namespace crashbench
