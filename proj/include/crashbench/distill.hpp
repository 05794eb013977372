#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crashbench/core.hpp"

namespace crashbench {

struct DistillConfig {
  double alpha_hard = 0.3;
  double alpha_logit = 0.6;
  double alpha_feat = 0.1;
  double tau = 4.0;
  int phase1_steps = 3000;
  int total_steps = 4000;
  int feature_pairs = 4;
  /// Multiply the KD term by tau^2 so gradient magnitude stays
  /// temperature-invariant (exposed because the choice is conventional).
  bool tau_squared_scaling = true;

  void validate() const;
};

struct ScalarLoss {
  double loss = 0.0;
  double grad = 0.0;  // d loss / d student_logit
};

/// Binary cross-entropy on a logit, log-sum-exp form; stable for any finite
/// input. Gradient is sigmoid(z) - y.
ScalarLoss bce_loss(double student_logit, double hard_label);

/// Bernoulli KL(teacher || student) on temperature-softened probabilities
/// sigmoid(logit / tau), scaled by tau^2 when tau_squared is set. Gradient
/// w.r.t. the student logit is tau * (sigma(zs/tau) - sigma(zt/tau)).
ScalarLoss kd_loss(double student_logit, double teacher_logit,
                   double tau = 4.0, bool tau_squared = true);

struct FeatLoss {
  double loss = 0.0;
  std::vector<std::vector<double>> grads;  // per pair, per element
};

/// Mean over pairs of the mean-squared error between matched feature
/// vectors. Widths must already be reconciled (see project_features).
FeatLoss feat_loss(const std::vector<std::vector<double>>& student_features,
                   const std::vector<std::vector<double>>& teacher_features);

struct DistillSample {
  double student_logit = 0.0;
  double teacher_logit = 0.0;
  double hard_label = 0.0;  // 0 or 1
  std::vector<std::vector<double>> student_features;
  std::vector<std::vector<double>> teacher_features;
};

using DistillBatch = std::vector<DistillSample>;

/// Loss terms (batch means) and gradients for one step. Phase 1 combines the
/// three weighted terms; phase 2 is hard-label BCE only. The raw terms are
/// always reported.
struct LossBreakdown {
  double l_bce = 0.0;
  double l_kd = 0.0;
  double l_feat = 0.0;
  double total = 0.0;
  int phase = 1;
  std::vector<double> dtotal_dlogit;  // per sample
  std::vector<std::vector<std::vector<double>>> dtotal_dfeat;  // [sample][pair][i]
};

LossBreakdown composite_loss(const DistillBatch& batch,
                             const DistillConfig& config, int step);

// ---------------------------------------------------------------------------
// Toy teacher/student training at desk scale.
// ---------------------------------------------------------------------------

/// Dense tanh MLP with a single linear output logit. Sized in units, e.g.
/// {2, 16, 16, 16, 16, 1}.
struct Mlp {
  struct Layer {
    int in = 0, out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out
  };
  std::vector<Layer> layers;

  static Mlp random(const std::vector<int>& sizes, std::uint64_t seed);
  int hidden_layer_count() const { return static_cast<int>(layers.size()) - 1; }
  /// Forward pass; if hidden != nullptr, stores each hidden activation.
  double forward(const double* x, int dim,
                 std::vector<std::vector<double>>* hidden = nullptr) const;
};

/// Fixed random projection with orthonormal rows mapping teacher feature
/// width to student width.
struct FeatureProjection {
  int rows = 0, cols = 0;
  std::vector<double> p;  // rows x cols

  static FeatureProjection orthonormal(int rows, int cols, std::uint64_t seed);
  std::vector<double> apply(const std::vector<double>& v) const;
};

struct ToyDataset {
  std::vector<std::array<double, 2>> x;
  std::vector<double> y;  // sampled 0/1 labels
};

/// Samples inputs uniformly on [-2,2]^2 and labels from
/// Bernoulli(sigmoid(teacher(x))): the teacher is the Bayes-optimal
/// predictor by construction and label noise concentrates near its boundary.
ToyDataset make_toy_dataset(const Mlp& teacher, int n, std::uint64_t seed);

struct TrainOptions {
  std::uint64_t seed = 0;
  double learning_rate = 0.1;
  bool cosine_decay = true;
  int batch_size = 32;
  /// When false the composite loss is replaced by plain BCE for every step
  /// (the hard-label-only baseline).
  bool use_kd = true;
};

struct StepLog {
  int step = 0;
  double l_bce = 0.0, l_kd = 0.0, l_feat = 0.0, total = 0.0;
  int phase = 1;
};

struct CalibrationStats {
  double brier = 0.0;
  double ece = 0.0;  // 10-bin expected calibration error
  /// Mean |p_student - p_teacher| over the evaluation set.
  double mean_abs_prob_gap = 0.0;
};

struct ToyTrainResult {
  Mlp student;
  std::vector<StepLog> log;
  CalibrationStats calibration;
};

/// Mini-batch SGD with hand-derived gradients over config.total_steps.
/// Deterministic per options.seed. Throws BackendError naming the step if
/// the loss turns non-finite.
ToyTrainResult train_toy(const Mlp& teacher, Mlp student,
                         const ToyDataset& train, const ToyDataset& holdout,
                         const DistillConfig& config,
                         const TrainOptions& options);

CalibrationStats evaluate_calibration(const Mlp& student, const Mlp& teacher,
                                      const ToyDataset& holdout);

/// Paired-seed comparison: identical init, batches, and data; one arm trains
/// with the composite loss, the other with hard labels only.
struct KdComparison {
  CalibrationStats kd;
  CalibrationStats hard_only;
  std::vector<StepLog> kd_log;
};

KdComparison run_kd_comparison(std::uint64_t seed, const DistillConfig& config,
                               int train_size = 256, int holdout_size = 4096,
                               double learning_rate = 0.1);

void save_distill_log(const std::vector<StepLog>& log,
                      const std::filesystem::path& path);

}  // namespace crashbench
