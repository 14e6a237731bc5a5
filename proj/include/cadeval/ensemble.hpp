#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cadeval {

// Column means per model class: predictions is n_findings x n_models,
// groups lists the column indices of each class (a partition).
std::vector<std::vector<double>> class_mean(
    const std::vector<std::vector<double>>& predictions,
    const std::vector<std::vector<int>>& groups);

struct StackingWeights {
  std::vector<double> weights;      // on the probability simplex
  std::vector<std::string> labels;  // component names, same order
  double tuning_auc = 0.0;
};

// Convex weights maximizing the AUC of the weighted score sum on the given
// data. Derivative-free: the unit vectors plus 10,000 seeded Dirichlet(1)
// candidates, then coordinate-descent refinement (step 0.01 halved down to
// 1e-5). Deterministic in seed; ties keep the earlier candidate, so the
// result can never fall below the best single component.
StackingWeights fit_stacking(const std::vector<std::vector<double>>& class_preds,
                             const std::vector<int>& labels, std::uint64_t seed = 1,
                             std::vector<std::string> names = {});

std::vector<double> apply_stacking(const StackingWeights& w,
                                   const std::vector<std::vector<double>>& class_preds);

struct CalibrationParams {
  double a = 1.0;  // slope on log-odds
  double b = 0.0;  // intercept
  double epsilon = 1e-6;
  bool temperature_only = false;  // fitted with b pinned to 0
  bool separation_capped = false;  // hit the |a|,|b| <= 50 cap
};

// Two-parameter logistic recalibration p -> sigmoid(a*logit(p)+b), fitted
// by damped Newton on the negative log-likelihood (|step| < 1e-10 or 200
// iterations). Near-separable data caps |a|,|b| at 50 and flags it.
CalibrationParams fit_calibration(const std::vector<double>& scores,
                                  const std::vector<int>& labels,
                                  bool temperature_only = false);

double apply_calibration(const CalibrationParams& p, double score);
std::vector<double> apply_calibration(const CalibrationParams& p,
                                      const std::vector<double>& scores);

// Rescales every per-nodule prediction by the ratio that brings their
// maximum to the patient-level final prediction; output clamped to [0,1].
std::vector<double> update_nodule_predictions(double patient_final,
                                              const std::vector<double>& nodule_preds);

extern const std::array<double, 6> kLungradsTargetAccuracies;

struct LungradsOp {
  double target_accuracy = 0.0;
  double cutoff = 0.0;  // score >= cutoff predicts positive; +inf = none
  double achieved_accuracy = 0.0;
};

// For each target accuracy, the cutoff whose empirical accuracy on the
// training scores is nearest (ties to the lower cutoff).
std::vector<LungradsOp> lungrads_equivalent_ops(
    const std::vector<double>& train_scores, const std::vector<int>& train_labels,
    const std::vector<double>& target_accuracies);

struct UnitRescale {
  double min = 0.0, max = 1.0;
};

// Affine map learned on training predictions: min -> 0, max -> 1; applied
// values are clamped into [0,1]. Errors when the training range is empty.
UnitRescale fit_rescale_unit(const std::vector<double>& train);
std::vector<double> apply_rescale_unit(const UnitRescale& r,
                                       const std::vector<double>& values);

void write_stacking(const std::string& path, const StackingWeights& w);
StackingWeights read_stacking(const std::string& path);
void write_calibration(const std::string& path, const CalibrationParams& p);
CalibrationParams read_calibration(const std::string& path);

}  // namespace cadeval
