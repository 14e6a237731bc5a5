#include "cadeval/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cadeval/error.hpp"
#include "cadeval/metrics.hpp"
#include "cadeval/report.hpp"
#include "cadeval/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cadeval {

const std::array<double, 6> kLungradsTargetAccuracies = {
    0.010499583, 0.565082253, 0.870543047, 0.934665051, 0.972519143, 0.983397773};

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double logit(double p, double eps) {
  const double q = std::min(1.0 - eps, std::max(eps, p));
  return std::log(q / (1.0 - q));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow
double softplus(double z) { return z > 30.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_matrix(const std::vector<std::vector<double>>& m, std::size_t* cols) {
  if (m.empty()) throw input_error("prediction matrix is empty");
  *cols = m.front().size();
  if (*cols == 0) throw input_error("prediction matrix has no columns");
  for (const auto& row : m)
    if (row.size() != *cols) throw input_error("prediction matrix is ragged");
}

std::vector<double> weighted_scores(const std::vector<std::vector<double>>& preds,
                                    const std::vector<double>& w) {
  std::vector<double> s(preds.size(), 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j) s[i] += w[j] * preds[i][j];
  return s;
}

}  // namespace

std::vector<std::vector<double>> class_mean(
    const std::vector<std::vector<double>>& predictions,
    const std::vector<std::vector<int>>& groups) {
  std::size_t n_models = 0;
  check_matrix(predictions, &n_models);
  if (groups.empty()) throw input_error("class_mean: no classes given");
  std::vector<char> seen(n_models, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw input_error("class_mean: empty class");
    for (int c : g) {
      if (c < 0 || static_cast<std::size_t>(c) >= n_models)
        throw input_error("class_mean: column index out of range");
      if (seen[static_cast<std::size_t>(c)]++)
        throw input_error("class_mean: classes must not share columns");
    }
  }
  std::vector<std::vector<double>> out(predictions.size(),
                                       std::vector<double>(groups.size(), 0.0));
  for (std::size_t i = 0; i < predictions.size(); ++i)
    for (std::size_t k = 0; k < groups.size(); ++k) {
      double sum = 0.0;
      for (int c : groups[k]) sum += predictions[i][static_cast<std::size_t>(c)];
      out[i][k] = sum / static_cast<double>(groups[k].size());
    }
  return out;
}

StackingWeights fit_stacking(const std::vector<std::vector<double>>& class_preds,
                             const std::vector<int>& labels, std::uint64_t seed,
                             std::vector<std::string> names) {
  std::size_t k = 0;
  check_matrix(class_preds, &k);
  if (labels.size() != class_preds.size())
    throw input_error("fit_stacking: labels and rows differ in length");
  // validate before the parallel candidate sweep: nothing may throw in there
  bool pos = false, neg = false;
  for (int l : labels) (l ? pos : neg) = true;
  if (!pos || !neg) throw input_error("fit_stacking: both classes must be present");
  for (const auto& row : class_preds)
    for (double v : row)
      if (!std::isfinite(v)) throw input_error("fit_stacking: predictions must be finite");

  StackingWeights result;
  if (names.empty())
    for (std::size_t j = 0; j < k; ++j) names.push_back("class_" + std::to_string(j));
  if (names.size() != k) throw input_error("fit_stacking: wrong number of names");
  result.labels = std::move(names);

  auto evaluate = [&](const std::vector<double>& w) {
    return auc_fast(labels, weighted_scores(class_preds, w));
  };

  if (k == 1) {
    result.weights = {1.0};
    result.tuning_auc = evaluate(result.weights);
    return result;
  }

  // candidates: the k unit vectors, then 10,000 Dirichlet(1) draws, each
  // from its own counter-derived stream so order and threading can't matter
  constexpr int kRandomCandidates = 10000;
  const int total = static_cast<int>(k) + kRandomCandidates;
  auto candidate = [&](int c) {
    std::vector<double> w(k, 0.0);
    if (c < static_cast<int>(k)) {
      w[static_cast<std::size_t>(c)] = 1.0;
      return w;
    }
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c - static_cast<int>(k))));
    double sum = 0.0;
    for (auto& v : w) {
      v = -std::log1p(-rng.uniform01());  // Exp(1)
      sum += v;
    }
    if (sum <= 0.0) {
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
    } else {
      for (auto& v : w) v /= sum;
    }
    return w;
  };

  std::vector<double> aucs(static_cast<std::size_t>(total));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int c = 0; c < total; ++c)
    aucs[static_cast<std::size_t>(c)] = evaluate(candidate(c));

  int best_c = 0;
  for (int c = 1; c < total; ++c)
    if (aucs[static_cast<std::size_t>(c)] > aucs[static_cast<std::size_t>(best_c)]) best_c = c;
  std::vector<double> w = candidate(best_c);
  double best = aucs[static_cast<std::size_t>(best_c)];

  // coordinate refinement: move mass between pairs while AUC strictly rises
  for (double step = 0.01; step >= 1e-5; step *= 0.5) {
    bool improved = true;
    int guard = 0;
    while (improved && guard++ < 10000) {
      improved = false;
      for (std::size_t to = 0; to < k; ++to)
        for (std::size_t from = 0; from < k; ++from) {
          if (to == from) continue;
          const double delta = std::min(step, w[from]);
          if (delta <= 0.0) continue;
          std::vector<double> cand = w;
          cand[from] -= delta;
          cand[to] += delta;
          const double a = evaluate(cand);
          if (a > best) {
            best = a;
            w = std::move(cand);
            improved = true;
          }
        }
    }
  }

  double sum = 0.0;
  for (double v : w) sum += v;
  for (auto& v : w) v /= sum;  // exact simplex after drift
  result.weights = std::move(w);
  result.tuning_auc = best;
  return result;
}

std::vector<double> apply_stacking(const StackingWeights& w,
                                   const std::vector<std::vector<double>>& class_preds) {
  std::size_t k = 0;
  check_matrix(class_preds, &k);
  if (k != w.weights.size()) throw input_error("apply_stacking: weight/column mismatch");
  return weighted_scores(class_preds, w.weights);
}

CalibrationParams fit_calibration(const std::vector<double>& scores,
                                  const std::vector<int>& labels, bool temperature_only) {
  if (scores.size() != labels.size())
    throw input_error("fit_calibration: length mismatch");
  if (scores.empty()) throw input_error("fit_calibration: empty input");
  bool pos = false, neg = false;
  for (int l : labels) (l ? pos : neg) = true;
  if (!pos || !neg) throw input_error("fit_calibration: both classes must be present");

  CalibrationParams p;
  p.temperature_only = temperature_only;
  std::vector<double> lg(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
      throw input_error("fit_calibration: scores must lie in [0,1]");
    lg[i] = logit(scores[i], p.epsilon);
  }

  auto nll = [&](double a, double b) {
    double s = 0.0;
    for (std::size_t i = 0; i < lg.size(); ++i) {
      const double z = a * lg[i] + b;
      s += softplus(z) - (labels[i] ? z : 0.0);
    }
    return s;
  };

  double a = 1.0, b = 0.0;
  double cur = nll(a, b);
  for (int iter = 0; iter < 200; ++iter) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    for (std::size_t i = 0; i < lg.size(); ++i) {
      const double z = a * lg[i] + b;
      const double s = sigmoid(z);
      const double r = s - (labels[i] ? 1.0 : 0.0);
      const double wgt = s * (1.0 - s);
      ga += r * lg[i];
      gb += r;
      haa += wgt * lg[i] * lg[i];
      hab += wgt * lg[i];
      hbb += wgt;
    }
    double da, db;
    if (temperature_only) {
      if (haa <= 0.0) haa = 1e-12;
      da = ga / haa;
      db = 0.0;
    } else {
      double det = haa * hbb - hab * hab;
      double ridge = 0.0;
      while (det <= 1e-300 && ridge < 1.0) {
        ridge = ridge == 0.0 ? 1e-8 : ridge * 10.0;
        det = (haa + ridge) * (hbb + ridge) - hab * hab;
      }
      da = ((hbb + ridge) * ga - hab * gb) / det;
      db = ((haa + ridge) * gb - hab * ga) / det;
    }
    // damping: halve the step until the objective stops getting worse
    double t = 1.0;
    double na = a - da, nb = b - db;
    double next = nll(na, nb);
    int halvings = 0;
    while (next > cur + 1e-12 && halvings++ < 60) {
      t *= 0.5;
      na = a - t * da;
      nb = b - t * db;
      next = nll(na, nb);
    }
    const double moved = std::max(std::abs(a - na), std::abs(b - nb));
    a = na;
    b = nb;
    cur = next;
    if (moved < 1e-10) break;
  }
  if (std::abs(a) > 50.0 || std::abs(b) > 50.0) {
    a = std::min(50.0, std::max(-50.0, a));
    b = std::min(50.0, std::max(-50.0, b));
    p.separation_capped = true;
  }
  p.a = a;
  p.b = b;
  return p;
}

double apply_calibration(const CalibrationParams& p, double score) {
  return sigmoid(p.a * logit(score, p.epsilon) + p.b);
}

std::vector<double> apply_calibration(const CalibrationParams& p,
                                      const std::vector<double>& scores) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = apply_calibration(p, scores[i]);
  return out;
}

std::vector<double> update_nodule_predictions(double patient_final,
                                              const std::vector<double>& nodule_preds) {
  if (nodule_preds.empty()) throw input_error("update_nodule_predictions: empty input");
  const double mx = *std::max_element(nodule_preds.begin(), nodule_preds.end());
  if (!(mx > 0.0)) throw input_error("update_nodule_predictions: max prediction must be > 0");
  const double delta = (patient_final - mx) / mx;
  std::vector<double> out(nodule_preds.size());
  for (std::size_t i = 0; i < nodule_preds.size(); ++i)
    out[i] = clamp01(nodule_preds[i] * (1.0 + delta));
  return out;
}

std::vector<LungradsOp> lungrads_equivalent_ops(const std::vector<double>& train_scores,
                                                const std::vector<int>& train_labels,
                                                const std::vector<double>& target_accuracies) {
  if (train_scores.size() != train_labels.size())
    throw input_error("lungrads ops: length mismatch");
  if (train_scores.empty()) throw input_error("lungrads ops: empty input");
  bool pos = false, neg = false;
  for (int l : train_labels) (l ? pos : neg) = true;
  if (!pos || !neg) throw input_error("lungrads ops: both classes must be present");

  std::vector<std::pair<double, int>> data(train_scores.size());
  for (std::size_t i = 0; i < train_scores.size(); ++i)
    data[i] = {train_scores[i], train_labels[i] ? 1 : 0};
  std::sort(data.begin(), data.end());
  const auto n = static_cast<double>(data.size());

  // cutoff candidates: every unique score (ascending) and +inf (no positives)
  std::vector<std::pair<double, double>> cand;  // (cutoff, accuracy)
  std::int64_t pos_total = 0;
  for (const auto& [s, l] : data) pos_total += l;
  std::int64_t neg_below = 0, pos_below = 0;
  std::size_t i = 0;
  while (i < data.size()) {
    const double cut = data[i].first;
    // all scores < cut predicted negative, >= cut positive
    const double acc =
        (static_cast<double>(neg_below) + static_cast<double>(pos_total - pos_below)) / n;
    cand.emplace_back(cut, acc);
    while (i < data.size() && data[i].first == cut) {
      (data[i].second ? pos_below : neg_below)++;
      ++i;
    }
  }
  cand.emplace_back(std::numeric_limits<double>::infinity(),
                    static_cast<double>(neg_below) / n);

  std::vector<LungradsOp> out;
  out.reserve(target_accuracies.size());
  for (double target : target_accuracies) {
    LungradsOp op;
    op.target_accuracy = target;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [cut, acc] : cand) {
      const double d = std::abs(acc - target);
      if (d < best) {  // strict: earlier (lower) cutoff wins ties
        best = d;
        op.cutoff = cut;
        op.achieved_accuracy = acc;
      }
    }
    out.push_back(op);
  }
  return out;
}

UnitRescale fit_rescale_unit(const std::vector<double>& train) {
  if (train.empty()) throw input_error("rescale_unit: empty training data");
  UnitRescale r;
  const auto [lo, hi] = std::minmax_element(train.begin(), train.end());
  r.min = *lo;
  r.max = *hi;
  if (r.min == r.max) throw input_error("rescale_unit: degenerate training range");
  return r;
}

std::vector<double> apply_rescale_unit(const UnitRescale& r, const std::vector<double>& values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = clamp01((values[i] - r.min) / (r.max - r.min));
  return out;
}

void write_stacking(const std::string& path, const StackingWeights& w) {
  Json j = Json::object();
  j["labels"] = w.labels;
  j["weights"] = w.weights;
  j["tuning_auc"] = w.tuning_auc;
  write_text_file(path, canonical_json(j));
}

StackingWeights read_stacking(const std::string& path) {
  StackingWeights w;
  try {
    Json j = Json::parse(read_text_file(path));
    w.labels = j.at("labels").get<std::vector<std::string>>();
    w.weights = j.at("weights").get<std::vector<double>>();
    w.tuning_auc = j.value("tuning_auc", 0.0);
  } catch (const Json::exception& e) {
    throw input_error(path + ": " + e.what());
  }
  if (w.labels.size() != w.weights.size())
    throw input_error(path + ": labels and weights differ in length");
  return w;
}

void write_calibration(const std::string& path, const CalibrationParams& p) {
  Json j = Json::object();
  j["a"] = p.a;
  j["b"] = p.b;
  j["epsilon"] = p.epsilon;
  j["temperature_only"] = p.temperature_only;
  j["separation_capped"] = p.separation_capped;
  write_text_file(path, canonical_json(j));
}

CalibrationParams read_calibration(const std::string& path) {
  CalibrationParams p;
  try {
    Json j = Json::parse(read_text_file(path));
    p.a = j.at("a").get<double>();
    p.b = j.at("b").get<double>();
    p.epsilon = j.value("epsilon", 1e-6);
    p.temperature_only = j.value("temperature_only", false);
    p.separation_capped = j.value("separation_capped", false);
  } catch (const Json::exception& e) {
    throw input_error(path + ": " + e.what());
  }
  return p;
}

}  // namespace cadeval
