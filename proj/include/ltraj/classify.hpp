#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ltraj {

/// One-vs-rest linear max-margin classifier with per-class logistic
/// calibration. Classes are kept in sorted label order.
struct LinearModel {
  std::vector<std::string> classes;
  size_t dim = 0;
  std::vector<std::vector<float>> weights;  // per class
  std::vector<float> biases;
  std::vector<float> slopes;      // calibration: p = 1/(1+exp(slope*s+intercept))
  std::vector<float> intercepts;
};

struct TrainConfig {
  double C = 1.0;
  int epochs = 200;
  uint64_t seed = 0;
};

/// Best-so-far objective value after each epoch, for the kept per-class
/// averaged iterate (non-increasing by construction).
struct TrainReport {
  std::vector<std::vector<double>> objective_trace;  // per class
};

struct Prediction {
  std::string label;
  std::vector<double> posteriors;  // aligned with model.classes, sums to 1
};

struct EvalReport {
  double accuracy = 0;
  std::vector<std::string> classes;
  std::vector<std::vector<int>> confusion;  // row = true, col = predicted
  std::vector<double> per_class_accuracy;
};

/// Seeded stochastic subgradient training of per-class hinge losses with
/// averaged iterates; the epoch average with the lowest regularized
/// objective is kept. Calibration is fit on the training scores.
LinearModel train(const std::vector<std::vector<float>>& features,
                  const std::vector<std::string>& labels,
                  const TrainConfig& cfg, TrainReport* report = nullptr);

Prediction predict(const LinearModel& model, const std::vector<float>& x);

EvalReport evaluate(const LinearModel& model,
                    const std::vector<std::vector<float>>& features,
                    const std::vector<std::string>& labels);

/// Versioned binary model file ("TLMD").
void write_model(const std::filesystem::path& path, const LinearModel& model);
LinearModel read_model(const std::filesystem::path& path);

}  // namespace ltraj
