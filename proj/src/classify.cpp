#include "ltraj/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "ltraj/fsutil.hpp"
#include "ltraj/rng.hpp"
#include "ltraj/serialize.hpp"

namespace ltraj {

namespace {

double dot(const std::vector<double>& w, const std::vector<float>& x) {
  double s = 0;
  for (size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

// Regularized hinge objective of an averaged iterate.
double objective(const std::vector<double>& w, double b,
                 const std::vector<std::vector<float>>& X,
                 const std::vector<int>& y, double lambda) {
  double reg = 0;
  for (double v : w) reg += v * v;
  double loss = 0;
  for (size_t i = 0; i < X.size(); ++i)
    loss += std::max(0.0, 1.0 - y[i] * (dot(w, X[i]) + b));
  return 0.5 * lambda * reg + loss / X.size();
}

// Logistic fit of p = 1/(1+exp(a*s+b)) to targets with smoothing, by Newton
// descent with backtracking. Deterministic; robust to degenerate scores.
void fit_sigmoid(const std::vector<double>& scores, const std::vector<int>& y,
                 double& slope, double& intercept) {
  const size_t n = scores.size();
  double prior1 = 0, prior0 = 0;
  for (int v : y) (v > 0 ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);

  std::vector<double> target(n);
  for (size_t i = 0; i < n; ++i) target[i] = y[i] > 0 ? hi : lo;

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));

  auto fval = [&](double A, double B) {
    double f = 0;
    for (size_t i = 0; i < n; ++i) {
      const double fApB = scores[i] * A + B;
      if (fApB >= 0)
        f += target[i] * fApB + std::log1p(std::exp(-fApB));
      else
        f += (target[i] - 1.0) * fApB + std::log1p(std::exp(fApB));
    }
    return f;
  };

  double f = fval(a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0, g1 = 0, g2 = 0;
    for (size_t i = 0; i < n; ++i) {
      const double fApB = scores[i] * a + b;
      double p, q;
      if (fApB >= 0) {
        p = std::exp(-fApB) / (1.0 + std::exp(-fApB));
        q = 1.0 / (1.0 + std::exp(-fApB));
      } else {
        p = 1.0 / (1.0 + std::exp(fApB));
        q = std::exp(fApB) / (1.0 + std::exp(fApB));
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = target[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;

    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * dA;
      const double nb = b + step * dB;
      const double nf = fval(na, nb);
      if (nf < f + 1e-4 * step * gd) {
        a = na;
        b = nb;
        f = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < 1e-10) break;
  }
  slope = a;
  intercept = b;
}

}  // namespace

LinearModel train(const std::vector<std::vector<float>>& features,
                  const std::vector<std::string>& labels,
                  const TrainConfig& cfg, TrainReport* report) {
  if (features.size() != labels.size() || features.empty())
    throw std::invalid_argument("train: feature/label mismatch");
  const size_t n = features.size();
  const size_t dim = features[0].size();
  for (const auto& f : features)
    if (f.size() != dim) throw std::invalid_argument("train: ragged features");

  std::set<std::string> class_set(labels.begin(), labels.end());
  if (class_set.size() < 2)
    throw std::invalid_argument("train: need at least two classes");

  LinearModel model;
  model.classes.assign(class_set.begin(), class_set.end());
  model.dim = dim;
  if (report) report->objective_trace.resize(model.classes.size());

  const double lambda = 1.0 / (cfg.C * n);
  const double radius = 1.0 / std::sqrt(lambda);

  for (size_t ci = 0; ci < model.classes.size(); ++ci) {
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i)
      y[i] = labels[i] == model.classes[ci] ? 1 : -1;

    Rng rng(Rng::mix(cfg.seed, 0xC100 + ci));
    std::vector<double> w(dim, 0.0), wsum(dim, 0.0);
    double b = 0.0, bsum = 0.0;
    std::vector<double> best_w(dim, 0.0);
    double best_b = 0.0;
    double best_obj = std::numeric_limits<double>::max();

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;

    long t = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(i + 1)]);

      for (size_t oi = 0; oi < n; ++oi) {
        const size_t i = order[oi];
        ++t;
        const double eta = 1.0 / (lambda * t);
        const double margin = y[i] * (dot(w, features[i]) + b);
        const double shrink = 1.0 - eta * lambda;
        for (double& v : w) v *= shrink;
        if (margin < 1.0) {
          const double g = eta * y[i];
          for (size_t c = 0; c < dim; ++c) w[c] += g * features[i][c];
          b += g;
        }
        double nw = 0;
        for (double v : w) nw += v * v;
        nw = std::sqrt(nw);
        if (nw > radius) {
          const double scale = radius / nw;
          for (double& v : w) v *= scale;
        }
        for (size_t c = 0; c < dim; ++c) wsum[c] += w[c];
        bsum += b;
      }

      std::vector<double> wavg(dim);
      for (size_t c = 0; c < dim; ++c) wavg[c] = wsum[c] / t;
      const double bavg = bsum / t;
      const double obj = objective(wavg, bavg, features, y, lambda);
      if (obj < best_obj) {
        best_obj = obj;
        best_w = std::move(wavg);
        best_b = bavg;
      }
      if (report) report->objective_trace[ci].push_back(best_obj);
    }

    std::vector<double> scores(n);
    for (size_t i = 0; i < n; ++i) scores[i] = dot(best_w, features[i]) + best_b;
    double slope = 0, intercept = 0;
    fit_sigmoid(scores, y, slope, intercept);

    std::vector<float> wf(dim);
    for (size_t c = 0; c < dim; ++c) wf[c] = (float)best_w[c];
    model.weights.push_back(std::move(wf));
    model.biases.push_back((float)best_b);
    model.slopes.push_back((float)slope);
    model.intercepts.push_back((float)intercept);
  }
  return model;
}

Prediction predict(const LinearModel& model, const std::vector<float>& x) {
  if (x.size() != model.dim)
    throw std::invalid_argument("predict: dimension mismatch");
  Prediction out;
  out.posteriors.resize(model.classes.size());
  double total = 0;
  for (size_t ci = 0; ci < model.classes.size(); ++ci) {
    double s = model.biases[ci];
    for (size_t c = 0; c < model.dim; ++c) s += (double)model.weights[ci][c] * x[c];
    const double fApB = s * model.slopes[ci] + model.intercepts[ci];
    double p = fApB >= 0 ? std::exp(-fApB) / (1.0 + std::exp(-fApB))
                         : 1.0 / (1.0 + std::exp(fApB));
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    out.posteriors[ci] = p;
    total += p;
  }
  size_t best = 0;
  for (size_t ci = 0; ci < model.classes.size(); ++ci) {
    out.posteriors[ci] /= total;
    if (out.posteriors[ci] > out.posteriors[best]) best = ci;
  }
  out.label = model.classes[best];
  return out;
}

EvalReport evaluate(const LinearModel& model,
                    const std::vector<std::vector<float>>& features,
                    const std::vector<std::string>& labels) {
  if (features.size() != labels.size())
    throw std::invalid_argument("evaluate: feature/label mismatch");
  EvalReport rep;
  rep.classes = model.classes;
  const size_t nc = model.classes.size();
  rep.confusion.assign(nc, std::vector<int>(nc, 0));

  auto class_index = [&](const std::string& label) -> size_t {
    const auto it =
        std::lower_bound(model.classes.begin(), model.classes.end(), label);
    if (it == model.classes.end() || *it != label)
      throw std::invalid_argument("evaluate: label unknown to model: " + label);
    return (size_t)(it - model.classes.begin());
  };

  int correct = 0;
  for (size_t i = 0; i < features.size(); ++i) {
    const Prediction p = predict(model, features[i]);
    const size_t ti = class_index(labels[i]);
    const size_t pi = class_index(p.label);
    ++rep.confusion[ti][pi];
    if (ti == pi) ++correct;
  }
  rep.accuracy = features.empty() ? 0.0 : (double)correct / features.size();
  rep.per_class_accuracy.resize(nc, 0.0);
  for (size_t c = 0; c < nc; ++c) {
    int row = 0;
    for (size_t j = 0; j < nc; ++j) row += rep.confusion[c][j];
    rep.per_class_accuracy[c] = row ? (double)rep.confusion[c][c] / row : 0.0;
  }
  return rep;
}

void write_model(const std::filesystem::path& path, const LinearModel& model) {
  ByteWriter w;
  w.magic("TLMD");
  w.u32(1);
  w.u32((uint32_t)model.classes.size());
  w.u32((uint32_t)model.dim);
  for (size_t ci = 0; ci < model.classes.size(); ++ci) {
    const std::string& label = model.classes[ci];
    w.u32((uint32_t)label.size());
    w.bytes(label.data(), label.size());
    for (float v : model.weights[ci]) w.f32(v);
    w.f32(model.biases[ci]);
    w.f32(model.slopes[ci]);
    w.f32(model.intercepts[ci]);
  }
  atomic_write(path, w.str());
}

LinearModel read_model(const std::filesystem::path& path) {
  ByteReader r(read_file(path));
  r.expect_magic("TLMD", "model file");
  if (r.u32() != 1) throw std::runtime_error("model file: unknown version");
  LinearModel m;
  const uint32_t nc = r.u32();
  m.dim = r.u32();
  for (uint32_t ci = 0; ci < nc; ++ci) {
    const uint32_t len = r.u32();
    m.classes.push_back(r.bytes(len));
    std::vector<float> w(m.dim);
    for (auto& v : w) v = r.f32();
    m.weights.push_back(std::move(w));
    m.biases.push_back(r.f32());
    m.slopes.push_back(r.f32());
    m.intercepts.push_back(r.f32());
  }
  return m;
}

}  // namespace ltraj
