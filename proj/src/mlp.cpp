#include "wq/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wq/error.hpp"
#include "wq/random.hpp"

namespace wq {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Logistic: return "logistic";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "logistic" || name == "sigmoid") return Activation::Logistic;
  throw ConfigError("unknown activation '" + name + "' (relu, tanh, logistic)");
}

void MLPConfig::validate() const {
  for (int w : hidden_layers)
    if (w < 1) throw ConfigError("hidden layer widths must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(l2_penalty >= 0.0)) throw ConfigError("l2_penalty must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (early_stop) {
    if (!(early_stop->validation_fraction > 0.0 && early_stop->validation_fraction < 1.0))
      throw ConfigError("validation_fraction must be in (0, 1)");
    if (early_stop->patience < 1) throw ConfigError("patience must be >= 1");
  }
}

std::size_t MLPModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

MLPModel init_mlp(std::size_t n_inputs, const MLPConfig& cfg) {
  cfg.validate();
  MLPModel m;
  m.activation = cfg.activation;
  m.config = cfg;
  Rng rng(derive_seed(cfg.seed, "mlp-init"));
  std::size_t in = n_inputs;
  auto add = [&](std::size_t out) {
    DenseLayer l;
    l.n_in = in;
    l.n_out = out;
    l.weights.resize(in * out);
    l.bias.assign(out, 0.0);
    const double scale = std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(in, 1)));
    for (auto& w : l.weights) w = rng.normal() * scale;
    m.layers.push_back(std::move(l));
    in = out;
  };
  for (int w : cfg.hidden_layers) add(static_cast<std::size_t>(w));
  add(1);
  return m;
}

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
    case Activation::Logistic: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

// Derivative expressed through the pre-activation z and output a.
double activate_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - a * a;
    case Activation::Logistic: return a * (1.0 - a);
  }
  return 1.0;
}

// Forward pass keeping pre-activations and outputs per layer.
void forward(const MLPModel& m, std::span<const double> x, std::vector<std::vector<double>>& z,
             std::vector<std::vector<double>>& a) {
  const std::size_t L = m.layers.size();
  z.resize(L);
  a.resize(L + 1);
  a[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = m.layers[l];
    z[l].assign(layer.n_out, 0.0);
    a[l + 1].assign(layer.n_out, 0.0);
    for (std::size_t o = 0; o < layer.n_out; ++o) {
      double s = layer.bias[o];
      const double* w = layer.weights.data() + o * layer.n_in;
      for (std::size_t i = 0; i < layer.n_in; ++i) s += w[i] * a[l][i];
      z[l][o] = s;
      a[l + 1][o] = l + 1 == L ? s : activate(m.activation, s);
    }
  }
}

}  // namespace

double predict_mlp_row(const MLPModel& model, std::span<const double> x) {
  std::vector<double> cur(x.begin(), x.end()), next;
  const std::size_t L = model.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = model.layers[l];
    next.assign(layer.n_out, 0.0);
    for (std::size_t o = 0; o < layer.n_out; ++o) {
      double s = layer.bias[o];
      const double* w = layer.weights.data() + o * layer.n_in;
      for (std::size_t i = 0; i < layer.n_in; ++i) s += w[i] * cur[i];
      next[o] = l + 1 == L ? s : activate(model.activation, s);
    }
    cur.swap(next);
  }
  return cur.at(0);
}

std::vector<double> predict_mlp(const MLPModel& model, const Matrix& X) {
  if (X.cols() != model.n_inputs())
    throw ModelError("MLP expects " + std::to_string(model.n_inputs()) + " inputs, got " + std::to_string(X.cols()));
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_mlp_row(model, X.row(i));
  return out;
}

std::vector<double> flatten_parameters(const MLPModel& model) {
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (const auto& l : model.layers) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void assign_parameters(MLPModel& model, std::span<const double> flat) {
  if (flat.size() != model.parameter_count()) throw ModelError("parameter vector has the wrong length");
  std::size_t k = 0;
  for (auto& l : model.layers) {
    for (auto& w : l.weights) w = flat[k++];
    for (auto& b : l.bias) b = flat[k++];
  }
}

double mlp_loss(const MLPModel& model, const Matrix& X, std::span<const double> y,
                std::span<const std::size_t> rows, double l2_penalty, std::vector<double>* grad) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(X.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  const std::size_t L = model.layers.size();
  const double inv_b = 1.0 / static_cast<double>(rows.size());

  // Gradient buffers laid out like flatten_parameters.
  std::vector<std::size_t> offset(L);
  std::size_t total = 0;
  for (std::size_t l = 0; l < L; ++l) {
    offset[l] = total;
    total += model.layers[l].weights.size() + model.layers[l].bias.size();
  }
  if (grad) grad->assign(total, 0.0);

  std::vector<std::vector<double>> z, a;
  std::vector<double> delta, prev_delta;
  double sse = 0.0;
  for (auto r : rows) {
    forward(model, X.row(r), z, a);
    const double e = a[L][0] - y[r];
    sse += e * e;
    if (!grad) continue;
    delta.assign(1, 2.0 * e * inv_b);
    for (std::size_t l = L; l-- > 0;) {
      const auto& layer = model.layers[l];
      double* gw = grad->data() + offset[l];
      double* gb = gw + layer.weights.size();
      for (std::size_t o = 0; o < layer.n_out; ++o) {
        gb[o] += delta[o];
        for (std::size_t i = 0; i < layer.n_in; ++i) gw[o * layer.n_in + i] += delta[o] * a[l][i];
      }
      if (l == 0) break;
      prev_delta.assign(layer.n_in, 0.0);
      for (std::size_t o = 0; o < layer.n_out; ++o) {
        const double* w = layer.weights.data() + o * layer.n_in;
        for (std::size_t i = 0; i < layer.n_in; ++i) prev_delta[i] += w[i] * delta[o];
      }
      for (std::size_t i = 0; i < layer.n_in; ++i)
        prev_delta[i] *= activate_grad(model.activation, z[l - 1][i], a[l][i]);
      delta.swap(prev_delta);
    }
  }
  double penalty = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = model.layers[l];
    for (std::size_t k = 0; k < layer.weights.size(); ++k) {
      penalty += layer.weights[k] * layer.weights[k];
      if (grad) (*grad)[offset[l] + k] += l2_penalty * layer.weights[k];
    }
  }
  return sse * inv_b + 0.5 * l2_penalty * penalty;
}

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, int epoch, std::size_t n) {
  Rng rng(derive_seed(derive_seed(seed, "mlp-shuffle"), static_cast<std::uint64_t>(epoch)));
  return rng.permutation(n);
}

MLPFit fit_mlp(const Matrix& X, std::span<const double> y, const MLPConfig& cfg) {
  cfg.validate();
  const std::size_t n = X.rows();
  if (n == 0) throw ModelError("MLP: zero training rows");
  if (y.size() != n) throw ModelError("MLP: X and y row counts differ");
  for (double v : X.data())
    if (!std::isfinite(v)) throw ModelError("MLP: non-finite value in X");

  MLPFit fit;
  fit.model = init_mlp(X.cols(), cfg);

  std::vector<std::size_t> train_rows(n), val_rows;
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  if (cfg.early_stop) {
    Rng rng(derive_seed(cfg.seed, "mlp-validation"));
    auto perm = rng.permutation(n);
    const auto n_val = static_cast<std::size_t>(std::ceil(cfg.early_stop->validation_fraction * static_cast<double>(n)));
    if (n_val == 0 || n_val >= n) throw ModelError("MLP: validation split leaves no training or validation rows");
    val_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(val_rows.begin(), val_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
  }

  std::vector<double> params = flatten_parameters(fit.model);
  std::vector<double> velocity(params.size(), 0.0), grad;
  std::vector<double> best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto perm = epoch_permutation(cfg.seed, epoch, train_rows.size());
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < perm.size(); start += batch) {
      rows.clear();
      for (std::size_t k = start; k < std::min(perm.size(), start + batch); ++k) rows.push_back(train_rows[perm[k]]);
      mlp_loss(fit.model, X, y, rows, cfg.l2_penalty, &grad);
      for (std::size_t k = 0; k < params.size(); ++k) {
        velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * grad[k];
        params[k] += velocity[k];
      }
      assign_parameters(fit.model, params);
    }
    const double loss = mlp_loss(fit.model, X, y, train_rows, cfg.l2_penalty);
    if (!std::isfinite(loss))
      throw ModelError("MLP training diverged at epoch " + std::to_string(epoch + 1) +
                       "; try a smaller learning_rate");
    fit.trace.train_loss.push_back(loss);
    if (cfg.early_stop) {
      const double val = mlp_loss(fit.model, X, y, val_rows, 0.0);
      fit.trace.validation_loss.push_back(val);
      if (val < best_val) {
        best_val = val;
        best_params = params;
        since_best = 0;
      } else if (++since_best >= cfg.early_stop->patience) {
        break;
      }
    }
  }
  if (cfg.early_stop) assign_parameters(fit.model, best_params);
  return fit;
}

}  // namespace wq
