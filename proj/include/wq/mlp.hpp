#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wq/matrix.hpp"

namespace wq {

enum class Activation { Relu, Tanh, Logistic };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct EarlyStopping {
  double validation_fraction = 0.1;
  int patience = 10;
};

struct MLPConfig {
  std::vector<int> hidden_layers{64};
  Activation activation = Activation::Relu;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int max_epochs = 200;
  double l2_penalty = 1e-4;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  std::optional<EarlyStopping> early_stop;

  void validate() const;
};

struct DenseLayer {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::vector<double> weights;  // n_out x n_in, row-major
  std::vector<double> bias;     // n_out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Hidden layers use `activation`; the output unit is linear.
struct MLPModel {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::Relu;
  MLPConfig config;

  std::size_t n_inputs() const { return layers.empty() ? 0 : layers.front().n_in; }
  std::size_t parameter_count() const;
};

struct TrainingTrace {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;  // empty unless early stopping
};

struct MLPFit {
  MLPModel model;
  TrainingTrace trace;
};

// He-scaled normal weights, zero biases.
MLPModel init_mlp(std::size_t n_inputs, const MLPConfig& cfg);

// Mini-batch SGD on  mean squared error + l2/2 * sum ||W||^2  (biases unpenalized).
MLPFit fit_mlp(const Matrix& X, std::span<const double> y, const MLPConfig& cfg);

std::vector<double> predict_mlp(const MLPModel& model, const Matrix& X);
double predict_mlp_row(const MLPModel& model, std::span<const double> x);

// Flat parameter view: per layer, weights then bias.
std::vector<double> flatten_parameters(const MLPModel& model);
void assign_parameters(MLPModel& model, std::span<const double> flat);

// Loss over `rows` (all rows when empty); fills grad (flat layout) when non-null.
double mlp_loss(const MLPModel& model, const Matrix& X, std::span<const double> y,
                std::span<const std::size_t> rows, double l2_penalty, std::vector<double>* grad = nullptr);

// Row order for one epoch; depends only on (seed, epoch, n).
std::vector<std::size_t> epoch_permutation(std::uint64_t seed, int epoch, std::size_t n);

}  // namespace wq
