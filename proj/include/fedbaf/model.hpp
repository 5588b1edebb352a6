#pragma once

#include <memory>
#include <optional>

#include "fedbaf/data.hpp"
#include "fedbaf/param_vector.hpp"
#include "fedbaf/rng.hpp"

namespace fedbaf {

/// Logit value assigned to masked classes: large enough negative that the
/// softmax mass of the class underflows to ~0.
constexpr double kMaskedLogit = -1e9;

/// Softmax-classifier schema with no hidden layer: fc.weight (C x D) + fc.bias.
std::shared_ptr<const ModelSchema> linear_schema(int input_dim, int num_classes);

/// One-hidden-layer ReLU MLP: fc1.weight/fc1.bias, fc2.weight/fc2.bias.
std::shared_ptr<const ModelSchema> mlp_schema(int input_dim, int hidden, int num_classes);

/// Weight layers ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases zero.
ParamVector init_weights(std::shared_ptr<const ModelSchema> schema, RngStream& rng);

/// Logits for one sample. Masked classes get kMaskedLogit.
Eigen::VectorXd forward(const ParamVector& model, const Eigen::VectorXd& x,
                        const ClassMask* mask = nullptr);

/// Logits for a batch, one row per sample.
Eigen::MatrixXd forward_batch(const ParamVector& model, const Eigen::MatrixXd& X,
                              const ClassMask* mask = nullptr);

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean softmax cross-entropy over the batch plus its gradient. Gradients of
/// masked-class output rows are identically zero.
LossGrad loss_and_grad(const ParamVector& model, const Eigen::MatrixXd& X,
                       const Eigen::VectorXi& y, const ClassMask* mask = nullptr);

/// Batch loss only (no gradient), used by oracles and convergence checks.
double batch_loss(const ParamVector& model, const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                  const ClassMask* mask = nullptr);

struct ProxTerm {
  double mu = 0.0;
  const ParamVector* anchor = nullptr;
};

/// One full pass of mini-batch SGD over the shuffled dataset. Returns an
/// updated copy; the input model is unmodified. With a prox term active each
/// step is w <- w - lr * (g + mu * (w - anchor)).
ParamVector sgd_epoch(const ParamVector& model, const Dataset& data, double lr, int batch_size,
                      RngStream& rng, const ClassMask* mask = nullptr,
                      const ProxTerm* prox = nullptr);

/// Fraction of samples whose argmax logit equals the label; ties broken by
/// lowest class index.
double evaluate(const ParamVector& model, const Dataset& test, const ClassMask* mask = nullptr);

}  // namespace fedbaf
