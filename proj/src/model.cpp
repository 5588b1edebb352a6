#include "fedbaf/model.hpp"

#include <cmath>
#include <stdexcept>

namespace fedbaf {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

bool is_mlp(const ModelSchema& schema) { return schema.find_layer("fc1.weight") >= 0; }

ConstRowMap weight_map(const ParamVector& model, const std::string& name, Eigen::Index rows,
                       Eigen::Index cols) {
  auto seg = model.layer(name);
  return ConstRowMap(seg.data(), rows, cols);
}

void check_input(const ParamVector& model, Eigen::Index dim) {
  if (dim != model.schema().input_dim)
    throw std::invalid_argument("model: feature dimension does not match schema input_dim");
  if (!model.all_finite()) throw std::invalid_argument("model: non-finite weights");
}

void apply_mask(Eigen::MatrixXd& logits, const ClassMask* mask) {
  if (!mask) return;
  for (Eigen::Index c = 0; c < logits.cols(); ++c)
    if (!mask->present[static_cast<std::size_t>(c)]) logits.col(c).setConstant(kMaskedLogit);
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace

std::shared_ptr<const ModelSchema> linear_schema(int input_dim, int num_classes) {
  auto schema = std::make_shared<ModelSchema>();
  schema->input_dim = input_dim;
  schema->num_classes = num_classes;
  auto C = static_cast<std::uint32_t>(num_classes);
  auto D = static_cast<std::uint32_t>(input_dim);
  schema->layers.push_back({"fc.weight", {C, D}, static_cast<std::uint64_t>(C) * D});
  schema->layers.push_back({"fc.bias", {C}, 0});
  return schema;
}

std::shared_ptr<const ModelSchema> mlp_schema(int input_dim, int hidden, int num_classes) {
  auto schema = std::make_shared<ModelSchema>();
  schema->input_dim = input_dim;
  schema->num_classes = num_classes;
  auto C = static_cast<std::uint32_t>(num_classes);
  auto D = static_cast<std::uint32_t>(input_dim);
  auto H = static_cast<std::uint32_t>(hidden);
  schema->layers.push_back({"fc1.weight", {H, D}, static_cast<std::uint64_t>(H) * D});
  schema->layers.push_back({"fc1.bias", {H}, 0});
  schema->layers.push_back({"fc2.weight", {C, H}, static_cast<std::uint64_t>(C) * H});
  schema->layers.push_back({"fc2.bias", {C}, 0});
  return schema;
}

ParamVector init_weights(std::shared_ptr<const ModelSchema> schema, RngStream& rng) {
  ParamVector w = ParamVector::zeros(schema);
  for (std::size_t i = 0; i < schema->layers.size(); ++i) {
    const auto& layer = schema->layers[i];
    if (layer.shape.size() < 2) continue;  // biases stay zero
    double fan_out = static_cast<double>(layer.shape[0]);
    double fan_in = static_cast<double>(layer.shape[1]);
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    auto seg = w.layer(i);
    for (Eigen::Index j = 0; j < seg.size(); ++j) seg[j] = rng.uniform(-a, a);
  }
  return w;
}

Eigen::MatrixXd forward_batch(const ParamVector& model, const Eigen::MatrixXd& X,
                              const ClassMask* mask) {
  check_input(model, X.cols());
  const auto& schema = model.schema();
  const Eigen::Index C = schema.num_classes;
  const Eigen::Index D = schema.input_dim;
  Eigen::MatrixXd logits;
  if (is_mlp(schema)) {
    const Eigen::Index H = static_cast<Eigen::Index>(schema.layers[0].shape[0]);
    auto W1 = weight_map(model, "fc1.weight", H, D);
    auto W2 = weight_map(model, "fc2.weight", C, H);
    Eigen::VectorXd b1 = model.layer("fc1.bias");
    Eigen::VectorXd b2 = model.layer("fc2.bias");
    Eigen::MatrixXd hidden = ((X * W1.transpose()).rowwise() + b1.transpose()).cwiseMax(0.0);
    logits = (hidden * W2.transpose()).rowwise() + b2.transpose();
  } else {
    auto W = weight_map(model, "fc.weight", C, D);
    Eigen::VectorXd b = model.layer("fc.bias");
    logits = (X * W.transpose()).rowwise() + b.transpose();
  }
  apply_mask(logits, mask);
  return logits;
}

Eigen::VectorXd forward(const ParamVector& model, const Eigen::VectorXd& x,
                        const ClassMask* mask) {
  return forward_batch(model, x.transpose(), mask).row(0);
}

LossGrad loss_and_grad(const ParamVector& model, const Eigen::MatrixXd& X,
                       const Eigen::VectorXi& y, const ClassMask* mask) {
  if (X.rows() == 0) throw std::invalid_argument("loss_and_grad: empty batch");
  check_input(model, X.cols());
  const auto& schema = model.schema();
  const Eigen::Index N = X.rows();
  const Eigen::Index C = schema.num_classes;
  const Eigen::Index D = schema.input_dim;
  for (Eigen::Index i = 0; i < N; ++i) {
    if (y[i] < 0 || y[i] >= C) throw std::invalid_argument("loss_and_grad: label out of range");
    if (mask && !mask->allows(y[i]))
      throw std::invalid_argument("loss_and_grad: label belongs to a masked class");
  }

  const bool mlp = is_mlp(schema);
  Eigen::MatrixXd hidden, pre_act;
  Eigen::MatrixXd logits;
  if (mlp) {
    const Eigen::Index H = static_cast<Eigen::Index>(schema.layers[0].shape[0]);
    auto W1 = weight_map(model, "fc1.weight", H, D);
    auto W2 = weight_map(model, "fc2.weight", C, H);
    Eigen::VectorXd b1 = model.layer("fc1.bias");
    Eigen::VectorXd b2 = model.layer("fc2.bias");
    pre_act = (X * W1.transpose()).rowwise() + b1.transpose();
    hidden = pre_act.cwiseMax(0.0);
    logits = (hidden * W2.transpose()).rowwise() + b2.transpose();
  } else {
    auto W = weight_map(model, "fc.weight", C, D);
    Eigen::VectorXd b = model.layer("fc.bias");
    logits = (X * W.transpose()).rowwise() + b.transpose();
  }
  apply_mask(logits, mask);

  Eigen::MatrixXd p = softmax_rows(logits);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < N; ++i)
    loss -= std::log(std::max(p(i, y[i]), 1e-300));
  loss /= static_cast<double>(N);

  Eigen::MatrixXd dlogits = p;
  for (Eigen::Index i = 0; i < N; ++i) dlogits(i, y[i]) -= 1.0;
  dlogits /= static_cast<double>(N);
  if (mask) {
    // Exact zeros for masked classes so masked output rows get zero gradient.
    for (Eigen::Index c = 0; c < C; ++c)
      if (!mask->present[static_cast<std::size_t>(c)]) dlogits.col(c).setZero();
  }

  LossGrad out;
  out.loss = loss;
  out.grad = ParamVector::zeros(model.schema_ptr());
  if (mlp) {
    const Eigen::Index H = static_cast<Eigen::Index>(schema.layers[0].shape[0]);
    auto W2 = weight_map(model, "fc2.weight", C, H);
    Eigen::MatrixXd dhidden = dlogits * W2;
    dhidden = (pre_act.array() > 0.0).select(dhidden, 0.0);
    {
      auto seg = out.grad.layer("fc1.weight");
      RowMap(seg.data(), H, D) = dhidden.transpose() * X;
    }
    out.grad.layer("fc1.bias") = dhidden.colwise().sum().transpose();
    {
      auto seg = out.grad.layer("fc2.weight");
      RowMap(seg.data(), C, H) = dlogits.transpose() * hidden;
    }
    out.grad.layer("fc2.bias") = dlogits.colwise().sum().transpose();
  } else {
    auto seg = out.grad.layer("fc.weight");
    RowMap(seg.data(), C, D) = dlogits.transpose() * X;
    out.grad.layer("fc.bias") = dlogits.colwise().sum().transpose();
  }
  return out;
}

double batch_loss(const ParamVector& model, const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                  const ClassMask* mask) {
  Eigen::MatrixXd logits = forward_batch(model, X, mask);
  Eigen::MatrixXd p = softmax_rows(logits);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    loss -= std::log(std::max(p(i, y[i]), 1e-300));
  return loss / static_cast<double>(X.rows());
}

ParamVector sgd_epoch(const ParamVector& model, const Dataset& data, double lr, int batch_size,
                      RngStream& rng, const ClassMask* mask, const ProxTerm* prox) {
  if (data.size() == 0) throw std::invalid_argument("sgd_epoch: empty dataset");
  if (lr < 0.0) throw std::invalid_argument("sgd_epoch: negative learning rate");
  if (batch_size < 1) throw std::invalid_argument("sgd_epoch: batch_size must be >= 1");
  if (prox && prox->anchor) require_same_layout(model, *prox->anchor);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);

  ParamVector w = model;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    Eigen::MatrixXd X(static_cast<Eigen::Index>(end - start), data.dim());
    Eigen::VectorXi y(static_cast<Eigen::Index>(end - start));
    for (std::size_t i = start; i < end; ++i) {
      X.row(static_cast<Eigen::Index>(i - start)) = data.features.row(order[i]);
      y[static_cast<Eigen::Index>(i - start)] = data.labels[order[i]];
    }
    LossGrad lg = loss_and_grad(w, X, y, mask);
    Eigen::VectorXd step = lg.grad.values();
    if (prox && prox->mu != 0.0) step += prox->mu * (w.values() - prox->anchor->values());
    w.values() -= lr * step;
  }
  if (!w.all_finite()) throw std::runtime_error("sgd_epoch: weights diverged to non-finite values");
  return w;
}

double evaluate(const ParamVector& model, const Dataset& test, const ClassMask* mask) {
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  Eigen::MatrixXd logits = forward_batch(model, test.features, mask);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    if (best == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace fedbaf
