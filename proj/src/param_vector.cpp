#include "fedbaf/param_vector.hpp"

#include <stdexcept>

namespace fedbaf {

ParamVector::ParamVector(std::shared_ptr<const ModelSchema> schema, Eigen::VectorXd values)
    : schema_(std::move(schema)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != schema_->total_params())
    throw std::invalid_argument("ParamVector: value length does not match schema");
}

ParamVector ParamVector::zeros(std::shared_ptr<const ModelSchema> schema) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(schema->total_params()));
  return ParamVector(std::move(schema), std::move(v));
}

Eigen::VectorBlock<const Eigen::VectorXd> ParamVector::layer(std::size_t i) const {
  auto off = static_cast<Eigen::Index>(schema_->layer_offset(i));
  auto len = static_cast<Eigen::Index>(schema_->layers[i].param_count());
  return values_.segment(off, len);
}

Eigen::VectorBlock<Eigen::VectorXd> ParamVector::layer(std::size_t i) {
  auto off = static_cast<Eigen::Index>(schema_->layer_offset(i));
  auto len = static_cast<Eigen::Index>(schema_->layers[i].param_count());
  return values_.segment(off, len);
}

Eigen::VectorBlock<const Eigen::VectorXd> ParamVector::layer(const std::string& name) const {
  int i = schema_->find_layer(name);
  if (i < 0) throw std::invalid_argument("ParamVector: no layer named " + name);
  return layer(static_cast<std::size_t>(i));
}

Eigen::VectorBlock<Eigen::VectorXd> ParamVector::layer(const std::string& name) {
  int i = schema_->find_layer(name);
  if (i < 0) throw std::invalid_argument("ParamVector: no layer named " + name);
  return layer(static_cast<std::size_t>(i));
}

bool ParamVector::all_finite() const { return values_.allFinite(); }

void require_same_layout(const ParamVector& a, const ParamVector& b) {
  if (!a.schema().same_layout(b.schema()))
    throw std::invalid_argument("ParamVector: schema layout mismatch");
}

ParamVector add(const ParamVector& a, const ParamVector& b) {
  require_same_layout(a, b);
  return ParamVector(a.schema_ptr(), a.values() + b.values());
}

ParamVector sub(const ParamVector& a, const ParamVector& b) {
  require_same_layout(a, b);
  return ParamVector(a.schema_ptr(), a.values() - b.values());
}

ParamVector scale(const ParamVector& a, double c) {
  return ParamVector(a.schema_ptr(), a.values() * c);
}

double norm2(const ParamVector& a) { return a.values().norm(); }

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_layout(a, b);
  return a.values().dot(b.values());
}

ParamVector normalize(const ParamVector& a, double eps) {
  double n = norm2(a);
  if (n < eps) return ParamVector::zeros(a.schema_ptr());
  return scale(a, 1.0 / n);
}

}  // namespace fedbaf
