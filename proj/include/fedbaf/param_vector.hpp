#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "fedbaf/schema.hpp"

namespace fedbaf {

/// Flat model weights segmented per layer in schema order. Value semantics:
/// every operation returns a new vector and leaves its inputs untouched.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::shared_ptr<const ModelSchema> schema, Eigen::VectorXd values);

  /// All-zero vector for the schema.
  static ParamVector zeros(std::shared_ptr<const ModelSchema> schema);

  const ModelSchema& schema() const { return *schema_; }
  std::shared_ptr<const ModelSchema> schema_ptr() const { return schema_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  Eigen::Index size() const { return values_.size(); }

  /// View of one layer's slice of the flat vector.
  Eigen::VectorBlock<const Eigen::VectorXd> layer(std::size_t i) const;
  Eigen::VectorBlock<Eigen::VectorXd> layer(std::size_t i);
  Eigen::VectorBlock<const Eigen::VectorXd> layer(const std::string& name) const;
  Eigen::VectorBlock<Eigen::VectorXd> layer(const std::string& name);

  bool all_finite() const;

 private:
  std::shared_ptr<const ModelSchema> schema_;
  Eigen::VectorXd values_;
};

// Vector algebra. Binary ops require matching schema layouts.
ParamVector add(const ParamVector& a, const ParamVector& b);
ParamVector sub(const ParamVector& a, const ParamVector& b);
ParamVector scale(const ParamVector& a, double c);
double norm2(const ParamVector& a);
double dot(const ParamVector& a, const ParamVector& b);

/// v / ||v||, or the zero vector when ||v|| < eps.
ParamVector normalize(const ParamVector& a, double eps = 1e-12);

void require_same_layout(const ParamVector& a, const ParamVector& b);

}  // namespace fedbaf
