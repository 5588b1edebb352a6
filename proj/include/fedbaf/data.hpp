#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fedbaf/rng.hpp"
#include "fedbaf/schema.hpp"

namespace fedbaf {

struct Dataset {
  Eigen::MatrixXd features;  // N x D
  Eigen::VectorXi labels;    // N
  int num_classes = 0;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  Dataset subset(const std::vector<Eigen::Index>& idx) const;
};

/// Class means for a Gaussian mixture, one row per class.
Eigen::MatrixXd make_class_means(int num_classes, int dim, double scale, std::uint64_t seed);

Dataset gen_from_means(const Eigen::MatrixXd& means, int n_per_class, double spread,
                       std::uint64_t seed);

/// Isotropic Gaussian mixture with seeded random class means.
Dataset gen_gaussian_mixture(int num_classes, int dim, int n_per_class, double spread,
                             std::uint64_t seed);

/// CSV rows of D floats followed by an integer label.
Dataset load_csv(const std::string& path, int num_classes);

/// Labels replaced by a uniform random permutation of the original multiset.
Dataset corrupt_labels(const Dataset& data, std::uint64_t seed);

struct ClientShard {
  Dataset train;
  Dataset local_test;
  ClassMask mask;
};

struct Partition {
  std::vector<ClientShard> client_shards;
  Dataset global_test;
};

enum class PartitionMode { kIid, kNonIid };

Partition make_partition(const Dataset& train, const Dataset& test, int num_clients,
                         PartitionMode mode, double class_fraction, std::uint64_t seed);

struct AttackPlan {
  double zeta = 0.0;
  double lambda = 1.0;
  std::vector<int> malicious_ids;

  bool is_malicious(int client_id) const;
};

AttackPlan make_attack_plan(double zeta, double lambda, int num_clients, std::uint64_t seed);

/// JSON summary of a partition: client id -> n_k, mask, malicious flag.
std::string partition_summary_json(const Partition& partition, const AttackPlan& plan);

}  // namespace fedbaf
