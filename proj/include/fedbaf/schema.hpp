#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedbaf {

/// One named weight tensor in a model: shape plus the multiply-accumulate
/// cost of pushing a single sample through the layer.
struct LayerSpec {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::uint64_t macs_per_sample = 0;

  std::size_t param_count() const;
  bool same_shape(const LayerSpec& other) const;
};

/// Ordered layer table describing a flat parameter vector.
struct ModelSchema {
  std::vector<LayerSpec> layers;
  int num_classes = 0;
  int input_dim = 0;

  std::size_t total_params() const;
  std::uint64_t macs_per_sample() const;

  /// Index of the layer with the given name, or -1.
  int find_layer(const std::string& name) const;

  /// Offset of the first element of layer i in the flat vector.
  std::size_t layer_offset(std::size_t i) const;

  bool same_layout(const ModelSchema& other) const;
};

/// Layers present in both schemas with identical name and shape.
std::vector<std::string> compatible_layers(const ModelSchema& a, const ModelSchema& b);

/// Which class logits a client is allowed to produce.
struct ClassMask {
  std::vector<bool> present;

  static ClassMask all(int num_classes);
  bool allows(int label) const { return present[static_cast<std::size_t>(label)]; }
  int count_present() const;
};

}  // namespace fedbaf
