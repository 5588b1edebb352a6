#include "fedbaf/schema.hpp"

#include <numeric>
#include <stdexcept>

namespace fedbaf {

std::size_t LayerSpec::param_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

bool LayerSpec::same_shape(const LayerSpec& other) const {
  return shape == other.shape;
}

std::size_t ModelSchema::total_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

std::uint64_t ModelSchema::macs_per_sample() const {
  std::uint64_t n = 0;
  for (const auto& l : layers) n += l.macs_per_sample;
  return n;
}

int ModelSchema::find_layer(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return static_cast<int>(i);
  return -1;
}

std::size_t ModelSchema::layer_offset(std::size_t i) const {
  std::size_t off = 0;
  for (std::size_t j = 0; j < i; ++j) off += layers[j].param_count();
  return off;
}

bool ModelSchema::same_layout(const ModelSchema& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name != other.layers[i].name) return false;
    if (!layers[i].same_shape(other.layers[i])) return false;
  }
  return true;
}

std::vector<std::string> compatible_layers(const ModelSchema& a, const ModelSchema& b) {
  std::vector<std::string> out;
  for (const auto& la : a.layers) {
    int j = b.find_layer(la.name);
    if (j >= 0 && la.same_shape(b.layers[static_cast<std::size_t>(j)]))
      out.push_back(la.name);
  }
  return out;
}

ClassMask ClassMask::all(int num_classes) {
  ClassMask m;
  m.present.assign(static_cast<std::size_t>(num_classes), true);
  return m;
}

int ClassMask::count_present() const {
  int n = 0;
  for (bool b : present) n += b ? 1 : 0;
  return n;
}

}  // namespace fedbaf
