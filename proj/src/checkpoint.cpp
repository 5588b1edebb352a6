#include "fedbaf/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace fedbaf {
namespace {

constexpr char kMagic[4] = {'F', 'B', 'A', 'F'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<unsigned char>& buf, std::uint16_t v) {
  buf.push_back(static_cast<unsigned char>(v & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<unsigned char>& buf, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(buf, bits);
}

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(u(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(u(4)); }
  std::uint64_t u64() { return u(8); }

  double f64() {
    std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }

  std::string str(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  std::uint64_t u(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  void need(std::size_t k) {
    if (pos_ + k > n_) throw std::runtime_error("checkpoint: truncated file");
  }

  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamVector& model) {
  const ModelSchema& schema = model.schema();

  std::vector<unsigned char> payload;
  put_u32(payload, static_cast<std::uint32_t>(schema.layers.size()));
  for (const auto& layer : schema.layers) {
    put_u32(payload, static_cast<std::uint32_t>(layer.name.size()));
    payload.insert(payload.end(), layer.name.begin(), layer.name.end());
    put_u32(payload, static_cast<std::uint32_t>(layer.shape.size()));
    for (auto d : layer.shape) put_u32(payload, d);
    put_u64(payload, layer.macs_per_sample);
  }
  put_u32(payload, static_cast<std::uint32_t>(schema.num_classes));
  put_u32(payload, static_cast<std::uint32_t>(schema.input_dim));
  for (Eigen::Index i = 0; i < model.size(); ++i) put_f64(payload, model.values()[i]);

  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, payload.data(), static_cast<uInt>(payload.size())));

  std::vector<unsigned char> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32(out, crc);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

ParamVector load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (data.size() < 10) throw std::runtime_error("checkpoint: file too small: " + path);
  if (std::memcmp(data.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic bytes: " + path);

  Reader header(data.data() + 4, data.size() - 4);
  std::uint16_t version = header.u16();
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported format version");

  std::size_t payload_len = data.size() - 4 - 2 - 4;
  const unsigned char* payload = data.data() + 6;
  std::uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i)
    stored_crc |= static_cast<std::uint32_t>(data[data.size() - 4 + static_cast<std::size_t>(i)]) << (8 * i);
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, payload, static_cast<uInt>(payload_len)));
  if (crc != stored_crc) throw std::runtime_error("checkpoint: CRC mismatch: " + path);

  Reader r(payload, payload_len);
  auto schema = std::make_shared<ModelSchema>();
  std::uint32_t num_layers = r.u32();
  for (std::uint32_t i = 0; i < num_layers; ++i) {
    LayerSpec layer;
    std::uint32_t name_len = r.u32();
    layer.name = r.str(name_len);
    std::uint32_t rank = r.u32();
    for (std::uint32_t d = 0; d < rank; ++d) layer.shape.push_back(r.u32());
    layer.macs_per_sample = r.u64();
    schema->layers.push_back(std::move(layer));
  }
  schema->num_classes = static_cast<int>(r.u32());
  schema->input_dim = static_cast<int>(r.u32());

  std::size_t n = schema->total_params();
  Eigen::VectorXd values(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) values[static_cast<Eigen::Index>(i)] = r.f64();
  if (r.remaining() != 0) throw std::runtime_error("checkpoint: trailing bytes: " + path);
  return ParamVector(std::move(schema), std::move(values));
}

}  // namespace fedbaf
