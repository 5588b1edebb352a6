#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "fedbaf/checkpoint.hpp"
#include "fedbaf/model.hpp"
#include "fedbaf/rng.hpp"

using namespace fedbaf;
namespace fs = std::filesystem;

namespace {

ParamVector random_model() {
  auto schema = mlp_schema(7, 5, 3);
  RngStream rng(99);
  return init_weights(schema, rng);
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(f), {});
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("ckpt_test_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("round trip preserves schema and weights exactly") {
  TempDir tmp;
  ParamVector w = random_model();
  auto file = (tmp.path / "m.fbaf").string();
  save_checkpoint(file, w);
  ParamVector r = load_checkpoint(file);
  CHECK(r.schema().same_layout(w.schema()));
  CHECK(r.schema().num_classes == 3);
  CHECK(r.schema().input_dim == 7);
  CHECK(r.values() == w.values());
  for (std::size_t i = 0; i < w.schema().layers.size(); ++i)
    CHECK(r.schema().layers[i].macs_per_sample == w.schema().layers[i].macs_per_sample);
}

TEST_CASE("saving twice is byte-identical") {
  TempDir tmp;
  ParamVector w = random_model();
  auto a = (tmp.path / "a.fbaf").string();
  auto b = (tmp.path / "b.fbaf").string();
  save_checkpoint(a, w);
  save_checkpoint(b, w);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("file starts with the FBAF magic") {
  TempDir tmp;
  auto file = (tmp.path / "m.fbaf").string();
  save_checkpoint(file, random_model());
  auto bytes = slurp(file);
  REQUIRE(bytes.size() > 4);
  CHECK(bytes[0] == 'F');
  CHECK(bytes[1] == 'B');
  CHECK(bytes[2] == 'A');
  CHECK(bytes[3] == 'F');
}

TEST_CASE("payload corruption is caught by the CRC") {
  TempDir tmp;
  auto file = (tmp.path / "m.fbaf").string();
  save_checkpoint(file, random_model());
  auto bytes = slurp(file);
  bytes[bytes.size() / 2] ^= 0x40;
  {
    std::ofstream f(file, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(file), doctest::Contains("CRC"), std::runtime_error);
}

TEST_CASE("bad magic and truncation are rejected") {
  TempDir tmp;
  auto file = (tmp.path / "m.fbaf").string();
  save_checkpoint(file, random_model());
  auto bytes = slurp(file);

  auto corrupted = bytes;
  corrupted[0] = 'X';
  auto badmagic = (tmp.path / "bad.fbaf").string();
  {
    std::ofstream f(badmagic, std::ios::binary);
    f.write(corrupted.data(), static_cast<std::streamsize>(corrupted.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(badmagic), std::runtime_error);

  auto trunc = (tmp.path / "trunc.fbaf").string();
  {
    std::ofstream f(trunc, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 3));
  }
  CHECK_THROWS_AS(load_checkpoint(trunc), std::runtime_error);
}

TEST_CASE("missing file raises") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/nope.fbaf"), std::runtime_error);
}
