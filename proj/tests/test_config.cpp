#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "fedbaf/config.hpp"

using namespace fedbaf;

TEST_CASE("defaults are valid without any input") {
  ExperimentConfig c = parse_config("");
  CHECK(c.data.num_classes == 10);
  CHECK(c.partition.num_clients == 10);
  CHECK(c.run.master_seed == 42);
  CHECK_NOTHROW(validate_config(c));
}

TEST_CASE("parse reads sections, comments, and whitespace") {
  ExperimentConfig c = parse_config(
      "# a comment\n"
      "[data]\n"
      "num_classes = 4\n"
      "spread = 1.5   # trailing comment\n"
      "\n"
      "[strategy]\n"
      "foundation = fedbaf\n"
      "psi = 0.25\n"
      "static_alpha = true\n");
  CHECK(c.data.num_classes == 4);
  CHECK(c.data.spread == 1.5);
  CHECK(c.strategy.foundation == "fedbaf");
  CHECK(c.strategy.psi == 0.25);
  CHECK(c.strategy.static_alpha);
}

TEST_CASE("serialize then parse is the identity") {
  ExperimentConfig c = parse_config(
      "[data]\nnum_classes = 6\ndim = 13\nspread = 0.875\n"
      "[partition]\nmode = noniid\nclass_fraction = 0.3\nnum_clients = 12\n"
      "[model]\nkind = linear\n"
      "[training]\nrounds = 17\nlr = 0.125\nparticipation = 0.4\n"
      "[strategy]\nalgorithm = fedprox\nmu = 0.01\nfoundation = weight_init\n"
      "foundation_checkpoint = /tmp/x.fbaf\n"
      "[attack]\nzeta = 0.5\nlambda = 5\n"
      "[run]\nmaster_seed = 1729\nchi_diagnostic = true\n");
  ExperimentConfig back = parse_config(serialize_config(c));
  CHECK(back == c);
}

TEST_CASE("malformed lines report the line number") {
  CHECK_THROWS_WITH_AS(parse_config("[data]\nnum_classes\n"), doctest::Contains("line 2"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config("key = 1\n"), ConfigError);
}

TEST_CASE("type errors are caught") {
  CHECK_THROWS_AS(parse_config("[data]\nnum_classes = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\ndebug_alpha = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[training]\nrounds = 2.5\n"), ConfigError);
}

TEST_CASE("validation rejects out-of-range settings") {
  ExperimentConfig c = parse_config("[training]\nparticipation = 1.5\n");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = parse_config("[attack]\nzeta = 0.5\nlambda = 0.2\n");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = parse_config("[strategy]\nfoundation = fedbaf\npsi = 0\n");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = parse_config("[strategy]\nfoundation = frobnicate\n");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("missing foundation checkpoint is a config error unless waived") {
  ExperimentConfig c = parse_config(
      "[strategy]\nfoundation = fedbaf\npsi = 0.1\n"
      "foundation_checkpoint = /nonexistent/f.fbaf\n");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  CHECK_NOTHROW(validate_config(c, /*require_checkpoint=*/false));
}

TEST_CASE("csv mode requires existing files") {
  ExperimentConfig c = parse_config("[data]\nkind = csv\ncsv_train = /nope.csv\ncsv_test = /nope.csv\n");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
}
