#include <doctest.h>

#include <json.hpp>

TEST_CASE("experiment configs round-trip through serialization") {
  nlohmann::json cfg = {
      {"model", {{"name", "gwi"}, {"r", 2.0}, {"p", 0.5}}},
      {"u", {{"name", "geometric"}, {"q", 0.75}}},
      {"truncation", 200},
      {"times", {0.1, 1.0, 3.0}},
      {"tolerance", 1e-7},
      {"seed", 42},
  };
  auto text = cfg.dump(2);
  auto back = nlohmann::json::parse(text);
  CHECK(back == cfg);
  CHECK(back.dump(2) == text);
}
