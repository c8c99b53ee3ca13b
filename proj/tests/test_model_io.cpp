#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "htexp/errors.hpp"
#include "htexp/model_io.hpp"

using namespace htexp;

namespace {

std::string data_file(const char* name) {
  return std::string(HTEXP_DATA_DIR) + "/" + name;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
  void write(const std::string& text) const {
    std::ofstream out(path, std::ios::binary);
    out << text;
  }
};

}  // namespace

TEST_CASE("gaussian model round-trips exactly through json") {
  const auto model = testutil::reference_pair();
  const TempFile tmp("io_roundtrip.json");
  save_gaussian_model(model, tmp.path);

  const auto loaded = load_gaussian_model(tmp.path);
  CHECK(loaded.sensor_dim() == model.sensor_dim());
  CHECK(loaded.detector_dim() == model.detector_dim());
  // doubles are serialized with shortest round-trip representation
  CHECK((loaded.K() - model.K()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.Kbar() - model.Kbar()).cwiseAbs().maxCoeff() == 0.0);

  // a second serialization is byte-identical
  CHECK(gaussian_model_to_json(loaded) == gaussian_model_to_json(model));
}

TEST_CASE("gaussian loader reports parse failures with context") {
  const TempFile tmp("io_bad.json");

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_gaussian_model("definitely_not_here.json"), ParseError);
  }
  SUBCASE("syntax error") {
    tmp.write("{ this is not json");
    CHECK_THROWS_AS(load_gaussian_model(tmp.path), ParseError);
  }
  SUBCASE("missing field") {
    tmp.write(R"({"m": 1, "q": 1, "K": [1.0, 0.0, 0.0, 1.0]})");
    CHECK_THROWS_WITH_AS(load_gaussian_model(tmp.path),
                         doctest::Contains("Kbar"), ParseError);
  }
  SUBCASE("wrong entry count") {
    tmp.write(R"({"m": 1, "q": 1, "K": [1.0, 0.0, 0.0], "Kbar": [1, 0, 0, 1]})");
    CHECK_THROWS_WITH_AS(load_gaussian_model(tmp.path),
                         doctest::Contains("expected 4"), ParseError);
  }
  SUBCASE("non-positive dimensions") {
    tmp.write(R"({"m": 0, "q": 1, "K": [1.0], "Kbar": [1.0]})");
    CHECK_THROWS_AS(load_gaussian_model(tmp.path), ParseError);
  }
  SUBCASE("wrong field type") {
    tmp.write(R"({"m": "one", "q": 1, "K": [1, 0, 0, 1], "Kbar": [1, 0, 0, 1]})");
    CHECK_THROWS_AS(load_gaussian_model(tmp.path), ParseError);
  }
}

TEST_CASE("invalid matrices surface the model validation error") {
  const TempFile tmp("io_notpsd.json");
  tmp.write(R"({"m": 1, "q": 1, "K": [1.0, 2.0, 2.0, 1.0], "Kbar": [1, 0, 0, 1]})");
  CHECK_THROWS_AS(load_gaussian_model(tmp.path), InvalidInput);
}

TEST_CASE("discrete model fixture loads") {
  const auto m = load_discrete_model(data_file("discrete_copy.json"));
  CHECK(m.p(0, 0, 0) == doctest::Approx(0.5));
  CHECK(m.p(0, 0, 1) == doctest::Approx(0.0));
  CHECK(m.pbar(0, 0, 0) == doctest::Approx(0.25));
}

TEST_CASE("discrete loader validates the alphabet triple") {
  const TempFile tmp("io_discrete_bad.json");
  tmp.write(R"({"alphabet": [2, 1], "P": [0.5, 0.0, 0.0, 0.5],
               "Pbar_factors": {"PU": [1.0], "PX_given_U": [0.5, 0.5],
                                "PV_given_U": [0.5, 0.5]}})");
  CHECK_THROWS_AS(load_discrete_model(tmp.path), ParseError);
}
