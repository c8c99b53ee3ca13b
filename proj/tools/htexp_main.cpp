// Command-line front end: condition checks, exponent-rate sweeps, paired-model
// construction, and the discrete cross-validation oracles.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "htexp/condition.hpp"
#include "htexp/discrete.hpp"
#include "htexp/errors.hpp"
#include "htexp/exponent.hpp"
#include "htexp/han.hpp"
#include "htexp/model_io.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Empty path means stdout.
void write_text(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw htexp::ParseError(path + ": cannot open file for writing");
  out << content;
  if (!out) throw htexp::ParseError(path + ": write failed");
}

std::vector<double> parse_rate_grid(const std::string& s) {
  double start = 0, stop = 0, step = 0;
  int consumed = -1;
  if (std::sscanf(s.c_str(), "%lf:%lf:%lf%n", &start, &stop, &step, &consumed) != 3 ||
      consumed != static_cast<int>(s.size())) {
    throw htexp::InvalidInput("--rates must look like start:stop:step");
  }
  if (!(step > 0.0) || stop < start || start < 0.0) {
    throw htexp::InvalidInput("--rates requires 0 <= start <= stop and step > 0");
  }
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double v = start + k * step;
    if (v > stop + 1e-12) break;
    grid.push_back(std::min(v, stop));
    if (grid.size() > 100000) throw htexp::InvalidInput("--rates grid has too many points");
  }
  return grid;
}

double to_bits(double rate, const std::string& units) {
  return units == "nats" ? rate / std::numbers::ln2 : rate;
}

int run_check(const std::string& model_path, const std::string& out_path, std::uint64_t seed) {
  const auto model = htexp::load_gaussian_model(model_path);

  std::optional<htexp::ScalarConditionResult> scalar;
  if (model.sensor_dim() == 1 && model.detector_dim() == 2) {
    scalar = htexp::check_condition_scalar(model);
  }
  const auto general = htexp::minimize_condition_c(model, seed);

  std::string verdict;
  if (general.conclusive) {
    verdict = general.holds ? "HOLDS" : "VIOLATED";
  } else if (scalar) {
    verdict = scalar->holds ? "HOLDS" : "VIOLATED";
  } else {
    verdict = "INCONCLUSIVE";
  }

  std::ostringstream text;
  text << "condition C: " << verdict << "\n";
  if (scalar) {
    text << "scalar check: " << (scalar->holds ? "HOLDS" : "VIOLATED")
         << " (r_i = " << fmt9(scalar->r_i) << ", r_ii = " << fmt9(scalar->r_ii)
         << ", r_iii = " << fmt9(scalar->r_iii) << ")\n";
  }
  text << "general check: "
       << (general.conclusive ? (general.holds ? "HOLDS" : "VIOLATED") : "INCONCLUSIVE")
       << " (gap = " << fmt9(general.gap)
       << ", argmin distance = " << fmt9(general.argmin_distance)
       << ", iterations = " << general.optimizer.iterations
       << ", status = " << htexp::to_string(general.optimizer.status) << ")\n";
  std::cout << text.str();

  if (!out_path.empty()) {
    ordered_json j;
    j["condition_c"] = verdict;
    j["holds"] = verdict == "HOLDS";
    if (scalar) {
      j["scalar"] = ordered_json{{"holds", scalar->holds},
                                 {"r_i", scalar->r_i},
                                 {"r_ii", scalar->r_ii},
                                 {"r_iii", scalar->r_iii}};
    }
    j["general"] = ordered_json{{"holds", general.holds},
                                {"conclusive", general.conclusive},
                                {"gap", general.gap},
                                {"argmin_distance", general.argmin_distance},
                                {"objective_at_min", general.objective_at_min},
                                {"objective_at_KXY", general.objective_at_KXY},
                                {"iterations", general.optimizer.iterations},
                                {"status", htexp::to_string(general.optimizer.status)}};
    write_text(out_path, j.dump(2) + "\n");
  }

  if (verdict == "HOLDS") return 0;
  if (verdict == "VIOLATED") return 2;
  return 5;
}

int run_sweep(const std::string& model_path, const std::string& rates_spec,
              const std::string& units, bool include_han, bool unverified,
              const std::string& out_path, std::uint64_t seed) {
  const auto model = htexp::load_gaussian_model(model_path);
  std::vector<double> grid_bits = parse_rate_grid(rates_spec);
  for (double& r : grid_bits) r = to_bits(r, units);

  const auto curve = htexp::sweep_curve(model, grid_bits, unverified, seed);

  std::vector<double> han;
  if (include_han) {
    han.reserve(grid_bits.size());
    for (double r : grid_bits) {
      han.push_back(htexp::han_exponent_gaussian(model, r).value.value);
    }
  }

  std::string csv = "R_bits,E_total_nats,div_Y,div_XgivenU,maxmin,han\n";
  for (std::size_t i = 0; i < curve.samples.size(); ++i) {
    const auto& s = curve.samples[i];
    csv += fmt9(s.rate_bits);
    csv += ',';
    csv += fmt9(s.breakdown.total.value);
    csv += ',';
    csv += fmt9(s.breakdown.divergence_Y.value);
    csv += ',';
    csv += fmt9(s.breakdown.divergence_XgivenU.value);
    csv += ',';
    csv += fmt9(s.breakdown.maxmin_value.value);
    csv += ',';
    if (include_han) csv += fmt9(han[i]);
    csv += '\n';
  }
  write_text(out_path, csv);
  return 0;
}

int run_example(double a12, double abar13, double abar23, const std::string& out_path) {
  const auto model = htexp::build_example_pair(a12, abar13, abar23);
  write_text(out_path, htexp::gaussian_model_to_json(model));
  return 0;
}

int run_discrete(const std::string& model_path, double rate, const std::string& units,
                 const std::vector<std::string>& oracles, const std::string& out_path) {
  const auto model = htexp::load_discrete_model(model_path);
  const double rate_bits = to_bits(rate, units);
  if (rate_bits < 0.0) throw htexp::InvalidInput("rate must be nonnegative");
  const double rate_nats = rate_bits * std::numbers::ln2;

  std::set<std::string> want(oracles.begin(), oracles.end());
  if (want.empty()) want = {"single", "multi1", "multi2", "sha"};

  ordered_json j;
  j["rate_bits"] = rate_bits;
  j["rate_nats"] = rate_nats;
  if (want.count("single")) {
    const auto r = htexp::lemma1_single_letter(model, rate_nats);
    j["single"] = ordered_json{{"value_nats", r.value.value},
                               {"divergence_xu", r.divergence_xu.value},
                               {"divergence_v_given_u", r.divergence_v_given_u.value},
                               {"channel_term", r.channel_term.value},
                               {"hypothesis_verified", r.hypothesis_verified}};
  }
  if (want.count("multi1")) {
    j["multi1"] = ordered_json{
        {"value_nats", htexp::multiletter_exponent(model, rate_nats, 1).value}};
  }
  if (want.count("multi2")) {
    j["multi2"] = ordered_json{
        {"value_nats", htexp::multiletter_exponent(model, rate_nats, 2).value}};
  }
  if (want.count("sha")) {
    const int ns = model.nx() + 2;
    const auto channel = htexp::TestChannel::identity(model.nx(), ns);
    j["sha"] = ordered_json{
        {"value_nats", htexp::sha_weakened_bound(model, channel, rate_nats).value},
        {"channel", "identity"},
        {"ns", ns}};
  }
  write_text(out_path, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exponent-rate tools for distributed Gaussian hypothesis testing"};
  app.require_subcommand(1);

  std::string model_path, out_path, rates_spec = "0:2:0.05", units = "bits";
  std::vector<std::string> oracles;
  bool include_han = false, unverified = false;
  std::uint64_t seed = 1;
  double rate = 0.0, a12 = 0.0, abar13 = 0.0, abar23 = 0.0;

  auto* check = app.add_subcommand("check", "Verify the optimality condition for a model file");
  check->add_option("--model", model_path, "Gaussian model JSON file")->required();
  check->add_option("--out", out_path, "write the JSON report here");
  check->add_option("--seed", seed, "seed for the randomized minimizer starts");

  auto* sweep = app.add_subcommand("sweep", "Exponent-rate curve over a rate grid (CSV)");
  sweep->add_option("--model", model_path, "Gaussian model JSON file")->required();
  sweep->add_option("--rates", rates_spec, "rate grid start:stop:step (default 0:2:0.05)");
  sweep->add_option("--units", units, "units of --rates")
      ->check(CLI::IsMember({"bits", "nats"}));
  sweep->add_flag("--include-han", include_han,
                  "also evaluate the quantize-and-test baseline (scalar X only)");
  sweep->add_flag("--unverified", unverified,
                  "emit the formula value even when the optimality condition fails");
  sweep->add_option("--out", out_path, "write the CSV here instead of stdout");
  sweep->add_option("--seed", seed, "seed for the condition check");

  auto* example = app.add_subcommand(
      "example", "Construct a condition-satisfying model pair from (a12, abar13, abar23)");
  example->add_option("a12", a12, "null-model regression weight of X on Y1")->required();
  example->add_option("abar13", abar13, "alternative regression weight on Y1")->required();
  example->add_option("abar23", abar23, "alternative regression weight on Y2")->required();
  example->add_option("--out", out_path, "write the model JSON here instead of stdout");

  auto* discrete =
      app.add_subcommand("discrete", "Run the finite-alphabet oracles at one rate (JSON)");
  discrete->add_option("--model", model_path, "discrete model JSON file")->required();
  discrete->add_option("rate", rate, "rate (bits unless --units nats)")->required();
  discrete->add_option("--units", units, "units of the rate argument")
      ->check(CLI::IsMember({"bits", "nats"}));
  discrete->add_option("--oracle", oracles, "subset of {single, multi1, multi2, sha} (default all)")
      ->check(CLI::IsMember({"single", "multi1", "multi2", "sha"}));
  discrete->add_option("--out", out_path, "write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (app.got_subcommand(check)) return run_check(model_path, out_path, seed);
    if (app.got_subcommand(sweep)) {
      return run_sweep(model_path, rates_spec, units, include_han, unverified, out_path, seed);
    }
    if (app.got_subcommand(example)) return run_example(a12, abar13, abar23, out_path);
    if (app.got_subcommand(discrete)) {
      return run_discrete(model_path, rate, units, oracles, out_path);
    }
  } catch (const htexp::ConditionCViolated& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const htexp::InstanceTooLarge& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const htexp::RateConstraintViolated& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const htexp::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const htexp::DidNotConverge& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const htexp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
