#include "htexp/model_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "htexp/errors.hpp"

namespace htexp {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  try {
    return ordered_json::parse(in);
  } catch (const ordered_json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

const ordered_json& field(const ordered_json& j, const char* name, const std::string& path) {
  const auto it = j.find(name);
  if (it == j.end()) throw ParseError(path + ": missing field \"" + name + "\"");
  return *it;
}

template <typename T>
T as(const ordered_json& j, const char* name, const std::string& path) {
  try {
    return field(j, name, path).get<T>();
  } catch (const ordered_json::exception& e) {
    throw ParseError(path + ": field \"" + name + "\": " + e.what());
  }
}

Eigen::MatrixXd square_matrix(const std::vector<double>& flat, int d, const char* name,
                              const std::string& path) {
  if (flat.size() != static_cast<std::size_t>(d) * d) {
    std::ostringstream os;
    os << path << ": field \"" << name << "\" has " << flat.size() << " entries, expected "
       << d * d;
    throw ParseError(os.str());
  }
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = flat[i * d + j];
  return m;
}

}  // namespace

JointGaussianModel load_gaussian_model(const std::string& path) {
  const ordered_json j = parse_file(path);
  const int m = as<int>(j, "m", path);
  const int q = as<int>(j, "q", path);
  if (m < 1 || q < 1) throw ParseError(path + ": m and q must be positive");
  const int d = m + q;
  const auto K = square_matrix(as<std::vector<double>>(j, "K", path), d, "K", path);
  const auto Kbar = square_matrix(as<std::vector<double>>(j, "Kbar", path), d, "Kbar", path);
  return JointGaussianModel::create(m, q, K, Kbar);
}

std::string gaussian_model_to_json(const JointGaussianModel& model) {
  const auto flat = [](const Eigen::MatrixXd& m) {
    std::vector<double> v;
    v.reserve(m.size());
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
    return v;
  };
  ordered_json j;
  j["m"] = model.sensor_dim();
  j["q"] = model.detector_dim();
  j["K"] = flat(model.K());
  j["Kbar"] = flat(model.Kbar());
  return j.dump(2) + "\n";
}

void save_gaussian_model(const JointGaussianModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  out << gaussian_model_to_json(model);
  if (!out) throw ParseError(path + ": write failed");
}

DiscreteJointModel load_discrete_model(const std::string& path) {
  const ordered_json j = parse_file(path);
  const auto alphabet = as<std::vector<int>>(j, "alphabet", path);
  if (alphabet.size() != 3) {
    throw ParseError(path + ": field \"alphabet\" must be [nx, nu, nv]");
  }
  auto P = as<std::vector<double>>(j, "P", path);
  const ordered_json& factors = field(j, "Pbar_factors", path);
  const std::string fpath = path + ": Pbar_factors";
  auto pu = as<std::vector<double>>(factors, "PU", fpath);
  auto pxgu = as<std::vector<double>>(factors, "PX_given_U", fpath);
  auto pvgu = as<std::vector<double>>(factors, "PV_given_U", fpath);
  return DiscreteJointModel::create(alphabet[0], alphabet[1], alphabet[2], std::move(P),
                                    std::move(pu), std::move(pxgu), std::move(pvgu));
}

}  // namespace htexp
