#include "glmmix/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

namespace glmmix {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json rows_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

Eigen::VectorXd vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError(std::string(what) + ": expected numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd rows_from(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw FormatError(std::string(what) + ": expected a non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(vector_from(j[0], what).size());
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const Eigen::VectorXd row = vector_from(j[static_cast<std::size_t>(i)], what);
    if (row.size() != cols) throw FormatError(std::string(what) + ": ragged rows");
    m.row(i) = row.transpose();
  }
  return m;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

json to_json(const CoordinateMap& map) {
  json p = json::array();
  for (double v : map.params) p.push_back(v);
  return {{"kind", to_string(map.kind)}, {"params", p}};
}

CoordinateMap coordinate_map_from_json(const json& j) {
  CoordinateMap m;
  m.kind = map_kind_from_string(field(j, "kind").get<std::string>());
  if (j.contains("params")) {
    const Eigen::VectorXd p = vector_from(j.at("params"), "phi.params");
    m.params.assign(p.data(), p.data() + p.size());
  } else if (m.kind == CoordinateMap::Kind::cubic) {
    m.params = {1.0, 1.0};
  }
  m.validate();
  return m;
}

json to_json(const ScoreModel& model) {
  json j;
  j["family"] = to_string(model.family());
  j["dim"] = model.dim();
  if (const auto* g = model.as_gaussian()) {
    j["mu"] = vector_json(g->mean);
    j["sigma"] = rows_json(g->covariance);
  } else if (const auto* m = model.as_mixture()) {
    j["means"] = rows_json(m->means.transpose());
    j["pi"] = vector_json(m->weights);
  } else if (const auto* t = model.as_transformed()) {
    j["base"] = to_json(*t->base);
    j["phi"] = to_json(t->map);
  }
  return j;
}

ScoreModel score_model_from_json(const json& j) {
  const std::string family = field(j, "family").get<std::string>();
  if (family == "standard_gaussian") return ScoreModel::standard_gaussian(field(j, "dim").get<Index>());
  if (family == "gaussian") return ScoreModel::gaussian(vector_from(field(j, "mu"), "mu"), rows_from(field(j, "sigma"), "sigma"));
  if (family == "gaussian_mixture")
    return ScoreModel::gaussian_mixture(rows_from(field(j, "means"), "means").transpose(), vector_from(field(j, "pi"), "pi"));
  if (family == "transformed")
    return ScoreModel::transformed(score_model_from_json(field(j, "base")), coordinate_map_from_json(field(j, "phi")));
  throw FormatError("unknown score model family '" + family + "'");
}

json to_json(const GlmMixture& model) {
  return {{"U", rows_json(model.U)},
          {"biases", vector_json(model.biases)},
          {"weights", vector_json(model.weights)},
          {"activation", model.activation.name()},
          {"noise_sigma", model.noise_sigma},
          {"transform", model.transform ? to_json(*model.transform) : json(nullptr)}};
}

GlmMixture glm_mixture_from_json(const json& j) {
  GlmMixture m;
  m.U = rows_from(field(j, "U"), "U");
  m.biases = vector_from(field(j, "biases"), "biases");
  m.weights = vector_from(field(j, "weights"), "weights");
  m.activation = Activation::from_name(field(j, "activation").get<std::string>());
  m.noise_sigma = j.value("noise_sigma", 0.0);
  if (j.contains("transform") && !j.at("transform").is_null()) m.transform = coordinate_map_from_json(j.at("transform"));
  m.validate();
  return m;
}

json to_json(const DecompositionResult& result) {
  return {{"directions", rows_json(result.directions.transpose())},
          {"coefficients", vector_json(result.coefficients)},
          {"residual_fro", result.residual_fro},
          {"restarts", result.n_restarts_used}};
}

json to_json(const MatchReport& report) {
  return {{"permutation", report.permutation},
          {"signs", vector_json(report.signs)},
          {"per_component_error", vector_json(report.per_component_error)},
          {"max_error", report.max_error},
          {"mean_error", report.mean_error}};
}

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known, const char* where) {
  for (const auto& item : j.items())
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw FormatError(std::string(where) + ": unknown key '" + item.key() + "'");
}

}  // namespace

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
  if (!j.is_object()) throw FormatError("config: expected a JSON object");
  reject_unknown_keys(j,
                      {"d", "r", "n", "activation", "input", "mode", "L", "N", "nu", "em", "run_em", "noise_sigma",
                       "bias_range", "scale_min", "scale_max", "condition_floor", "transform", "master_seed",
                       "output_dir", "n_values", "trials", "exact_moments", "threshold"},
                      "config");
  c.d = j.value("d", c.d);
  c.r = j.value("r", c.r);
  c.n = j.value("n", c.n);
  c.activation = j.value("activation", c.activation);
  if (j.contains("input") && !j.at("input").is_null()) c.input = score_model_from_json(j.at("input"));
  c.mode = j.value("mode", c.mode);
  c.decomposition.restarts = j.value("L", c.decomposition.restarts);
  c.decomposition.iterations = j.value("N", c.decomposition.iterations);
  c.decomposition.nu = j.value("nu", c.decomposition.nu);
  if (j.contains("em")) {
    const json& em = j.at("em");
    if (!em.is_object()) throw FormatError("config: 'em' must be an object");
    reject_unknown_keys(em, {"max_iter", "tol", "sigma", "samples"}, "config.em");
    c.em.max_iter = em.value("max_iter", c.em.max_iter);
    c.em.tol = em.value("tol", c.em.tol);
    c.em.sigma = em.value("sigma", c.em.sigma);
    c.em_samples = em.value("samples", c.em_samples);
  }
  c.run_em = j.value("run_em", c.run_em);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.bias_range = j.value("bias_range", c.bias_range);
  c.scale_min = j.value("scale_min", c.scale_min);
  c.scale_max = j.value("scale_max", c.scale_max);
  c.condition_floor = j.value("condition_floor", c.condition_floor);
  if (j.contains("transform")) {
    if (j.at("transform").is_null()) c.transform.reset();
    else c.transform = coordinate_map_from_json(j.at("transform"));
  }
  c.master_seed = j.value("master_seed", c.master_seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("n_values")) c.n_values = j.at("n_values").get<std::vector<Index>>();
  c.trials = j.value("trials", c.trials);
  c.exact_moments = j.value("exact_moments", c.exact_moments);
  c.threshold = j.value("threshold", c.threshold);
  return c;
}

json to_json(const ExperimentConfig& c) {
  return {{"d", c.d},
          {"r", c.r},
          {"n", c.n},
          {"activation", c.activation},
          {"input", c.input ? to_json(*c.input) : json(nullptr)},
          {"mode", c.mode},
          {"L", c.decomposition.restarts},
          {"N", c.decomposition.iterations},
          {"nu", c.decomposition.nu},
          {"em", {{"max_iter", c.em.max_iter}, {"tol", c.em.tol}, {"sigma", c.em.sigma}, {"samples", c.em_samples}}},
          {"run_em", c.run_em},
          {"noise_sigma", c.noise_sigma},
          {"bias_range", c.bias_range},
          {"scale_min", c.scale_min},
          {"scale_max", c.scale_max},
          {"condition_floor", c.condition_floor},
          {"transform", c.transform ? to_json(*c.transform) : json(nullptr)},
          {"master_seed", c.master_seed},
          {"output_dir", c.output_dir},
          {"n_values", c.n_values},
          {"trials", c.trials},
          {"exact_moments", c.exact_moments},
          {"threshold", c.threshold}};
}

json sweep_summary_json(const SweepResult& result) {
  int failed = 0;
  for (const auto& r : result.records) failed += r.error.empty() ? 0 : 1;
  return {{"n_values", result.n_values},
          {"errors", vector_json(result.errors)},
          {"slope", result.slope},
          {"intercept", result.intercept},
          {"slope_ci", {result.slope_ci[0], result.slope_ci[1]}},
          {"ci_reliable", result.ci_reliable},
          {"failed_trials", failed},
          {"warnings", result.warnings}};
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "n,trial,max_error,mean_error,seconds\n";
  for (const auto& r : result.records)
    os << r.n << ',' << r.trial << ',' << format_double(r.max_error) << ',' << format_double(r.mean_error) << ','
       << format_double(r.seconds) << '\n';
  return os.str();
}

void write_csv(const Dataset& data, std::ostream& out) {
  const Index d = data.dim();
  for (Index a = 0; a < d; ++a) out << "x_" << (a + 1) << ',';
  out << "y\n";
  std::string line;
  for (Index i = 0; i < data.size(); ++i) {
    line.clear();
    for (Index a = 0; a < d; ++a) {
      line += format_double(data.x(i, a));
      line += ',';
    }
    line += format_double(data.y(i));
    line += '\n';
    out << line;
  }
}

Dataset read_csv(std::istream& in) {
  std::string line;
  long line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line()) throw FormatError("csv: empty file", 1);
  const Index cols = static_cast<Index>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols < 2) throw FormatError("csv: need at least one input column and y", line_no);
  std::vector<double> values;
  Index rows = 0;
  while (next_line()) {
    if (line.empty()) continue;
    std::size_t start = 0;
    Index col = 0;
    for (;;) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      std::string_view cell(line.data() + start, end - start);
      if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
      while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
      while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        std::ostringstream os;
        os << "csv: line " << line_no << ", column " << (col + 1) << ": not a finite number: '" << cell << "'";
        throw FormatError(os.str(), line_no);
      }
      values.push_back(v);
      ++col;
      if (end == line.size()) break;
      start = end + 1;
    }
    if (col != cols) {
      std::ostringstream os;
      os << "csv: line " << line_no << ": expected " << cols << " columns, found " << col;
      throw FormatError(os.str(), line_no);
    }
    ++rows;
  }
  if (rows == 0) throw FormatError("csv: no data rows", line_no);
  Dataset data;
  data.x.resize(rows, cols - 1);
  data.y.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    for (Index a = 0; a < cols - 1; ++a) data.x(i, a) = values[static_cast<std::size_t>(i * cols + a)];
    data.y(i) = values[static_cast<std::size_t>(i * cols + cols - 1)];
  }
  return data;
}

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw FormatError("binary dataset: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void write_binary(const Dataset& data, std::ostream& out) {
  out.write("GLMM", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.dim()));
  put_le<std::uint32_t>(out, 0u);
  for (Index i = 0; i < data.size(); ++i) {
    for (Index a = 0; a < data.dim(); ++a) put_le<double>(out, data.x(i, a));
    put_le<double>(out, data.y(i));
  }
}

Dataset read_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "GLMM", 4) != 0) throw FormatError("binary dataset: bad magic");
  const auto n = get_le<std::uint32_t>(in);
  const auto d = get_le<std::uint32_t>(in);
  get_le<std::uint32_t>(in);
  if (n == 0 || d == 0) throw FormatError("binary dataset: empty");
  Dataset data;
  data.x.resize(n, d);
  data.y.resize(n);
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    for (Index a = 0; a < static_cast<Index>(d); ++a) data.x(i, a) = get_le<double>(in);
    data.y(i) = get_le<double>(in);
  }
  return data;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.clear();
  in.seekg(0);
  if (std::memcmp(magic, "GLMM", 4) == 0) return read_binary(in);
  return read_csv(in);
}

void write_dataset_file(const std::string& path, const Dataset& data) {
  std::ostringstream os;
  const bool binary = path.size() >= 4 && path.substr(path.size() - 4) == ".bin";
  if (binary) write_binary(data, os);
  else write_csv(data, os);
  write_text_file(path, os.str());
}

}  // namespace glmmix
