// File formats: JSON documents, CSV and binary datasets.

#ifndef GLMMIX_IO_HPP
#define GLMMIX_IO_HPP

#include <iosfwd>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "glmmix/decomposition.hpp"
#include "glmmix/evaluation.hpp"
#include "glmmix/moments.hpp"
#include "glmmix/pipeline.hpp"
#include "glmmix/score.hpp"
#include "glmmix/synthetic.hpp"

namespace glmmix {

using json = nlohmann::json;

/// Malformed input file; `line` is 1-based, 0 when not line oriented.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, long line = 0) : std::runtime_error(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

json to_json(const CoordinateMap& map);
CoordinateMap coordinate_map_from_json(const json& j);

json to_json(const ScoreModel& model);
ScoreModel score_model_from_json(const json& j);

json to_json(const GlmMixture& model);
GlmMixture glm_mixture_from_json(const json& j);

json to_json(const DecompositionResult& result);
json to_json(const MatchReport& report);

/// Fields present in `j` override `base`.
ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {});
json to_json(const ExperimentConfig& config);

json sweep_summary_json(const SweepResult& result);
/// n,trial,max_error,mean_error,seconds
std::string sweep_csv(const SweepResult& result);

/// Header x_1,...,x_d,y then one row per sample.
void write_csv(const Dataset& data, std::ostream& out);
Dataset read_csv(std::istream& in);

/// "GLMM", u32 n, u32 d, u32 reserved (0), then n rows of d + 1 little-endian
/// f64 values (x_1..x_d, y).
void write_binary(const Dataset& data, std::ostream& out);
Dataset read_binary(std::istream& in);

json read_json_file(const std::string& path);
/// Writes `text` to `path`; throws std::runtime_error when the file cannot be written.
void write_text_file(const std::string& path, const std::string& text);
Dataset read_dataset_file(const std::string& path);
void write_dataset_file(const std::string& path, const Dataset& data);

}  // namespace glmmix

#endif  // GLMMIX_IO_HPP
