#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "partfuse/data/shape.hpp"

namespace partfuse::data {

/// Parse failure in a .pls/.plp stream; `line()` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what);
  int line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  int line_;
  std::string detail_;
};

// .pls layout (UTF-8, LF):
//   PLS 1
//   N K
//   c1 ... cK
//   x y z s1 i1 ... sK iK      (N lines)
// Positions use 9 significant digits; offsets are not stored and are
// recomputed on read.
void write_pls(std::ostream& os, const LabeledShape& shape);
LabeledShape read_pls(std::istream& is);
void write_pls_file(const std::filesystem::path& path, const LabeledShape& shape);
LabeledShape read_pls_file(const std::filesystem::path& path);

/// Per-level predicted labelling of one shape.
struct PredictedLevel {
  int class_count = 0;
  std::vector<int> sem_labels;   // 1-based, per point
  std::vector<int> inst_ids;     // per point
  std::vector<double> confidence;  // per point: confidence of the point's instance
};

struct PredictedShape {
  Matrix points;
  std::vector<PredictedLevel> levels;
};

// .plp layout: as .pls with header "PLP 1" and, per level, a third column
// holding the point's instance confidence:  x y z s1 i1 q1 ... sK iK qK
void write_plp(std::ostream& os, const PredictedShape& shape);
PredictedShape read_plp(std::istream& is);
void write_plp_file(const std::filesystem::path& path, const PredictedShape& shape);
PredictedShape read_plp_file(const std::filesystem::path& path);

}  // namespace partfuse::data
