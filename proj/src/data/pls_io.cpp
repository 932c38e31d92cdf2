#include "partfuse/data/pls_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <string_view>

namespace partfuse::data {

ParseError::ParseError(int line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  bool next(std::string& out) {
    if (!std::getline(is_, out)) return false;
    ++line_;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }
  int line() const { return line_; }

 private:
  std::istream& is_;
  int line_ = 0;
};

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view token, int line) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(line, "malformed number '" + std::string(token) + "'");
  }
  return value;
}

void append_double(std::string& out, double v, int precision) {
  char buf[64];
  auto res = precision > 0 ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, precision)
                           : std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void append_int(std::string& out, long long v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

struct Header {
  std::size_t points = 0;
  std::vector<int> class_counts;
};

Header read_header(LineReader& reader, std::string_view magic) {
  std::string line;
  if (!reader.next(line)) throw ParseError(1, "empty file");
  const auto head = split(line);
  if (head.size() != 2 || head[0] != magic || head[1] != "1") {
    throw ParseError(reader.line(), "expected header '" + std::string(magic) + " 1'");
  }
  if (!reader.next(line)) throw ParseError(reader.line(), "missing 'N K' line");
  const auto dims = split(line);
  if (dims.size() != 2) throw ParseError(reader.line(), "expected 'N K'");
  const auto n = parse_number<long long>(dims[0], reader.line());
  const auto k = parse_number<int>(dims[1], reader.line());
  if (n < 1) throw ParseError(reader.line(), "point count must be >= 1");
  if (k < 1) throw ParseError(reader.line(), "level count must be >= 1");
  if (!reader.next(line)) throw ParseError(reader.line(), "missing class count line");
  const auto counts = split(line);
  if (static_cast<int>(counts.size()) != k) {
    throw ParseError(reader.line(), "expected " + std::to_string(k) + " class counts");
  }
  Header h;
  h.points = static_cast<std::size_t>(n);
  for (auto c : counts) {
    const int v = parse_number<int>(c, reader.line());
    if (v < 1) throw ParseError(reader.line(), "class count must be >= 1");
    h.class_counts.push_back(v);
  }
  return h;
}

void write_header(std::string& out, std::string_view magic, std::size_t n, const std::vector<int>& counts) {
  out.append(magic);
  out.append(" 1\n");
  append_int(out, static_cast<long long>(n));
  out.push_back(' ');
  append_int(out, static_cast<long long>(counts.size()));
  out.push_back('\n');
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (k) out.push_back(' ');
    append_int(out, counts[k]);
  }
  out.push_back('\n');
}

// Reads the point block shared by both formats. `per_level` is 2 (.pls) or 3 (.plp).
template <typename OnLevel>
Matrix read_points(LineReader& reader, const Header& h, int per_level, OnLevel&& on_level) {
  const int k = static_cast<int>(h.class_counts.size());
  const std::size_t expected_tokens = 3 + static_cast<std::size_t>(per_level * k);
  Matrix points(static_cast<Eigen::Index>(h.points), 3);
  std::vector<std::map<int, int>> inst_label(static_cast<std::size_t>(k));
  std::string line;
  for (std::size_t i = 0; i < h.points; ++i) {
    if (!reader.next(line)) {
      throw ParseError(reader.line(), "expected " + std::to_string(h.points) + " point lines, found " +
                                          std::to_string(i));
    }
    const auto tok = split(line);
    if (tok.size() != expected_tokens) {
      throw ParseError(reader.line(), "expected " + std::to_string(expected_tokens) + " columns, found " +
                                          std::to_string(tok.size()));
    }
    for (int j = 0; j < 3; ++j) {
      points(static_cast<Eigen::Index>(i), j) = parse_number<double>(tok[static_cast<std::size_t>(j)], reader.line());
    }
    for (int level = 0; level < k; ++level) {
      const std::size_t base = 3 + static_cast<std::size_t>(per_level * level);
      const int s = parse_number<int>(tok[base], reader.line());
      const int id = parse_number<int>(tok[base + 1], reader.line());
      const int c = h.class_counts[static_cast<std::size_t>(level)];
      if (s < 1 || s > c) {
        throw ParseError(reader.line(), "level " + std::to_string(level + 1) + " label " + std::to_string(s) +
                                            " outside 1.." + std::to_string(c));
      }
      if (id < 0) throw ParseError(reader.line(), "negative instance id");
      auto [it, inserted] = inst_label[static_cast<std::size_t>(level)].try_emplace(id, s);
      if (!inserted && it->second != s) {
        throw ParseError(reader.line(), "instance " + std::to_string(id) + " has conflicting labels");
      }
      on_level(level, s, id, tok, base, reader.line());
    }
  }
  if (!points.allFinite()) throw ParseError(reader.line(), "non-finite coordinate");
  while (reader.next(line)) {
    if (!split(line).empty()) throw ParseError(reader.line(), "unexpected trailing data");
  }
  return points;
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  fn(os);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return is;
}

}  // namespace

void write_pls(std::ostream& os, const LabeledShape& shape) {
  std::string out;
  write_header(out, "PLS", shape.size(), shape.class_counts());
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int j = 0; j < 3; ++j) {
      if (j) out.push_back(' ');
      append_double(out, shape.points(r, j), 9);
    }
    for (const auto& level : shape.levels) {
      out.push_back(' ');
      append_int(out, level.sem_labels[i]);
      out.push_back(' ');
      append_int(out, level.inst_ids[i]);
    }
    out.push_back('\n');
  }
  os << out;
}

LabeledShape read_pls(std::istream& is) {
  LineReader reader(is);
  const Header h = read_header(reader, "PLS");
  LabeledShape shape;
  for (int c : h.class_counts) {
    LevelAnnotation level;
    level.class_count = c;
    level.sem_labels.reserve(h.points);
    level.inst_ids.reserve(h.points);
    shape.levels.push_back(std::move(level));
  }
  shape.points = read_points(reader, h, 2, [&](int level, int s, int id, const auto&, std::size_t, int) {
    shape.levels[static_cast<std::size_t>(level)].sem_labels.push_back(s);
    shape.levels[static_cast<std::size_t>(level)].inst_ids.push_back(id);
  });
  compute_gt_centers(shape);
  return shape;
}

void write_pls_file(const std::filesystem::path& path, const LabeledShape& shape) {
  write_file(path, [&](std::ostream& os) { write_pls(os, shape); });
}

LabeledShape read_pls_file(const std::filesystem::path& path) {
  auto is = open_input(path);
  try {
    return read_pls(is);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

void write_plp(std::ostream& os, const PredictedShape& shape) {
  std::vector<int> counts;
  for (const auto& level : shape.levels) counts.push_back(level.class_count);
  const auto n = static_cast<std::size_t>(shape.points.rows());
  std::string out;
  write_header(out, "PLP", n, counts);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int j = 0; j < 3; ++j) {
      if (j) out.push_back(' ');
      append_double(out, shape.points(r, j), 9);
    }
    for (const auto& level : shape.levels) {
      out.push_back(' ');
      append_int(out, level.sem_labels[i]);
      out.push_back(' ');
      append_int(out, level.inst_ids[i]);
      out.push_back(' ');
      append_double(out, level.confidence[i], 0);
    }
    out.push_back('\n');
  }
  os << out;
}

PredictedShape read_plp(std::istream& is) {
  LineReader reader(is);
  const Header h = read_header(reader, "PLP");
  PredictedShape shape;
  for (int c : h.class_counts) {
    PredictedLevel level;
    level.class_count = c;
    shape.levels.push_back(std::move(level));
  }
  shape.points = read_points(reader, h, 3,
                             [&](int level, int s, int id, const auto& tok, std::size_t base, int line) {
                               auto& l = shape.levels[static_cast<std::size_t>(level)];
                               const double q = parse_number<double>(tok[base + 2], line);
                               if (!(q >= 0.0 && q <= 1.0)) throw ParseError(line, "confidence outside [0, 1]");
                               l.sem_labels.push_back(s);
                               l.inst_ids.push_back(id);
                               l.confidence.push_back(q);
                             });
  return shape;
}

void write_plp_file(const std::filesystem::path& path, const PredictedShape& shape) {
  write_file(path, [&](std::ostream& os) { write_plp(os, shape); });
}

PredictedShape read_plp_file(const std::filesystem::path& path) {
  auto is = open_input(path);
  try {
    return read_plp(is);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

}  // namespace partfuse::data
