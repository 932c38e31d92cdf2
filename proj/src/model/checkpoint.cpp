#include "partfuse/model/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace partfuse::model {
namespace {

constexpr const char* kMagic = "PARTFUSE-CHECKPOINT 1";

[[noreturn]] void corrupt(const std::string& what) { throw std::runtime_error("checkpoint: " + what); }

template <typename T>
T parse(const std::string& text, const std::string& key) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) corrupt("bad value '" + text + "' for " + key);
  return v;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

template <typename T>
std::vector<T> split_list(const std::string& text, const std::string& key) {
  std::vector<T> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    out.push_back(parse<T>(text.substr(start, comma - start), key));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

bool next_line(std::istream& is, std::string& line) {
  if (!std::getline(is, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  const auto& c = ckpt.config;
  check_params(ckpt.params, c);
  std::ostringstream head;
  head << kMagic << '\n'
       << "feature_dim=" << c.feature_dim << '\n'
       << "encoder_width=" << c.encoder_width << '\n'
       << "head_hidden=" << c.head_hidden << '\n'
       << "offset_layers=" << c.offset_layers << '\n'
       << "class_counts=" << join_ints(c.class_counts) << '\n'
       << "fusion=" << fusion_name(c.fusion) << '\n'
       << "one_hot=" << c.one_hot << '\n'
       << "stop_grad=" << c.stop_grad << '\n'
       << "two_dir=" << c.two_dir << '\n'
       << "learning_rate=" << format_double(c.learning_rate) << '\n'
       << "iterations=" << c.iterations << '\n'
       << "decay=" << format_double(c.decay) << '\n'
       << "milestones=" << join_doubles(c.milestones) << '\n'
       << "batch_size=" << c.batch_size << '\n'
       << "seed=" << c.seed << '\n'
       << "tensors " << ckpt.params.tensors.size() << '\n';
  for (const auto& t : ckpt.params.tensors) head << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << '\n';
  head << "data " << ckpt.params.scalar_count() << '\n';
  os << head.str();
  for (const auto& t : ckpt.params.tensors) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(t.value.data()[i]));
      char bytes[8];
      std::memcpy(bytes, &bits, 8);
      os.write(bytes, 8);
    }
  }
}

Checkpoint read_checkpoint(std::istream& is) {
  std::string line;
  if (!next_line(is, line) || line != kMagic) corrupt("missing header '" + std::string(kMagic) + "'");
  Checkpoint ckpt;
  auto& c = ckpt.config;
  std::size_t tensor_count = 0;
  while (true) {
    if (!next_line(is, line)) corrupt("truncated header");
    if (line.rfind("tensors ", 0) == 0) {
      tensor_count = parse<std::size_t>(line.substr(8), "tensors");
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) corrupt("malformed header line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "feature_dim") c.feature_dim = parse<int>(value, key);
    else if (key == "encoder_width") c.encoder_width = parse<int>(value, key);
    else if (key == "head_hidden") c.head_hidden = parse<int>(value, key);
    else if (key == "offset_layers") c.offset_layers = parse<int>(value, key);
    else if (key == "class_counts") c.class_counts = split_list<int>(value, key);
    else if (key == "fusion") c.fusion = parse_fusion(value);
    else if (key == "one_hot") c.one_hot = parse<int>(value, key) != 0;
    else if (key == "stop_grad") c.stop_grad = parse<int>(value, key) != 0;
    else if (key == "two_dir") c.two_dir = parse<int>(value, key) != 0;
    else if (key == "learning_rate") c.learning_rate = parse<double>(value, key);
    else if (key == "iterations") c.iterations = parse<int>(value, key);
    else if (key == "decay") c.decay = parse<double>(value, key);
    else if (key == "milestones") c.milestones = split_list<double>(value, key);
    else if (key == "batch_size") c.batch_size = parse<int>(value, key);
    else if (key == "seed") c.seed = parse<std::uint64_t>(value, key);
    else corrupt("unknown config key '" + key + "'");
  }
  for (std::size_t i = 0; i < tensor_count; ++i) {
    if (!next_line(is, line)) corrupt("truncated tensor table");
    std::istringstream ls(line);
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(ls >> name >> rows >> cols) || rows < 0 || cols < 0) corrupt("malformed tensor line '" + line + "'");
    ckpt.params.tensors.push_back({name, Matrix(rows, cols)});
  }
  if (!next_line(is, line) || line.rfind("data ", 0) != 0) corrupt("missing data line");
  if (parse<std::size_t>(line.substr(5), "data") != ckpt.params.scalar_count()) corrupt("data size mismatch");
  for (auto& t : ckpt.params.tensors) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      char bytes[8];
      if (!is.read(bytes, 8)) corrupt("truncated data for '" + t.name + "'");
      std::uint64_t bits;
      std::memcpy(&bits, bytes, 8);
      t.value.data()[i] = std::bit_cast<double>(to_little_endian(bits));
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) corrupt("trailing bytes");
  c.validate();
  try {
    check_params(ckpt.params, c);
  } catch (const std::invalid_argument& e) {
    corrupt(e.what());
  }
  return ckpt;
}

void write_checkpoint_file(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace partfuse::model
