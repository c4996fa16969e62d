#include "ctree/checkpoint.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ctree/error.hpp"

namespace ctree {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'T', 'R', 'E', 'E', 'C', 'K', 'P'};

template <typename U>
void write_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U read_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw ConfigError("checkpoint: unexpected end of file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, std::size_t limit) {
  const auto n = read_le<std::uint32_t>(in);
  if (n > limit) throw ConfigError("checkpoint: string field too long");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw ConfigError("checkpoint: unexpected end of file");
  return s;
}

std::string header_text(const ModelConfig& c) {
  std::ostringstream h;
  h << "format_version=" << kCheckpointVersion << '\n'
    << "depth=" << c.depth << '\n'
    << "dim=" << c.dim << '\n'
    << "source_vocab=" << c.source_vocab << '\n'
    << "target_vocab=" << c.target_vocab << '\n'
    << "emission=" << to_string(c.emission) << '\n'
    << "context=" << to_string(c.context) << '\n'
    << "max_source_len=" << c.max_source_len << '\n'
    << "seed=" << c.seed << '\n'
    << "source_vocab_checksum=" << c.source_vocab_checksum << '\n'
    << "target_vocab_checksum=" << c.target_vocab_checksum << '\n';
  return h.str();
}

const std::string& header_value(const std::map<std::string, std::string>& kv,
                                const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("checkpoint header lacks '" + key + "'");
  return it->second;
}

template <typename T>
T parse_number(const std::map<std::string, std::string>& kv,
               const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("checkpoint header lacks '" + key + "'");
  T value{};
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("checkpoint header: bad value for '" + key + "'");
  }
  return value;
}

ModelConfig parse_header(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("checkpoint header: bad line");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (parse_number<std::uint32_t>(kv, "format_version") != kCheckpointVersion) {
    throw ConfigError("checkpoint header: unsupported format version");
  }
  ModelConfig c;
  c.depth = parse_number<int>(kv, "depth");
  c.dim = parse_number<std::size_t>(kv, "dim");
  c.source_vocab = parse_number<std::size_t>(kv, "source_vocab");
  c.target_vocab = parse_number<std::size_t>(kv, "target_vocab");
  c.emission = parse_emission_mode(header_value(kv, "emission"));
  c.context = parse_context_mode(header_value(kv, "context"));
  c.max_source_len = parse_number<std::size_t>(kv, "max_source_len");
  c.seed = parse_number<std::uint64_t>(kv, "seed");
  c.source_vocab_checksum =
      parse_number<std::uint64_t>(kv, "source_vocab_checksum");
  c.target_vocab_checksum =
      parse_number<std::uint64_t>(kv, "target_vocab_checksum");
  return c;
}

}  // namespace

void save_checkpoint(const Model& model, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_string(out, header_text(model.config()));
  const auto& params = model.params();
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    write_string(out, p.name);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t dim : p.shape) write_le<std::uint64_t>(out, dim);
    for (double x : p.values) write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
  if (!out) throw ConfigError("checkpoint: write failed");
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  save_checkpoint(model, out);
}

Model load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ConfigError("not a checkpoint file");
  if (read_le<std::uint32_t>(in) != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported format version");
  }
  Model model(parse_header(read_string(in, 1 << 16)));
  auto& params = model.params();
  const auto count = read_le<std::uint32_t>(in);
  if (count != params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(count) +
                      " tensors, configuration expects " +
                      std::to_string(params.size()));
  }
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = read_string(in, 1024);
    ad::Parameter& p = [&]() -> ad::Parameter& {
      try {
        return params.find(name);
      } catch (const DomainError&) {
        throw ConfigError("checkpoint: unexpected tensor '" + name + "'");
      }
    }();
    const auto rank = read_le<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& dim : shape) dim = read_le<std::uint64_t>(in);
    if (shape != p.shape) {
      throw ConfigError("checkpoint: tensor '" + name + "' has the wrong shape");
    }
    for (double& x : p.values) x = std::bit_cast<double>(read_le<std::uint64_t>(in));
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  return load_checkpoint(in);
}

}  // namespace ctree
