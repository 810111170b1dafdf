#include "checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace muse::ranker {

namespace {

constexpr char kMagic[8] = {'M', 'U', 'S', 'E', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string32(std::ostream& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw ParseError(path_ + ": truncated checkpoint");
    return v;
  }

  std::string bytes(uint64_t n) {
    if (n > (1ULL << 32)) throw ParseError(path_ + ": corrupt checkpoint (length " + std::to_string(n) + ")");
    std::string s(static_cast<size_t>(n), '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw ParseError(path_ + ": truncated checkpoint");
    return s;
  }

  std::string string32() { return bytes(get<uint32_t>()); }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const MuseModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  put<uint32_t>(out, kVersion);

  std::string cfg;
  for (const auto& [k, v] : model.config().to_map()) cfg += k + "=" + v + "\n";
  put<uint64_t>(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  const auto& tokens = model.vocab().tokens();
  put<uint64_t>(out, tokens.size());
  for (const auto& t : tokens) put_string32(out, t);

  put<uint64_t>(out, model.params().size());
  for (const auto& p : model.params()) {
    put_string32(out, p->name);
    put<int64_t>(out, p->value.rows());
    put<int64_t>(out, p->value.cols());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(p->value.size())));
  }
  if (!out) throw IoError("write failed: " + path);
}

MuseModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  Reader r(in, path);
  std::string magic = r.bytes(sizeof kMagic);
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError(path + ": not a checkpoint file");
  }
  const auto version = r.get<uint32_t>();
  if (version != kVersion) throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));

  TrainingConfig cfg;
  {
    std::istringstream lines(r.bytes(r.get<uint64_t>()));
    std::string line;
    while (std::getline(lines, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(path + ": malformed config line '" + line + "'");
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    }
  }

  text::Vocabulary vocab;
  const auto n_tokens = r.get<uint64_t>();
  for (uint64_t i = 0; i < n_tokens; ++i) {
    std::string tok = r.string32();
    if (i < 2) {
      if (tok != vocab.token(static_cast<int>(i))) throw ParseError(path + ": reserved vocabulary ids altered");
      continue;
    }
    if (vocab.add(tok) != static_cast<int>(i)) throw ParseError(path + ": duplicate vocabulary token '" + tok + "'");
  }

  MuseModel model(cfg, std::move(vocab), nullptr, cfg.seed);
  const auto n_params = r.get<uint64_t>();
  if (n_params != model.params().size()) {
    throw ConfigError("checkpoint holds " + std::to_string(n_params) + " parameter arrays, configuration expects " +
                      std::to_string(model.params().size()));
  }
  for (uint64_t i = 0; i < n_params; ++i) {
    const std::string name = r.string32();
    const auto rows = r.get<int64_t>();
    const auto cols = r.get<int64_t>();
    ad::Parameter* p = model.params().find(name);
    if (!p) throw ConfigError("checkpoint parameter '" + name + "' does not exist in the configured model");
    if (p->value.rows() != rows || p->value.cols() != cols) {
      throw ConfigError("checkpoint parameter '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", configured model expects " +
                        std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()));
    }
    const uint64_t n = static_cast<uint64_t>(rows) * static_cast<uint64_t>(cols);
    std::string raw = r.bytes(n * sizeof(double));
    std::memcpy(p->value.data(), raw.data(), raw.size());
  }
  return model;
}

void check_config_compatible(const TrainingConfig& stored,
                             const std::map<std::string, std::string>& overrides) {
  TrainingConfig probe = stored;
  const auto before = stored.to_map();
  for (const auto& key : TrainingConfig::shape_keys()) {
    auto it = overrides.find(key);
    if (it == overrides.end()) continue;
    probe.set(key, it->second);
    if (probe.to_map().at(key) != before.at(key)) {
      throw ConfigError("checkpoint/config mismatch on key '" + key + "': checkpoint has " + before.at(key) +
                        ", requested " + it->second);
    }
  }
}

}  // namespace muse::ranker
