#include "riskdrive/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "riskdrive/errors.hpp"

namespace riskdrive {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little endian");

namespace {

constexpr char kMagic[8] = {'R', 'D', 'C', 'K', 'P', 'T', '\0', '\n'};

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.append(s);
  }
  void doubles(const std::vector<double>& v) {
    pod<std::uint64_t>(v.size());
    out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const auto n = pod<std::uint64_t>();
    if (n > (in_.size() - pos_) / sizeof(double)) throw CompatibilityError("checkpoint truncated");
    std::vector<double> v(n);
    std::memcpy(v.data(), in_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  void raw(char* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > in_.size() - pos_) throw CompatibilityError("checkpoint truncated");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

void write_adam(Writer& w, const AdamState& s) {
  w.pod<std::int64_t>(s.step);
  w.doubles(s.m);
  w.doubles(s.v);
}

AdamState read_adam(Reader& r) {
  AdamState s;
  s.step = r.pod<std::int64_t>();
  s.m = r.doubles();
  s.v = r.doubles();
  return s;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint64_t>(ck.config_hash);
  w.str(config_to_json(ck.config));
  w.str(ck.variant);
  w.pod<std::uint64_t>(ck.seed);
  w.pod<std::int64_t>(ck.iteration);
  w.doubles(ck.actor_params);
  w.doubles(ck.critic_params);
  write_adam(w, ck.actor_opt);
  write_adam(w, ck.critic_opt);
  w.str(ck.rng_state);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof(kMagic)];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CompatibilityError("not a checkpoint file");
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CompatibilityError("checkpoint version " + std::to_string(version) +
                             " is not supported (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  ck.config_hash = r.pod<std::uint64_t>();
  const std::string cfg_json = r.str();
  try {
    ck.config = parse_config(cfg_json, "checkpoint config");
  } catch (const ConfigError& e) {
    throw CompatibilityError(std::string("checkpoint config does not parse: ") + e.what());
  }
  if (config_hash(ck.config) != ck.config_hash) {
    throw CompatibilityError("checkpoint config hash mismatch");
  }
  ck.variant = r.str();
  ck.seed = r.pod<std::uint64_t>();
  ck.iteration = r.pod<std::int64_t>();
  ck.actor_params = r.doubles();
  ck.critic_params = r.doubles();
  ck.actor_opt = read_adam(r);
  ck.critic_opt = read_adam(r);
  ck.rng_state = r.str();
  if (!r.at_end()) throw CompatibilityError("trailing bytes after checkpoint");

  Variant v;
  try {
    v = Variant::parse(ck.variant);
  } catch (const ConfigError&) {
    throw CompatibilityError("checkpoint names unknown variant '" + ck.variant + "'");
  }
  const ActorCritic shape(ck.config.network_for(v));
  if (ck.actor_params.size() != shape.actor_params.size() ||
      ck.critic_params.size() != shape.critic_params.size()) {
    throw CompatibilityError("checkpoint parameter counts do not match its network config");
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ck);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace riskdrive
