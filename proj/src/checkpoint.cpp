#include "vl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vl/netpbm.hpp"

namespace vl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'L', 'C', 'K'};
constexpr const char* kMomentumPrefix = "mom/";

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_tensor(std::string& out, const std::string& name, const DenseGrid& g) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, 3);
  put_u32(out, static_cast<std::uint32_t>(g.height()));
  put_u32(out, static_cast<std::uint32_t>(g.width()));
  put_u32(out, static_cast<std::uint32_t>(g.channels()));
  out.append(reinterpret_cast<const char*>(g.data()), g.size() * sizeof(double));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& origin)
      : bytes_(bytes), origin_(origin) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw IoError(origin_, std::string("truncated checkpoint while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(double* dst, std::size_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) {
      throw IoError(origin_, "truncated checkpoint while reading tensor values");
    }
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  const std::filesystem::path& origin() const { return origin_; }

 private:
  const std::string& bytes_;
  const std::filesystem::path& origin_;
  std::size_t pos_ = 0;
};

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::size_t parse_size(const std::string& s, const std::string& key,
                       const std::filesystem::path& origin) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw IoError(origin, "bad metadata value for '" + key + "': '" + s + "'");
  }
}

}  // namespace

bool bit_equal(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !ia->second.bit_equal(ib->second)) return false;
  }
  return true;
}

bool bit_equal(const Checkpoint& a, const Checkpoint& b) {
  return a.model == b.model && bit_equal(a.parameters, b.parameters) &&
         bit_equal(a.momentum, b.momentum) && a.metadata == b.metadata;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put_u32(out, Checkpoint::kVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.parameters.size() + ckpt.momentum.size()));
  for (const auto& [name, g] : ckpt.parameters) put_tensor(out, name, g);
  for (const auto& [name, g] : ckpt.momentum) put_tensor(out, kMomentumPrefix + name, g);

  std::map<std::string, std::string> meta = ckpt.metadata;
  meta["model.input_channels"] = std::to_string(ckpt.model.input_channels);
  meta["model.trunk_channels"] = join(ckpt.model.trunk_channels);
  meta["model.num_videos"] = std::to_string(ckpt.model.num_videos);
  meta["model.embedding_dim"] = std::to_string(ckpt.model.embedding_dim);
  meta["model.seed"] = std::to_string(ckpt.model.seed);
  std::string block;
  for (const auto& [k, v] : meta) block += k + "=" + v + "\n";
  put_u32(out, static_cast<std::uint32_t>(block.size()));
  out += block;
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes,
                                  const std::filesystem::path& origin) {
  Reader in(bytes, origin);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError(origin, "not a checkpoint (bad magic)");
  }
  in.text(4, "magic");
  const std::uint32_t version = in.u32("version");
  if (version != Checkpoint::kVersion) {
    throw IoError(origin, "unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(Checkpoint::kVersion) + ")");
  }
  Checkpoint ckpt;
  const std::uint32_t count = in.u32("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = in.text(in.u32("name length"), "tensor name");
    const std::uint32_t rank = in.u32("rank");
    if (rank < 1 || rank > 3) {
      throw IoError(origin, "tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    }
    std::size_t dims[3] = {1, 1, 1};
    for (std::uint32_t r = 0; r < rank; ++r) dims[3 - rank + r] = in.u32("dims");
    DenseGrid g(dims[0], dims[1], dims[2]);
    in.doubles(g.data(), g.size());
    auto& dest = name.starts_with(kMomentumPrefix) ? ckpt.momentum : ckpt.parameters;
    const std::string key = name.starts_with(kMomentumPrefix)
                                ? name.substr(std::strlen(kMomentumPrefix))
                                : name;
    if (!dest.emplace(key, std::move(g)).second) {
      throw IoError(origin, "duplicate tensor '" + name + "'");
    }
  }
  std::istringstream block(in.text(in.u32("metadata length"), "metadata"));
  if (!in.at_end()) throw IoError(origin, "trailing bytes after metadata");
  std::string line;
  while (std::getline(block, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(origin, "malformed metadata line '" + line + "'");
    ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }

  auto take = [&](const std::string& key) {
    auto it = ckpt.metadata.find(key);
    if (it == ckpt.metadata.end()) throw IoError(origin, "metadata lacks '" + key + "'");
    std::string v = it->second;
    ckpt.metadata.erase(it);
    return v;
  };
  ckpt.model.input_channels = parse_size(take("model.input_channels"), "model.input_channels", origin);
  ckpt.model.trunk_channels.clear();
  {
    std::istringstream list(take("model.trunk_channels"));
    std::string item;
    while (std::getline(list, item, ',')) {
      ckpt.model.trunk_channels.push_back(parse_size(item, "model.trunk_channels", origin));
    }
  }
  ckpt.model.num_videos = parse_size(take("model.num_videos"), "model.num_videos", origin);
  ckpt.model.embedding_dim = parse_size(take("model.embedding_dim"), "model.embedding_dim", origin);
  ckpt.model.seed = parse_size(take("model.seed"), "model.seed", origin);

  try {
    (void)Model(ckpt.model, ckpt.parameters);
  } catch (const std::invalid_argument& e) {
    throw IoError(origin, std::string("inconsistent checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes, path);
}

}  // namespace vl
