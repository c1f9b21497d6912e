#include "casgen/diffusion/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace casgen::diffusion {

namespace {
constexpr char kMagic[8] = {'C', 'G', 'C', 'K', 'P', 'T', '0', '1'};
}

std::string to_string(Component c) {
  return c == Component::class_encoder ? "class_encoder" : "denoiser";
}

Component component_from_string(const std::string& s) {
  if (s == "class_encoder") return Component::class_encoder;
  if (s == "denoiser") return Component::denoiser;
  throw std::invalid_argument("unknown component: " + s);
}

std::uint64_t fnv1a(const void* data, size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_params(const std::vector<const nn::Param*>& params) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const nn::Param* p : params)
    h = fnv1a(p->value.data(), static_cast<size_t>(p->value.size()) * sizeof(double), h);
  return h;
}

std::string fingerprint_string(const std::string& description) {
  std::ostringstream os;
  os << std::hex << fnv1a(description.data(), description.size());
  return os.str();
}

void save_checkpoint(const std::string& path, const std::vector<const nn::Param*>& params,
                     const CheckpointMeta& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  const std::uint32_t count = static_cast<std::uint32_t>(params.size());
  f.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const nn::Param* p : params) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(p->name.size());
    f.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    f.write(p->name.data(), name_len);
    const std::uint32_t ndim = static_cast<std::uint32_t>(p->value.shape().size());
    f.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
    for (int d : p->value.shape()) {
      const std::int32_t dd = d;
      f.write(reinterpret_cast<const char*>(&dd), sizeof(dd));
    }
    f.write(reinterpret_cast<const char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("save_checkpoint: write failed: " + path);

  std::ofstream m(path + ".meta");
  std::int64_t total = 0;
  for (const nn::Param* p : params) total += p->value.size();
  m << "component: " << to_string(meta.component) << "\n"
    << "epoch: " << meta.epoch << "\n"
    << "config_fingerprint: " << meta.config_fingerprint << "\n"
    << "param_count: " << (meta.param_count > 0 ? meta.param_count : total) << "\n";
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  std::ifstream m(path + ".meta");
  if (!m) throw std::runtime_error("read_checkpoint_meta: missing sidecar for " + path);
  CheckpointMeta meta;
  std::string line;
  while (std::getline(m, line)) {
    const size_t sep = line.find(": ");
    if (sep == std::string::npos) continue;
    const std::string key = line.substr(0, sep), value = line.substr(sep + 2);
    if (key == "component") meta.component = component_from_string(value);
    else if (key == "epoch") meta.epoch = std::stoi(value);
    else if (key == "config_fingerprint") meta.config_fingerprint = value;
    else if (key == "param_count") meta.param_count = std::stoll(value);
  }
  return meta;
}

CheckpointMeta load_checkpoint(const std::string& path, const std::vector<nn::Param*>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::uint32_t count = 0;
  f.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != params.size())
    throw std::runtime_error("load_checkpoint: parameter count mismatch in " + path);
  for (nn::Param* p : params) {
    std::uint32_t name_len = 0;
    f.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    std::uint32_t ndim = 0;
    f.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
    std::vector<int> shape(ndim);
    for (auto& d : shape) {
      std::int32_t dd = 0;
      f.read(reinterpret_cast<char*>(&dd), sizeof(dd));
      d = dd;
    }
    if (shape != p->value.shape())
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name + " in " + path);
    f.read(reinterpret_cast<char*>(p->value.data()),
           static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return read_checkpoint_meta(path);
}

}  // namespace casgen::diffusion
