#include "dan/nets/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dan::nets {

namespace {

template <class T>
void put_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("checkpoint truncated");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

std::ifstream open_checked(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  return in;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".manifest";
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 8);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, config.digest());
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double v : params.value(i).data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());

  std::ofstream manifest(manifest_path(path), std::ios::trunc);
  std::ostringstream digest;
  digest << std::hex << config.digest();
  manifest << "# digest " << digest.str() << '\n';
  for (std::size_t i = 0; i < params.size(); ++i) {
    manifest << params.name(i) << ' ' << shape_string(params.value(i).shape()) << '\n';
  }
}

std::uint64_t read_checkpoint_digest(const std::filesystem::path& path) {
  auto in = open_checked(path);
  return get_le<std::uint64_t>(in);
}

ParamStore load_checkpoint(const std::filesystem::path& path, const ModelConfig& config) {
  auto in = open_checked(path);
  const auto digest = get_le<std::uint64_t>(in);
  if (digest != config.digest()) {
    throw std::runtime_error("checkpoint " + path.string() + " was written for a different model configuration");
  }
  ParamStore store;
  for (auto& [name, shape] : param_layout(config)) {
    Tensor t(shape);
    for (double& v : t.data()) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    store.add(name, std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint has trailing bytes");
  return store;
}

}  // namespace dan::nets
