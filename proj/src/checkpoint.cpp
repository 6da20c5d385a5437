#include "omni/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "omni/errors.hpp"

namespace omni {

namespace {

constexpr char kMagic[4] = {'O', 'M', 'N', 'I'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("checkpoint: truncated file " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<Param*>& params, DType dtype) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open for writing: " + path);
  os.write(kMagic, 4);
  write_pod<uint32_t>(os, kVersion);
  write_pod<uint64_t>(os, params.size());
  for (const Param* p : params) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_pod<uint8_t>(os, static_cast<uint8_t>(dtype));
    write_pod<uint32_t>(os, static_cast<uint32_t>(p->value.shape.size()));
    for (int64_t d : p->value.shape) write_pod<uint64_t>(os, static_cast<uint64_t>(d));
    if (dtype == DType::f64) {
      os.write(reinterpret_cast<const char*>(p->value.data.data()),
               static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
    } else {
      for (double v : p->value.data) write_pod<float>(os, static_cast<float>(v));
    }
  }
  if (!os) throw DataError("checkpoint: write failed: " + path);
}

void load_checkpoint(const std::string& path, const ParamRegistry& reg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic in " + path);
  }
  const uint32_t version = read_pod<uint32_t>(is, path);
  if (version != kVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version) + " in " + path);
  }
  const uint64_t count = read_pod<uint64_t>(is, path);
  for (uint64_t e = 0; e < count; ++e) {
    const uint32_t name_len = read_pod<uint32_t>(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw DataError("checkpoint: truncated file " + path);
    const auto dtype = static_cast<DType>(read_pod<uint8_t>(is, path));
    const uint32_t ndim = read_pod<uint32_t>(is, path);
    std::vector<int64_t> shape(ndim);
    for (uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<int64_t>(read_pod<uint64_t>(is, path));
    const int64_t numel = Tensor::numel_of(shape);

    Param* p = reg.find(name);
    if (!p) throw ConfigError("checkpoint: entry '" + name + "' does not exist in the model");
    if (p->value.shape != shape) {
      throw ConfigError("checkpoint: entry '" + name + "' has shape " + Tensor::shape_str(shape) +
                        " but model expects " + p->value.shape_string());
    }
    for (int64_t i = 0; i < numel; ++i) {
      p->value.data[static_cast<size_t>(i)] =
          (dtype == DType::f64) ? read_pod<double>(is, path)
                                : static_cast<double>(read_pod<float>(is, path));
    }
  }
}

bool checkpoint_exists(const std::string& path) { return std::filesystem::exists(path); }

ParamSnapshot snapshot_params(const ParamRegistry& reg) {
  ParamSnapshot snap;
  for (const Param* p : reg.params) snap[p->name] = p->value.data;
  return snap;
}

}  // namespace omni
