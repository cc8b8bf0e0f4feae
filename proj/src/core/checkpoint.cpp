#include "molvae/core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "molvae/util/files.hpp"

namespace molvae {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <class T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <class T>
T get(const std::string& buf, std::size_t& off) {
  if (off + sizeof(T) > buf.size()) throw std::runtime_error("truncated checkpoint");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

template <class T>
std::vector<T> get_array(const std::string& buf, std::size_t& off, std::uint64_t n) {
  if (off + sizeof(T) * n > buf.size()) throw std::runtime_error("truncated checkpoint");
  std::vector<T> v(n);
  std::memcpy(v.data(), buf.data() + off, sizeof(T) * n);
  off += sizeof(T) * n;
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& entries) {
  std::string buf;
  buf += "RGCV";
  put<std::uint32_t>(buf, 1);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [key, e] : entries) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(key.size()));
    buf += key;
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(e.dtype()));
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) put<std::uint64_t>(buf, d);
    std::visit(
        [&](const auto& data) {
          using T = typename std::decay_t<decltype(data)>::value_type;
          if (data.size() != e.element_count())
            throw std::logic_error("checkpoint entry size mismatch: " + key);
          for (T v : data) put<T>(buf, v);
        },
        e.payload);
  }
  util::atomic_write_file(path, buf);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::size_t off = 0;
  if (buf.size() < 12 || buf.compare(0, 4, "RGCV") != 0)
    throw std::runtime_error("not an RGCV checkpoint: " + path);
  off = 4;
  auto version = get<std::uint32_t>(buf, off);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version");
  auto count = get<std::uint32_t>(buf, off);
  Checkpoint out;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto key_len = get<std::uint32_t>(buf, off);
    if (off + key_len > buf.size()) throw std::runtime_error("truncated checkpoint");
    std::string key = buf.substr(off, key_len);
    off += key_len;
    auto dtype = get<std::uint8_t>(buf, off);
    auto rank = get<std::uint8_t>(buf, off);
    CheckpointEntry e;
    for (int r = 0; r < rank; ++r) e.dims.push_back(get<std::uint64_t>(buf, off));
    std::uint64_t n = e.element_count();
    switch (dtype) {
      case 0: e.payload = get_array<float>(buf, off, n); break;
      case 1: e.payload = get_array<double>(buf, off, n); break;
      case 2: e.payload = get_array<std::uint64_t>(buf, off, n); break;
      default: throw std::runtime_error("unknown dtype code in checkpoint");
    }
    out.emplace(std::move(key), std::move(e));
  }
  return out;
}

}  // namespace molvae
