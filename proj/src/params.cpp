#include "depthgen/params.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace depthgen {

namespace {

constexpr char kMagic[4] = {'D', 'G', 'T', '1'};

/// RAII stdio handle; throws on open failure.
struct File {
  std::FILE* f;
  File(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {
    if (!f) throw std::runtime_error("cannot open " + path);
  }
  ~File() {
    if (f) std::fclose(f);
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
};

void put_bytes(std::FILE* f, const void* p, std::size_t n) {
  if (std::fwrite(p, 1, n, f) != n) throw std::runtime_error("checkpoint write failed");
}

void put_u16(std::FILE* f, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  put_bytes(f, b, 2);
}

void put_u64(std::FILE* f, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(f, b, 8);
}

bool get_bytes(std::FILE* f, void* p, std::size_t n) {
  return std::fread(p, 1, n, f) == n;
}

std::uint16_t get_u16(std::FILE* f) {
  unsigned char b[2];
  if (!get_bytes(f, b, 2)) throw std::runtime_error("checkpoint truncated");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint64_t get_u64(std::FILE* f) {
  unsigned char b[8];
  if (!get_bytes(f, b, 8)) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

Tensor init_uniform(const Shape& shape, double a, double b, Rng& rng) {
  if (!(a < b)) throw std::invalid_argument("init_uniform: need a < b");
  Tensor t(shape);
  double* p = t.data();
  for (std::size_t i = 0; i < t.numel(); ++i) p[i] = rng.uniform(a, b);
  return t;
}

Tensor init_normal(const Shape& shape, double mu, double sigma, Rng& rng) {
  Tensor t(shape);
  double* p = t.data();
  for (std::size_t i = 0; i < t.numel(); ++i) p[i] = rng.normal(mu, sigma);
  return t;
}

Tensor init_trunc_normal(const Shape& shape, double sigma, Rng& rng) {
  Tensor t(shape);
  double* p = t.data();
  for (std::size_t i = 0; i < t.numel(); ++i) p[i] = rng.truncated_normal(sigma);
  return t;
}

Var ParamStore::add(const std::string& name, Tensor init) {
  if (name.empty() || name.size() > 0xffff)
    throw std::invalid_argument("param name length out of range: " + name);
  auto [it, fresh] = items_.emplace(name, Var::leaf(std::move(init)));
  if (!fresh) throw std::invalid_argument("duplicate param name: " + name);
  return it->second;
}

Var ParamStore::get(const std::string& name) const {
  auto it = items_.find(name);
  if (it == items_.end()) throw std::invalid_argument("unknown param: " + name);
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : items_) n += v.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : items_) v.clear_grad();
}

void ParamStore::save(const std::string& path) const {
  File file(path, "wb");
  put_bytes(file.f, kMagic, 4);
  for (const auto& [name, v] : items_) {
    put_u16(file.f, static_cast<std::uint16_t>(name.size()));
    put_bytes(file.f, name.data(), name.size());
    const Shape& s = v.shape();
    const unsigned char nd = static_cast<unsigned char>(s.size());
    put_bytes(file.f, &nd, 1);
    for (std::size_t d : s) put_u64(file.f, d);
    const double* p = v.val().data();
    for (std::size_t i = 0; i < v.numel(); ++i)
      put_u64(file.f, std::bit_cast<std::uint64_t>(p[i]));
  }
}

void ParamStore::load(const std::string& path) {
  File file(path, "rb");
  char magic[4];
  if (!get_bytes(file.f, magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a parameter checkpoint: " + path);
  std::map<std::string, bool> filled;
  for (const auto& [name, v] : items_) filled[name] = false;
  for (;;) {
    unsigned char len_probe[2];
    const std::size_t got = std::fread(len_probe, 1, 2, file.f);
    if (got == 0) break;  // clean end of file
    if (got != 2) throw std::runtime_error("checkpoint truncated");
    const std::uint16_t nlen = static_cast<std::uint16_t>(len_probe[0] | (len_probe[1] << 8));
    std::string name(nlen, '\0');
    if (!get_bytes(file.f, name.data(), nlen)) throw std::runtime_error("checkpoint truncated");
    unsigned char nd;
    if (!get_bytes(file.f, &nd, 1)) throw std::runtime_error("checkpoint truncated");
    Shape s(nd);
    for (unsigned i = 0; i < nd; ++i) s[i] = static_cast<std::size_t>(get_u64(file.f));
    auto it = items_.find(name);
    if (it == items_.end())
      throw std::runtime_error("checkpoint has unknown param: " + name);
    if (!shape_eq(it->second.shape(), s))
      throw std::runtime_error("checkpoint shape " + shape_str(s) + " for " + name +
                               ", expected " + shape_str(it->second.shape()));
    Tensor t(s);
    double* p = t.data();
    for (std::size_t i = 0; i < t.numel(); ++i)
      p[i] = std::bit_cast<double>(get_u64(file.f));
    it->second.mutable_val() = std::move(t);
    filled[name] = true;
  }
  for (const auto& [name, ok] : filled)
    if (!ok) throw std::runtime_error("checkpoint missing param: " + name);
}

}  // namespace depthgen
