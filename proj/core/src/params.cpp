#include "pomapf/params.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace pomapf::ad {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (has(name)) throw ContractError("ParamStore: duplicate parameter " + name);
  names_.push_back(name);
  return values_.emplace(name, std::move(init)).first->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end())
    throw ContractError("ParamStore: unknown parameter " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end())
    throw ContractError("ParamStore: unknown parameter " + name);
  return it->second;
}

std::size_t ParamStore::total_coords() const {
  std::size_t n = 0;
  for (const auto& name : names_) n += at(name).numel();
  return n;
}

void GradBuffer::accumulate(
    const std::vector<std::pair<std::string, Tensor>>& grads, double weight) {
  for (const auto& [name, g] : grads) {
    auto it = grads_.find(name);
    if (it == grads_.end()) {
      Tensor t(g.shape());
      t.add_scaled(g, weight);
      grads_.emplace(name, std::move(t));
    } else {
      it->second.add_scaled(g, weight);
    }
  }
}

void GradBuffer::accumulate(const GradBuffer& other, double weight) {
  for (const auto& [name, g] : other.grads_) {
    auto it = grads_.find(name);
    if (it == grads_.end()) {
      Tensor t(g.shape());
      t.add_scaled(g, weight);
      grads_.emplace(name, std::move(t));
    } else {
      it->second.add_scaled(g, weight);
    }
  }
}

void GradBuffer::scale_all(double c) {
  for (auto& [name, g] : grads_)
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= c;
}

const Tensor& GradBuffer::at(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end())
    throw ContractError("GradBuffer: no gradient for " + name);
  return it->second;
}

Var Lift::operator()(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  Var v = trainable_ ? tape_->param(name, store_->at(name))
                     : tape_->constant(store_->at(name));
  cache_.emplace(name, v);
  return v;
}

Tensor uniform_fan_in(std::vector<int> shape, int fan_in, Rng& rng) {
  if (fan_in < 1) throw ContractError("uniform_fan_in: fan_in must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i)
    t[i] = rng.uniform(-bound, bound);
  return t;
}

void Adam::step(ParamStore& params, const GradBuffer& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (const std::string& name : params.names()) {
    if (!grads.has(name)) continue;
    Tensor& p = params.at(name);
    const Tensor& g = grads.at(name);
    auto it = moments_.find(name);
    if (it == moments_.end())
      it = moments_.emplace(name, std::make_pair(Tensor(p.shape()), Tensor(p.shape())))
               .first;
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void soft_update(ParamStore& target, const ParamStore& online, double tau) {
  if (tau <= 0.0 || tau > 1.0)
    throw ConfigError("soft_update: tau must lie in (0, 1]");
  for (const std::string& name : target.names())
    target.at(name).lerp(online.at(name), tau);
}

namespace {

constexpr char kMagic[8] = {'P', 'O', 'M', 'A', 'P', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(params.names().size()));
  // Manifest: name, rank, dims per entry, in registration order.
  for (const std::string& name : params.names()) {
    const Tensor& t = params.at(name);
    write_pod(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint8_t>(t.ndim()));
    for (int d : t.shape()) write_pod(out, static_cast<std::uint32_t>(d));
  }
  for (const std::string& name : params.names()) {
    const Tensor& t = params.at(name);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw ValidationError("checkpoint: write failed for " + path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("checkpoint: bad magic in " + path);
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = read_pod<std::uint32_t>(in);
  std::vector<std::pair<std::string, std::vector<int>>> manifest;
  manifest.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint16_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_pod<std::uint8_t>(in);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_pod<std::uint32_t>(in));
    manifest.emplace_back(std::move(name), std::move(shape));
  }
  ParamStore store;
  for (auto& [name, shape] : manifest) {
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw ParseError("checkpoint: truncated payload in " + path);
    store.add(name, std::move(t));
  }
  return store;
}

}  // namespace pomapf::ad
