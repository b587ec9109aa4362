#include "dearfed/model_params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace dearfed {

static_assert(std::endian::native == std::endian::little, "container IO assumes little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'F', 'S', '1'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("model container truncated");
  return v;
}

std::string strip_role(const std::string& name) {
  const auto slash = name.find('/');
  return slash == std::string::npos ? name : name.substr(slash + 1);
}

}  // namespace

std::size_t LayoutEntry::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void ModelParams::validate() const {
  std::size_t expect = 0;
  for (const auto& e : layout) {
    if (e.offset != expect) {
      throw std::invalid_argument("layout entry '" + e.name + "' starts at " +
                                  std::to_string(e.offset) + ", expected " +
                                  std::to_string(expect));
    }
    expect += e.size();
  }
  if (expect != values.size()) {
    throw std::invalid_argument("layout covers " + std::to_string(expect) + " of " +
                                std::to_string(values.size()) + " values");
  }
}

ModelParams ModelParams::from(const ParamList& params, const std::string& prefix) {
  ModelParams mp;
  std::size_t off = 0;
  for (const Parameter* p : params) {
    mp.layout.push_back({prefix + p->name, off, p->value.shape()});
    mp.values.insert(mp.values.end(), p->value.storage().begin(), p->value.storage().end());
    off += p->value.size();
  }
  return mp;
}

void ModelParams::assign_to(const ParamList& params) const {
  if (params.size() != layout.size()) {
    throw ShapeError("parameter count " + std::to_string(params.size()) + " != layout entries " +
                     std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const LayoutEntry& e = layout[i];
    Parameter* p = params[i];
    if (strip_role(e.name) != strip_role(p->name) || e.size() != p->value.size()) {
      throw ShapeError("layout entry '" + e.name + "' does not match parameter '" + p->name + "'");
    }
    std::memcpy(p->value.data(), values.data() + e.offset, e.size() * sizeof(double));
  }
}

void write_params(std::ostream& out, const ModelParams& params) {
  params.validate();
  out.write(kMagic, 4);
  put<std::uint64_t>(out, params.values.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.layout.size()));
  for (const auto& e : params.layout) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint64_t>(out, e.offset);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put<std::uint64_t>(out, d);
  }
  out.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(params.values.size() * sizeof(double)));
}

ModelParams read_params(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a DFS1 model container");
  }
  ModelParams mp;
  const auto d = get<std::uint64_t>(in);
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    LayoutEntry e;
    const auto len = get<std::uint32_t>(in);
    e.name.resize(len);
    in.read(e.name.data(), len);
    e.offset = get<std::uint64_t>(in);
    const auto rank = get<std::uint32_t>(in);
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(get<std::uint64_t>(in));
    mp.layout.push_back(std::move(e));
  }
  mp.values.resize(d);
  in.read(reinterpret_cast<char*>(mp.values.data()), static_cast<std::streamsize>(d * sizeof(double)));
  if (!in) throw std::runtime_error("model container truncated");
  mp.validate();
  return mp;
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_params(out, params);
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_params(in);
}

ModelParams extract_role(const ModelParams& all, const std::string& role) {
  const std::string prefix = role + "/";
  ModelParams out;
  for (const auto& e : all.layout) {
    if (e.name.rfind(prefix, 0) != 0) continue;
    out.layout.push_back({e.name, out.values.size(), e.shape});
    out.values.insert(out.values.end(), all.values.begin() + static_cast<std::ptrdiff_t>(e.offset),
                      all.values.begin() + static_cast<std::ptrdiff_t>(e.offset + e.size()));
  }
  if (out.layout.empty()) throw std::runtime_error("container has no '" + role + "' entries");
  return out;
}

ModelParams concat_params(const std::vector<ModelParams>& parts) {
  ModelParams out;
  for (const auto& p : parts) {
    for (const auto& e : p.layout) {
      out.layout.push_back({e.name, e.offset + out.values.size(), e.shape});
    }
    out.values.insert(out.values.end(), p.values.begin(), p.values.end());
  }
  return out;
}

}  // namespace dearfed
