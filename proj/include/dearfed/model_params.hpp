#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dearfed/tensor.hpp"

namespace dearfed {

struct LayoutEntry {
  std::string name;
  std::size_t offset = 0;
  std::vector<std::size_t> shape;

  std::size_t size() const;
  bool operator==(const LayoutEntry&) const = default;
};

/// Flat parameter vector of length d plus the layout that maps it back onto
/// named tensors. Layout offsets partition [0, d) in order.
struct ModelParams {
  std::vector<double> values;
  std::vector<LayoutEntry> layout;

  std::size_t dim() const { return values.size(); }
  /// Throws std::invalid_argument unless the layout partitions [0, d).
  void validate() const;
  bool same_layout(const ModelParams& other) const { return layout == other.layout; }

  static ModelParams from(const ParamList& params, const std::string& prefix = "");
  /// Copies values into params; names and shapes must match (prefix ignored).
  void assign_to(const ParamList& params) const;
};

/// Binary container, little-endian:
///   "DFS1" | u64 d | u32 entry count |
///   per entry: u32 name length, name bytes, u64 offset, u32 rank, rank x u64 dims |
///   d x f64 values
/// Role-tagged containers (QEEN, SAC checkpoints) use the same record and
/// carry their role as a "<role>/" prefix on every entry name.
void write_params(std::ostream& out, const ModelParams& params);
ModelParams read_params(std::istream& in);
void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

/// Entries (with offsets rebased to 0) whose name starts with "<role>/".
ModelParams extract_role(const ModelParams& all, const std::string& role);
/// Concatenates containers; later offsets are shifted.
ModelParams concat_params(const std::vector<ModelParams>& parts);

}  // namespace dearfed
