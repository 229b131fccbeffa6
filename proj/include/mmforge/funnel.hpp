#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace mmforge {

struct FunnelCounts {
  std::size_t input_count = 0;
  std::map<std::string, std::size_t> rejects;
  std::size_t output_count = 0;

  void reject(const std::string& reason, std::size_t n = 1) {
    if (n > 0) rejects[reason] += n;
  }
  std::size_t total_rejects() const;
  // input_count == output_count + sum of rejects
  bool conserved() const { return input_count == output_count + total_rejects(); }

  bool operator==(const FunnelCounts&) const = default;
};

// Per-stage attrition. The top-level counts are in `unit` (images for every
// corpus stage); `documents` tracks whole-document attrition alongside.
struct FunnelReport {
  std::string stage;
  std::string unit = "images";
  FunnelCounts counts;
  std::optional<FunnelCounts> documents;
  std::vector<std::string> warnings;

  bool conserved() const { return counts.conserved() && (!documents || documents->conserved()); }

  nlohmann::ordered_json to_json() const;
  static FunnelReport from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static FunnelReport load(const std::filesystem::path& path);
};

}  // namespace mmforge
