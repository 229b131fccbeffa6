#include "mmforge/funnel.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mmforge {
namespace {

nlohmann::ordered_json counts_to_json(const FunnelCounts& c) {
  nlohmann::ordered_json j;
  j["input_count"] = c.input_count;
  j["rejects"] = nlohmann::ordered_json::object();
  for (const auto& [reason, n] : c.rejects) j["rejects"][reason] = n;
  j["output_count"] = c.output_count;
  return j;
}

FunnelCounts counts_from_json(const nlohmann::json& j) {
  FunnelCounts c;
  c.input_count = j.at("input_count").get<std::size_t>();
  c.output_count = j.at("output_count").get<std::size_t>();
  for (const auto& [reason, n] : j.at("rejects").items()) c.rejects[reason] = n.get<std::size_t>();
  return c;
}

}  // namespace

std::size_t FunnelCounts::total_rejects() const {
  std::size_t total = 0;
  for (const auto& [_, n] : rejects) total += n;
  return total;
}

nlohmann::ordered_json FunnelReport::to_json() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["unit"] = unit;
  const auto c = counts_to_json(counts);
  for (const auto& [k, v] : c.items()) j[k] = v;
  if (documents) j["documents"] = counts_to_json(*documents);
  j["warnings"] = warnings;
  return j;
}

FunnelReport FunnelReport::from_json(const nlohmann::json& j) {
  FunnelReport r;
  r.stage = j.at("stage").get<std::string>();
  r.unit = j.at("unit").get<std::string>();
  r.counts = counts_from_json(j);
  if (j.contains("documents")) r.documents = counts_from_json(j.at("documents"));
  if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

void FunnelReport::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write funnel report " + path.string());
  out << to_json().dump(2) << '\n';
}

FunnelReport FunnelReport::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read funnel report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(nlohmann::json::parse(ss.str()));
}

}  // namespace mmforge
