#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmforge/config.hpp"
#include "mmforge/funnel.hpp"
#include "mmforge/rouge.hpp"
#include "mmforge/scoring.hpp"

namespace mmforge::pipeline {

enum class Stage { segment, fetch, dedup, score, assign, pairs, rouge, stats };

const char* to_string(Stage s);
Stage parse_stage(const std::string& name);

class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& what)
      : std::runtime_error(std::string(to_string(stage)) + ": " + what), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct Providers {
  std::shared_ptr<scoring::EmbeddingProvider> primary;    // similarity gate and score_a
  std::shared_ptr<scoring::EmbeddingProvider> secondary;  // score_b
  std::shared_ptr<scoring::NsfwScorer> nsfw;

  std::string describe() const;
};

// In-process stubs unless an endpoint is given. The secondary scorer falls
// back to a differently tagged stub when no second endpoint is configured.
Providers make_providers(const PipelineConfig& cfg, const std::optional<std::string>& endpoint,
                         const std::optional<std::string>& endpoint_b = std::nullopt);

struct RougeOptions {
  rouge::TokenMode mode = rouge::TokenMode::character;
  double beta = 1.0;
};

struct StageRequest {
  Stage stage = Stage::segment;
  std::filesystem::path input;
  std::filesystem::path output;
  PipelineConfig config;
  Providers providers;
  RougeOptions rouge;
};

// Sidecar paths next to a stage output.
std::filesystem::path funnel_path(const std::filesystem::path& output);
std::filesystem::path meta_path(const std::filesystem::path& output);

// Runs exactly one stage: writes the output manifest, its funnel report and
// a resume sidecar. Throws StageError.
FunnelReport run_stage(const StageRequest& request);

struct PipelineRun {
  std::vector<Stage> executed;
  std::vector<Stage> skipped;
  std::filesystem::path samples;
  std::filesystem::path pairs;
  std::filesystem::path stats;
};

// segment -> fetch -> dedup -> score -> assign, plus pairs after score.
// Stages whose sidecar matches the current input, config and providers are
// skipped. Ends by writing stats.json over all funnels in `workdir`.
PipelineRun run_pipeline(const std::filesystem::path& documents, const std::filesystem::path& workdir,
                         const PipelineConfig& cfg, const Providers& providers);

struct StatsReport {
  nlohmann::ordered_json json;
  bool consistent = true;
};

// Merges funnel reports found in `dir`, checking per-stage conservation and
// that each stage's output count equals its successor's input count.
StatsReport merge_funnels(const std::filesystem::path& dir);

}  // namespace mmforge::pipeline
