#include <spdlog/cfg/env.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "mmforge/config.hpp"
#include "mmforge/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Build interleaved image-text and alt-text pair corpora from crawled documents"};
  std::string config_path;
  std::string input;
  std::string output;
  std::string stage_name;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> endpoint;
  std::optional<std::string> endpoint_b;
  std::string rouge_mode = "character";
  double beta = 1.0;

  app.add_option("--config", config_path, "JSON config; missing keys take defaults")->check(CLI::ExistingFile);
  app.add_option("--input", input, "Input manifest (documents JSONL for a full run)")->required();
  app.add_option("--output", output, "Output manifest, or working directory for a full run")->required();
  app.add_option("--stage", stage_name, "segment|fetch|dedup|score|assign|pairs|rouge|stats; omit for a full run");
  app.add_option("--seed", seed, "Overrides rng_seed");
  app.add_option("--embed-endpoint", endpoint, "Embedding service base URL; in-process stubs if omitted");
  app.add_option("--embed-endpoint-b", endpoint_b, "Second scorer for pair extraction");
  app.add_option("--rouge-mode", rouge_mode, "character|whitespace");
  app.add_option("--beta", beta, "ROUGE-L F-measure beta")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  spdlog::cfg::load_env_levels();
  spdlog::set_pattern("[%l] %v");

  mmforge::PipelineConfig cfg;
  try {
    if (!config_path.empty()) cfg = mmforge::PipelineConfig::load(config_path);
    if (seed) cfg.rng_seed = *seed;
    cfg.validate();
  } catch (const mmforge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  namespace pl = mmforge::pipeline;
  try {
    const auto providers = pl::make_providers(cfg, endpoint, endpoint_b);
    if (stage_name.empty()) {
      const auto result = pl::run_pipeline(input, output, cfg, providers);
      std::cout << "samples: " << result.samples.string() << '\n'
                << "pairs: " << result.pairs.string() << '\n'
                << "stats: " << result.stats.string() << '\n';
      return 0;
    }
    pl::StageRequest rq;
    rq.stage = pl::parse_stage(stage_name);
    rq.input = input;
    rq.output = output;
    rq.config = cfg;
    rq.providers = providers;
    rq.rouge.mode = mmforge::rouge::parse_mode(rouge_mode);
    rq.rouge.beta = beta;
    const auto funnel = pl::run_stage(rq);
    std::cout << funnel.stage << ": " << funnel.counts.input_count << " in, " << funnel.counts.output_count
              << " out\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
