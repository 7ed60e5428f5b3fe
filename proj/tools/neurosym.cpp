// neurosym command-line driver: one subcommand per pipeline stage, plus
// `pipeline` (all stages in order) and `synth` (regenerates bundled data).

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "neurosym/common.hpp"
#include "neurosym/pipeline.hpp"
#include "neurosym/synth.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

// Turns unparsed "--a.b value" / "--a.b=value" arguments into overrides.
neurosym::PipelineConfig::Overrides parse_overrides(const std::vector<std::string>& extras) {
  neurosym::PipelineConfig::Overrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.find('.') == std::string::npos) {
      throw neurosym::Error("unexpected argument: " + arg);
    }
    const auto key_value = arg.substr(2);
    if (const auto eq = key_value.find('='); eq != std::string::npos) {
      out.emplace_back(key_value.substr(0, eq), key_value.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      out.emplace_back(key_value, extras[++i]);
    } else {
      throw neurosym::Error("override " + arg + " has no value");
    }
  }
  return out;
}

neurosym::PipelineConfig load_config(const CommonOptions& opts, const CLI::App& sub) {
  std::optional<std::filesystem::path> out;
  if (opts.out) out = *opts.out;
  return neurosym::PipelineConfig::load(opts.config, parse_overrides(sub.remaining()), opts.seed, out);
}

}  // namespace

int main(int argc, char** argv) {
  neurosym::init_logging();
  CLI::App app{"Lexicon-guided filtering, weak labeling, SEDO alignment and classifier evaluation"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::vector<CLI::App*> stage_commands;
  for (const auto& stage : neurosym::stage_names()) {
    auto* sub = app.add_subcommand(stage, "Run the " + stage + " stage");
    stage_commands.push_back(sub);
  }
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
  stage_commands.push_back(pipeline);
  for (auto* sub : stage_commands) {
    sub->add_option("--config", opts.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "Master seed, overrides the config");
    sub->add_option("--out", opts.out, "Output directory, overrides paths.output");
    sub->allow_extras();
    sub->footer("Any config value can be overridden as --section.key value, e.g. --filter.percentile 75");
  }

  std::string synth_out = "data";
  std::uint64_t synth_seed = 42;
  auto* synth = app.add_subcommand("synth", "Write the bundled synthetic data set");
  synth->add_option("--out", synth_out, "Destination directory");
  synth->add_option("--seed", synth_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      neurosym::synth::write_bundle(synth_out, synth_seed);
      return 0;
    }
    for (auto* sub : stage_commands) {
      if (!sub->parsed()) continue;
      const auto cfg = load_config(opts, *sub);
      neurosym::OutputLock lock(cfg.out_dir());
      if (sub == pipeline) {
        neurosym::run_pipeline(cfg);
      } else {
        neurosym::run_stage(sub->get_name(), cfg);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
