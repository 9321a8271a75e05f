// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <functional>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "earthmapper/common/error.hpp"

namespace {

using namespace emap;
using namespace emap::cli;

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kIntegrity = 3, kDiverged = 4 };

// Most specific first: VersionError derives from IntegrityError.
int exit_code_for(std::exception_ptr e, std::string& message) {
  try {
    std::rethrow_exception(e);
  } catch (const UsageError& x) {
    message = x.what();
    return kUsage;
  } catch (const ConfigError& x) {
    message = x.what();
    return kUsage;
  } catch (const DomainError& x) {
    message = x.what();
    return kUsage;
  } catch (const IntegrityError& x) {
    message = x.what();
    for (const auto& o : x.offenders()) message += "\n  " + o;
    return kIntegrity;
  } catch (const TrainingError& x) {
    message = x.what();
    return kDiverged;
  } catch (const std::exception& x) {
    message = x.what();
    return kFailure;
  } catch (...) {
    message = "unknown error";
    return kFailure;
  }
}

void setup_logging(int verbosity) {
  auto logger = spdlog::stderr_logger_mt("emap");
  logger->set_pattern("[%l] %v");
  logger->set_level(verbosity > 0 ? spdlog::level::debug : verbosity < 0 ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_default_logger(logger);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emap: satellite/map translation pipeline"};
  app.require_subcommand(1);
  std::optional<std::string> workspace, config;
  int verbose = 0;
  bool quiet = false;
  app.add_option("-w,--workspace", workspace, "Workspace root (default $EARTHMAPPER_WORKSPACE or ./earthmapper-workspace)");
  app.add_option("-c,--config", config, "TOML config with [tile] [tokenizer] [model] [infer] [eval] sections");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  TileOptions tile;
  FetchOptions fetch;
  SynthOptions synth;
  TokenizerOptions tok;
  TrainOptions train;
  GenerateOptions gen;
  EvalOptions eval;
  const std::vector<std::pair<CLI::App*, std::function<void(Context&)>>> commands{
      {add_tile(app, tile), [&](Context& c) { run_tile(tile, c); }},
      {add_fetch(app, fetch), [&](Context& c) { run_fetch(fetch, c); }},
      {add_synth(app, synth), [&](Context& c) { run_synth(synth, c); }},
      {add_train_tokenizer(app, tok), [&](Context& c) { run_train_tokenizer(tok, c); }},
      {add_train(app, train), [&](Context& c) { run_train(train, c); }},
      {add_generate(app, gen), [&](Context& c) { run_generate(gen, c); }},
      {add_eval(app, eval), [&](Context& c) { run_eval(eval, c); }},
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  setup_logging(quiet ? -1 : verbose);

  const auto chosen = std::find_if(commands.begin(), commands.end(), [](const auto& c) { return c.first->parsed(); });
  const std::string name = chosen->first->get_name();
  const std::vector<std::string> args(argv, argv + argc);

  Context ctx;
  std::string message;
  try {
    ctx.ws.root = resolve_workspace(workspace);
    if (config) ctx.cfg = RunConfig::load(*config);
  } catch (...) {
    const int code = exit_code_for(std::current_exception(), message);
    spdlog::error("{}", message);
    return code;
  }

  std::optional<WorkspaceLock> lock;
  try {
    lock.emplace(ctx.ws.lock_file());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }

  RunRecord record(name, args);
  if (config) record.add_input(ctx.cfg.source());
  ctx.record = &record;
  int code = kOk;
  try {
    chosen->second(ctx);
  } catch (...) {
    code = exit_code_for(std::current_exception(), message);
    spdlog::error("{}", message);
  }
  record.set_config(ctx.effective);
  try {
    const auto path = record.write(ctx.ws.runs_dir(), code, message);
    spdlog::info("run record: {}", path.string());
  } catch (const std::exception& e) {
    spdlog::warn("could not write run record: {}", e.what());
  }
  return code;
}
