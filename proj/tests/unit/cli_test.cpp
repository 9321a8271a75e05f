// SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/hash.hpp"
#include "run_config.hpp"
#include "support/temp_dir.hpp"
#include "workspace.hpp"

namespace emap::cli {
namespace {

namespace fs = std::filesystem;

RunConfig parse(const std::string& text, const fs::path& base = "/base") { return RunConfig::parse(text, base); }

TEST(RunConfig, ParsesEveryValueKind) {
  const auto c = parse(R"(# leading comment
[tokenizer]
K = 1_024          # trailing comment
lr = 2e-3
out = "tok/out.emap"

[infer]
guidance_fixed = [8, 8.5, 9]
mode = "sat2map"
tau = 1

[tile]
cloud_filter = false
)");
  EXPECT_EQ(c.get("tokenizer", "K").get<int>(), 1024);
  EXPECT_DOUBLE_EQ(c.get("tokenizer", "lr").get<double>(), 2e-3);
  EXPECT_EQ(c.get("tokenizer", "out").get<std::string>(), "/base/tok/out.emap");
  EXPECT_EQ(c.get("infer", "guidance_fixed").get<std::vector<double>>(), (std::vector<double>{8, 8.5, 9}));
  EXPECT_EQ(c.get("infer", "mode").get<std::string>(), "sat2map");
  EXPECT_TRUE(c.get("infer", "tau").is_number_float());
  EXPECT_FALSE(c.get("tile", "cloud_filter").get<bool>());
  EXPECT_FALSE(c.has("model", "layers"));
}

TEST(RunConfig, PathsResolveAgainstConfigDirectory) {
  testing::TempDir dir;
  const auto file = dir.path() / "sub" / "run.toml";
  fs::create_directories(file.parent_path());
  std::ofstream(file) << "[model]\nmanifest = \"../corpus/manifest.ndjson\"\ntokenizer = \"/abs/tok.emap\"\n";
  const auto c = RunConfig::load(file);
  EXPECT_EQ(fs::path(c.get("model", "manifest").get<std::string>()), dir.path() / "corpus" / "manifest.ndjson");
  EXPECT_EQ(c.get("model", "tokenizer").get<std::string>(), "/abs/tok.emap");
}

TEST(RunConfig, RejectsUnknownAndMalformedEntries) {
  const std::vector<std::string> bad{
      "[model]\nlayrs = 3\n",          // unknown key
      "[modle]\n",                     // unknown section
      "layers = 3\n",                  // outside a section
      "[model]\nlayers = 3.5\n",       // wrong kind
      "[model]\nlayers = \"3\"\n",     // wrong kind
      "[model]\nresume = 1\n",         // wrong kind
      "[model]\nlayers = 3\nlayers = 4\n",
      "[model]\n[model]\n",
      "[infer]\nmode = \"map2sat\n",   // unterminated
      "[infer]\nguidance_fixed = [1, \"a\"]\n",
      "[infer]\nguidance_fixed = [1, 2\n",
      "[model]\nlayers = 3 4\n",
      "[model]\nlayers\n",
      "[model] x\n",
  };
  for (const auto& text : bad) EXPECT_THROW(parse(text), ConfigError) << text;
}

TEST(RunConfig, RenderedConfigParsesBackToTheSameTables) {
  const auto c = parse(R"([model]
layers = 2
lr = 0.001
resume = true
out = "/x/y"
[eval]
guidance_fixed = [2, 2.5]
split = "te\"st"
)");
  const auto again = parse(render_config(c.tables()));
  EXPECT_EQ(again.tables(), c.tables());
}

TEST(RunConfig, FlagBeatsConfigBeatsDefault) {
  const auto c = parse("[model]\nlayers = 3\n");
  EXPECT_EQ(pick<int>(5, c, "model", "layers", 7), 5);
  EXPECT_EQ(pick<int>(std::nullopt, c, "model", "layers", 7), 3);
  EXPECT_EQ(pick<int>(std::nullopt, c, "model", "width", 7), 7);
}

TEST(Workspace, FlagThenEnvironmentThenDefault) {
  ::setenv(kWorkspaceEnv, "/env/ws", 1);
  EXPECT_EQ(resolve_workspace(std::string("/flag/ws")), fs::path("/flag/ws"));
  EXPECT_EQ(resolve_workspace(std::nullopt), fs::path("/env/ws"));
  ::unsetenv(kWorkspaceEnv);
  EXPECT_EQ(resolve_workspace(std::nullopt), fs::absolute(kDefaultWorkspace));
}

TEST(Workspace, LockIsExclusive) {
  testing::TempDir dir;
  const auto file = dir.path() / ".emap.lock";
  {
    WorkspaceLock a(file);
    EXPECT_THROW(WorkspaceLock b(file), LockBusy);
  }
  EXPECT_NO_THROW(WorkspaceLock c(file));
}

// Subprocess checks against the built binary.
int run(const std::string& args, const fs::path& ws) {
  const std::string cmd = "EARTHMAPPER_WORKSPACE='" + ws.string() + "' '" EMAP_BINARY "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<nlohmann::json> records(const fs::path& ws) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(ws / "runs")) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<nlohmann::json> out;
  for (const auto& f : files) out.push_back(nlohmann::json::parse(std::ifstream(f)));
  return out;
}

TEST(EmapBinary, ExitCodes) {
  testing::TempDir ws;
  EXPECT_EQ(run("--help", ws.path()), 0);
  EXPECT_EQ(run("", ws.path()), 2);
  EXPECT_EQ(run("train --steps abc", ws.path()), 2);
  EXPECT_EQ(run("eval", ws.path()), 2);
  EXPECT_EQ(run("generate --mode map2sat --lat 1 --lon 1", ws.path()), 2);

  std::ofstream(ws.path() / "bad.toml") << "[eval]\nlimt = 3\n";
  EXPECT_EQ(run("--config '" + (ws.path() / "bad.toml").string() + "' eval", ws.path()), 2);

  std::ofstream(ws.path() / "junk.emap") << "definitely not a checkpoint";
  EXPECT_EQ(run("eval --checkpoint '" + (ws.path() / "junk.emap").string() + "'", ws.path()), 3);

  {
    WorkspaceLock held(Layout{ws.path()}.lock_file());
    EXPECT_EQ(run("synth --n 2 --size 32", ws.path()), 1);
  }
}

TEST(EmapBinary, RunRecordReplaysTheSameResult) {
  testing::TempDir ws;
  ASSERT_EQ(run("synth --n 6 --size 32 --snap 4 --seed 3 --out '" + (ws.path() / "a").string() + "'", ws.path()), 0);
  const auto recs = records(ws.path());
  ASSERT_EQ(recs.size(), 1u);
  const auto& r = recs[0];
  EXPECT_EQ(r["command"], "synth");
  EXPECT_EQ(r["exit_code"], 0);
  EXPECT_EQ(r["seeds"]["corpus"], 3);
  EXPECT_FALSE(r["git"].get<std::string>().empty());
  ASSERT_EQ(r["outputs"].size(), 1u);
  const auto manifest_hash = r["outputs"][0]["sha256"].get<std::string>();

  // Replay from the rendered effective config alone, redirected elsewhere.
  auto cfg = RunConfig::parse(r["config_file"].get<std::string>(), "/").tables();
  cfg["tile"]["out"] = (ws.path() / "b").string();
  std::ofstream(ws.path() / "replay.toml") << render_config(cfg);
  ASSERT_EQ(run("--config '" + (ws.path() / "replay.toml").string() + "' synth", ws.path()), 0);
  EXPECT_EQ(sha256_file(ws.path() / "b" / "manifest.ndjson"), manifest_hash);
}

TEST(EmapBinary, FailedRunsAreRecordedToo) {
  testing::TempDir ws;
  ASSERT_EQ(run("eval", ws.path()), 2);
  const auto recs = records(ws.path());
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0]["exit_code"], 2);
  EXPECT_NE(recs[0]["error"].get<std::string>().find("no checkpoint"), std::string::npos);
}

}  // namespace
}  // namespace emap::cli
