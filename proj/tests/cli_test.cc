// Copyright 2026 The safechat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "safechat/cli.h"
#include "service_workload.h"

namespace safechat::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "safechat");
  std::ostringstream out, err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<json> jsonl(const fs::path& p) {
  std::vector<json> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

const std::string kFixture = std::string(SAFECHAT_FIXTURE_DIR) + "/ingest_3.jsonl";

TEST(Cli, IngestFixtureKeepsOne) {
  testing::TempDir dir("cli");
  const auto out = (dir.path() / "clean.jsonl").string();
  const auto r = invoke({"ingest", "--in", kFixture, "--out", out});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rep = json::parse(r.out);
  EXPECT_EQ(rep["input"], 3);
  EXPECT_EQ(rep["kept"], 1);
  EXPECT_EQ(rep["removed"], 2);
  std::size_t rules_fired = 0;
  for (const auto& [rule, n] : rep["removed_by_rule"].items()) {
    if (n.get<int>() == 0) continue;
    ++rules_fired;
    EXPECT_EQ(n, 1) << rule;
  }
  EXPECT_EQ(rules_fired, 2u);
  const auto rows = jsonl(out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0]["incident_id"], "fx-001");
}

TEST(Cli, UsageErrors) {
  auto r = invoke({"frobnicate"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_EQ(r.err.rfind("safechat: error[usage]", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("Subcommands:"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({}).code, kExitValidation);
  EXPECT_EQ(invoke({"ingest", "--in", kFixture, "--out", "-", "--bogus"}).code, kExitValidation);
  EXPECT_EQ(invoke({"synth", "--incidents", "-3"}).code, kExitValidation);
  r = invoke({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* sub : {"ingest", "classify", "score", "extract", "stats", "index", "suggest", "evaluate",
                          "synth", "serve"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
}

TEST(Cli, IoAndValidationExitCodes) {
  testing::TempDir dir("cli");
  auto r = invoke({"ingest", "--in", (dir.path() / "missing.jsonl").string(), "--out", "-"});
  EXPECT_EQ(r.code, kExitIo);
  EXPECT_EQ(r.err.rfind("safechat: error[io]", 0), 0u) << r.err;

  const auto bad = dir.path() / "bad.jsonl";
  std::ofstream(bad) << "{\"incident_id\": 3}\n";
  r = invoke({"ingest", "--in", bad.string(), "--out", "-"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_EQ(r.err.rfind("safechat: error[", 0), 0u) << r.err;
}

TEST(Cli, SynthIsDeterministicAndIngestsCleanly) {
  testing::TempDir dir("cli");
  const auto a = invoke({"synth", "--seed", "42", "--incidents", "80"});
  const auto b = invoke({"synth", "--seed", "42", "--incidents", "80"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, invoke({"synth", "--seed", "43", "--incidents", "80"}).out);

  const auto corpus = dir.path() / "synth.jsonl";
  std::ofstream(corpus, std::ios::binary) << a.out;
  const auto r = invoke({"ingest", "--in", corpus.string(), "--out", (dir.path() / "c.jsonl").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rep = json::parse(r.out);
  EXPECT_EQ(rep["input"], 80);
  EXPECT_EQ(rep["kept"], 80);
}

// Runs every batch pipeline on one synthetic corpus, twice, and checks the
// outputs agree byte for byte.
TEST(Cli, BatchPipelinesAreReproducible) {
  auto pipeline = [](const fs::path& d) {
    const auto p = [&](const char* name) { return (d / name).string(); };
    std::vector<Result> rs;
    rs.push_back(invoke({"synth", "--seed", "7", "--incidents", "150", "--out", p("corpus.jsonl"),
                         "--orgs-out", p("orgs.jsonl")}));
    rs.push_back(invoke({"ingest", "--in", p("corpus.jsonl"), "--out", p("clean.jsonl"), "--report",
                         p("report.json")}));
    rs.push_back(invoke({"classify", "--in", p("clean.jsonl"), "--out", p("labels.jsonl")}));
    rs.push_back(invoke({"score", "--in", p("clean.jsonl"), "--labels", p("labels.jsonl"), "--out",
                         p("scores.jsonl")}));
    rs.push_back(invoke({"extract", "--in", p("clean.jsonl"), "--out", p("slots.jsonl")}));
    rs.push_back(invoke({"stats", "--in", p("clean.jsonl"), "--labels", p("labels.jsonl"), "--orgs",
                         p("orgs.jsonl"), "--out-dir", p("stats")}));
    rs.push_back(invoke({"index", "--in", p("clean.jsonl"), "--out", p("index.json")}));
    rs.push_back(invoke({"suggest", "--in", p("clean.jsonl"), "--index", p("index.json"), "--out",
                         p("model.jsonl")}));
    rs.push_back(invoke({"evaluate", "--in", p("clean.jsonl"), "--model", p("model.jsonl"), "--out-dir",
                         p("eval")}));
    return rs;
  };
  testing::TempDir d1("cli"), d2("cli");
  const auto r1 = pipeline(d1.path());
  const auto r2 = pipeline(d2.path());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    ASSERT_EQ(r1[i].code, kExitOk) << "step " << i << ": " << r1[i].err;
    EXPECT_EQ(r2[i].code, kExitOk);
  }

  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(d1.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), d1.path());
    if (rel == "index.json") continue;  // records its own path
    EXPECT_EQ(slurp(entry.path()), slurp(d2.path() / rel)) << rel;
    ++compared;
  }
  EXPECT_GE(compared, 15u);

  const auto labels = jsonl(d1.path() / "labels.jsonl");
  const auto slots = jsonl(d1.path() / "slots.jsonl");
  const auto scores = jsonl(d1.path() / "scores.jsonl");
  EXPECT_EQ(labels.size(), 150u);
  EXPECT_EQ(slots.size(), 150u);
  EXPECT_EQ(scores.size(), 150u);
  for (const auto& s : scores) {
    if (s["polarity"].is_null()) continue;
    EXPECT_GE(s["polarity"].get<double>(), -1.0);
    EXPECT_LE(s["polarity"].get<double>(), 1.0);
  }

  for (const char* f : {"similarity_by_category.csv", "support_by_category.csv", "support_by_hour.csv",
                        "summary.json"}) {
    EXPECT_TRUE(fs::exists(d1.path() / "eval" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(d1.path() / "stats" / "tests.csv"));
  std::size_t reg = 0;
  for (const auto& e : fs::directory_iterator(d1.path() / "stats")) {
    if (e.path().extension() != ".csv" || e.path().filename() == "tests.csv") continue;
    ++reg;
    const auto csv = slurp(e.path());
    EXPECT_EQ(csv.rfind("term,coeff,se,", 0), 0u) << e.path();
  }
  EXPECT_EQ(reg, 6u);

  const auto model = jsonl(d1.path() / "model.jsonl");
  ASSERT_FALSE(model.empty());
  for (const auto& m : model) {
    EXPECT_TRUE(m.contains("incident_id"));
    EXPECT_TRUE(m.contains("turn_index"));
    EXPECT_FALSE(m["text"].get<std::string>().empty());
  }
}

}  // namespace
}  // namespace safechat::cli
