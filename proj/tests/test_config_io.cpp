#include <doctest.h>

#include <fstream>
#include <sstream>

#include "aop/config_io.hpp"
#include "aop/serialize.hpp"
#include "support.hpp"

using namespace aop;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("aop_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

bool same_config(const ModelConfig& a, const ModelConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

}  // namespace

TEST_CASE("defaults round-trip through JSON") {
  const ModelConfig defaults;
  const ModelConfig back = config_from_json(default_config_json());
  CHECK(same_config(defaults, back));
  CHECK(back.system.input_size_bits == 4.0e6);
  CHECK(back.system.cycles == 1.0e9);
  CHECK(back.channel.tx_time(1) == 1000.0);

  // The shipped reference file describes the same configuration.
  const ModelConfig shipped = load_config(AOP_DEFAULT_CONFIG);
  CHECK(same_config(shipped, defaults));
  CHECK(config_hash(shipped) == config_hash(defaults));
  CHECK(same_config(load_config(""), defaults));
}

TEST_CASE("partial documents keep defaults for missing keys") {
  const ModelConfig cfg = config_from_json(json{{"t_min_ms", 1000}, {"wait_grid_ms", {0, 100}}});
  CHECK(cfg.system.t_min_ms == 1000.0);
  CHECK(cfg.system.wait_grid_ms == std::vector<double>{0.0, 100.0});
  CHECK(cfg.system.edge_freq_hz == 20e9);

  const ModelConfig ch = config_from_json(json{{"channel", {{"tx_time_ms", {400, 800, 1600}}}}});
  CHECK(ch.channel.tx_time(0) == 400.0);
  CHECK(ch.channel.states()[2].label == "bad");
}

TEST_CASE("invalid documents are rejected") {
  CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"t_min", 1000}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"channel", {{"matrix", json::array()}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"t_min_ms", "soon"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"perturbation", 0.5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"cycles_megacycles", 0}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"channel", {{"labels", {"a", "b"}}}}}), ConfigError);
  CHECK_THROWS_AS(
      config_from_json(json{{"channel", {{"transition", {{1, 0, 0}, {0, 1, 0}, {0, 0.5, 0.4}}}}}}),
      ConfigError);
}

TEST_CASE("command-line overrides") {
  json doc = json::object();
  apply_overrides(doc, {"t_min_ms=1000", "wait_grid_ms=[0,100,300]",
                        "channel.tx_time_ms=[600,1200,2400]", "channel.labels=[\"a\",\"b\",\"c\"]"});
  const ModelConfig cfg = config_from_json(doc);
  CHECK(cfg.system.t_min_ms == 1000.0);
  CHECK(cfg.system.wait_grid_ms.size() == 3);
  CHECK(cfg.channel.tx_time(2) == 2400.0);
  CHECK(cfg.channel.states()[1].label == "b");

  json bad = json::object();
  CHECK_THROWS_AS(apply_overrides(bad, {"t_min_ms"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(bad, {"=5"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(bad, {"speed=5"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(bad, {"channel=5"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(bad, {"system.t_min_ms=5"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(bad, {"channel.colour=5"}), ConfigError);

  // A bare word becomes a string and then fails type checking.
  json word = json::object();
  apply_overrides(word, {"t_min_ms=soon"});
  CHECK_THROWS_AS(config_from_json(word), ConfigError);
}

TEST_CASE("config files") {
  const auto dir = scratch_dir("config");
  const auto good = dir / "c.json";
  std::ofstream(good) << R"({"t_min_ms": 1100, "distance_km": 0.2})";
  const ModelConfig cfg = load_config(good, {"t_min_ms=1150"});
  CHECK(cfg.system.t_min_ms == 1150.0);
  CHECK(cfg.system.distance_km == 0.2);
  CHECK(config_hash(cfg) != config_hash(ModelConfig{}));
  CHECK(config_hash(cfg).size() == 16);

  const auto broken = dir / "broken.json";
  std::ofstream(broken) << "{ not json";
  CHECK_THROWS_AS(load_config(broken), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("number formatting is shortest round-trip") {
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1216.5) == "1216.5");
  CHECK(format_number(3e-5) == "3e-05");
  const double x = 1565.8740623468966;
  CHECK(std::stod(format_number(x)) == x);
}

TEST_CASE("csv writer and reader") {
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({"a", "b", "c"});
  csv.cell("x").cell(2.5).cell(std::size_t{7}).end_row();
  csv.cell("y").cell(-1.0).cell(0).end_row();
  CHECK(os.str() == "a,b,c\nx,2.5,7\ny,-1,0\n");

  std::istringstream is("a,b\r\n1,2\n\n3,\n");
  const auto rows = read_csv(is);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"a", "b"});
  CHECK(rows[2] == std::vector<std::string>{"3", ""});
}

TEST_CASE("policy tables round-trip") {
  const AopModel m = testing::reference_model();
  testing::Gen g(17);
  const auto policy = testing::random_policy(g, m.space().size(), m.num_actions());
  std::ostringstream os;
  write_policy_table(os, policy, m);
  const std::string text = os.str();
  CHECK(text.rfind("state_index,prev_age_ms,prev_wait_ms,cur_origin,channel,cur_age_ms,wait_ms,origin\n", 0) == 0);

  std::istringstream is(text);
  CHECK(read_policy_table(is, m) == policy);

  // Corruptions are detected.
  auto corrupt = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    const auto at = t.find(from);
    REQUIRE(at != std::string::npos);
    t.replace(at, from.size(), to);
    std::istringstream in(t);
    CHECK_THROWS_AS(read_policy_table(in, m), std::invalid_argument);
  };
  corrupt("state_index", "state");
  corrupt("\n0,1000,0,", "\n0,999,0,");
  corrupt("\n1,1000,0,", "\n0,1000,0,");

  std::string bad_wait = text;
  const auto line_end = bad_wait.find('\n', bad_wait.find('\n') + 1);
  const auto comma = bad_wait.rfind(',', line_end);
  const auto prev_comma = bad_wait.rfind(',', comma - 1);
  bad_wait.replace(prev_comma + 1, comma - prev_comma - 1, "250");
  std::istringstream in(bad_wait);
  CHECK_THROWS_AS(read_policy_table(in, m), std::invalid_argument);

  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_policy_table(truncated, m), std::invalid_argument);
}

TEST_CASE("trace, summary and ratio writers use the documented headers") {
  LambdaTrace trace;
  trace.iterates = {{1, 0.0, 1150.0}, {2, 0.05, 1175.5}};
  std::ostringstream t;
  write_lambda_trace(t, trace);
  CHECK(t.str() == "iteration,lambda,avg_cycle_ms\n1,0,1150\n2,0.05,1175.5\n");

  Trajectory traj;
  traj.policy = "AEZW";
  traj.seed = 9;
  traj.records.resize(3);
  traj.summary = {1800.0, 1700.0, 1210.0};
  std::ostringstream s;
  CsvWriter csv(s);
  write_summary_header(csv);
  write_summary_row(csv, traj);
  CHECK(s.str() ==
        "policy,n,seed,avg_aop_ratio_of_sums_ms,avg_aop_mean_of_ratios_ms,avg_cycle_ms\n"
        "AEZW,3,9,1800,1700,1210\n");

  std::ostringstream r;
  write_ratio_report(r, {{1, 2.0, 1.0, 2.0}});
  CHECK(r.str() == "n_prefix,q_bar_ms,q_tilde_ms,ratio\n1,2,1,2\n");
}

TEST_CASE("atomic file writes leave no temporary behind") {
  const auto dir = scratch_dir("atomic");
  const auto path = dir / "out.csv";
  write_file_atomic(path, "first\n");
  write_file_atomic(path, "second\n");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "second");
  CHECK_FALSE(std::filesystem::exists(dir / "out.csv.tmp"));
  CHECK_THROWS(write_file_atomic(dir / "no_such_dir" / "x.csv", "x"));
}
