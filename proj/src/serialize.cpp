#include "aop/serialize.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

namespace aop {

std::string format_number(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

CsvWriter& CsvWriter::header(std::initializer_list<std::string_view> columns) {
  for (std::string_view c : columns) cell(c);
  return end_row();
}

CsvWriter& CsvWriter::cell(std::string_view text) {
  if (!first_) out_ << ',';
  out_ << text;
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_number(value)); }

CsvWriter& CsvWriter::cell(std::size_t value) { return cell(std::to_string(value)); }

CsvWriter& CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
  return *this;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_policy_table(std::ostream& out, const StationaryDeterministicPolicy& policy,
                        const AopModel& model) {
  const StateSpace& space = model.space();
  if (policy.size() != space.size()) throw std::invalid_argument("policy does not fit the model");
  CsvWriter csv(out);
  csv.header({"state_index", "prev_age_ms", "prev_wait_ms", "cur_origin", "channel", "cur_age_ms",
              "wait_ms", "origin"});
  for (std::size_t s = 0; s < space.size(); ++s) {
    const AopState& st = space.state(s);
    const Action a = model.action(policy(s));
    csv.cell(s)
        .cell(model.age_value(st.prev_age_index))
        .cell(model.wait(st.prev_wait_index))
        .cell(to_string(st.cur_origin))
        .cell(model.channel().states()[st.channel_index].label)
        .cell(model.current_age(st))
        .cell(model.wait(a.wait_index))
        .cell(to_string(a.next_origin))
        .end_row();
  }
}

namespace {

double parse_double(const std::string& text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return value;
}

Origin parse_origin(const std::string& text) {
  if (text == "edge") return Origin::Edge;
  if (text == "local") return Origin::Local;
  throw std::invalid_argument("unknown origin '" + text + "'");
}

}  // namespace

StationaryDeterministicPolicy read_policy_table(std::istream& in, const AopModel& model) {
  const auto rows = read_csv(in);
  const std::vector<std::string> expected = {"state_index", "prev_age_ms", "prev_wait_ms",
                                             "cur_origin",  "channel",     "cur_age_ms",
                                             "wait_ms",     "origin"};
  if (rows.empty() || rows.front() != expected) {
    throw std::invalid_argument("policy table header mismatch");
  }
  const StateSpace& space = model.space();
  if (rows.size() - 1 != space.size()) {
    throw std::invalid_argument("policy table has " + std::to_string(rows.size() - 1) +
                                " rows, model has " + std::to_string(space.size()) + " states");
  }
  StationaryDeterministicPolicy policy{std::vector<std::size_t>(space.size(), 0)};
  std::vector<bool> seen(space.size(), false);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != expected.size()) throw std::invalid_argument("policy row has wrong width");
    const auto s = static_cast<std::size_t>(parse_double(row[0]));
    if (s >= space.size() || seen[s]) throw std::invalid_argument("bad or repeated state_index");
    seen[s] = true;
    const AopState& st = space.state(s);
    if (parse_double(row[1]) != model.age_value(st.prev_age_index) ||
        parse_double(row[2]) != model.wait(st.prev_wait_index) ||
        parse_origin(row[3]) != st.cur_origin) {
      throw std::invalid_argument("policy row " + row[0] + " does not match the model's state");
    }
    const double wait = parse_double(row[6]);
    std::size_t wait_index = model.config().wait_grid_ms.size();
    for (std::size_t w = 0; w < model.config().wait_grid_ms.size(); ++w) {
      if (model.wait(w) == wait) wait_index = w;
    }
    if (wait_index == model.config().wait_grid_ms.size()) {
      throw std::invalid_argument("wait " + row[6] + " ms is not on the wait grid");
    }
    policy.actions[s] = model.action_index({wait_index, parse_origin(row[7])});
  }
  return policy;
}

void write_lambda_trace(std::ostream& out, const LambdaTrace& trace) {
  CsvWriter csv(out);
  csv.header({"iteration", "lambda", "avg_cycle_ms"});
  for (const LambdaIterate& it : trace.iterates) {
    csv.cell(it.k).cell(it.lambda).cell(it.avg_cycle).end_row();
  }
}

void write_summary_header(CsvWriter& csv) {
  csv.header({"policy", "n", "seed", "avg_aop_ratio_of_sums_ms", "avg_aop_mean_of_ratios_ms",
              "avg_cycle_ms"});
}

void write_summary_row(CsvWriter& csv, const Trajectory& t) {
  csv.cell(t.policy)
      .cell(t.n())
      .cell(std::to_string(t.seed))
      .cell(t.summary.avg_aop_ratio_of_sums)
      .cell(t.summary.avg_aop_mean_of_ratios)
      .cell(t.summary.avg_cycle)
      .end_row();
}

void write_ratio_report(std::ostream& out, const std::vector<RatioPoint>& points) {
  CsvWriter csv(out);
  csv.header({"n_prefix", "q_bar_ms", "q_tilde_ms", "ratio"});
  for (const RatioPoint& p : points) {
    csv.cell(p.n_prefix).cell(p.q_bar).cell(p.q_tilde).cell(p.ratio).end_row();
  }
}

nlohmann::json mixture_to_json(const Refinement& refinement, double lambda_star, double t_min) {
  const MixturePolicy& m = refinement.mixture;
  return nlohmann::json{
      {"lambda_star", lambda_star},
      {"lambda_high", refinement.multipliers.high},
      {"lambda_low", refinement.multipliers.low},
      {"lambda_low_clamped", refinement.multipliers.clamped},
      {"q", m.q()},
      {"degenerate", m.degenerate()},
      {"t_min_ms", t_min},
      {"avg_cycle_high_ms", m.t_high()},
      {"avg_cycle_low_ms", m.t_low()},
      {"avg_relaxed_aop_high_ms", refinement.high_metrics.avg_relaxed_aop},
      {"avg_relaxed_aop_low_ms", refinement.low_metrics.avg_relaxed_aop},
      {"differing_states", m.differing_states()},
      {"policy_high", "policy_high.csv"},
      {"policy_low", "policy_low.csv"}};
}

}  // namespace aop
