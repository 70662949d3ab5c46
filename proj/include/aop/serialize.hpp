#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aop/lagrangian.hpp"
#include "aop/simulator.hpp"

namespace aop {

/// Shortest round-trip decimal text, locale independent.
std::string format_number(double value);

/// Minimal CSV writer: header row, comma separated, no quoting of numbers.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  CsvWriter& header(std::initializer_list<std::string_view> columns);
  CsvWriter& cell(std::string_view text);
  CsvWriter& cell(double value);
  CsvWriter& cell(std::size_t value);
  CsvWriter& cell(int value) { return cell(static_cast<std::size_t>(value)); }
  CsvWriter& end_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

/// Splits a CSV body into rows of cells; the first row is the header.
std::vector<std::vector<std::string>> read_csv(std::istream& in);

/// Writes `content` to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Policy table columns:
//   state_index,prev_age_ms,prev_wait_ms,cur_origin,channel,cur_age_ms,wait_ms,origin
void write_policy_table(std::ostream& out, const StationaryDeterministicPolicy& policy,
                        const AopModel& model);
StationaryDeterministicPolicy read_policy_table(std::istream& in, const AopModel& model);

// iteration,lambda,avg_cycle_ms
void write_lambda_trace(std::ostream& out, const LambdaTrace& trace);

// policy,n,seed,avg_aop_ratio_of_sums_ms,avg_aop_mean_of_ratios_ms,avg_cycle_ms
void write_summary_header(CsvWriter& csv);
void write_summary_row(CsvWriter& csv, const Trajectory& t);

// n_prefix,q_bar_ms,q_tilde_ms,ratio
void write_ratio_report(std::ostream& out, const std::vector<RatioPoint>& points);

nlohmann::json mixture_to_json(const Refinement& refinement, double lambda_star, double t_min);

}  // namespace aop
