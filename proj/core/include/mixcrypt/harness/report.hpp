// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mixcrypt::harness {

inline constexpr const char* kReportHeader = "target_id,method,m_used,epsilon,k,ssim";

struct ReportRow {
  std::int64_t target_id = 0;
  std::string method;  // FDN, CA, CA-CN or AVG
  std::size_t m_used = 0;
  double epsilon = 0.0;
  std::size_t k = 0;
  double ssim = 0.0;

  bool operator==(const ReportRow&) const = default;
};

struct AttackReport {
  std::vector<ReportRow> rows;

  /// Orders rows by target id, then method name.
  void sort();
  /// Mean SSIM per method.
  std::map<std::string, double> means() const;
  double mean(const std::string& method) const;
};

/// Sorted CSV with the fixed header; numbers in shortest round-trip form.
void write_report(std::ostream& out, AttackReport report);
void save_report(const AttackReport& report, const std::filesystem::path& path);
AttackReport read_report(std::istream& in);
AttackReport load_report(const std::filesystem::path& path);

/// Shortest text that parses back to the same double.
std::string format_real(double v);

}  // namespace mixcrypt::harness
