// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/harness/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::harness {

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void AttackReport::sort() {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.target_id != b.target_id) return a.target_id < b.target_id;
    return a.method < b.method;
  });
}

std::map<std::string, double> AttackReport::means() const {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& [sum, n] = acc[r.method];
    sum += r.ssim;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [method, sn] : acc) out[method] = sn.first / static_cast<double>(sn.second);
  return out;
}

double AttackReport::mean(const std::string& method) const {
  auto m = means();
  auto it = m.find(method);
  if (it == m.end()) throw DataError("report has no rows for method " + method);
  return it->second;
}

void write_report(std::ostream& out, AttackReport report) {
  report.sort();
  out << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.target_id << ',' << r.method << ',' << r.m_used << ',' << format_real(r.epsilon) << ',' << r.k << ','
        << format_real(r.ssim) << '\n';
  }
}

void save_report(const AttackReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write report " + path.string());
  write_report(out, report);
  if (!out) throw FormatError("failed writing report " + path.string());
}

namespace {

template <typename T>
T parse_field(const std::string& text, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("report line " + std::to_string(line_no) + ": bad field '" + text + "'");
  }
  return value;
}

}  // namespace

AttackReport read_report(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) throw FormatError("report header missing or wrong");
  AttackReport report;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw FormatError("report line " + std::to_string(line_no) + ": expected 6 fields");
    ReportRow r;
    r.target_id = parse_field<std::int64_t>(f[0], line_no);
    r.method = f[1];
    r.m_used = parse_field<std::size_t>(f[2], line_no);
    r.epsilon = parse_field<double>(f[3], line_no);
    r.k = parse_field<std::size_t>(f[4], line_no);
    r.ssim = parse_field<double>(f[5], line_no);
    if (!(r.ssim >= -1.0 && r.ssim <= 1.0)) {
      throw FormatError("report line " + std::to_string(line_no) + ": SSIM outside [-1, 1]");
    }
    report.rows.push_back(std::move(r));
  }
  return report;
}

AttackReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open report " + path.string());
  return read_report(in);
}

}  // namespace mixcrypt::harness
