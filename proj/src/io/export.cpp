// SPDX-License-Identifier: Apache-2.0
#include "goalcal/io/export.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace goalcal::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::invalid_argument("csv row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_all(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) return t;
  std::istringstream h(line);
  for (std::string cell; std::getline(h, cell, ',');) t.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream r(line);
    for (std::string cell; std::getline(r, cell, ',');) row.push_back(std::stod(cell));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
  auto out = open_out(path);
  out << value.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) { return nlohmann::json::parse(read_all(path)); }

void export_report(const goal::ErrorEstimateReport& report, const std::filesystem::path& path) {
  write_json(path, report);
}

void export_order_study(const goal::OrderStudy& study, const std::filesystem::path& path) {
  CsvTable t{{"level", "exact_error", "xi1", "q_ehat_first", "q_ehat_second", "deficit_xi1", "deficit_first",
              "deficit_second"},
             {}};
  for (const auto& r : study.rows) {
    t.rows.push_back({r.level, r.exact_error, r.xi1, r.q_ehat_first, r.q_ehat_second, r.deficit_xi1(),
                      r.deficit_first(), r.deficit_second()});
  }
  write_csv(path, t);
}

void export_summary(const bayes::PosteriorSummary& summary, const std::filesystem::path& path) {
  write_json(path, summary);
}

void export_chain(const bayes::ChainState& chain, const std::filesystem::path& path) {
  CsvTable t;
  t.header.push_back("sample_index");
  const auto m = chain.theta.size();
  for (Eigen::Index i = 0; i < m; ++i) t.header.push_back("theta_" + std::to_string(i + 1));
  for (const char* h : {"cost", "qoi_error", "accepted_count"}) t.header.push_back(h);
  for (const auto& s : chain.accepted) {
    std::vector<double> row{static_cast<double>(s.index)};
    for (Eigen::Index i = 0; i < m; ++i) row.push_back(s.theta[i]);
    row.push_back(s.cost);
    row.push_back(s.qoi_error);
    row.push_back(static_cast<double>(s.accepted_count));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

void export_diagnostics(const std::vector<bayes::DiagnosticRow>& rows, const std::filesystem::path& path) {
  CsvTable t{{"sample_index", "cost", "qoi_error", "acceptance_rate"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({static_cast<double>(r.sample_index), r.cost, r.qoi_error, r.acceptance_rate});
  }
  write_csv(path, t);
}

std::string git_blob_hash(const std::string& bytes) {
  const std::string blob = "blob " + std::to_string(bytes.size()) + '\0' + bytes;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &length, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char c = digest[i];
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 15]);
  }
  return out;
}

std::string file_blob_hash(const std::filesystem::path& path) { return git_blob_hash(read_all(path)); }

}  // namespace goalcal::io
