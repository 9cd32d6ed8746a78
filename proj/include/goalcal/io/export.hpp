// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/bayes/calibration.hpp"
#include "goalcal/goal/error_estimate.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace goalcal::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Numbers are printed with 17 significant digits, so they read back exactly.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

void export_report(const goal::ErrorEstimateReport& report, const std::filesystem::path& path);
void export_order_study(const goal::OrderStudy& study, const std::filesystem::path& path);
void export_summary(const bayes::PosteriorSummary& summary, const std::filesystem::path& path);
/// sample_index, theta_1..theta_m, cost, qoi_error, accepted_count
void export_chain(const bayes::ChainState& chain, const std::filesystem::path& path);
/// sample_index, cost, qoi_error, acceptance_rate
void export_diagnostics(const std::vector<bayes::DiagnosticRow>& rows, const std::filesystem::path& path);

/// Lower-case hex SHA-1 of `blob <size>\0<bytes>`, as git computes object ids.
std::string git_blob_hash(const std::string& bytes);
std::string file_blob_hash(const std::filesystem::path& path);

}  // namespace goalcal::io
