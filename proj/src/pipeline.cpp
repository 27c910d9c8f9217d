// SPDX-License-Identifier: Apache-2.0
#include "gtlens/pipeline.hpp"

#include "gtlens/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unistd.h>

namespace gtlens {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Corpus

const std::vector<std::pair<std::string, std::string>>& demo_corpus() {
  static const std::vector<std::pair<std::string, std::string>> corpus = {
      {"ethanol", "CCO"},
      {"acetic_acid", "CC(=O)O"},
      {"glycine", "NCC(=O)O"},
      {"trifluoroethanol", "OCC(F)(F)F"},
      {"dimethyl_sulfoxide", "CS(=O)C"},
      {"trimethyl_phosphate", "COP(=O)(OC)OC"},
      {"cyclohexane", "C1CCCCC1"},
      {"benzene", "C1=CC=CC=C1"},
      {"toluene", "CC1=CC=CC=C1"},
      {"phenol", "OC1=CC=CC=C1"},
      {"chlorobenzene", "ClC1=CC=CC=C1"},
      {"benzonitrile", "N#CC1=CC=CC=C1"},
      {"pyridine", "C1=CC=NC=C1"},
      {"naphthalene", "C1=CC=C2C=CC=CC2=C1"},
      {"salicylic_acid", "OC(=O)C1=CC=CC=C1O"},
      {"aspirin", "CC(=O)OC1=CC=CC=C1C(=O)O"},
      {"paracetamol", "CC(=O)NC1=CC=C(O)C=C1"},
      {"ibuprofen", "CC(C)CC1=CC=C(C=C1)C(C)C(=O)O"},
      {"caffeine", "CN1C=NC2=C1C(=O)N(C)C(=O)N2C"},
      {"nicotine", "CN1CCCC1C1=CN=CC=C1"},
  };
  return corpus;
}

std::string demo_corpus_smi() {
  std::string out = "# bundled demo corpus: kekulized SMILES and molecule id\n";
  for (const auto& [id, smiles] : demo_corpus()) out += smiles + " " + id + "\n";
  return out;
}

std::vector<CorpusEntry> parse_corpus(std::string_view text, bool jsonl, const std::string& origin) {
  std::vector<CorpusEntry> entries;
  std::istringstream stream{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(stream, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t");
    const std::string body = line.substr(first, last - first + 1);
    CorpusEntry entry;
    entry.line = number;
    entry.id = "mol" + std::to_string(number);
    try {
      if (jsonl) {
        entry.graph = parse_graph_json(body);
        const auto doc = nlohmann::json::parse(body);
        if (doc.contains("id") && doc["id"].is_string()) entry.id = doc["id"].get<std::string>();
      } else {
        const auto split = body.find_first_of(" \t");
        entry.graph = parse_smiles(body.substr(0, split));
        if (split != std::string::npos) {
          const auto id_start = body.find_first_not_of(" \t", split);
          entry.id = body.substr(id_start);
        }
      }
    } catch (const Error& e) {
      throw Error(e.code(), origin + ":" + std::to_string(number) + ": " + e.what());
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<CorpusEntry> load_corpus(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open corpus '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str(), path.extension() == ".jsonl", path.string());
}

// ---------------------------------------------------------------------------
// Formatting

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", value);
}

std::string spectral_report_json(const std::string& id, const RolloutSpectrum& rs,
                                 const LaplacianSpectrum& ls, const SpectralReport& report) {
  using nlohmann::json;
  json eigenvalues = json::array();
  for (Eigen::Index i = 0; i < rs.eigenvalues.size(); ++i) {
    eigenvalues.push_back({{"re", rs.eigenvalues(i).real()}, {"im", rs.eigenvalues(i).imag()}});
  }
  json lap = json::array();
  for (Eigen::Index i = 0; i < ls.eigenvalues.size(); ++i) lap.push_back(ls.eigenvalues(i));
  json overlap = json::array();
  for (Eigen::Index i = 0; i < report.overlap.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < report.overlap.cols(); ++j) row.push_back(report.overlap(i, j));
    overlap.push_back(std::move(row));
  }
  json clusters = json::array();
  for (const auto& c : report.degenerate_clusters) {
    clusters.push_back({{"laplacian_indices", c.laplacian_indices},
                        {"rollout_indices", c.rollout_indices},
                        {"projections", c.projections},
                        {"principal_cosines", c.cosines}});
  }
  json doc = {
      {"molecule_id", id},
      {"n", report.n},
      {"N", report.N},
      {"eigenvalues", eigenvalues},
      {"laplacian_eigenvalues", lap},
      {"C", overlap},
      {"matched_laplacian", report.matched_laplacian},
      {"matched_rollout", report.matched_rollout},
      {"eta", report.eta},
      {"zeta", report.zeta},
      {"conv_residual", std::isfinite(report.conv_residual) ? json(report.conv_residual) : json(nullptr)},
      {"threshold", report.threshold},
      {"diagnostics",
       {{"min_real_eigenvalue", report.min_real_eigenvalue}, {"degenerate_clusters", clusters}}},
  };
  return doc.dump(2) + "\n";
}

std::string spectral_csv_row(const std::string& id, const SpectralReport& report) {
  return fmt::format("{},{},{},{},{}\n", id, report.N, format_number(report.eta), format_number(report.zeta),
                     format_number(report.conv_residual));
}

std::string expressivity_csv_rows(const std::string& id, const ExpressivityTrace& trace) {
  std::string out;
  for (size_t l = 0; l < trace.rho.size(); ++l) {
    out += fmt::format("{},{},{}\n", id, l + 1, format_number(trace.rho[l]));
  }
  return out;
}

std::string sensitivity_csv_rows(const std::string& id, const SensitivityProfile& profile) {
  std::string out;
  for (size_t k = 0; k < profile.raw.size(); ++k) {
    out += fmt::format("{},{},{},{}\n", id, k, format_number(profile.raw[k]),
                       format_number(profile.standardized[k]));
  }
  return out;
}

std::string probe_json(const ProbeResult& result) {
  const nlohmann::json doc = {{"r2", result.r2},           {"alpha", result.alpha},
                              {"l1_ratio", result.l1_ratio}, {"n_train", result.n_train},
                              {"n_test", result.n_test},     {"seed", result.seed}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Bookkeeping

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) { return fmt::format("{:016x}", value); }

std::string RunManifest::to_json() const {
  const nlohmann::json doc = {{"command_line", command_line}, {"config_hash", config_hash},
                              {"weights_hash", weights_hash}, {"corpus_hash", corpus_hash},
                              {"tool_version", tool_version}, {"timestamp", timestamp},
                              {"seed", seed}};
  return doc.dump(2) + "\n";
}

OutputStage::OutputStage(fs::path out) : out_(std::move(out)) {
  static std::atomic<int> counter{0};
  std::error_code ec;
  fs::create_directories(out_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + out_.string() + "'");
  stage_ = out_ / fmt::format(".gtlens-stage-{}-{}", ::getpid(), counter++);
  fs::create_directories(stage_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create staging directory '" + stage_.string() + "'");
}

OutputStage::~OutputStage() {
  std::error_code ec;
  fs::remove_all(stage_, ec);
}

void OutputStage::write(const fs::path& relative, std::string_view content) {
  const fs::path target = stage_ / relative;
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + target.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out.flush()) throw Error(ErrorCode::Io, "write to '" + target.string() + "' failed");
  files_.push_back(relative);
}

void OutputStage::commit() {
  for (const auto& relative : files_) {
    const fs::path target = out_ / relative;
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    fs::rename(stage_ / relative, target, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot move output into '" + target.string() + "'");
  }
}

void parallel_for(size_t count, unsigned threads, const std::function<void(size_t)>& fn) {
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<size_t>(workers, std::max<size_t>(count, 1)));
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace gtlens
