// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gtlens/diagnostics.hpp"
#include "gtlens/graph.hpp"
#include "gtlens/model.hpp"
#include "gtlens/spectral.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gtlens {

inline constexpr std::string_view kToolVersion = "0.1.0";

// --- corpus ------------------------------------------------------------------

struct CorpusEntry {
  std::string id;
  MolecularGraph graph;
  int line = 0;
};

/// `.smi`/`.txt`: "SMILES [id]" per line, '#' comments. `.jsonl`: one graph
/// JSON object per line with an optional "id". Errors keep their code and are
/// prefixed with "path:line:".
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path);
std::vector<CorpusEntry> parse_corpus(std::string_view text, bool jsonl, const std::string& origin);

/// The bundled 20-molecule demo corpus as (id, kekulized SMILES).
const std::vector<std::pair<std::string, std::string>>& demo_corpus();
std::string demo_corpus_smi();

// --- formatting ----------------------------------------------------------------

/// 17 significant digits, '.' decimal, "nan"/"inf" spelled out.
std::string format_number(double value);

std::string spectral_report_json(const std::string& id, const RolloutSpectrum& rs,
                                 const LaplacianSpectrum& ls, const SpectralReport& report);

inline constexpr std::string_view kSpectralCsvHeader = "molecule_id,N,eta,zeta,conv_residual";
inline constexpr std::string_view kExpressivityCsvHeader = "molecule_id,layer,rho";
inline constexpr std::string_view kSensitivityCsvHeader = "molecule_id,k,raw,standardized";

std::string spectral_csv_row(const std::string& id, const SpectralReport& report);
std::string expressivity_csv_rows(const std::string& id, const ExpressivityTrace& trace);
std::string sensitivity_csv_rows(const std::string& id, const SensitivityProfile& profile);
std::string probe_json(const ProbeResult& result);

// --- run bookkeeping --------------------------------------------------------------

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

struct RunManifest {
  std::vector<std::string> command_line;
  std::string config_hash;
  std::string weights_hash;
  std::string corpus_hash;
  std::string tool_version = std::string(kToolVersion);
  std::string timestamp;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

/// Collects output files in a private staging directory under `out` and only
/// moves them into place on commit(); an uncommitted stage is removed.
class OutputStage {
 public:
  explicit OutputStage(std::filesystem::path out);
  ~OutputStage();
  OutputStage(const OutputStage&) = delete;
  OutputStage& operator=(const OutputStage&) = delete;

  void write(const std::filesystem::path& relative, std::string_view content);
  void commit();

 private:
  std::filesystem::path out_;
  std::filesystem::path stage_;
  std::vector<std::filesystem::path> files_;
};

/// Runs fn(0..count-1) on a small thread pool. fn must not throw.
void parallel_for(size_t count, unsigned threads, const std::function<void(size_t)>& fn);

// --- embedded verification suite ------------------------------------------------

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Invariant checks (closed forms, rollout identity, stochasticity, trivial
/// mode, solver agreement, expressivity values, probe least squares). A given
/// tolerance replaces every default.
std::vector<CheckResult> run_verification(std::optional<double> tolerance_override = std::nullopt);

}  // namespace gtlens
