// SPDX-License-Identifier: Apache-2.0
//
// gtlens: spectral and representational diagnostics for graph transformers
// over molecular graphs.

#include "gtlens/error.hpp"
#include "gtlens/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

namespace fs = std::filesystem;
using namespace gtlens;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerify = 3;

struct Options {
  std::string corpus;
  std::string weights;
  std::uint64_t seed = 0;
  int layers = 4;
  int dim = 32;
  int heads = 4;
  int max_dist = 8;
  std::string mode = "full";
  bool class_token = false;
  double threshold = 0.9;
  std::string out = "gtlens-out";
  bool json = false;
  unsigned jobs = 0;

  // sensitivity
  int max_hop = 5;
  double step = 1e-5;
  // probe
  std::string data;
  std::string label = "degree";
  double alpha = 0.1;
  double l1_ratio = 0.5;
  // verify
  std::optional<double> tolerance;

  // Which model flags were given explicitly (they override a weights file).
  CLI::Option* layers_opt = nullptr;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* class_opt = nullptr;
};

bool is_numerical(ErrorCode code) {
  return code == ErrorCode::NoConverge || code == ErrorCode::NonFinite || code == ErrorCode::Degenerate;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Model {
  SanWeights weights;
  SanConfig cfg;
};

Model resolve_model(const Options& opt) {
  Model m;
  if (!opt.weights.empty()) {
    m.weights = load_weights(opt.weights);
    m.cfg = m.weights.config;
    if (opt.layers_opt && opt.layers_opt->count() > 0) m.cfg.layers = opt.layers;
  } else {
    SanConfig cfg;
    cfg.layers = opt.layers;
    cfg.dim = opt.dim;
    cfg.heads = opt.heads;
    cfg.max_dist = opt.max_dist;
    cfg.seed = opt.seed;
    cfg.mode = parse_forward_mode(opt.mode);
    cfg.include_class_token = opt.class_token;
    m.weights = init_weights(cfg);
    m.cfg = cfg;
  }
  if (opt.mode_opt && opt.mode_opt->count() > 0) m.cfg.mode = parse_forward_mode(opt.mode);
  if (opt.class_opt && opt.class_opt->count() > 0) m.cfg.include_class_token = opt.class_token;
  m.cfg.validate();
  return m;
}

RunManifest make_manifest(const std::vector<std::string>& argv, const Options& opt, const Model& model) {
  RunManifest manifest;
  manifest.command_line = argv;
  manifest.config_hash = hex64(fnv1a(config_to_json(model.cfg)));
  manifest.weights_hash = hex64(model.weights.checksum());
  manifest.corpus_hash = opt.corpus.empty() ? "" : hex64(fnv1a(read_file(opt.corpus)));
  manifest.timestamp = utc_timestamp();
  manifest.seed = opt.seed;
  return manifest;
}

/// Runs `analyze` for every molecule on the work pool and keeps results in
/// corpus order. Numerical failures are collected; anything else aborts.
template <typename Result, typename Fn>
std::vector<Result> run_corpus(const std::vector<CorpusEntry>& corpus, unsigned jobs, Fn analyze,
                               std::vector<std::string>& numerical_failures) {
  std::vector<Result> results(corpus.size());
  std::vector<std::exception_ptr> errors(corpus.size());
  parallel_for(corpus.size(), jobs, [&](size_t i) {
    try {
      results[i] = analyze(corpus[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (size_t i = 0; i < corpus.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      if (is_numerical(e.code())) {
        numerical_failures.push_back(corpus[i].id);
        std::cerr << "gtlens: " << corpus[i].id << ": " << e.what() << "\n";
      } else {
        throw Error(e.code(), "molecule '" + corpus[i].id + "' (line " + std::to_string(corpus[i].line) +
                                  "): " + e.what());
      }
    }
  }
  return results;
}

int report_numerical(const std::vector<std::string>& failures) {
  std::string ids;
  for (const auto& id : failures) ids += (ids.empty() ? "" : ", ") + id;
  std::cerr << "gtlens: numerical failure for molecules: " << ids << "\n";
  return kExitNumerical;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// ---------------------------------------------------------------------------

struct SpectralRow {
  std::string json;
  std::string csv;
  double eta = 0.0;
  double zeta = 0.0;
};

int cmd_spectral(const Options& opt, const std::vector<std::string>& argv) {
  const auto corpus = load_corpus(opt.corpus);
  const Model model = resolve_model(opt);
  std::vector<std::string> failed;
  const auto rows = run_corpus<SpectralRow>(
      corpus, opt.jobs,
      [&](const CorpusEntry& entry) {
        const auto trace = forward(entry.graph, model.weights, model.cfg);
        const auto rs = rollout_spectrum(rollout(trace));
        const auto ls = laplacian_spectrum(entry.graph);
        const auto report = overlap_report(rs, ls, model.cfg.include_class_token, opt.threshold);
        return SpectralRow{spectral_report_json(entry.id, rs, ls, report), spectral_csv_row(entry.id, report),
                           report.eta, report.zeta};
      },
      failed);
  if (!failed.empty()) return report_numerical(failed);

  OutputStage stage(opt.out);
  std::string csv = std::string(kSpectralCsvHeader) + "\n";
  std::vector<double> etas, zetas;
  for (size_t i = 0; i < rows.size(); ++i) {
    stage.write(fs::path("reports") / (corpus[i].id + ".json"), rows[i].json);
    csv += rows[i].csv;
    etas.push_back(rows[i].eta);
    zetas.push_back(rows[i].zeta);
  }
  stage.write("spectral.csv", csv);
  const nlohmann::json summary = {{"molecules", rows.size()},
                                  {"mean_zeta", mean(zetas)},
                                  {"median_zeta", median(zetas)},
                                  {"mean_eta", mean(etas)},
                                  {"median_eta", median(etas)}};
  stage.write("spectral_summary.json", summary.dump(2) + "\n");
  stage.write("manifest_spectral.json", make_manifest(argv, opt, model).to_json());
  stage.commit();
  if (opt.json) {
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << fmt::format("spectral: {} molecules, mean zeta {}, median zeta {}, mean eta {}, median eta {}\n",
                             rows.size(), format_number(mean(zetas)), format_number(median(zetas)),
                             format_number(mean(etas)), format_number(median(etas)));
  }
  return 0;
}

int cmd_expressivity(const Options& opt, const std::vector<std::string>& argv) {
  const auto corpus = load_corpus(opt.corpus);
  const Model model = resolve_model(opt);
  std::vector<std::string> failed;
  const auto rows = run_corpus<std::string>(
      corpus, opt.jobs,
      [&](const CorpusEntry& entry) {
        return expressivity_csv_rows(entry.id, expressivity(forward(entry.graph, model.weights, model.cfg)));
      },
      failed);
  if (!failed.empty()) return report_numerical(failed);
  OutputStage stage(opt.out);
  std::string csv = std::string(kExpressivityCsvHeader) + "\n";
  for (const auto& r : rows) csv += r;
  stage.write("expressivity.csv", csv);
  stage.write("manifest_expressivity.json", make_manifest(argv, opt, model).to_json());
  stage.commit();
  if (opt.json) {
    std::cout << nlohmann::json{{"molecules", rows.size()}, {"layers", model.cfg.layers}}.dump(2) << "\n";
  } else {
    std::cout << fmt::format("expressivity: {} molecules, {} layers\n", rows.size(), model.cfg.layers);
  }
  return 0;
}

int cmd_sensitivity(const Options& opt, const std::vector<std::string>& argv) {
  const auto corpus = load_corpus(opt.corpus);
  const Model model = resolve_model(opt);
  SensitivityOptions sens;
  sens.max_hop = opt.max_hop;
  sens.step = opt.step;
  sens.threads = 1;  // molecules already run in parallel
  std::vector<std::string> failed;
  const auto rows = run_corpus<std::string>(
      corpus, opt.jobs,
      [&](const CorpusEntry& entry) {
        return sensitivity_csv_rows(entry.id, sensitivity(entry.graph, model.weights, model.cfg, sens));
      },
      failed);
  if (!failed.empty()) return report_numerical(failed);
  OutputStage stage(opt.out);
  std::string csv = std::string(kSensitivityCsvHeader) + "\n";
  for (const auto& r : rows) csv += r;
  stage.write("sensitivity.csv", csv);
  stage.write("manifest_sensitivity.json", make_manifest(argv, opt, model).to_json());
  stage.commit();
  if (opt.json) {
    std::cout << nlohmann::json{{"molecules", rows.size()}, {"max_hop", opt.max_hop}}.dump(2) << "\n";
  } else {
    std::cout << fmt::format("sensitivity: {} molecules, hops 0..{}\n", rows.size(), opt.max_hop);
  }
  return 0;
}

/// Header row, numeric columns; the last column is the label.
void read_probe_csv(const std::string& path, Eigen::MatrixXd& features, Eigen::VectorXd& labels) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  int number = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    std::vector<double> values;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Parse, path + ":" + std::to_string(number) + ": bad number '" + cell + "'");
      }
    }
    if (values.size() < 2 || (width && values.size() != width)) {
      throw Error(ErrorCode::Schema, path + ":" + std::to_string(number) + ": inconsistent column count");
    }
    width = values.size();
    rows.push_back(std::move(values));
  }
  features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width ? width - 1 : 0));
  labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c + 1 < width; ++c) features(r, c) = rows[r][c];
    labels(r) = rows[r].back();
  }
}

double atom_label(const MolecularGraph& g, int atom, const std::string& label) {
  if (label == "degree") return g.degree(atom);
  if (label == "implicit_h") return g.atoms()[atom].implicit_h;
  if (label == "centrality") return g.degree(atom) + g.atoms()[atom].implicit_h;
  if (label == "element") return element_index(g.atoms()[atom].element);
  throw Error(ErrorCode::Schema, "unknown probe label '" + label + "'");
}

int cmd_probe(const Options& opt, const std::vector<std::string>& argv) {
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;
  Model model;
  if (!opt.data.empty()) {
    read_probe_csv(opt.data, features, labels);
    model = resolve_model(opt);
  } else {
    const auto corpus = load_corpus(opt.corpus);
    model = resolve_model(opt);
    std::vector<std::string> failed;
    const auto blocks = run_corpus<Eigen::MatrixXd>(
        corpus, opt.jobs,
        [&](const CorpusEntry& entry) {
          const auto trace = forward(entry.graph, model.weights, model.cfg);
          const Eigen::MatrixXd& last = trace.states.back();
          const Eigen::Index skip = model.cfg.include_class_token ? 1 : 0;
          Eigen::MatrixXd block(entry.graph.size(), last.cols() + 1);
          block.leftCols(last.cols()) = last.bottomRows(last.rows() - skip);
          for (int a = 0; a < entry.graph.size(); ++a) block(a, last.cols()) = atom_label(entry.graph, a, opt.label);
          return block;
        },
        failed);
    if (!failed.empty()) return report_numerical(failed);
    Eigen::Index total = 0;
    for (const auto& b : blocks) total += b.rows();
    features.resize(total, model.cfg.dim);
    labels.resize(total);
    Eigen::Index row = 0;
    for (const auto& b : blocks) {
      features.middleRows(row, b.rows()) = b.leftCols(model.cfg.dim);
      labels.segment(row, b.rows()) = b.col(model.cfg.dim);
      row += b.rows();
    }
  }
  ProbeOptions probe;
  probe.alpha = opt.alpha;
  probe.l1_ratio = opt.l1_ratio;
  probe.seed = opt.seed;
  const ProbeResult result = linear_probe(features, labels, probe);
  OutputStage stage(opt.out);
  stage.write("probe.json", probe_json(result));
  stage.write("manifest_probe.json", make_manifest(argv, opt, model).to_json());
  stage.commit();
  if (opt.json) {
    std::cout << probe_json(result);
  } else {
    std::cout << fmt::format("probe: R2 {} on {} held-out samples\n", format_number(result.r2), result.n_test);
  }
  return 0;
}

int cmd_demo(Options opt, const std::vector<std::string>& argv) {
  SanConfig cfg;
  cfg.layers = opt.layers;
  cfg.dim = opt.dim;
  cfg.heads = opt.heads;
  cfg.max_dist = opt.max_dist;
  cfg.seed = opt.seed;
  cfg.mode = parse_forward_mode(opt.mode);
  cfg.include_class_token = opt.class_token;
  {
    OutputStage stage(opt.out);
    stage.write("demo_corpus.smi", demo_corpus_smi());
    stage.write("demo_weights.json", weights_to_json(init_weights(cfg)));
    stage.commit();
  }
  opt.corpus = (fs::path(opt.out) / "demo_corpus.smi").string();
  opt.weights = (fs::path(opt.out) / "demo_weights.json").string();
  for (auto* run : {&cmd_spectral, &cmd_expressivity, &cmd_sensitivity, &cmd_probe}) {
    if (const int code = run(opt, argv); code != 0) return code;
  }
  if (!opt.json) std::cout << "demo: outputs in " << opt.out << "\n";
  return 0;
}

int cmd_verify(const Options& opt) {
  const auto checks = run_verification(opt.tolerance);
  bool ok = true;
  for (const auto& c : checks) ok = ok && c.passed;
  if (opt.json) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& c : checks) {
      doc.push_back({{"name", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}, {"passed", c.passed}});
    }
    std::cout << nlohmann::json{{"passed", ok}, {"checks", doc}}.dump(2) << "\n";
  } else {
    for (const auto& c : checks) {
      std::cout << fmt::format("{:<34} residual {:<24} tolerance {:<8} {}\n", c.name, format_number(c.residual),
                               fmt::format("{:g}", c.tolerance), c.passed ? "PASS" : "FAIL");
    }
    std::cout << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
  }
  return ok ? 0 : kExitVerify;
}

void add_model_flags(CLI::App* cmd, Options& opt, bool with_corpus) {
  if (with_corpus) cmd->add_option("--corpus", opt.corpus, "Molecule file (.smi or .jsonl)");
  cmd->add_option("--weights", opt.weights, "Weights JSON (otherwise seeded random weights)");
  cmd->add_option("--seed", opt.seed, "Seed for weights and the probe split");
  opt.layers_opt = cmd->add_option("--layers", opt.layers, "Self-attention layers");
  cmd->add_option("--dim", opt.dim, "Embedding width");
  cmd->add_option("--heads", opt.heads, "Attention heads");
  cmd->add_option("--max-dist", opt.max_dist, "Distance clip for the attention bias");
  opt.mode_opt = cmd->add_option("--mode", opt.mode, "full | proxy")->check(CLI::IsMember({"full", "proxy"}));
  opt.class_opt = cmd->add_option("--class-token", opt.class_token, "Prepend a class token (true/false)");
  cmd->add_option("--threshold", opt.threshold, "Overlap threshold for matched modes");
  cmd->add_option("--out", opt.out, "Output directory");
  cmd->add_option("--jobs", opt.jobs, "Worker threads (0 = all cores)");
  cmd->add_flag("--json", opt.json, "Machine-readable stdout");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"gtlens: spectral and representational diagnostics for graph transformers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  Options opt;

  auto* spectral = app.add_subcommand("spectral", "Rollout eigen-overlap with Laplacian modes (eta, zeta)");
  add_model_flags(spectral, opt, true);
  spectral->get_option("--corpus")->required();

  auto* express = app.add_subcommand("expressivity", "Layerwise latent expressivity rho_L");
  add_model_flags(express, opt, true);
  express->get_option("--corpus")->required();

  auto* sens = app.add_subcommand("sensitivity", "k-th neighbour sensitivity S_k");
  add_model_flags(sens, opt, true);
  sens->get_option("--corpus")->required();
  sens->add_option("--max-hop", opt.max_hop, "Largest neighbour order k");
  sens->add_option("--step", opt.step, "Central-difference step");

  auto* probe = app.add_subcommand("probe", "Elastic-net linear probe R^2");
  add_model_flags(probe, opt, true);
  probe->add_option("--data", opt.data, "CSV with a header; last column is the label");
  probe->add_option("--label", opt.label, "Per-atom label when probing a corpus")
      ->check(CLI::IsMember({"degree", "implicit_h", "centrality", "element"}));
  probe->add_option("--alpha", opt.alpha, "Regularization strength");
  probe->add_option("--l1-ratio", opt.l1_ratio, "Elastic-net mixing in [0, 1]");

  auto* demo = app.add_subcommand("demo", "Seeded weights + bundled corpus through every analysis");
  add_model_flags(demo, opt, false);

  auto* verify = app.add_subcommand("verify", "Embedded invariant checks");
  verify->add_option("--tol", opt.tolerance, "Replace every tolerance with this value");
  verify->add_flag("--json", opt.json, "Machine-readable results");

  CLI11_PARSE(app, argc, argv);

  // Every subcommand registers its own model flags; look at the one that ran.
  for (auto* cmd : {spectral, express, sens, probe, demo}) {
    if (*cmd) {
      opt.layers_opt = cmd->get_option("--layers");
      opt.mode_opt = cmd->get_option("--mode");
      opt.class_opt = cmd->get_option("--class-token");
    }
  }

  try {
    if (*spectral) return cmd_spectral(opt, args);
    if (*express) return cmd_expressivity(opt, args);
    if (*sens) return cmd_sensitivity(opt, args);
    if (*probe) {
      if (opt.data.empty() && opt.corpus.empty()) {
        std::cerr << "gtlens probe: give --data or --corpus\n";
        return kExitInput;
      }
      return cmd_probe(opt, args);
    }
    if (*demo) return cmd_demo(opt, args);
    if (*verify) return cmd_verify(opt);
  } catch (const Error& e) {
    std::cerr << "gtlens: " << e.what() << "\n";
    return is_numerical(e.code()) ? kExitNumerical : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "gtlens: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
