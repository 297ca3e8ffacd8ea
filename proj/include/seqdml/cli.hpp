#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqdml/csv.hpp"
#include "seqdml/dataset.hpp"
#include "seqdml/diagnostics.hpp"
#include "seqdml/effects.hpp"
#include "seqdml/errors.hpp"
#include "seqdml/scores.hpp"
#include "seqdml/simulation.hpp"

namespace seqdml {

inline constexpr const char* kVersion = "0.3.0";

struct RunConfig {
  std::string mode = "estimate";
  std::string input;
  std::string out = "out";
  TreatmentSequence arm_a{1, 1};
  TreatmentSequence arm_b{0, 0};
  int k = 3;
  std::uint64_t seed = 1;
  double trim = 0.01;
  int reps = 200;
  std::vector<MonteCarloCell> grid{{50, 2500}};
  std::optional<std::string> s_col;  // subgroup column; unset → contrast rule
  bool oracle = false;               // montecarlo: closed-form nuisances
  NuisanceConfig nuisance;
};

namespace cli_detail {

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

inline TreatmentSequence parse_arm(const std::string& text) {
  const std::size_t comma = text.find(',');
  if (comma == std::string::npos) {
    throw Error("bad_config", "arm must be 'd1,d2', got '" + text + "'");
  }
  try {
    return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw Error("bad_config", "arm must be 'd1,d2', got '" + text + "'");
  }
}

inline std::vector<MonteCarloCell> parse_grid(const std::string& text) {
  std::vector<MonteCarloCell> cells;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) {
      throw Error("bad_config", "grid cells are 'p:n', got '" + item + "'");
    }
    try {
      cells.push_back(
          {static_cast<Eigen::Index>(std::stoll(item.substr(0, colon))),
           static_cast<Eigen::Index>(std::stoll(item.substr(colon + 1)))});
    } catch (const std::exception&) {
      throw Error("bad_config", "grid cells are 'p:n', got '" + item + "'");
    }
  }
  if (cells.empty()) throw Error("bad_config", "grid is empty");
  return cells;
}

inline LearnerKind parse_learner_kind(const std::string& name) {
  if (name == "lasso") return LearnerKind::kLinearLasso;
  if (name == "logistic-lasso") return LearnerKind::kLogisticLasso;
  if (name == "forest") return LearnerKind::kForest;
  throw Error("bad_config", "unknown learner '" + name +
                                "'; expected lasso, logistic-lasso or forest");
}

inline void apply_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw Error("file_error", "cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("bad_config", "config parse failure: " + std::string(e.what()));
  }
  cfg.mode = j.value("mode", cfg.mode);
  cfg.input = j.value("input", cfg.input);
  cfg.out = j.value("out", cfg.out);
  if (j.contains("arm_a")) {
    cfg.arm_a = {j["arm_a"].at(0).get<int>(), j["arm_a"].at(1).get<int>()};
  }
  if (j.contains("arm_b")) {
    cfg.arm_b = {j["arm_b"].at(0).get<int>(), j["arm_b"].at(1).get<int>()};
  }
  cfg.k = j.value("k", cfg.k);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.trim = j.value("trim", cfg.trim);
  cfg.reps = j.value("reps", cfg.reps);
  cfg.oracle = j.value("oracle", cfg.oracle);
  if (j.contains("s_col")) cfg.s_col = j["s_col"].get<std::string>();
  if (j.contains("grid")) {
    cfg.grid.clear();
    for (const auto& cell : j["grid"]) {
      cfg.grid.push_back({cell.at(0).get<Eigen::Index>(),
                          cell.at(1).get<Eigen::Index>()});
    }
  }
  if (j.contains("learners")) {
    const auto& l = j["learners"];
    auto& nz = cfg.nuisance;
    if (l.contains("propensity")) {
      nz.propensity.kind = parse_learner_kind(l["propensity"].get<std::string>());
    }
    if (l.contains("outcome")) {
      nz.outcome.kind = parse_learner_kind(l["outcome"].get<std::string>());
    }
    if (l.contains("lambda") && !l["lambda"].is_null()) {
      const double lambda = l["lambda"].get<double>();
      nz.propensity.lambda = lambda;
      nz.outcome.lambda = lambda;
    }
    auto solver = [&](SolverOptions& s) {
      s.tol = l.value("tol", s.tol);
      s.max_sweeps = l.value("max_sweeps", s.max_sweeps);
      s.cv_folds = l.value("cv_folds", s.cv_folds);
      s.grid_size = l.value("grid_size", s.grid_size);
      s.lambda_min_ratio = l.value("lambda_min_ratio", s.lambda_min_ratio);
      s.p_min = l.value("p_min", s.p_min);
    };
    solver(nz.propensity.solver);
    solver(nz.outcome.solver);
    auto forest = [&](ForestOptions& f) {
      f.trees = l.value("trees", f.trees);
      f.min_leaf = l.value("min_leaf", f.min_leaf);
      f.feature_fraction = l.value("feature_fraction", f.feature_fraction);
    };
    forest(nz.propensity.forest);
    forest(nz.outcome.forest);
    nz.min_stratum = l.value("min_stratum", nz.min_stratum);
    nz.pooled_p2 = l.value("pooled_p2", nz.pooled_p2);
  }
}

// Canonical rendering of everything that determines the numbers; hashed into
// the manifest so reruns can be checked for config identity.
inline std::string canonical_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "mode=" << cfg.mode << ";input=" << cfg.input
     << ";arm_a=" << to_string(cfg.arm_a) << ";arm_b=" << to_string(cfg.arm_b)
     << ";k=" << cfg.k << ";seed=" << cfg.seed << ";trim=" << fmt17(cfg.trim)
     << ";reps=" << cfg.reps << ";grid=";
  for (const auto& cell : cfg.grid) os << cell.p << ":" << cell.n << ",";
  os << ";s_col=" << (cfg.s_col ? *cfg.s_col : "<rule>")
     << ";oracle=" << (cfg.oracle ? 1 : 0);
  auto spec = [&](const char* label, const LearnerSpec& s) {
    os << ";" << label << "="
       << static_cast<int>(s.kind) << ","
       << (is_cv_lambda(s.lambda) ? "cv" : fmt17(s.lambda)) << ","
       << fmt17(s.solver.tol) << "," << s.solver.max_sweeps << ","
       << s.solver.cv_folds << "," << s.solver.grid_size << ","
       << fmt17(s.solver.lambda_min_ratio) << "," << fmt17(s.solver.p_min)
       << "," << s.forest.trees << "," << s.forest.min_leaf << ","
       << fmt17(s.forest.feature_fraction);
  };
  spec("prop", cfg.nuisance.propensity);
  spec("outc", cfg.nuisance.outcome);
  os << ";min_stratum=" << cfg.nuisance.min_stratum
     << ";pooled_p2=" << (cfg.nuisance.pooled_p2 ? 1 : 0);
  return os.str();
}

inline std::string config_hash(const RunConfig& cfg) {
  const std::uint64_t h = rng::tag(canonical_config(cfg));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("file_error", "cannot open " + path.string());
  out << text;
  if (!out) throw Error("file_error", "failed writing " + path.string());
}

inline std::string effect_json(const EffectEstimate& e,
                               const std::string& label) {
  std::ostringstream os;
  os << "  {\n"
     << "    \"label\": \"" << json_escape(label) << "\",\n"
     << "    \"arm_a\": [" << e.contrast.first.d1 << ", " << e.contrast.first.d2
     << "],\n"
     << "    \"arm_b\": [" << e.contrast.second.d1 << ", "
     << e.contrast.second.d2 << "],\n"
     << "    \"subgroup\": "
     << (e.subgroup ? "\"" + json_escape(*e.subgroup) + "\"" : "null") << ",\n"
     << "    \"estimate\": " << fmt17(e.estimate) << ",\n"
     << "    \"se\": " << fmt17(e.se) << ",\n"
     << "    \"ci_low\": " << fmt17(e.ci_low) << ",\n"
     << "    \"ci_high\": " << fmt17(e.ci_high) << ",\n"
     << "    \"p_value\": " << fmt17(e.p_value) << ",\n"
     << "    \"n_used\": " << e.n_used << ",\n"
     << "    \"n_trimmed\": " << e.n_trimmed << "\n"
     << "  }";
  return os.str();
}

inline void write_effects_json(const std::filesystem::path& path,
                               const std::vector<std::string>& records) {
  std::string text = "[\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    text += records[i];
    if (i + 1 < records.size()) text += ",";
    text += "\n";
  }
  text += "]\n";
  write_text(path, text);
}

inline void write_manifest(const std::filesystem::path& dir,
                           const RunConfig& cfg) {
  std::ostringstream os;
  os << "{\n"
     << "  \"tool\": \"seqdml\",\n"
     << "  \"version\": \"" << kVersion << "\",\n"
     << "  \"eigen\": \"" << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION
     << "." << EIGEN_MINOR_VERSION << "\",\n"
     << "  \"mode\": \"" << json_escape(cfg.mode) << "\",\n"
     << "  \"input\": \"" << json_escape(cfg.input) << "\",\n"
     << "  \"arm_a\": [" << cfg.arm_a.d1 << ", " << cfg.arm_a.d2 << "],\n"
     << "  \"arm_b\": [" << cfg.arm_b.d1 << ", " << cfg.arm_b.d2 << "],\n"
     << "  \"k\": " << cfg.k << ",\n"
     << "  \"seed\": " << cfg.seed << ",\n"
     << "  \"trim\": " << fmt17(cfg.trim) << ",\n"
     << "  \"config_hash\": \"" << config_hash(cfg) << "\"\n"
     << "}\n";
  write_text(dir / "manifest.json", os.str());
}

inline void write_overlap_csv(const std::filesystem::path& path,
                              const OverlapPanel& panel) {
  std::string text = "bin_low,bin_high,count_group,count_rest\n";
  for (std::size_t b = 0; b < panel.count_group.size(); ++b) {
    text += fmt17(panel.bin_edges[b]) + "," + fmt17(panel.bin_edges[b + 1]) +
            "," + std::to_string(panel.count_group[b]) + "," +
            std::to_string(panel.count_rest[b]) + "\n";
  }
  write_text(path, text);
}

inline void write_trimming_csv(const std::filesystem::path& path,
                               const std::vector<TrimmingRow>& rows_a,
                               const TreatmentSequence& a,
                               const std::vector<TrimmingRow>& rows_b,
                               const TreatmentSequence& b) {
  std::string text = "arm,d1,d2,threshold,n_kept,n_trimmed\n";
  auto emit = [&](const char* label, const TreatmentSequence& seq,
                  const std::vector<TrimmingRow>& rows) {
    for (const auto& row : rows) {
      text += std::string(label) + "," + std::to_string(seq.d1) + "," +
              std::to_string(seq.d2) + "," + fmt17(row.threshold) + "," +
              std::to_string(row.n_kept) + "," + std::to_string(row.n_trimmed) +
              "\n";
    }
  };
  emit("a", a, rows_a);
  emit("b", b, rows_b);
  write_text(path, text);
}

inline void write_montecarlo_csv(const std::filesystem::path& path,
                                 const std::vector<MonteCarloReport>& rows) {
  std::string text =
      "estimator,p,n,reps,true_effect,bias,sd,avg_se,rmse,coverage_pct\n";
  for (const auto& r : rows) {
    text += r.estimator + "," + std::to_string(r.p) + "," +
            std::to_string(r.n) + "," + std::to_string(r.reps) + "," +
            fmt17(r.true_effect) + "," + fmt17(r.bias) + "," + fmt17(r.sd) +
            "," + fmt17(r.avg_se) + "," + fmt17(r.rmse) + "," +
            fmt17(r.coverage_pct) + "\n";
  }
  write_text(path, text);
}

inline std::vector<double> trim_thresholds(double configured) {
  std::vector<double> t{0.0, 0.01, 0.03, 0.05};
  if (std::find(t.begin(), t.end(), configured) == t.end()) {
    t.push_back(configured);
    std::sort(t.begin(), t.end());
  }
  return t;
}

inline Eigen::VectorXi subgroup_vector(const PanelDataset& data,
                                       const RunConfig& cfg,
                                       std::string* label) {
  if (cfg.s_col) {
    if (!data.s) {
      throw Error("bad_config",
                  "subgroup column '" + *cfg.s_col + "' not found in input");
    }
    *label = *cfg.s_col;
    return *data.s;
  }
  // Application rule: first-period treatment matches either arm of the
  // contrast.
  Eigen::VectorXi s(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    s[i] = (data.d1[i] == cfg.arm_a.d1 || data.d1[i] == cfg.arm_b.d1) ? 1 : 0;
  }
  *label = "d1 in {" + std::to_string(cfg.arm_a.d1) + "," +
           std::to_string(cfg.arm_b.d1) + "}";
  return s;
}

inline void require_contrast(const RunConfig& cfg, int q) {
  auto in_support = [&](const TreatmentSequence& seq) {
    return seq.d1 >= 0 && seq.d1 <= q && seq.d2 >= 0 && seq.d2 <= q;
  };
  if (!in_support(cfg.arm_a) || !in_support(cfg.arm_b)) {
    throw Error("invalid_contrast", "arm outside the treatment support {0.." +
                                        std::to_string(q) + "}");
  }
  if (cfg.arm_a == cfg.arm_b) {
    throw Error("invalid_contrast", "contrast arms are identical");
  }
  if (cfg.arm_a.d1 == cfg.arm_b.d1) {
    throw Error("invalid_contrast",
                "same first-period treatment; use static/placebo mode");
  }
}

inline void run_estimate(const RunConfig& cfg, bool weighted) {
  if (cfg.input.empty()) {
    throw Error("bad_config", "estimate modes require --input");
  }
  const PanelDataset data =
      read_dataset_csv(cfg.input, cfg.s_col ? *cfg.s_col : "s");
  require_contrast(cfg, data.q);
  if (data.n() < 2 * static_cast<Eigen::Index>(cfg.k)) {
    throw Error("too_few_rows", "need at least " + std::to_string(2 * cfg.k) +
                                    " rows for " + std::to_string(cfg.k) +
                                    "-fold cross-fitting");
  }
  const FoldPlan plan = make_folds(data.n(), cfg.k, cfg.seed);

  std::optional<Eigen::VectorXi> subgroup;
  std::string s_label;
  if (weighted) subgroup = subgroup_vector(data, cfg, &s_label);

  const NuisanceFits fits_a =
      cross_fit(data, cfg.arm_a, plan, cfg.nuisance, subgroup);
  const NuisanceFits fits_b =
      cross_fit(data, cfg.arm_b, plan, cfg.nuisance, subgroup);

  const ScoreVector sv_a = score_psi(data, fits_a, cfg.trim);
  const ScoreVector sv_b = score_psi(data, fits_b, cfg.trim);

  std::vector<std::string> records;
  records.push_back(
      effect_json(estimate_potential_outcome(sv_a), "potential_outcome_a"));
  records.push_back(
      effect_json(estimate_potential_outcome(sv_b), "potential_outcome_b"));
  records.push_back(effect_json(estimate_ate(sv_a, sv_b), "ate"));

  if (weighted) {
    const WeightedScore wv_a =
        score_psi_weighted(data, fits_a, *subgroup, cfg.trim);
    const WeightedScore wv_b =
        score_psi_weighted(data, fits_b, *subgroup, cfg.trim);
    records.push_back(
        effect_json(estimate_weighted_potential_outcome(wv_a, s_label),
                    "weighted_potential_outcome_a"));
    records.push_back(
        effect_json(estimate_weighted_potential_outcome(wv_b, s_label),
                    "weighted_potential_outcome_b"));
    records.push_back(effect_json(estimate_weighted_ate(wv_a, wv_b, s_label),
                                  "weighted_ate"));
  }

  const std::filesystem::path dir(cfg.out);
  write_effects_json(dir / "effects.json", records);
  const OverlapReport ov_a = overlap_report(fits_a, data);
  const OverlapReport ov_b = overlap_report(fits_b, data);
  write_overlap_csv(dir / "overlap_a_p1.csv", ov_a.panels[0]);
  write_overlap_csv(dir / "overlap_a_p2.csv", ov_a.panels[1]);
  write_overlap_csv(dir / "overlap_b_p1.csv", ov_b.panels[0]);
  write_overlap_csv(dir / "overlap_b_p2.csv", ov_b.panels[1]);
  const auto thresholds = trim_thresholds(cfg.trim);
  write_trimming_csv(dir / "trimming.csv",
                     trimming_table(fits_a, thresholds), cfg.arm_a,
                     trimming_table(fits_b, thresholds), cfg.arm_b);
  write_manifest(dir, cfg);
}

// Static pseudo-treatment analysis: d1 as a binary treatment against the
// baseline covariates only.
inline void run_placebo(const RunConfig& cfg) {
  if (cfg.input.empty()) {
    throw Error("bad_config", "placebo mode requires --input");
  }
  const PanelDataset data = read_dataset_csv(cfg.input);
  if (data.n() < 2 * static_cast<Eigen::Index>(cfg.k)) {
    throw Error("too_few_rows", "need at least " + std::to_string(2 * cfg.k) +
                                    " rows for " + std::to_string(cfg.k) +
                                    "-fold cross-fitting");
  }
  const FoldPlan plan = make_folds(data.n(), cfg.k, cfg.seed);
  const EffectEstimate e = estimate_placebo(data.y2, data.d1, data.x0, plan,
                                            cfg.nuisance, cfg.trim);
  const std::filesystem::path dir(cfg.out);
  write_effects_json(dir / "effects.json", {effect_json(e, "placebo")});
  write_manifest(dir, cfg);
}

inline void run_montecarlo(const RunConfig& cfg) {
  MonteCarloConfig mc;
  mc.k = cfg.k;
  mc.trim = cfg.trim;
  mc.seed = cfg.seed;
  mc.nuisance = cfg.nuisance;
  mc.use_oracle = cfg.oracle;
  const std::vector<MonteCarloReport> rows =
      run_monte_carlo(cfg.grid, cfg.reps, mc);
  const std::filesystem::path dir(cfg.out);
  write_montecarlo_csv(dir / "montecarlo.csv", rows);
  write_manifest(dir, cfg);
}

inline void run_audit(const RunConfig& cfg) {
  PanelDataset data;
  if (!cfg.input.empty()) {
    data = read_dataset_csv(cfg.input);
  } else if (cfg.grid.size() == 1) {
    data = simulate_dgp({cfg.grid[0].n, cfg.grid[0].p,
                         rng::derive(cfg.seed, rng::tag("dgp_audit"))});
  } else {
    throw Error("bad_config",
                "audit mode needs --input or a single-cell --grid");
  }
  const AuditReport rep = confounding_audit(data);
  std::ostringstream os;
  os << "{\n"
     << "  \"r2_outcome\": " << fmt17(rep.r2_outcome) << ",\n"
     << "  \"pseudo_r2_d1\": " << fmt17(rep.pseudo_r2_d1) << ",\n"
     << "  \"pseudo_r2_d2\": " << fmt17(rep.pseudo_r2_d2) << "\n"
     << "}\n";
  const std::filesystem::path dir(cfg.out);
  write_text(dir / "audit.json", os.str());
  write_manifest(dir, cfg);
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  RunConfig cfg;
  std::string config_path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      config_path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      config_path = arg.substr(9);
    }
  }

  try {
    if (!config_path.empty()) cli_detail::apply_config_file(config_path, cfg);

    CLI::App app{
        "Double machine learning for dynamic (two-period) treatment effects"};
    app.set_version_flag("--version", kVersion);
    std::string ignored_config;
    std::string arm_a_text, arm_b_text, grid_text, s_col_text;
    app.add_option("--config", ignored_config,
                   "JSON config file (flags override its values)");
    app.add_option("--mode", cfg.mode,
                   "estimate | weighted | placebo | montecarlo | audit");
    app.add_option("--input", cfg.input, "input CSV (dataset contract)");
    app.add_option("--arm-a", arm_a_text, "first sequence, as d1,d2");
    app.add_option("--arm-b", arm_b_text, "second sequence, as d1,d2");
    app.add_option("--k", cfg.k, "cross-fitting folds");
    app.add_option("--seed", cfg.seed, "RNG seed");
    app.add_option("--trim", cfg.trim, "propensity-product trimming threshold");
    app.add_option("--out", cfg.out, "output directory");
    app.add_option("--reps", cfg.reps, "Monte Carlo replications");
    app.add_option("--grid", grid_text, "Monte Carlo cells, p:n[,p:n...]");
    app.add_option("--s-col", s_col_text, "subgroup column for weighted mode");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);  // --help/--version exit 0
    }

    if (!arm_a_text.empty()) cfg.arm_a = cli_detail::parse_arm(arm_a_text);
    if (!arm_b_text.empty()) cfg.arm_b = cli_detail::parse_arm(arm_b_text);
    if (!grid_text.empty()) cfg.grid = cli_detail::parse_grid(grid_text);
    if (!s_col_text.empty()) cfg.s_col = s_col_text;

    if (cfg.k < 2) throw Error("bad_config", "K must be at least 2");
    if (cfg.trim < 0.0 || cfg.trim >= 1.0) {
      throw Error("bad_config", "trim must lie in [0,1)");
    }

    std::filesystem::create_directories(cfg.out);

    if (cfg.mode == "estimate") {
      cli_detail::run_estimate(cfg, /*weighted=*/false);
    } else if (cfg.mode == "weighted") {
      cli_detail::run_estimate(cfg, /*weighted=*/true);
    } else if (cfg.mode == "placebo") {
      cli_detail::run_placebo(cfg);
    } else if (cfg.mode == "montecarlo") {
      cli_detail::run_montecarlo(cfg);
    } else if (cfg.mode == "audit") {
      cli_detail::run_audit(cfg);
    } else {
      throw Error("bad_config",
                  "unknown mode '" + cfg.mode +
                      "'; expected estimate, weighted, placebo, montecarlo "
                      "or audit");
    }
    return 0;
  } catch (const Error& e) {
    const std::string record =
        std::string("{\"error\": {\"code\": \"") +
        cli_detail::json_escape(e.code()) + "\", \"message\": \"" +
        cli_detail::json_escape(e.what()) + "\"}}";
    std::cerr << record << std::endl;
    std::error_code ec;
    if (std::filesystem::is_directory(cfg.out, ec)) {
      std::ofstream out(std::filesystem::path(cfg.out) / "error.json");
      out << record << "\n";
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\": {\"code\": \"internal\", \"message\": \""
              << cli_detail::json_escape(e.what()) << "\"}}" << std::endl;
    return 1;
  }
}

}  // namespace seqdml
