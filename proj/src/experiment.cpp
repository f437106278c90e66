#include "nsp/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "nsp/error.hpp"

#ifndef NSP_VERSION
#define NSP_VERSION "0.1.0"
#endif

namespace nsp {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version_string() { return NSP_VERSION; }

namespace {

std::string_view attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Gradient: return "gradient";
    case AttackKind::BruteForce: return "brute_force";
    case AttackKind::External: return "external";
  }
  return "none";
}

AttackKind parse_attack_kind(const std::string& s) {
  for (AttackKind k : {AttackKind::None, AttackKind::Gradient, AttackKind::BruteForce, AttackKind::External})
    if (attack_kind_name(k) == s) return k;
  throw Error(ErrorCode::InvalidConfig, "unknown attack kind '" + s + "'");
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

ModelSpec model_from_name(const std::string& name) {
  ModelSpec m;
  m.name = name;
  if (name == "nsp_sanitize") {
    m.variant = Variant::Gcn;
    m.sanitize = true;
  } else {
    m.variant = parse_variant(name);
  }
  return m;
}

std::string budget_label(double b) {
  std::ostringstream os;
  os << b;
  return os.str();
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("experiment config: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    reject_unknown(j, {"dataset", "attack", "models", "train", "k_grid", "analysis_taus",
                       "sanitize_keep_fraction", "seeds", "output_dir", "workers"},
                   "config");
    if (!j.contains("dataset")) throw Error(ErrorCode::InvalidConfig, "config needs a 'dataset'");
    const json& ds = j.at("dataset");
    if (ds.contains("synthetic")) {
      const json& s = ds.at("synthetic");
      reject_unknown(s, {"n_nodes", "n_classes", "mean_degree", "homophily", "feature_dim", "class_separation",
                         "feature_noise", "seed", "train_fraction", "val_fraction"},
                     "dataset.synthetic");
      SyntheticSpec spec;
      read_opt(s, "n_nodes", spec.n_nodes);
      read_opt(s, "n_classes", spec.n_classes);
      read_opt(s, "mean_degree", spec.mean_degree);
      read_opt(s, "homophily", spec.homophily);
      read_opt(s, "feature_dim", spec.feature_dim);
      read_opt(s, "class_separation", spec.class_separation);
      read_opt(s, "feature_noise", spec.feature_noise);
      read_opt(s, "seed", spec.seed);
      read_opt(s, "train_fraction", spec.train_fraction);
      read_opt(s, "val_fraction", spec.val_fraction);
      validate_spec(spec);
      cfg.synthetic = spec;
    } else if (ds.contains("files")) {
      const json& f = ds.at("files");
      reject_unknown(f, {"edges", "features", "labels", "split"}, "dataset.files");
      io::DatasetPaths p;
      p.edges = resolve(base_dir, f.at("edges").get<std::string>());
      p.features = resolve(base_dir, f.at("features").get<std::string>());
      p.labels = resolve(base_dir, f.at("labels").get<std::string>());
      if (f.contains("split")) p.split = resolve(base_dir, f.at("split").get<std::string>());
      for (const fs::path& path : {p.edges, p.features, p.labels})
        if (!fs::exists(path)) throw Error(ErrorCode::InvalidConfig, "dataset file '" + path.string() + "' does not exist");
      cfg.files = p;
    } else {
      throw Error(ErrorCode::InvalidConfig, "dataset needs 'synthetic' or 'files'");
    }

    if (j.contains("attack")) {
      const json& a = j.at("attack");
      reject_unknown(a, {"kind", "budgets", "mode", "surrogate_tau", "surrogate_epochs", "surrogate_lr", "seed",
                         "max_nodes", "poisoned_edges"},
                     "attack");
      if (a.contains("kind")) cfg.attack = parse_attack_kind(a.at("kind").get<std::string>());
      read_opt(a, "budgets", cfg.budgets);
      if (a.contains("mode")) cfg.attack_config.mode = parse_attack_mode(a.at("mode").get<std::string>());
      read_opt(a, "surrogate_tau", cfg.attack_config.surrogate_tau);
      read_opt(a, "surrogate_epochs", cfg.attack_config.surrogate_epochs);
      read_opt(a, "surrogate_lr", cfg.attack_config.surrogate_lr);
      read_opt(a, "seed", cfg.attack_config.seed);
      read_opt(a, "max_nodes", cfg.attack_config.max_nodes);
      if (a.contains("poisoned_edges")) cfg.poisoned_edges = resolve(base_dir, a.at("poisoned_edges").get<std::string>());
    }
    if (cfg.attack == AttackKind::External && !cfg.poisoned_edges) {
      throw Error(ErrorCode::InvalidConfig, "external attack needs 'poisoned_edges'");
    }
    if (cfg.poisoned_edges && !fs::exists(*cfg.poisoned_edges)) {
      throw Error(ErrorCode::InvalidConfig, "poisoned edge file '" + cfg.poisoned_edges->string() + "' does not exist");
    }
    for (double b : cfg.budgets)
      if (!(b >= 0.0 && b <= 0.5)) throw Error(ErrorCode::InvalidConfig, "budgets must lie in [0, 0.5]");

    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown(t, {"lr", "epochs", "hidden", "k_pos", "k_neg", "taus", "sgc_tau", "patience"}, "train");
      read_opt(t, "lr", cfg.train.lr);
      read_opt(t, "epochs", cfg.train.epochs);
      read_opt(t, "hidden", cfg.train.hidden);
      read_opt(t, "k_pos", cfg.train.k_pos);
      read_opt(t, "k_neg", cfg.train.k_neg);
      read_opt(t, "taus", cfg.train.taus);
      read_opt(t, "sgc_tau", cfg.train.sgc_tau);
      if (t.contains("patience") && !t.at("patience").is_null()) cfg.train.patience = t.at("patience").get<std::size_t>();
    }
    validate_config(cfg.train);

    if (j.contains("models")) {
      for (const json& m : j.at("models")) {
        if (m.is_string()) {
          cfg.models.push_back(model_from_name(m.get<std::string>()));
          continue;
        }
        reject_unknown(m, {"name", "variant", "sanitize", "k_pos", "k_neg", "taus"}, "models[]");
        ModelSpec spec = model_from_name(m.value("variant", std::string("nspgnn")));
        spec.name = m.value("name", spec.name);
        read_opt(m, "sanitize", spec.sanitize);
        if (m.contains("k_pos")) spec.k_pos = m.at("k_pos").get<std::size_t>();
        if (m.contains("k_neg")) spec.k_neg = m.at("k_neg").get<std::size_t>();
        if (m.contains("taus")) spec.taus = m.at("taus").get<std::vector<int>>();
        cfg.models.push_back(std::move(spec));
      }
    } else {
      cfg.models = {model_from_name("gcn"), model_from_name("nspgnn")};
    }
    std::set<std::string> names;
    for (const auto& m : cfg.models)
      if (!names.insert(m.name).second) throw Error(ErrorCode::InvalidConfig, "duplicate model name '" + m.name + "'");

    if (j.contains("k_grid")) {
      const json& k = j.at("k_grid");
      reject_unknown(k, {"k_pos", "k_neg"}, "k_grid");
      read_opt(k, "k_pos", cfg.k_grid_pos);
      read_opt(k, "k_neg", cfg.k_grid_neg);
      if (cfg.k_grid_pos.empty() != cfg.k_grid_neg.empty()) {
        throw Error(ErrorCode::InvalidConfig, "k_grid needs both k_pos and k_neg lists");
      }
    }
    read_opt(j, "analysis_taus", cfg.analysis_taus);
    read_opt(j, "sanitize_keep_fraction", cfg.sanitize_keep_fraction);
    read_opt(j, "seeds", cfg.seeds);
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    read_opt(j, "workers", cfg.workers);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("experiment config: ") + e.what());
  }
  if (cfg.seeds.empty()) throw Error(ErrorCode::InvalidConfig, "seeds must be non-empty");
  if (cfg.budgets.empty()) throw Error(ErrorCode::InvalidConfig, "budgets must be non-empty");
  if (cfg.workers == 0) cfg.workers = 1;
  return cfg;
}

namespace {

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    j["dataset"]["synthetic"] = {{"n_nodes", s.n_nodes},           {"n_classes", s.n_classes},
                                 {"mean_degree", s.mean_degree},   {"homophily", s.homophily},
                                 {"feature_dim", s.feature_dim},   {"class_separation", s.class_separation},
                                 {"feature_noise", s.feature_noise}, {"seed", s.seed},
                                 {"train_fraction", s.train_fraction}, {"val_fraction", s.val_fraction}};
  } else if (cfg.files) {
    j["dataset"]["files"] = {{"edges", cfg.files->edges.string()},
                             {"features", cfg.files->features.string()},
                             {"labels", cfg.files->labels.string()}};
    if (cfg.files->split) j["dataset"]["files"]["split"] = cfg.files->split->string();
  }
  j["attack"] = {{"kind", attack_kind_name(cfg.attack)},
                 {"budgets", cfg.budgets},
                 {"mode", to_string(cfg.attack_config.mode)},
                 {"surrogate_tau", cfg.attack_config.surrogate_tau},
                 {"surrogate_epochs", cfg.attack_config.surrogate_epochs},
                 {"surrogate_lr", cfg.attack_config.surrogate_lr},
                 {"seed", cfg.attack_config.seed},
                 {"max_nodes", cfg.attack_config.max_nodes}};
  if (cfg.poisoned_edges) j["attack"]["poisoned_edges"] = cfg.poisoned_edges->string();
  j["models"] = json::array();
  for (const auto& m : cfg.models) {
    json mj{{"name", m.name}, {"variant", to_string(m.variant)}, {"sanitize", m.sanitize}};
    if (m.k_pos) mj["k_pos"] = *m.k_pos;
    if (m.k_neg) mj["k_neg"] = *m.k_neg;
    if (m.taus) mj["taus"] = *m.taus;
    j["models"].push_back(mj);
  }
  j["train"] = {{"lr", cfg.train.lr},         {"epochs", cfg.train.epochs}, {"hidden", cfg.train.hidden},
                {"k_pos", cfg.train.k_pos},   {"k_neg", cfg.train.k_neg},   {"taus", cfg.train.taus},
                {"sgc_tau", cfg.train.sgc_tau}, {"patience", cfg.train.patience ? json(*cfg.train.patience) : json(nullptr)}};
  j["k_grid"] = {{"k_pos", cfg.k_grid_pos}, {"k_neg", cfg.k_grid_neg}};
  j["analysis_taus"] = cfg.analysis_taus;
  j["sanitize_keep_fraction"] = cfg.sanitize_keep_fraction;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir.string();
  j["workers"] = cfg.workers;
  return j;
}

// A model to train with everything resolved.
struct ResolvedModel {
  std::string name;
  Variant variant;
  bool sanitize;
  std::size_t k_pos, k_neg;
  std::vector<int> taus;
};

std::vector<ResolvedModel> resolve_models(const ExperimentConfig& cfg) {
  std::vector<ResolvedModel> out;
  for (const auto& m : cfg.models) {
    out.push_back({m.name, m.variant, m.sanitize, m.k_pos.value_or(cfg.train.k_pos),
                   m.k_neg.value_or(cfg.train.k_neg), m.taus.value_or(cfg.train.taus)});
  }
  for (std::size_t kp : cfg.k_grid_pos)
    for (std::size_t kn : cfg.k_grid_neg)
      out.push_back({"nspgnn_k" + std::to_string(kp) + "_" + std::to_string(kn), Variant::Nspgnn, false, kp, kn,
                     cfg.train.taus});
  return out;
}

}  // namespace

std::string experiment_config_json(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(2); }

std::pair<double, double> mean_stderr(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;

  Dataset base = cfg.synthetic ? generate_synthetic(*cfg.synthetic)
                               : io::load_dataset(*cfg.files, cfg.seeds.front());
  result.stats = io::dataset_stats(base);
  const bool split_from_file = cfg.files && cfg.files->split && fs::exists(*cfg.files->split);

  // One graph per budget.
  std::vector<Graph> graphs;
  std::optional<Graph> external;
  if (cfg.attack == AttackKind::External) {
    external = build_graph(io::read_edge_list(*cfg.poisoned_edges), base.n_nodes());
  }
  for (double b : cfg.budgets) {
    AttackSummary summary;
    summary.budget = b;
    Graph g = base.graph;
    try {
      if (b > 0.0 && cfg.attack != AttackKind::None) {
        AttackConfig ac = cfg.attack_config;
        ac.budget_fraction = b;
        if (cfg.attack == AttackKind::External) {
          g = *external;
        } else {
          const AttackReport rep = cfg.attack == AttackKind::Gradient ? gradient_attack(base, ac)
                                                                      : brute_force_attack(base, ac);
          summary.n_flips = rep.flips.size();
          summary.clean_loss = rep.clean_loss;
          summary.final_loss = rep.final_loss;
          g = rep.poisoned;
        }
        if (!cfg.analysis_taus.empty()) {
          summary.separation = separation_report(base.graph, g, base.features, cfg.analysis_taus);
        }
      }
      if (g.n_edges() > 0) summary.homophily = homophily_ratio(g, base.labels);
    } catch (const Error& e) {
      summary.error = e.what();
    }
    if (write_outputs && b > 0.0 && cfg.attack != AttackKind::None && summary.error.empty()) {
      const fs::path dir = cfg.output_dir / ("attack_" + budget_label(b));
      io::write_edge_list(dir / "poisoned_edges.tsv", g);
      for (const auto& row : summary.separation) {
        try {
          io::write_density(dir, row.scores);
        } catch (const Error&) {
        }
      }
    }
    graphs.push_back(std::move(g));
    result.attacks.push_back(std::move(summary));
  }

  const auto models = resolve_models(cfg);

  // Shared read-only inputs, built before any worker starts.
  using DualKey = std::tuple<std::size_t, std::size_t, std::size_t, std::vector<int>>;
  std::map<DualKey, std::shared_ptr<const DualKnnGraphs>> duals;
  std::map<std::size_t, std::shared_ptr<const Graph>> sanitized;
  std::map<DualKey, std::string> dual_errors;
  std::map<std::size_t, std::string> sanitize_errors;
  for (std::size_t bi = 0; bi < graphs.size(); ++bi) {
    if (!result.attacks[bi].error.empty()) continue;
    for (const auto& m : models) {
      if (needs_dual(m.variant)) {
        DualKey key{bi, m.k_pos, m.k_neg, m.taus};
        if (duals.count(key) || dual_errors.count(key)) continue;
        try {
          duals[key] = std::make_shared<const DualKnnGraphs>(
              build_dual_knn(graphs[bi], base.features, m.k_pos, m.k_neg, m.taus));
        } catch (const Error& e) {
          dual_errors[key] = e.what();
        }
      }
      if (m.sanitize && !sanitized.count(bi) && !sanitize_errors.count(bi)) {
        try {
          SanitizePolicy pol;
          pol.keep_fraction = cfg.sanitize_keep_fraction;
          sanitized[bi] = std::make_shared<const Graph>(nsp_sanitize(graphs[bi], base.features, pol, cfg.train.taus));
        } catch (const Error& e) {
          sanitize_errors[bi] = e.what();
        }
      }
    }
  }

  struct Job {
    std::size_t budget_index;
    const ResolvedModel* model;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t bi = 0; bi < graphs.size(); ++bi)
    for (const auto& m : models)
      for (std::uint64_t s : cfg.seeds) jobs.push_back({bi, &m, s});
  result.cells.resize(jobs.size());

  auto run_job = [&](std::size_t idx) {
    const Job& job = jobs[idx];
    CellResult& cell = result.cells[idx];
    cell.model = job.model->name;
    cell.budget = cfg.budgets[job.budget_index];
    cell.seed = job.seed;
    try {
      if (!result.attacks[job.budget_index].error.empty()) {
        throw Error(ErrorCode::InvalidConfig, "attack failed: " + result.attacks[job.budget_index].error);
      }
      Dataset d = with_graph(base, graphs[job.budget_index]);
      if (job.model->sanitize) {
        if (sanitize_errors.count(job.budget_index)) throw Error(ErrorCode::EmptyGraph, sanitize_errors.at(job.budget_index));
        d.graph = *sanitized.at(job.budget_index);
      }
      if (!split_from_file) {
        const double tf = cfg.synthetic ? cfg.synthetic->train_fraction : 0.1;
        const double vf = cfg.synthetic ? cfg.synthetic->val_fraction : 0.1;
        d.split = stratified_split(d.labels, tf, vf, job.seed);
      }
      TrainConfig tc = cfg.train;
      tc.seed = job.seed;
      tc.variant = job.model->variant;
      tc.k_pos = job.model->k_pos;
      tc.k_neg = job.model->k_neg;
      tc.taus = job.model->taus;
      const DualKnnGraphs* dual = nullptr;
      if (needs_dual(tc.variant)) {
        DualKey key{job.budget_index, tc.k_pos, tc.k_neg, tc.taus};
        if (dual_errors.count(key)) throw Error(ErrorCode::InvalidK, dual_errors.at(key));
        dual = duals.at(key).get();
      }
      cell.result = train(d, dual, tc);
    } catch (const Error& e) {
      cell.error = e.what();
    }
  };

  const std::size_t n_workers = std::min(cfg.workers, std::max<std::size_t>(jobs.size(), 1));
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next >= jobs.size()) return;
            i = next++;
          }
          run_job(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (std::size_t bi = 0; bi < graphs.size(); ++bi) {
    for (const auto& m : models) {
      std::vector<double> accs;
      for (const auto& c : result.cells)
        if (c.model == m.name && c.budget == cfg.budgets[bi] && c.result) accs.push_back(c.result->test_accuracy);
      const auto [mean, se] = mean_stderr(accs);
      result.summary.push_back({m.name, cfg.budgets[bi], mean, se, accs.size()});
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (write_outputs) {
    fs::create_directories(cfg.output_dir);
    std::ofstream(cfg.output_dir / "results.json") << results_json(cfg, result) << '\n';
  }
  return result;
}

std::string results_json(const ExperimentConfig& cfg, const ExperimentResult& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["version"] = version_string();
  j["config"] = config_to_json(cfg);
  j["dataset_stats"] = {{"n_nodes", r.stats.n_nodes},
                        {"n_edges", r.stats.n_edges},
                        {"n_classes", r.stats.n_classes},
                        {"n_features", r.stats.n_features},
                        {"homophily", opt(r.stats.homophily)}};
  j["attacks"] = json::array();
  for (const auto& a : r.attacks) {
    json aj{{"budget", a.budget},         {"n_flips", a.n_flips},       {"homophily", opt(a.homophily)},
            {"clean_loss", a.clean_loss}, {"final_loss", a.final_loss}, {"error", a.error.empty() ? json(nullptr) : json(a.error)}};
    aj["separation"] = json::array();
    for (const auto& s : a.separation) {
      aj["separation"].push_back({{"tau", s.tau},
                                  {"kl", opt(s.kl)},
                                  {"error", s.error.empty() ? json(nullptr) : json(s.error)},
                                  {"n_benign", s.scores.benign.size()},
                                  {"n_malicious", s.scores.malicious.size()},
                                  {"n_removed", s.scores.removed.size()}});
    }
    j["attacks"].push_back(aj);
  }
  j["cells"] = json::array();
  for (const auto& c : r.cells) {
    json cj{{"model", c.model}, {"budget", c.budget}, {"seed", c.seed}};
    if (c.result) {
      cj["test_accuracy"] = c.result->test_accuracy;
      cj["train_accuracy"] = c.result->train_accuracy;
      cj["best_val_accuracy"] = c.result->best_val_accuracy;
      cj["best_epoch"] = c.result->best_epoch;
      cj["train_loss"] = c.result->train_loss;
      cj["val_accuracy"] = c.result->val_accuracy;
      cj["seconds"] = c.result->seconds;
      cj["error"] = nullptr;
    } else {
      cj["error"] = c.error;
    }
    j["cells"].push_back(cj);
  }
  j["summary"] = json::array();
  for (const auto& s : r.summary) {
    j["summary"].push_back({{"model", s.model}, {"budget", s.budget}, {"mean_test_accuracy", s.mean},
                            {"stderr_test_accuracy", s.stderr_}, {"n", s.n}});
  }
  j["runtime_seconds"] = r.seconds;
  return j.dump(2);
}

std::string results_metrics_json(const std::string& text) {
  json j = json::parse(text);
  j.erase("runtime_seconds");
  for (auto& c : j["cells"]) c.erase("seconds");
  return j.dump();
}

const SummaryRow* find_summary(const ExperimentResult& r, const std::string& model, double budget) {
  for (const auto& s : r.summary)
    if (s.model == model && s.budget == budget) return &s;
  return nullptr;
}

}  // namespace nsp
