// Command-line front end. Exit codes: 0 ok, 1 usage / config, 2 data, 3 numerical.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nsp/attack.hpp"
#include "nsp/dual_knn.hpp"
#include "nsp/error.hpp"
#include "nsp/experiment.hpp"
#include "nsp/io.hpp"
#include "nsp/kernels.hpp"
#include "nsp/similarity.hpp"
#include "nsp/synthetic.hpp"
#include "nsp/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nsp;

namespace {

struct DataArgs {
  std::string dir;
  std::string edges, features, labels, split;
  std::string graph;  // replaces the edge list, e.g. a poisoned graph
  std::uint64_t split_seed = 0;

  void add(CLI::App* cmd, bool with_graph = true) {
    cmd->add_option("--data", dir, "Directory holding edges.tsv, features.csv, labels.csv[, split.json]");
    cmd->add_option("--edges", edges, "Edge list TSV");
    cmd->add_option("--features", features, "Feature CSV");
    cmd->add_option("--labels", labels, "Label CSV");
    cmd->add_option("--split", split, "Split JSON");
    cmd->add_option("--split-seed", split_seed, "Seed for the default split when no split file exists");
    if (with_graph) cmd->add_option("--graph", graph, "Use this edge list instead of the dataset's");
  }

  io::DatasetPaths paths() const {
    io::DatasetPaths p;
    if (!dir.empty()) p = io::dataset_paths_in(dir);
    if (!edges.empty()) p.edges = edges;
    if (!features.empty()) p.features = features;
    if (!labels.empty()) p.labels = labels;
    if (!split.empty()) p.split = fs::path(split);
    if (p.edges.empty() || p.features.empty() || p.labels.empty()) {
      throw Error(ErrorCode::InvalidConfig, "give --data DIR or all of --edges, --features, --labels");
    }
    return p;
  }

  Dataset load() const {
    Dataset d = io::load_dataset(paths(), split_seed);
    if (!graph.empty()) d = with_graph(d, build_graph(io::read_edge_list(graph), d.n_nodes()));
    return d;
  }
};

std::vector<int> parse_taus(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int t = std::stoi(item, &used);
      if (used != item.size() || t < 0) throw std::invalid_argument(item);
      out.push_back(t);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad tau list '" + s + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "empty tau list");
  return out;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json correlation_json(const CorrelationStats& c) {
  return {{"n", c.n}, {"pearson", opt_json(c.pearson)}, {"spearman", opt_json(c.spearman)},
          {"degenerate", c.degenerate}};
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

int exit_code(ErrorCode c) {
  if (is_numerical(c)) return 3;
  if (c == ErrorCode::InvalidConfig || c == ErrorCode::InvalidSpec || c == ErrorCode::InvalidK) return 1;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neighbor-similarity-preserving GNN toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());
  std::string simd;
  app.add_option("--simd", simd, "Kernel backend: auto, scalar, avx2")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic cSBM-style dataset");
  SyntheticSpec spec;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--nodes", spec.n_nodes, "Number of nodes");
  gen->add_option("--classes", spec.n_classes, "Number of classes");
  gen->add_option("--degree", spec.mean_degree, "Mean degree");
  gen->add_option("--homophily", spec.homophily, "Target edge homophily");
  gen->add_option("--dim", spec.feature_dim, "Feature dimension");
  gen->add_option("--separation", spec.class_separation, "Class-mean length");
  gen->add_option("--noise", spec.feature_noise, "Feature noise std");
  gen->add_option("--seed", spec.seed, "Random seed");
  gen->add_option("--train-fraction", spec.train_fraction, "Train fraction of each class");
  gen->add_option("--val-fraction", spec.val_fraction, "Validation fraction of each class");

  // load-check
  auto* check = app.add_subcommand("load-check", "Validate a dataset and print its statistics");
  DataArgs check_data;
  check_data.add(check);

  // attack
  auto* atk = app.add_subcommand("attack", "Poison a graph against an SGC surrogate");
  DataArgs atk_data;
  atk_data.add(atk, false);
  AttackConfig atk_cfg;
  std::string atk_method = "gradient", atk_mode = "add_only", atk_out;
  atk->add_option("--method", atk_method, "gradient or brute_force")->check(CLI::IsMember({"gradient", "brute_force"}));
  atk->add_option("--budget", atk_cfg.budget_fraction, "Flip budget as a fraction of |E|");
  atk->add_option("--mode", atk_mode, "add_only or flip")->check(CLI::IsMember({"add_only", "flip"}));
  atk->add_option("--surrogate-tau", atk_cfg.surrogate_tau, "SGC surrogate propagation depth");
  atk->add_option("--surrogate-epochs", atk_cfg.surrogate_epochs, "Surrogate training epochs");
  atk->add_option("--max-nodes", atk_cfg.max_nodes, "Brute-force node cap");
  atk->add_option("--seed", atk_cfg.seed, "Surrogate seed");
  atk->add_option("--out", atk_out, "Write the poisoned edge list here")->required();

  // analyze
  auto* ana = app.add_subcommand("analyze", "KL separation of malicious vs benign link similarity");
  DataArgs ana_data;
  ana_data.add(ana, false);
  std::string ana_poisoned, ana_taus = "0,1,2,3,5,10", ana_out;
  int ana_bins = kDefaultKlBins;
  ana->add_option("--poisoned", ana_poisoned, "Poisoned edge list")->required();
  ana->add_option("--taus", ana_taus, "Comma-separated hop counts");
  ana->add_option("--bins", ana_bins, "Histogram bins");
  ana->add_option("--density-out", ana_out, "Also write scores_tau*.csv here");

  // train
  auto* tr = app.add_subcommand("train", "Train one model and report accuracies");
  DataArgs tr_data;
  tr_data.add(tr);
  TrainConfig tr_cfg;
  std::string tr_variant = "nspgnn", tr_taus = "1,2", tr_ckpt;
  tr->add_option("--variant", tr_variant, "nspgnn, nspgnn_wo, gcn or sgc");
  tr->add_option("--k-pos", tr_cfg.k_pos, "Positive kNN size");
  tr->add_option("--k-neg", tr_cfg.k_neg, "Negative kNN size");
  tr->add_option("--taus", tr_taus, "Hop counts for the dual kNN graphs");
  tr->add_option("--lr", tr_cfg.lr, "Adam learning rate");
  tr->add_option("--epochs", tr_cfg.epochs, "Training epochs");
  tr->add_option("--hidden", tr_cfg.hidden, "Hidden layer widths");
  tr->add_option("--sgc-tau", tr_cfg.sgc_tau, "SGC propagation depth");
  tr->add_option("--seed", tr_cfg.seed, "Initialization seed");
  tr->add_option("--checkpoint", tr_ckpt, "Save the best-validation parameters here");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  DataArgs ev_data;
  ev_data.add(ev);
  std::string ev_ckpt;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();

  // sanitize
  auto* san = app.add_subcommand("sanitize", "Drop low neighbor-similarity edges");
  DataArgs san_data;
  san_data.add(san);
  std::optional<double> san_keep, san_threshold;
  std::string san_taus = "1,2", san_out;
  auto* keep_opt = san->add_option("--keep-fraction", san_keep, "Keep this fraction of edges");
  auto* thr_opt = san->add_option("--threshold", san_threshold, "Drop edges scoring below this");
  keep_opt->excludes(thr_opt);
  san->add_option("--taus", san_taus, "Hop counts scored");
  san->add_option("--out", san_out, "Output edge list")->required();

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a JSON-configured experiment");
  std::string ex_config, ex_out;
  std::size_t ex_workers = 0;
  ex->add_option("config", ex_config, "Config JSON file")->required();
  ex->add_option("--output-dir", ex_out, "Override output_dir");
  ex->add_option("--workers", ex_workers, "Override the worker count");

  // export-knn
  auto* ek = app.add_subcommand("export-knn", "Write the dual kNN graphs as edge lists");
  DataArgs ek_data;
  ek_data.add(ek);
  std::size_t ek_pos = 10, ek_neg = 10;
  std::string ek_taus = "1,2", ek_out;
  ek->add_option("--k-pos", ek_pos, "Positive kNN size");
  ek->add_option("--k-neg", ek_neg, "Negative kNN size");
  ek->add_option("--taus", ek_taus, "Hop counts");
  ek->add_option("--out", ek_out, "Output directory")->required();

  // export-density
  auto* ed = app.add_subcommand("export-density", "Write link similarity score CSVs");
  DataArgs ed_data;
  ed_data.add(ed, false);
  std::string ed_poisoned, ed_taus = "0,1,2", ed_out;
  ed->add_option("--poisoned", ed_poisoned, "Poisoned edge list (defaults to the clean graph)");
  ed->add_option("--taus", ed_taus, "Hop counts");
  ed->add_option("--out", ed_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (simd == "scalar") kernels::set_backend(kernels::Backend::Scalar);
    if (simd == "avx2") kernels::set_backend(kernels::Backend::Avx2);

    if (*gen) {
      const Dataset d = generate_synthetic(spec);
      fs::create_directories(gen_out);
      io::save_dataset(gen_out, d);
      const auto s = io::dataset_stats(d);
      print({{"out", gen_out}, {"n_nodes", s.n_nodes}, {"n_edges", s.n_edges}, {"homophily", opt_json(s.homophily)}});
    } else if (*check) {
      const Dataset d = check_data.load();
      const auto s = io::dataset_stats(d);
      print({{"n_nodes", s.n_nodes},
             {"n_edges", s.n_edges},
             {"n_classes", s.n_classes},
             {"n_features", s.n_features},
             {"homophily", opt_json(s.homophily)},
             {"n_train", mask_count(d.split.train)},
             {"n_val", mask_count(d.split.val)},
             {"n_test", mask_count(d.split.test)}});
    } else if (*atk) {
      const Dataset d = atk_data.load();
      atk_cfg.mode = parse_attack_mode(atk_mode);
      const AttackReport r = atk_method == "gradient" ? gradient_attack(d, atk_cfg) : brute_force_attack(d, atk_cfg);
      io::write_edge_list(atk_out, r.poisoned);
      std::size_t adds = 0;
      for (const Flip& f : r.flips) adds += f.added;
      print({{"method", atk_method},
             {"n_flips", r.flips.size()},
             {"n_added", adds},
             {"n_removed", r.flips.size() - adds},
             {"clean_loss", r.clean_loss},
             {"final_loss", r.final_loss},
             {"homophily_before", homophily_ratio(d.graph, d.labels)},
             {"homophily_after", homophily_ratio(r.poisoned, d.labels)},
             {"kernel_correlation", correlation_json(r.correlation)},
             {"out", atk_out}});
    } else if (*ana) {
      const Dataset d = ana_data.load();
      const Graph poisoned = build_graph(io::read_edge_list(ana_poisoned), d.n_nodes());
      const auto taus = parse_taus(ana_taus);
      const auto rows = separation_report(d.graph, poisoned, d.features, taus, ana_bins);
      json out = json::array();
      for (const auto& row : rows) {
        out.push_back({{"tau", row.tau},
                       {"kl", opt_json(row.kl)},
                       {"error", row.error.empty() ? json(nullptr) : json(row.error)},
                       {"n_benign", row.scores.benign.size()},
                       {"n_malicious", row.scores.malicious.size()},
                       {"n_removed", row.scores.removed.size()}});
        if (!ana_out.empty()) {
          fs::create_directories(ana_out);
          io::write_density(ana_out, row.scores);
        }
      }
      print(out);
    } else if (*tr) {
      const Dataset d = tr_data.load();
      tr_cfg.variant = parse_variant(tr_variant);
      tr_cfg.taus = parse_taus(tr_taus);
      std::optional<DualKnnGraphs> dual;
      if (needs_dual(tr_cfg.variant)) dual = build_dual_knn(d.graph, d.features, tr_cfg.k_pos, tr_cfg.k_neg, tr_cfg.taus);
      const TrainResult r = train(d, dual ? &*dual : nullptr, tr_cfg);
      if (!tr_ckpt.empty()) {
        io::save_checkpoint(tr_ckpt, r.best_params, {tr_cfg.seed, tr_cfg.k_pos, tr_cfg.k_neg, tr_cfg.taus});
      }
      print({{"variant", tr_variant},
             {"test_accuracy", r.test_accuracy},
             {"train_accuracy", r.train_accuracy},
             {"best_val_accuracy", r.best_val_accuracy},
             {"best_epoch", r.best_epoch},
             {"final_train_loss", r.train_loss.back()},
             {"seconds", r.seconds}});
    } else if (*ev) {
      const Dataset d = ev_data.load();
      io::CheckpointMeta meta;
      const ModelParams p = io::load_checkpoint(ev_ckpt, &meta);
      std::optional<DualKnnGraphs> dual;
      if (needs_dual(p.variant)) dual = build_dual_knn(d.graph, d.features, meta.k_pos, meta.k_neg, meta.taus);
      const Matrix s = forward(p, d, dual ? &*dual : nullptr);
      print({{"variant", to_string(p.variant)},
             {"train_accuracy", accuracy(s, d.labels, d.split.train)},
             {"val_accuracy", mask_count(d.split.val) ? json(accuracy(s, d.labels, d.split.val)) : json(nullptr)},
             {"test_accuracy", mask_count(d.split.test) ? json(accuracy(s, d.labels, d.split.test)) : json(nullptr)}});
    } else if (*san) {
      const Dataset d = san_data.load();
      SanitizePolicy pol;
      pol.keep_fraction = san_keep;
      pol.threshold = san_threshold;
      if (!san_keep && !san_threshold) throw Error(ErrorCode::InvalidConfig, "give --keep-fraction or --threshold");
      const Graph g = nsp_sanitize(d.graph, d.features, pol, parse_taus(san_taus));
      io::write_edge_list(san_out, g);
      print({{"n_edges_before", d.graph.n_edges()}, {"n_edges_after", g.n_edges()}, {"out", san_out}});
    } else if (*ex) {
      std::ifstream in(ex_config);
      if (!in) throw Error(ErrorCode::IoError, "cannot open " + ex_config);
      std::stringstream text;
      text << in.rdbuf();
      ExperimentConfig cfg = parse_experiment_config(text.str(), fs::path(ex_config).parent_path());
      if (!ex_out.empty()) cfg.output_dir = ex_out;
      if (ex_workers > 0) cfg.workers = ex_workers;
      const ExperimentResult r = run_experiment(cfg);
      json summary = json::array();
      for (const auto& s : r.summary) {
        summary.push_back({{"model", s.model}, {"budget", s.budget}, {"mean", s.mean}, {"stderr", s.stderr_}, {"n", s.n}});
      }
      std::size_t failed = 0;
      for (const auto& c : r.cells) failed += !c.result;
      print({{"results", (cfg.output_dir / "results.json").string()}, {"failed_cells", failed}, {"summary", summary}});
    } else if (*ek) {
      const Dataset d = ek_data.load();
      const auto taus = parse_taus(ek_taus);
      const DualKnnGraphs dual = build_dual_knn(d.graph, d.features, ek_pos, ek_neg, taus);
      fs::create_directories(ek_out);
      json files = json::array();
      for (std::size_t t = 0; t < taus.size(); ++t) {
        const std::string tag = std::to_string(taus[t]);
        const fs::path pos = fs::path(ek_out) / ("pos_tau" + tag + ".tsv");
        const fs::path neg = fs::path(ek_out) / ("neg_tau" + tag + ".tsv");
        io::write_edge_list(pos, dual.pos_graphs[t]);
        io::write_edge_list(neg, dual.neg_graphs[t]);
        files.push_back({{"tau", taus[t]}, {"pos", pos.string()}, {"neg", neg.string()},
                         {"pos_edges", dual.pos_graphs[t].n_edges()}, {"neg_edges", dual.neg_graphs[t].n_edges()}});
      }
      print(files);
    } else if (*ed) {
      const Dataset d = ed_data.load();
      const Graph poisoned = ed_poisoned.empty() ? d.graph : build_graph(io::read_edge_list(ed_poisoned), d.n_nodes());
      fs::create_directories(ed_out);
      json files = json::array();
      for (int tau : parse_taus(ed_taus)) {
        const auto sim = similarity_matrix(poisoned, d.features, tau);
        const auto scores = link_scores(d.graph, poisoned, sim);
        files.push_back({{"tau", tau}, {"path", io::write_density(ed_out, scores).string()},
                         {"n_benign", scores.benign.size()}, {"n_malicious", scores.malicious.size()},
                         {"n_removed", scores.removed.size()}});
      }
      print(files);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
