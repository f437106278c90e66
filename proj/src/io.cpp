#include "nsp/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nsp/error.hpp"

namespace nsp::io {
namespace {

using nlohmann::json;

std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view tok, const fs::path& path, std::size_t line) {
  T value{};
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": bad number '" +
                                           std::string(tok) + "'");
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::vector<Edge> read_edge_list(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    std::istringstream fields{std::string(s)};
    std::string a, b, extra;
    if (!(fields >> a >> b) || (fields >> extra)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected 'u<TAB>v'");
    }
    const auto u = parse_number<long long>(a, path, lineno);
    const auto v = parse_number<long long>(b, path, lineno);
    if (u < 0 || v < 0 || u > 0xFFFFFFFFLL || v > 0xFFFFFFFFLL) {
      throw Error(ErrorCode::InvalidNode, path.string() + ":" + std::to_string(lineno) + ": node id out of range");
    }
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  return edges;
}

void write_edge_list(const fs::path& path, const std::vector<Edge>& edges) {
  auto out = open_out(path);
  for (auto [u, v] : edges) out << u << '\t' << v << '\n';
}

void write_edge_list(const fs::path& path, const Graph& g) { write_edge_list(path, g.edges()); }

Matrix read_features(const fs::path& path) {
  auto in = open_in(path);
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = trim(line);
    if (s.empty()) continue;
    const auto fields = split_fields(s, ',');
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols) {
      throw Error(ErrorCode::ShapeMismatch, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                                std::to_string(cols) + " columns, got " +
                                                std::to_string(fields.size()));
    }
    for (auto f : fields) data.push_back(parse_number<double>(f, path, lineno));
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

void write_features(const fs::path& path, const Matrix& x) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out << (j ? "," : "") << format_double(x(i, j));
    out << '\n';
  }
}

std::vector<int> read_labels(const fs::path& path) {
  auto in = open_in(path);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = trim(line);
    if (s.empty()) continue;
    labels.push_back(parse_number<int>(s, path, lineno));
  }
  return labels;
}

void write_labels(const fs::path& path, const LabelVector& y) {
  auto out = open_out(path);
  for (int l : y.labels) out << l << '\n';
}

DataSplit read_split(const fs::path& path, std::size_t n_nodes) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  DataSplit s{Mask(n_nodes, false), Mask(n_nodes, false), Mask(n_nodes, false)};
  for (auto [key, mask] : {std::pair<const char*, Mask*>{"train", &s.train}, {"val", &s.val}, {"test", &s.test}}) {
    if (!j.contains(key)) {
      if (std::strcmp(key, "train") == 0) throw Error(ErrorCode::ParseError, path.string() + ": missing 'train'");
      continue;
    }
    for (const auto& id : j.at(key)) {
      const auto i = id.get<long long>();
      if (i < 0 || static_cast<std::size_t>(i) >= n_nodes) {
        throw Error(ErrorCode::InvalidNode, path.string() + ": split id " + std::to_string(i) + " out of range");
      }
      (*mask)[static_cast<std::size_t>(i)] = true;
    }
  }
  return s;
}

void write_split(const fs::path& path, const DataSplit& split) {
  auto ids = [](const Mask& m) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) out.push_back(i);
    return out;
  };
  json j{{"train", ids(split.train)}, {"val", ids(split.val)}, {"test", ids(split.test)}};
  open_out(path) << j.dump() << '\n';
}

DatasetStats dataset_stats(const Dataset& d) {
  DatasetStats s;
  s.n_nodes = d.n_nodes();
  s.n_edges = d.graph.n_edges();
  s.n_classes = d.labels.n_classes;
  s.n_features = d.features.cols();
  if (s.n_edges > 0) s.homophily = homophily_ratio(d.graph, d.labels);
  return s;
}

Dataset load_dataset(const DatasetPaths& paths, std::uint64_t split_seed) {
  Dataset d;
  d.features = read_features(paths.features);
  const std::size_t n = d.features.rows();
  auto labels = read_labels(paths.labels);
  if (labels.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "labels file has " + std::to_string(labels.size()) +
                                              " rows, features file has " + std::to_string(n));
  }
  d.labels = make_labels(std::move(labels));
  d.graph = build_graph(read_edge_list(paths.edges), n);
  if (paths.split && fs::exists(*paths.split)) {
    d.split = read_split(*paths.split, n);
  } else {
    d.split = stratified_split(d.labels, 0.1, 0.1, split_seed);
  }
  validate_dataset(d);
  return d;
}

DatasetPaths dataset_paths_in(const fs::path& dir) {
  return {dir / "edges.tsv", dir / "features.csv", dir / "labels.csv", dir / "split.json"};
}

void save_dataset(const fs::path& dir, const Dataset& d) {
  const auto p = dataset_paths_in(dir);
  write_edge_list(p.edges, d.graph);
  write_features(p.features, d.features);
  write_labels(p.labels, d.labels);
  write_split(*p.split, d.split);
}

fs::path write_density(const fs::path& dir, const LinkScoreSets& scores) {
  if (scores.benign.empty() && scores.malicious.empty() && scores.removed.empty()) {
    throw Error(ErrorCode::EmptyDistribution, "no link scores to export");
  }
  const fs::path path = dir / ("scores_tau" + std::to_string(scores.tau) + ".csv");
  auto out = open_out(path);
  out << "score,label\n";
  for (double s : scores.benign) out << format_double(s) << ",benign\n";
  for (double s : scores.malicious) out << format_double(s) << ",malicious\n";
  for (double s : scores.removed) out << format_double(s) << ",removed\n";
  return path;
}

std::vector<DensityRow> read_density(const fs::path& path) {
  auto in = open_in(path);
  std::vector<DensityRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = trim(line);
    if (s.empty() || lineno == 1) continue;
    const auto fields = split_fields(s, ',');
    if (fields.size() != 2) throw Error(ErrorCode::ParseError, path.string() + ": expected score,label");
    rows.push_back({parse_number<double>(fields[0], path, lineno), std::string(fields[1])});
  }
  return rows;
}

void save_checkpoint(const fs::path& path, const ModelParams& params, const CheckpointMeta& meta) {
  json header{{"variant", std::string(to_string(params.variant))},
              {"dims", params.dims},
              {"n_gates", params.n_gates},
              {"sgc_tau", params.sgc_tau},
              {"seed", meta.seed},
              {"k_pos", meta.k_pos},
              {"k_neg", meta.k_neg},
              {"taus", meta.taus},
              {"n_params", params.n_params()}};
  auto out = open_out(path, true);
  out << header.dump() << '\n';
  for (double v : params.flatten()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

ModelParams load_checkpoint(const fs::path& path, CheckpointMeta* meta) {
  auto in = open_in(path, true);
  std::string line;
  std::getline(in, line);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": bad checkpoint header: " + e.what());
  }
  const auto dims = header.at("dims").get<std::vector<std::size_t>>();
  ModelParams params = init_params(parse_variant(header.at("variant").get<std::string>()), dims, 0,
                                   header.at("n_gates").get<std::size_t>(), header.at("sgc_tau").get<int>());
  const auto n = header.at("n_params").get<std::size_t>();
  if (n != params.n_params()) throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter count mismatch");
  std::vector<double> flat(n);
  for (double& v : flat) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error(ErrorCode::ParseError, "truncated checkpoint");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  params.assign_flat(flat);
  if (meta) {
    meta->seed = header.value("seed", std::uint64_t{0});
    meta->k_pos = header.value("k_pos", std::size_t{0});
    meta->k_neg = header.value("k_neg", std::size_t{0});
    meta->taus = header.value("taus", std::vector<int>{1, 2});
  }
  return params;
}

}  // namespace nsp::io
