#pragma once

// Text dataset schema, binary checkpoints and embedding export.
//
// Manifest (one directive per line, '#' starts a comment):
//   num_nodes <N>
//   feature_dim <d>
//   relation <name> <edge-file>     (repeatable, order is kept)
//   features <file>                 N lines of d comma-separated reals
//   labels <file>                   N lines of 0|1
//   splits <file>                   optional; lines "train: i j ...", "val: ...", "test: ..."
//   symmetrize true|false
// Relative paths are resolved against the manifest's directory.
//
// Checkpoint (little-endian):
//   "DHMP" | u32 version | u32 meta_len | meta (key=value lines)
//   | u32 section_count | per section: u32 name_len, name, u64 offset, u64 rows, u64 cols
//   | f64 payload (offsets are absolute file positions)

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dhmp/errors.hpp"
#include "dhmp/graph.hpp"
#include "dhmp/matrix.hpp"
#include "dhmp/model.hpp"
#include "dhmp/trainer.hpp"

namespace dhmp {

namespace fs = std::filesystem;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

inline std::ifstream open_input(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + p.string() + "'");
  return in;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(std::string data) : data_(std::move(data)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void seek(std::size_t p) { pos_ = p; }
  std::size_t size() const { return data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw CheckpointError("checkpoint truncated");
  }
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

struct DatasetManifest {
  std::size_t num_nodes = 0;
  std::size_t feature_dim = 0;
  std::vector<std::pair<std::string, fs::path>> relations;
  fs::path features;
  fs::path labels;
  std::optional<fs::path> splits;
  bool symmetrize = false;
};

inline DatasetManifest read_manifest(const fs::path& path) {
  auto in = detail::open_input(path);
  const fs::path base = path.parent_path();
  auto resolve = [&](std::string_view p) {
    fs::path q{std::string(p)};
    return q.is_absolute() ? q : base / q;
  };
  DatasetManifest m;
  bool have_n = false, have_d = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = line;
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    auto tok = detail::split_ws(sv);
    if (tok.empty()) continue;
    auto fail = [&](const std::string& what) {
      return LoadError(path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    const std::string_view key = tok[0];
    if (key == "num_nodes" && tok.size() == 2) {
      auto v = detail::parse_number<std::size_t>(tok[1]);
      if (!v) throw fail("bad num_nodes");
      m.num_nodes = *v;
      have_n = true;
    } else if (key == "feature_dim" && tok.size() == 2) {
      auto v = detail::parse_number<std::size_t>(tok[1]);
      if (!v) throw fail("bad feature_dim");
      m.feature_dim = *v;
      have_d = true;
    } else if (key == "relation" && tok.size() == 3) {
      m.relations.emplace_back(std::string(tok[1]), resolve(tok[2]));
    } else if (key == "features" && tok.size() == 2) {
      m.features = resolve(tok[1]);
    } else if (key == "labels" && tok.size() == 2) {
      m.labels = resolve(tok[1]);
    } else if (key == "splits" && tok.size() == 2) {
      m.splits = resolve(tok[1]);
    } else if (key == "symmetrize" && tok.size() == 2) {
      if (tok[1] == "true") m.symmetrize = true;
      else if (tok[1] == "false") m.symmetrize = false;
      else throw fail("symmetrize must be true or false");
    } else {
      throw fail("unrecognized directive '" + std::string(sv) + "'");
    }
  }
  if (!have_n) throw LoadError(path.string() + ": missing num_nodes");
  if (!have_d) throw LoadError(path.string() + ": missing feature_dim");
  if (m.relations.empty()) throw LoadError(path.string() + ": no relation entries");
  if (m.features.empty()) throw LoadError(path.string() + ": missing features");
  if (m.labels.empty()) throw LoadError(path.string() + ": missing labels");
  return m;
}

struct LoadOptions {
  std::optional<bool> symmetrize;  // overrides the manifest flag
  std::uint64_t split_seed = 0;    // for the default stratified split
  double train_fraction = 0.4;
  double val_fraction = 0.2;
};

inline Matrix read_features(const fs::path& path, std::size_t n, std::size_t d) {
  auto in = detail::open_input(path);
  Matrix x(n, d);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    if (row >= n) throw LoadError(path.string() + ": more than " + std::to_string(n) + " rows");
    auto cells = detail::split_on(line, ',');
    if (cells.size() != d) {
      throw LoadError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " columns, expected " + std::to_string(d));
    }
    for (std::size_t j = 0; j < d; ++j) {
      auto v = detail::parse_number<double>(cells[j]);
      if (!v) throw LoadError(path.string() + ": row " + std::to_string(row) + " has a non-numeric value");
      x(row, j) = *v;
    }
    ++row;
  }
  if (row != n) {
    throw LoadError(path.string() + ": " + std::to_string(row) + " rows, expected " + std::to_string(n));
  }
  return x;
}

inline std::vector<int> read_labels(const fs::path& path, std::size_t n) {
  auto in = detail::open_input(path);
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty()) continue;
    auto v = detail::parse_number<int>(t);
    if (!v || (*v != 0 && *v != 1)) {
      throw LoadError(path.string() + ": line " + std::to_string(labels.size() + 1) + " label '" +
                      std::string(t) + "' is not 0 or 1");
    }
    labels.push_back(*v);
  }
  if (labels.size() != n) {
    throw LoadError(path.string() + ": " + std::to_string(labels.size()) + " labels, expected " +
                    std::to_string(n));
  }
  return labels;
}

inline std::vector<Edge> read_edges(const fs::path& path) {
  auto in = detail::open_input(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_on(line, ',');
    std::optional<NodeId> s, t;
    if (cells.size() == 2) {
      s = detail::parse_number<NodeId>(cells[0]);
      t = detail::parse_number<NodeId>(cells[1]);
    }
    if (!s || !t) throw LoadError(path.string() + ":" + std::to_string(lineno) + ": expected 'src,dst'");
    edges.push_back({*s, *t});
  }
  return edges;
}

inline NodeSplit read_splits(const fs::path& path) {
  auto in = detail::open_input(path);
  NodeSplit split;
  bool seen[3] = {false, false, false};
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto colon = t.find(':');
    if (colon == std::string_view::npos) throw LoadError(path.string() + ": expected 'name: indices'");
    const auto name = detail::trim(t.substr(0, colon));
    std::vector<NodeId>* target = nullptr;
    int slot = 0;
    if (name == "train") target = &split.train, slot = 0;
    else if (name == "val") target = &split.val, slot = 1;
    else if (name == "test") target = &split.test, slot = 2;
    else throw LoadError(path.string() + ": unknown split '" + std::string(name) + "'");
    seen[slot] = true;
    for (auto tok : detail::split_ws(t.substr(colon + 1))) {
      auto v = detail::parse_number<NodeId>(tok);
      if (!v) throw LoadError(path.string() + ": bad index '" + std::string(tok) + "'");
      target->push_back(*v);
    }
  }
  if (!seen[0] || !seen[1] || !seen[2]) throw LoadError(path.string() + ": needs train, val and test lines");
  return split;
}

inline MultiRelationGraph load_dataset(const fs::path& manifest_path, const LoadOptions& opt = {}) {
  const DatasetManifest m = read_manifest(manifest_path);
  const bool sym = opt.symmetrize.value_or(m.symmetrize);
  MultiRelationGraph g;
  g.features = read_features(m.features, m.num_nodes, m.feature_dim);
  g.labels = read_labels(m.labels, m.num_nodes);
  for (const auto& [name, path] : m.relations) {
    auto edges = read_edges(path);
    if (sym) edges = symmetrize(edges);
    try {
      g.relations.push_back(build_csr(edges, m.num_nodes, name));
    } catch (const LoadError& e) {
      throw LoadError(path.string() + ": " + e.what());
    }
  }
  g.split = m.splits ? read_splits(*m.splits)
                     : stratified_split(g.labels, opt.train_fraction, opt.val_fraction, opt.split_seed);
  validate(g);
  return g;
}

inline void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw LoadError("write failed for '" + path.string() + "'");
}

// Writes manifest.txt, features.csv, labels.txt and edges_<relation>.csv into
// `dir`. The split is not written; loaders regenerate it from a seed.
inline fs::path write_dataset(const MultiRelationGraph& g, const fs::path& dir, bool symmetrize_flag = false) {
  fs::create_directories(dir);
  std::string manifest = "num_nodes " + std::to_string(g.num_nodes()) + "\nfeature_dim " +
                         std::to_string(g.feature_dim()) + "\nfeatures features.csv\nlabels labels.txt\n";
  for (const auto& r : g.relations) {
    const std::string file = "edges_" + r.name + ".csv";
    manifest += "relation " + r.name + " " + file + "\n";
    std::string edges;
    for (std::size_t e = 0; e < r.edge_count(); ++e)
      edges += std::to_string(r.sources[e]) + "," + std::to_string(r.targets[e]) + "\n";
    write_text(dir / file, edges);
  }
  manifest += std::string("symmetrize ") + (symmetrize_flag ? "true" : "false") + "\n";

  std::string feats;
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    for (std::size_t j = 0; j < g.feature_dim(); ++j) {
      if (j) feats += ',';
      feats += detail::format_double(g.features(u, j));
    }
    feats += '\n';
  }
  std::string labels;
  for (int y : g.labels) labels += std::to_string(y) + "\n";
  write_text(dir / "features.csv", feats);
  write_text(dir / "labels.txt", labels);
  write_text(dir / "manifest.txt", manifest);
  return dir / "manifest.txt";
}

inline void write_splits(const NodeSplit& split, const fs::path& path) {
  std::string s;
  auto line = [&](const char* name, const std::vector<NodeId>& ids) {
    s += name;
    s += ':';
    for (NodeId u : ids) s += " " + std::to_string(u);
    s += '\n';
  };
  line("train", split.train);
  line("val", split.val);
  line("test", split.test);
  write_text(path, s);
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Matrix>> sections;
};

inline std::map<std::string, std::string> config_metadata(const DhmpModel& model, const TrainConfig& cfg) {
  const ModelConfig& mc = model.config();
  return {
      {"input_dim", std::to_string(model.input_dim())},
      {"num_relations", std::to_string(model.num_relations())},
      {"hidden_dim", std::to_string(mc.hidden_dim)},
      {"epsilon", detail::format_double(mc.residual)},
      {"dropout", detail::format_double(mc.dropout)},
      {"ablation", to_string(mc.ablation)},
      {"fusion", mc.fusion == FusionMode::Enhanced ? "enhanced" : "concat"},
      {"homophilic_activation", mc.homophilic_activation ? "relu" : "none"},
      {"lr", detail::format_double(cfg.learning_rate)},
      {"weight_decay", detail::format_double(cfg.weight_decay)},
      {"lambda", detail::format_double(cfg.lambda)},
      {"epochs", std::to_string(cfg.epochs)},
      {"patience", std::to_string(cfg.patience)},
      {"seed", std::to_string(cfg.seed)},
  };
}

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string meta;
  for (const auto& [k, v] : ck.meta) meta += k + "=" + v + "\n";

  std::string head = "DHMP";
  detail::put_u32(head, kCheckpointVersion);
  detail::put_u32(head, static_cast<std::uint32_t>(meta.size()));
  head += meta;
  detail::put_u32(head, static_cast<std::uint32_t>(ck.sections.size()));
  std::size_t table = 0;
  for (const auto& [name, m] : ck.sections) table += 4 + name.size() + 24;

  std::uint64_t offset = head.size() + table;
  std::string payload;
  for (const auto& [name, m] : ck.sections) {
    detail::put_u32(head, static_cast<std::uint32_t>(name.size()));
    head += name;
    detail::put_u64(head, offset);
    detail::put_u64(head, m.rows());
    detail::put_u64(head, m.cols());
    for (double v : m.data()) detail::put_u64(payload, std::bit_cast<std::uint64_t>(v));
    offset += 8 * m.size();
  }
  return head + payload;
}

inline Checkpoint decode_checkpoint(std::string bytes) {
  detail::ByteReader in(std::move(bytes));
  if (in.size() < 4 || in.bytes(4) != "DHMP") throw CheckpointVersionError("not a checkpoint (bad magic)");
  const auto version = in.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const std::string meta = in.bytes(in.u32());
  std::istringstream ms(meta);
  for (std::string line; std::getline(ms, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed checkpoint metadata");
    ck.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = in.u32();
  struct Row { std::string name; std::uint64_t offset, rows, cols; };
  std::vector<Row> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    Row r;
    r.name = in.bytes(in.u32());
    r.offset = in.u64();
    r.rows = in.u64();
    r.cols = in.u64();
    table.push_back(std::move(r));
  }
  for (const Row& r : table) {
    if (r.rows != 0 && r.cols > (in.size() / 8) / r.rows) throw CheckpointError("checkpoint truncated");
    in.seek(r.offset);
    Matrix m(r.rows, r.cols);
    for (double& v : m.data()) v = std::bit_cast<double>(in.u64());
    ck.sections.emplace_back(r.name, std::move(m));
  }
  return ck;
}

inline void save_checkpoint(const DhmpModel& model, const TrainConfig& cfg, const fs::path& path) {
  Checkpoint ck;
  ck.meta = config_metadata(model, cfg);
  for (const auto& e : model.params()) ck.sections.emplace_back(e.name, e.value);
  write_text(path, encode_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(std::move(bytes));
}

inline const std::string& meta_value(const Checkpoint& ck, const std::string& key) {
  auto it = ck.meta.find(key);
  if (it == ck.meta.end()) throw CheckpointError("checkpoint metadata lacks '" + key + "'");
  return it->second;
}

inline ModelConfig model_config_from(const Checkpoint& ck) {
  ModelConfig mc;
  auto num = [&](const std::string& k) {
    auto v = detail::parse_number<double>(meta_value(ck, k));
    if (!v) throw CheckpointError("bad checkpoint metadata '" + k + "'");
    return *v;
  };
  mc.hidden_dim = static_cast<std::size_t>(num("hidden_dim"));
  mc.residual = num("epsilon");
  mc.dropout = num("dropout");
  mc.ablation = parse_ablation(meta_value(ck, "ablation"));
  mc.fusion = meta_value(ck, "fusion") == "concat" ? FusionMode::Concat : FusionMode::Enhanced;
  mc.homophilic_activation = meta_value(ck, "homophilic_activation") == "relu";
  return mc;
}

// Rebuilds a model for a graph with `input_dim` features and
// `num_relations` effective relations, checking every section shape.
inline DhmpModel restore_model(const Checkpoint& ck, std::size_t input_dim, std::size_t num_relations) {
  const ModelConfig mc = model_config_from(ck);
  DhmpModel model(mc, input_dim, num_relations, 0);
  ParamStore& params = model.params();
  if (ck.sections.size() != params.size()) {
    throw CheckpointShapeError("checkpoint has " + std::to_string(ck.sections.size()) +
                               " parameters, model expects " + std::to_string(params.size()) +
                               " (relations or ablation differ)");
  }
  for (const auto& [name, m] : ck.sections) {
    if (!params.contains(name)) throw CheckpointShapeError("checkpoint parameter '" + name + "' not in model");
    auto& e = params.at(name);
    if (!e.value.same_shape(m)) {
      throw CheckpointShapeError("parameter '" + name + "' is " + m.shape() + " in checkpoint, model expects " +
                                 e.value.shape());
    }
    e.value = m;
  }
  return model;
}

inline DhmpModel load_checkpoint(const fs::path& path, std::size_t input_dim, std::size_t num_relations) {
  return restore_model(read_checkpoint(path), input_dim, num_relations);
}

// CSV: header node,label,e0..e{K-1}; values printed with 17 significant digits.
inline void export_embeddings(const Matrix& embedding, std::span<const int> labels, const fs::path& path) {
  if (embedding.rows() != labels.size()) throw ContractViolation("export_embeddings: row/label mismatch");
  std::string s = "node,label";
  for (std::size_t j = 0; j < embedding.cols(); ++j) s += ",e" + std::to_string(j);
  s += '\n';
  for (std::size_t u = 0; u < embedding.rows(); ++u) {
    s += std::to_string(u) + "," + std::to_string(labels[u]);
    for (double v : embedding.row(u)) s += "," + detail::format_double(v);
    s += '\n';
  }
  write_text(path, s);
}

}  // namespace dhmp
