// dhmp command-line entry point: train, eval, gradcheck, synth.
//
// Exit codes: 0 ok, 1 config or data error, 2 numerical failure,
// 3 verification failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dhmp/dhmp.hpp"

namespace fs = std::filesystem;
using namespace dhmp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerification = 3;

class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags shared by every command. Unset optionals fall back to the config
// file, then to the TrainConfig defaults.
struct SharedFlags {
  std::string data;
  std::string out = "run";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ablation;
  std::optional<double> lr, lambda, epsilon, dropout, weight_decay;
  std::optional<std::size_t> epochs, patience, hidden_dim;
  std::optional<std::string> fusion, homophilic_activation;
  bool symmetrize = false;
};

// Help text only needs a readable value, not a round-trip one.
std::string help_num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

void add_shared(CLI::App* cmd, SharedFlags& f) {
  const TrainConfig d;
  cmd->add_option("--data", f.data, "dataset manifest path");
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_option("--config", f.config, "key=value overrides file (flags take precedence)");
  cmd->add_option("--seed", f.seed, "random seed (default " + std::to_string(d.seed) + ")");
  cmd->add_option("--ablation", f.ablation, "full|sep|homo|heter|rel (default full)");
  cmd->add_option("--lr", f.lr, "learning rate (default " + help_num(d.learning_rate) + ")");
  cmd->add_option("--lambda", f.lambda, "heterophily loss weight (default " + help_num(d.lambda) + ")");
  cmd->add_option("--epsilon", f.epsilon, "residual gate weight (default " + help_num(d.model.residual) + ")");
  cmd->add_option("--epochs", f.epochs, "maximum epochs (default " + std::to_string(d.epochs) + ")");
  cmd->add_option("--patience", f.patience, "early-stopping patience (default " + std::to_string(d.patience) + ")");
  cmd->add_option("--hidden-dim", f.hidden_dim, "hidden width (default " + std::to_string(d.model.hidden_dim) + ")");
  cmd->add_option("--dropout", f.dropout, "dropout rate (default " + help_num(d.model.dropout) + ")");
  cmd->add_option("--weight-decay", f.weight_decay,
                  "L2 weight decay (default " + help_num(d.weight_decay) + ")");
  cmd->add_option("--fusion", f.fusion, "enhanced|concat (default enhanced)");
  cmd->add_option("--homophilic-activation", f.homophilic_activation, "none|relu (default none)");
  cmd->add_flag("--symmetrize", f.symmetrize, "add reverse edges (overrides the manifest)");
}

double to_double(const std::string& key, const std::string& v) {
  auto x = detail::parse_number<double>(v);
  if (!x) throw ConfigError("config '" + key + "': not a number: '" + v + "'");
  return *x;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  auto x = detail::parse_number<std::size_t>(v);
  if (!x) throw ConfigError("config '" + key + "': not a non-negative integer: '" + v + "'");
  return *x;
}

FusionMode parse_fusion(const std::string& s) {
  if (s == "enhanced") return FusionMode::Enhanced;
  if (s == "concat") return FusionMode::Concat;
  throw ConfigError("unknown fusion '" + s + "' (expected enhanced|concat)");
}

bool parse_activation_flag(const std::string& s) {
  if (s == "none") return false;
  if (s == "relu") return true;
  throw ConfigError("unknown homophilic activation '" + s + "' (expected none|relu)");
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config '" + key + "': expected true|false, got '" + s + "'");
}

struct ResolvedConfig {
  TrainConfig train;
  std::optional<bool> symmetrize;
};

void apply_key(ResolvedConfig& rc, std::string key, const std::string& v) {
  for (char& c : key)
    if (c == '_') c = '-';
  TrainConfig& t = rc.train;
  if (key == "lr") t.learning_rate = to_double(key, v);
  else if (key == "lambda") t.lambda = to_double(key, v);
  else if (key == "epsilon") t.model.residual = to_double(key, v);
  else if (key == "dropout") t.model.dropout = to_double(key, v);
  else if (key == "weight-decay") t.weight_decay = to_double(key, v);
  else if (key == "epochs") t.epochs = to_count(key, v);
  else if (key == "patience") t.patience = to_count(key, v);
  else if (key == "hidden-dim") t.model.hidden_dim = to_count(key, v);
  else if (key == "seed") t.seed = to_count(key, v);
  else if (key == "ablation") t.model.ablation = parse_ablation(v);
  else if (key == "fusion") t.model.fusion = parse_fusion(v);
  else if (key == "homophilic-activation") t.model.homophilic_activation = parse_activation_flag(v);
  else if (key == "symmetrize") rc.symmetrize = parse_bool(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

ResolvedConfig resolve(const SharedFlags& f) {
  ResolvedConfig rc;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot open config file '" + f.config + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto body = detail::trim(line);
      if (body.empty() || body.front() == '#') continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(f.config + ":" + std::to_string(lineno) + ": expected key=value");
      }
      apply_key(rc, std::string(detail::trim(body.substr(0, eq))), std::string(detail::trim(body.substr(eq + 1))));
    }
  }
  TrainConfig& t = rc.train;
  if (f.seed) t.seed = *f.seed;
  if (f.ablation) t.model.ablation = parse_ablation(*f.ablation);
  if (f.lr) t.learning_rate = *f.lr;
  if (f.lambda) t.lambda = *f.lambda;
  if (f.epsilon) t.model.residual = *f.epsilon;
  if (f.dropout) t.model.dropout = *f.dropout;
  if (f.weight_decay) t.weight_decay = *f.weight_decay;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.patience) t.patience = *f.patience;
  if (f.hidden_dim) t.model.hidden_dim = *f.hidden_dim;
  if (f.fusion) t.model.fusion = parse_fusion(*f.fusion);
  if (f.homophilic_activation) t.model.homophilic_activation = parse_activation_flag(*f.homophilic_activation);
  if (f.symmetrize) rc.symmetrize = true;
  // Keep the default patience usable with short epoch budgets.
  if (!f.patience && t.patience > t.epochs) t.patience = t.epochs;
  t.validate();
  return rc;
}

MultiRelationGraph load(const std::string& manifest, const ResolvedConfig& rc) {
  if (manifest.empty()) throw ConfigError("--data is required");
  LoadOptions opt;
  opt.symmetrize = rc.symmetrize;
  opt.split_seed = rc.train.seed;
  return load_dataset(manifest, opt);
}

std::string metrics_kv(const MetricsReport& m, const std::string& split) {
  std::ostringstream s;
  s << "split=" << split << '\n'
    << "auc=" << detail::format_double(m.auc) << '\n'
    << "recall=" << detail::format_double(m.recall) << '\n'
    << "gmean=" << detail::format_double(m.gmean) << '\n'
    << "f1_macro=" << detail::format_double(m.f1_macro) << '\n'
    << "tp=" << m.confusion.tp << '\n'
    << "fp=" << m.confusion.fp << '\n'
    << "tn=" << m.confusion.tn << '\n'
    << "fn=" << m.confusion.fn << '\n';
  return s.str();
}

const std::vector<NodeId>& split_nodes(const MultiRelationGraph& g, const std::string& which) {
  if (which == "train") return g.split.train;
  if (which == "val") return g.split.val;
  if (which == "test") return g.split.test;
  throw ConfigError("unknown split '" + which + "' (expected train|val|test)");
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

int cmd_train(const SharedFlags& f) {
  const ResolvedConfig rc = resolve(f);
  const TrainConfig& cfg = rc.train;
  const MultiRelationGraph g = load(f.data, rc);
  fs::create_directories(f.out);
  const fs::path out(f.out);

  std::ofstream log(out / "train_log.txt");
  if (!log) throw ConfigError("cannot write '" + (out / "train_log.txt").string() + "'");
  log << "# started " << timestamp() << '\n';

  TrainResult result = fit(g, cfg, [&](const EpochLog& e, const DhmpModel& model) {
    if (e.epoch == 1) {
      for (const auto& [k, v] : config_metadata(model, cfg)) log << k << '=' << v << '\n';
      log << "variant=" << to_string(cfg.model.ablation) << '\n'
          << "parameters=" << model.params().scalar_count() << '\n'
          << "data=" << f.data << '\n'
          << "split train=" << g.split.train.size() << " val=" << g.split.val.size()
          << " test=" << g.split.test.size() << " split_seed=" << cfg.seed << '\n'
          << "# epoch loss_classification loss_heterophily[per relation] loss_total val_auc\n";
    }
    log << "epoch " << e.epoch << ' ' << detail::format_double(e.loss_classification);
    for (double h : e.loss_heterophily) log << ' ' << detail::format_double(h);
    log << ' ' << detail::format_double(e.loss_total) << ' ' << detail::format_double(e.val.auc) << '\n';
  });

  Checkpoint ck;
  ck.meta = config_metadata(result.model, cfg);
  ck.meta["data_relations"] = std::to_string(g.num_relations());
  ck.meta["symmetrize"] = rc.symmetrize ? (*rc.symmetrize ? "true" : "false") : "manifest";
  for (const auto& e : result.model.params()) ck.sections.emplace_back(e.name, e.value);
  write_text(out / "checkpoint.bin", encode_checkpoint(ck));

  const Prediction pred = predict(result.model, g.features, effective_relations(g, cfg.model.ablation));
  const MetricsReport test = evaluate(pred.probs, g.labels, g.split.test);
  std::string kv = metrics_kv(test, "test");
  kv += "best_epoch=" + std::to_string(result.best_epoch) + '\n';
  kv += "best_val_auc=" + detail::format_double(result.best_val_auc) + '\n';
  kv += "ablation=" + to_string(cfg.model.ablation) + '\n';
  kv += "parameters=" + std::to_string(result.model.params().scalar_count()) + '\n';
  write_text(out / "metrics.txt", kv);

  log << "best_epoch=" << result.best_epoch << '\n' << "test " << kv;
  std::cout << kv;
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string split = "test";
  std::string embeddings;
};

int cmd_eval(const SharedFlags& f, const EvalFlags& e) {
  const fs::path ck_path = e.checkpoint.empty() ? fs::path(f.out) / "checkpoint.bin" : fs::path(e.checkpoint);
  const Checkpoint ck = read_checkpoint(ck_path);

  // Rebuild the data view the model was trained on: same split seed and
  // symmetrization unless overridden on the command line.
  ResolvedConfig rc;
  rc.train.seed = f.seed ? *f.seed : to_count("seed", meta_value(ck, "seed"));
  if (f.symmetrize) rc.symmetrize = true;
  else if (auto it = ck.meta.find("symmetrize"); it != ck.meta.end() && it->second != "manifest")
    rc.symmetrize = it->second == "true";
  const MultiRelationGraph g = load(f.data, rc);

  if (auto it = ck.meta.find("data_relations"); it != ck.meta.end()) {
    const std::size_t trained = to_count("data_relations", it->second);
    if (trained != g.num_relations()) {
      throw CheckpointShapeError("checkpoint was trained on " + std::to_string(trained) +
                                 " relations, data has " + std::to_string(g.num_relations()));
    }
  }
  const Ablation ablation = model_config_from(ck).ablation;
  const auto relations = effective_relations(g, ablation);
  const DhmpModel model = restore_model(ck, g.feature_dim(), relations.size());
  const Prediction pred = predict(model, g.features, relations);
  std::cout << metrics_kv(evaluate(pred.probs, g.labels, split_nodes(g, e.split)), e.split);
  if (!e.embeddings.empty()) export_embeddings(pred.embedding, g.labels, e.embeddings);
  return kExitOk;
}

struct GradcheckFlags {
  std::string ablation = "all";
  double eps = 1e-3;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const SharedFlags& f, const GradcheckFlags& gf) {
  const ResolvedConfig rc = resolve(f);
  std::vector<Ablation> variants;
  if (gf.ablation == "all") variants = {Ablation::Full, Ablation::Sep, Ablation::Homo, Ablation::Heter, Ablation::Rel};
  else variants = {parse_ablation(gf.ablation)};

  std::string worst_name;
  double worst = 0.0;
  for (Ablation a : variants) {
    ModelGradCheckOptions opt;
    opt.seed = rc.train.seed;
    opt.probe = gf.eps;
    opt.lambda = rc.train.lambda;
    opt.model = rc.train.model;
    opt.model.ablation = a;
    const GradCheckReport report = model_grad_check(opt);
    for (const auto& p : report.params) {
      std::printf("%-6s %-10s checked=%-3zu kink_skipped=%-2zu max_rel_error=%.3e max_abs_grad=%.3e\n", to_string(a).c_str(), p.name.c_str(), p.checked, p.skipped,
                  p.max_rel_error, p.max_abs_analytic);
      if (p.max_rel_error >= worst) {
        worst = p.max_rel_error;
        worst_name = to_string(a) + "/" + p.name;
      }
    }
  }
  std::printf("worst %s max_rel_error=%.3e tolerance=%.1e\n", worst_name.c_str(), worst, gf.tolerance);
  if (!(worst < gf.tolerance)) {
    throw VerificationFailure("gradient check failed: worst parameter " + worst_name + " relative error " +
                              std::to_string(worst));
  }
  return kExitOk;
}

struct SynthFlags {
  SyntheticSpec spec;
  std::vector<double> degree;
};

int cmd_synth(const SharedFlags& f, SynthFlags& sf) {
  SyntheticSpec spec = sf.spec;
  if (f.seed) spec.seed = *f.seed;
  spec.symmetrize = f.symmetrize;
  if (!sf.degree.empty()) spec.mean_degree = sf.degree;
  const MultiRelationGraph g = generate_synthetic(spec);
  const fs::path dir(f.out);
  const fs::path manifest = write_dataset(g, dir, spec.symmetrize);
  write_splits(g.split, dir / "splits.txt");
  std::ofstream(manifest, std::ios::app) << "splits splits.txt\n";
  std::size_t fraud = 0;
  for (int y : g.labels) fraud += static_cast<std::size_t>(y);
  std::cout << "manifest=" << manifest.string() << "\nnodes=" << g.num_nodes() << "\nfraud=" << fraud
            << "\nrelations=" << g.num_relations() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-channel heterophily-aware message passing for graph fraud detection"};
  app.require_subcommand(1);

  SharedFlags train_flags, eval_flags, grad_flags, synth_flags;
  auto* train = app.add_subcommand("train", "train a model and write log, checkpoint and test metrics");
  add_shared(train, train_flags);

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_shared(eval, eval_flags);
  eval->add_option("--checkpoint", ef.checkpoint, "checkpoint path (default <out>/checkpoint.bin)");
  eval->add_option("--split", ef.split, "train|val|test")->capture_default_str();
  eval->add_option("--export-embeddings", ef.embeddings, "write fused node embeddings as CSV");

  GradcheckFlags gf;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every model parameter");
  add_shared(grad, grad_flags);
  grad->add_option("--variant", gf.ablation, "ablation to check, or all")->capture_default_str();
  grad->add_option("--eps", gf.eps, "finite-difference probe")->capture_default_str();
  grad->add_option("--tolerance", gf.tolerance, "maximum relative error")->capture_default_str();

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "write a synthetic camouflage dataset");
  add_shared(synth, synth_flags);
  synth->add_option("--nodes", sf.spec.num_nodes)->capture_default_str();
  synth->add_option("--fraud-ratio", sf.spec.fraud_ratio)->capture_default_str();
  synth->add_option("--fraud-homophily", sf.spec.fraud_homophily)->capture_default_str();
  synth->add_option("--benign-homophily", sf.spec.benign_homophily)->capture_default_str();
  synth->add_option("--relations", sf.spec.num_relations)->capture_default_str();
  synth->add_option("--degree", sf.degree, "mean out-degree, one value or one per relation (default 10)");
  synth->add_option("--separation", sf.spec.separation)->capture_default_str();
  synth->add_option("--noise", sf.spec.noise)->capture_default_str();
  synth->add_option("--dim", sf.spec.feature_dim)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_flags);
    if (*eval) return cmd_eval(eval_flags, ef);
    if (*grad) {
      // --ablation doubles as the variant selector for gradcheck.
      if (grad_flags.ablation) gf.ablation = *grad_flags.ablation;
      grad_flags.ablation.reset();
      return cmd_gradcheck(grad_flags, gf);
    }
    if (*synth) return cmd_synth(synth_flags, sf);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const VerificationFailure& e) {
    std::cerr << e.what() << '\n';
    return kExitVerification;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
